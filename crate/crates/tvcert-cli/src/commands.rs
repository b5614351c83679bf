//! Subcommand implementations: argument structs, file plumbing, and the
//! triage tying verdicts to exit codes.

use clap::Args;
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use tvcert_core::calibrate::{
    calibrability_verdict_for, calibration_field, CalibrationReport, Shape,
};
use tvcert_core::certify::{
    certify, certify_interval_constrained, certify_with_floor, solve_rof, subgradient_oracle,
    Tolerances, Verdict,
};
use tvcert_core::dct::{BlockDct8, IdentityBasis};
use tvcert_core::dual::{mollify_boundary_aware, MollifierSpec};
use tvcert_core::flow::run_flow;
use tvcert_core::grid::{
    discrete_divergence, discrete_tv, l2_norm, GridDomain, ScalarField, VectorField,
};
use tvcert_core::io::{read_field_file, scalar_to_raw, vector_to_raw, write_field_file};

use crate::report;
use crate::{Failure, ReportFormat, RunConfig};

fn config_err(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<f64, Failure> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(config_err(format!(
            "--{name} must be positive and finite, got {v}"
        )))
    }
}

/// Default spacing embeds the longer grid side at unit length.
fn default_spacing(height: usize, width: usize) -> f64 {
    1.0 / height.max(width) as f64
}

fn domain_for(
    height: usize,
    width: usize,
    h: Option<f64>,
    mask: Option<&Path>,
) -> Result<Arc<GridDomain>, Failure> {
    let spacing = match h {
        Some(v) => positive("h", v)?,
        None => default_spacing(height, width),
    };
    let mask_vec = match mask {
        None => vec![true; height * width],
        Some(path) => {
            let raw = read_field_file(path)?;
            if raw.channels != 1 || raw.height != height || raw.width != width {
                return Err(config_err(format!(
                    "mask {}x{} ({} channels) does not match the {height}x{width} input",
                    raw.height, raw.width, raw.channels
                )));
            }
            raw.data.iter().map(|&v| v > 0.5).collect()
        }
    };
    Ok(GridDomain::new(height, width, spacing, mask_vec)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Prints the text or JSON form of a report; the CSV form only exists for
/// flow runs, which handle it themselves.
fn emit<T: Serialize>(
    config: &RunConfig,
    text: impl FnOnce() -> String,
    json: &T,
) -> Result<(), Failure> {
    match config.report {
        ReportFormat::Text => print!("{}", text()),
        ReportFormat::Json => println!("{}", serde_json::to_string_pretty(json)?),
        ReportFormat::Csv => {
            return Err(config_err("`--report csv` is only available for `flow`"))
        }
    }
    Ok(())
}

fn exit_for(verdict: Verdict) -> u8 {
    match verdict {
        Verdict::Certified => 0,
        Verdict::Refuted => 2,
        Verdict::Inconclusive => 3,
    }
}

fn tolerances_for(domain: &GridDomain, tol_trace: Option<f64>) -> Result<Tolerances, Failure> {
    let mut tols = Tolerances::for_spacing(domain.spacing());
    if let Some(t) = tol_trace {
        tols.full_trace = positive("tol-trace", t)?;
    }
    Ok(tols)
}

/// max − min over mask pixels; 0 on an all-masked (impossible) or
/// constant field.
fn amplitude(u: &ScalarField) -> f64 {
    let d = u.domain();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (k, &v) in u.values().iter().enumerate() {
        if d.mask()[k] {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

fn negated_divergence(g: &VectorField) -> Result<ScalarField, Failure> {
    let div = discrete_divergence(g);
    Ok(ScalarField::new(
        g.domain().clone(),
        div.values().iter().map(|v| -v).collect(),
    )?)
}

// ---------------------------------------------------------------- denoise

#[derive(Args, Debug)]
pub struct DenoiseArgs {
    /// Input datum, FLD or PGM.
    #[arg(long)]
    input: PathBuf,
    /// Fidelity weight λ in min over u of TV(u) + λ‖u − u0‖².
    #[arg(long, allow_negative_numbers = true)]
    lambda: f64,
    /// Where to write the minimizer (FLD).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Where to write the dual field (two-channel FLD).
    #[arg(long)]
    dual: Option<PathBuf>,
    /// Where to write the certificate (JSON).
    #[arg(long)]
    certificate: Option<PathBuf>,
    /// Grid spacing; defaults to 1/max(H, W).
    #[arg(long, allow_negative_numbers = true)]
    h: Option<f64>,
    /// Mask image, nonzero = inside; defaults to the full rectangle.
    /// Certification needs the full rectangle (the automatic mollifier
    /// charts only cover that case).
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Duality-gap stopping tolerance, relative to max(1, TV).
    #[arg(long, default_value_t = 1e-8, allow_negative_numbers = true)]
    tol_gap: f64,
    /// Solver iteration cap.
    #[arg(long, default_value_t = 500_000)]
    max_iter: usize,
    /// Override for the full-trace alignment tolerance.
    #[arg(long, allow_negative_numbers = true)]
    tol_trace: Option<f64>,
    /// Zero-gradient floor for the gradient measure and region split.
    #[arg(long, allow_negative_numbers = true)]
    eps0: Option<f64>,
}

impl DenoiseArgs {
    pub fn run(&self, config: &RunConfig) -> Result<u8, Failure> {
        positive("lambda", self.lambda)?;
        positive("tol-gap", self.tol_gap)?;
        let raw = read_field_file(&self.input)?;
        let domain = domain_for(raw.height, raw.width, self.h, self.mask.as_deref())?;
        let u0 = raw.into_scalar(domain.clone())?;

        let solved = solve_rof(&u0, self.lambda, self.tol_gap, self.max_iter)?;
        // The optimality condition of the quadratic fidelity: 2λ(u0 − u)
        // is the subgradient the dual field witnesses.
        let u_star = ScalarField::new(
            domain.clone(),
            u0.values()
                .iter()
                .zip(solved.u.values())
                .map(|(a, b)| 2.0 * self.lambda * (a - b))
                .collect(),
        )?;
        let moll = MollifierSpec::default_for_rectangle(&domain)?;
        let tols = tolerances_for(&domain, self.tol_trace)?;
        let cert = match self.eps0 {
            Some(e) => {
                let floor = positive("eps0", e)?;
                certify_with_floor(&solved.u, &u_star, &solved.g, &moll, tols, floor)?
            }
            None => certify(&solved.u, &u_star, &solved.g, &moll, tols)?,
        };

        if let Some(p) = &self.output {
            write_field_file(p, &scalar_to_raw(&solved.u))?;
        }
        if let Some(p) = &self.dual {
            write_field_file(p, &vector_to_raw(&solved.g))?;
        }
        if let Some(p) = &self.certificate {
            write_json(p, &cert)?;
        }
        emit(
            config,
            || {
                format!(
                    "solver: gap {:?} after {} iterations\n{}",
                    solved.gap,
                    solved.iterations,
                    report::render_certificate(&cert)
                )
            },
            &cert,
        )?;
        Ok(exit_for(cert.verdict))
    }
}

// ---------------------------------------------------------------- certify

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BasisKind {
    /// Orthonormal blockwise 8×8 DCT-II (dimensions must be multiples of 8).
    Dct8,
    /// Pixel basis: intervals constrain the pixels themselves.
    Identity,
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    /// The function u whose subdifferential is claimed (FLD/PGM).
    #[arg(long)]
    input: PathBuf,
    /// Claimed subgradient u* (FLD). Exactly one of --ustar / --intervals.
    #[arg(long)]
    ustar: Option<PathBuf>,
    /// Dual witness field g (two-channel FLD).
    #[arg(long)]
    dual: PathBuf,
    /// JSON array of per-pixel [lower, upper] transform intervals,
    /// row-major; switches to interval-certificate verification.
    #[arg(long)]
    intervals: Option<PathBuf>,
    /// Transform behind --intervals.
    #[arg(long, value_enum, default_value_t = BasisKind::Dct8)]
    basis: BasisKind,
    /// Grid spacing; defaults to 1/max(H, W).
    #[arg(long, allow_negative_numbers = true)]
    h: Option<f64>,
    /// Mask image, nonzero = inside.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Where to write the certificate document (JSON).
    #[arg(long)]
    certificate: Option<PathBuf>,
    /// Override for the full-trace alignment tolerance.
    #[arg(long, allow_negative_numbers = true)]
    tol_trace: Option<f64>,
    /// Zero-gradient floor for the gradient measure and region split
    /// (subgradient-pair mode only).
    #[arg(long, allow_negative_numbers = true)]
    eps0: Option<f64>,
}

impl CertifyArgs {
    pub fn run(&self, config: &RunConfig) -> Result<u8, Failure> {
        let raw = read_field_file(&self.input)?;
        let domain = domain_for(raw.height, raw.width, self.h, self.mask.as_deref())?;
        let u = raw.into_scalar(domain.clone())?;
        let g = read_field_file(&self.dual)?.into_vector(domain.clone())?;
        let moll = MollifierSpec::default_for_rectangle(&domain)?;
        let tols = tolerances_for(&domain, self.tol_trace)?;

        match (&self.ustar, &self.intervals) {
            (Some(ustar), None) => {
                let u_star = read_field_file(ustar)?.into_scalar(domain.clone())?;
                let cert = match self.eps0 {
                    Some(e) => {
                        let floor = positive("eps0", e)?;
                        certify_with_floor(&u, &u_star, &g, &moll, tols, floor)?
                    }
                    None => certify(&u, &u_star, &g, &moll, tols)?,
                };
                if let Some(p) = &self.certificate {
                    write_json(p, &cert)?;
                }
                emit(config, || report::render_certificate(&cert), &cert)?;
                Ok(exit_for(cert.verdict))
            }
            (None, Some(intervals_path)) => {
                if self.eps0.is_some() {
                    return Err(config_err(
                        "--eps0 only applies to subgradient-pair certification",
                    ));
                }
                let intervals: Vec<(f64, f64)> =
                    serde_json::from_str(&fs::read_to_string(intervals_path)?)?;
                let cert = match self.basis {
                    BasisKind::Dct8 => {
                        let basis = BlockDct8::new(domain.clone())?;
                        certify_interval_constrained(&u, &basis, &intervals, &g, &moll, tols)?
                    }
                    BasisKind::Identity => {
                        let basis = IdentityBasis::new(domain.clone());
                        certify_interval_constrained(&u, &basis, &intervals, &g, &moll, tols)?
                    }
                };
                if let Some(p) = &self.certificate {
                    write_json(p, &cert)?;
                }
                emit(config, || report::render_kkt(&cert), &cert)?;
                Ok(exit_for(cert.verdict))
            }
            _ => Err(config_err(
                "pass exactly one of --ustar (subgradient pair) or --intervals (transform certificate)",
            )),
        }
    }
}

// ------------------------------------------------------------------- flow

#[derive(Serialize)]
struct StepCheck {
    step: usize,
    verdict: Verdict,
    feasibility: f64,
    div_match: f64,
    integral_residual: f64,
    fulltrace_residual: f64,
    trace_converged: bool,
}

#[derive(Serialize)]
struct FlowSummary {
    spacing: f64,
    tau: f64,
    steps_requested: usize,
    steps_taken: usize,
    /// Times of all recorded states, starting at 0.
    times: Vec<f64>,
    /// TV of every recorded state.
    tv: Vec<f64>,
    /// max − min over the mask of every recorded state.
    amplitudes: Vec<f64>,
    /// ‖(u_k − u_{k+1})/τ‖ per step — the minimal-section norm estimate.
    minimal_section_norms: Vec<f64>,
    extinction_time: Option<f64>,
    snapshots: Vec<String>,
    step_checks: Option<Vec<StepCheck>>,
}

#[derive(Args, Debug)]
pub struct FlowArgs {
    /// Initial datum, FLD or PGM.
    #[arg(long)]
    input: PathBuf,
    /// Step size of the minimizing-movements scheme.
    #[arg(long, allow_negative_numbers = true)]
    tau: f64,
    /// Number of steps.
    #[arg(long)]
    steps: usize,
    /// Grid spacing; defaults to 1/max(H, W).
    #[arg(long, allow_negative_numbers = true)]
    h: Option<f64>,
    /// Mask image, nonzero = inside.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Duality-gap tolerance of the per-step solves.
    #[arg(long, default_value_t = 1e-9, allow_negative_numbers = true)]
    tol_gap: f64,
    /// Certify every step: the pair (u_{k+1}, −div g_k) with witness g_k.
    #[arg(long)]
    certify_steps: bool,
    /// Directory for flow.csv, flow.json, and per-state FLD snapshots.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override for the full-trace alignment tolerance of --certify-steps.
    #[arg(long, allow_negative_numbers = true)]
    tol_trace: Option<f64>,
}

impl FlowArgs {
    pub fn run(&self, config: &RunConfig) -> Result<u8, Failure> {
        positive("tau", self.tau)?;
        positive("tol-gap", self.tol_gap)?;
        if self.steps == 0 {
            return Err(config_err("--steps must be at least 1"));
        }
        let raw = read_field_file(&self.input)?;
        let domain = domain_for(raw.height, raw.width, self.h, self.mask.as_deref())?;
        let u0 = raw.into_scalar(domain.clone())?;

        let schedule = vec![self.tau; self.steps];
        let traj = run_flow(&u0, &schedule, self.tol_gap)?;
        let steps_taken = traj.states.len() - 1;
        let tv: Vec<f64> = traj.states.iter().map(discrete_tv).collect();
        let amplitudes: Vec<f64> = traj.states.iter().map(amplitude).collect();

        let step_checks = if self.certify_steps {
            let moll = MollifierSpec::default_for_rectangle(&domain)?;
            let tols = tolerances_for(&domain, self.tol_trace)?;
            let mut checks = Vec::with_capacity(steps_taken);
            for k in 0..steps_taken {
                let u_star = negated_divergence(&traj.duals[k])?;
                let cert = certify(&traj.states[k + 1], &u_star, &traj.duals[k], &moll, tols)?;
                checks.push(StepCheck {
                    step: k + 1,
                    verdict: cert.verdict,
                    feasibility: cert.feasibility,
                    div_match: cert.div_match,
                    integral_residual: cert.integral_residual,
                    fulltrace_residual: cert.fulltrace_residual,
                    trace_converged: cert.trace_converged,
                });
            }
            Some(checks)
        } else {
            None
        };

        let mut csv = String::from(if step_checks.is_some() {
            "step,time,tv,section_norm,amplitude,verdict\n"
        } else {
            "step,time,tv,section_norm,amplitude\n"
        });
        for k in 1..=steps_taken {
            let _ = write!(
                csv,
                "{k},{:?},{:?},{:?},{:?}",
                traj.times[k],
                tv[k],
                traj.minimal_section_norms[k - 1],
                amplitudes[k]
            );
            if let Some(checks) = &step_checks {
                let _ = write!(csv, ",{}", report::verdict_name(checks[k - 1].verdict));
            }
            csv.push('\n');
        }

        let mut snapshots = Vec::new();
        if let Some(dir) = &self.output_dir {
            fs::create_dir_all(dir)?;
            for (k, state) in traj.states.iter().enumerate() {
                let name = format!("state_{k:04}.fld");
                write_field_file(&dir.join(&name), &scalar_to_raw(state))?;
                snapshots.push(name);
            }
            fs::write(dir.join("flow.csv"), &csv)?;
        }

        let summary = FlowSummary {
            spacing: domain.spacing(),
            tau: self.tau,
            steps_requested: self.steps,
            steps_taken,
            times: traj.times,
            tv,
            amplitudes,
            minimal_section_norms: traj.minimal_section_norms,
            extinction_time: traj.extinction_time,
            snapshots,
            step_checks,
        };
        if let Some(dir) = &self.output_dir {
            write_json(&dir.join("flow.json"), &summary)?;
        }

        match config.report {
            ReportFormat::Csv => print!("{csv}"),
            ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&summary)?),
            ReportFormat::Text => print!("{}", render_flow_text(&summary)),
        }

        // Refuted steps dominate inconclusive ones, which dominate clean runs.
        let code = summary
            .step_checks
            .iter()
            .flatten()
            .map(|c| exit_for(c.verdict))
            .fold(0u8, |acc, c| match (acc, c) {
                (2, _) | (_, 2) => 2,
                (3, _) | (_, 3) => 3,
                _ => 0,
            });
        Ok(code)
    }
}

fn render_flow_text(s: &FlowSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "steps: {} of {} (tau {:?}), final t {:?}",
        s.steps_taken,
        s.steps_requested,
        s.tau,
        s.times.last().unwrap_or(&0.0)
    );
    let _ = writeln!(
        out,
        "TV: {:?} → {:?}",
        s.tv.first().unwrap_or(&0.0),
        s.tv.last().unwrap_or(&0.0)
    );
    let _ = writeln!(
        out,
        "amplitude: {:?} → {:?}",
        s.amplitudes.first().unwrap_or(&0.0),
        s.amplitudes.last().unwrap_or(&0.0)
    );
    if let (Some(first), Some(last)) = (
        s.minimal_section_norms.first(),
        s.minimal_section_norms.last(),
    ) {
        let worst_rise = s
            .minimal_section_norms
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0f64, f64::max)
            .max(0.0);
        let _ = writeln!(
            out,
            "minimal-section norms: {first:?} → {last:?} (largest increase {worst_rise:?})"
        );
    }
    match s.extinction_time {
        Some(t) => {
            let _ = writeln!(out, "extinction: t = {t:?}");
        }
        None => out.push_str("extinction: not reached\n"),
    }
    if let Some(checks) = &s.step_checks {
        let certified = checks
            .iter()
            .filter(|c| c.verdict == Verdict::Certified)
            .count();
        let refuted = checks
            .iter()
            .filter(|c| c.verdict == Verdict::Refuted)
            .count();
        let _ = writeln!(
            out,
            "step certificates: {certified} certified, {refuted} refuted, {} inconclusive",
            checks.len() - certified - refuted
        );
    }
    out
}

// -------------------------------------------------------------- calibrate

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// Built-in shape kind; `disc` (polygons and stadiums via --shape-file).
    #[arg(long)]
    shape: Option<String>,
    /// Disc radius, with --shape disc.
    #[arg(long, allow_negative_numbers = true)]
    radius: Option<f64>,
    /// Disc center "x,y"; defaults to the domain center.
    #[arg(long)]
    center: Option<String>,
    /// JSON shape file, e.g. {"kind":"disc","center":[0.5,0.5],"radius":0.3}.
    #[arg(long)]
    shape_file: Option<PathBuf>,
    /// Grid size, N or HxW.
    #[arg(long, default_value = "256")]
    grid: String,
    /// Grid spacing; defaults to 1/max(H, W).
    #[arg(long, allow_negative_numbers = true)]
    h: Option<f64>,
    /// Where to write the report (JSON).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Where to write the witness field ξ (two-channel FLD).
    #[arg(long)]
    field: Option<PathBuf>,
    /// Override for the divergence-identity and trace tolerances.
    #[arg(long, allow_negative_numbers = true)]
    tol_trace: Option<f64>,
}

impl CalibrateArgs {
    pub fn run(&self, config: &RunConfig) -> Result<u8, Failure> {
        let (height, width) = parse_grid(&self.grid)?;
        let spacing = match self.h {
            Some(v) => positive("h", v)?,
            None => default_spacing(height, width),
        };
        let domain = GridDomain::full(height, width, spacing)?;
        let shape = self.build_shape(&domain)?;
        let tols = tolerances_for(&domain, self.tol_trace)?;

        let xi = calibration_field(&shape, &domain)?;
        let report = calibrability_verdict_for(&shape, &domain, tols, &xi)?;

        if let Some(p) = &self.field {
            write_field_file(p, &vector_to_raw(&xi))?;
        }
        if let Some(p) = &self.output {
            write_json(p, &report)?;
        }
        emit(config, || report::render_calibration(&report), &report)?;
        Ok(calibrate_exit(&report))
    }

    fn build_shape(&self, domain: &GridDomain) -> Result<Shape, Failure> {
        match (&self.shape, &self.shape_file) {
            (Some(kind), None) => {
                if kind != "disc" {
                    return Err(config_err(format!(
                        "unknown --shape {kind:?}; inline flags cover `disc`, \
                         use --shape-file for polygons and stadiums"
                    )));
                }
                let radius = self
                    .radius
                    .ok_or_else(|| config_err("--shape disc needs --radius"))?;
                let center = match &self.center {
                    Some(text) => parse_point(text)?,
                    None => [
                        0.5 * domain.width() as f64 * domain.spacing(),
                        0.5 * domain.height() as f64 * domain.spacing(),
                    ],
                };
                Ok(Shape::Disc { center, radius })
            }
            (None, Some(path)) => {
                if self.radius.is_some() || self.center.is_some() {
                    return Err(config_err(
                        "--radius/--center only apply to --shape disc",
                    ));
                }
                Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
            }
            _ => Err(config_err("pass exactly one of --shape / --shape-file")),
        }
    }
}

/// A failing trace alignment whose Cauchy ladder never settled is the one
/// outcome the grid cannot decide; everything else failing is a refutation.
fn calibrate_exit(report: &CalibrationReport) -> u8 {
    if report.numerically_calibrable {
        return 0;
    }
    let tols = &report.tolerances;
    let alignment_is_lone_failure = report.feasibility <= tols.feasibility
        && report.zero_ext_ok
        && report.identity.residual <= tols.full_trace;
    if alignment_is_lone_failure && !report.trace_converged {
        3
    } else {
        2
    }
}

fn parse_grid(text: &str) -> Result<(usize, usize), Failure> {
    let parse_dim = |s: &str| s.trim().parse::<usize>().ok().filter(|&n| n > 0);
    let dims = match text.split_once(['x', 'X']) {
        Some((a, b)) => (parse_dim(a), parse_dim(b)),
        None => {
            let n = parse_dim(text);
            (n, n)
        }
    };
    match dims {
        (Some(h), Some(w)) => Ok((h, w)),
        _ => Err(config_err(format!("--grid expects N or HxW, got {text:?}"))),
    }
}

fn parse_point(text: &str) -> Result<[f64; 2], Failure> {
    let mut parts = text.split(',').map(|s| s.trim().parse::<f64>());
    match (parts.next(), parts.next(), parts.next()) {
        (Some(Ok(x)), Some(Ok(y)), None) if x.is_finite() && y.is_finite() => Ok([x, y]),
        _ => Err(config_err(format!("--center expects \"x,y\", got {text:?}"))),
    }
}

// ---------------------------------------------------------------- mollify

#[derive(Serialize)]
struct MollifySummary {
    epsilon: f64,
    sup_norm_before: f64,
    sup_norm_after: f64,
    divergence_l2_before: f64,
    divergence_l2_after: f64,
}

#[derive(Args, Debug)]
pub struct MollifyArgs {
    /// Dual field to smooth (two-channel FLD).
    #[arg(long)]
    input: PathBuf,
    /// Mollification scale, in the same length units as the spacing.
    #[arg(long, allow_negative_numbers = true)]
    epsilon: f64,
    /// Where to write the smoothed field (two-channel FLD).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Grid spacing; defaults to 1/max(H, W).
    #[arg(long, allow_negative_numbers = true)]
    h: Option<f64>,
}

impl MollifyArgs {
    pub fn run(&self, config: &RunConfig) -> Result<u8, Failure> {
        positive("epsilon", self.epsilon)?;
        let raw = read_field_file(&self.input)?;
        let domain = domain_for(raw.height, raw.width, self.h, None)?;
        let g = raw.into_vector(domain.clone())?;

        let spec = MollifierSpec::for_rectangle(&domain, self.epsilon)?;
        let smoothed = mollify_boundary_aware(&g, &spec)?;
        let summary = MollifySummary {
            epsilon: self.epsilon,
            sup_norm_before: g.sup_norm(),
            sup_norm_after: smoothed.sup_norm(),
            divergence_l2_before: l2_norm(&discrete_divergence(&g)),
            divergence_l2_after: l2_norm(&discrete_divergence(&smoothed)),
        };

        if let Some(p) = &self.output {
            write_field_file(p, &vector_to_raw(&smoothed))?;
        }
        emit(
            config,
            || {
                format!(
                    "epsilon: {:?}\nsup-norm: {:?} → {:?} (non-expansive: {})\ndivergence L2: {:?} → {:?}\n",
                    summary.epsilon,
                    summary.sup_norm_before,
                    summary.sup_norm_after,
                    if summary.sup_norm_after <= summary.sup_norm_before + 1e-12 {
                        "yes"
                    } else {
                        "no"
                    },
                    summary.divergence_l2_before,
                    summary.divergence_l2_after,
                )
            },
            &summary,
        )?;
        Ok(0)
    }
}

// ----------------------------------------------------------------- oracle

#[derive(Serialize)]
struct OracleSummary {
    samples: usize,
    seed: u64,
    worst_violation: f64,
    /// max(1, TV(u)) — the scale the tolerance multiplies.
    scale: f64,
    tol: f64,
    bound: f64,
    pass: bool,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    /// The function u of the claimed pair (FLD/PGM).
    #[arg(long)]
    input: PathBuf,
    /// Claimed subgradient u* (FLD).
    #[arg(long)]
    ustar: PathBuf,
    /// Number of sampled test functions.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Violation tolerance, relative to max(1, TV(u)).
    #[arg(long, default_value_t = 1e-8, allow_negative_numbers = true)]
    tol: f64,
    /// Grid spacing; defaults to 1/max(H, W).
    #[arg(long, allow_negative_numbers = true)]
    h: Option<f64>,
    /// Mask image, nonzero = inside.
    #[arg(long)]
    mask: Option<PathBuf>,
}

impl OracleArgs {
    pub fn run(&self, config: &RunConfig) -> Result<u8, Failure> {
        positive("tol", self.tol)?;
        let raw = read_field_file(&self.input)?;
        let domain = domain_for(raw.height, raw.width, self.h, self.mask.as_deref())?;
        let u = raw.into_scalar(domain.clone())?;
        let u_star = read_field_file(&self.ustar)?.into_scalar(domain.clone())?;

        let worst = subgradient_oracle(&u, &u_star, self.samples, config.seed)?;
        let scale = discrete_tv(&u).max(1.0);
        let bound = self.tol * scale;
        let pass = worst <= bound;
        let summary = OracleSummary {
            samples: self.samples,
            seed: config.seed,
            worst_violation: worst,
            scale,
            tol: self.tol,
            bound,
            pass,
        };
        emit(
            config,
            || {
                format!(
                    "subgradient oracle: {} (worst violation {:?} {} {:?} = {:?} × max(1, TV))\n",
                    if pass { "PASS" } else { "FAIL" },
                    worst,
                    if pass { "≤" } else { ">" },
                    bound,
                    self.tol,
                )
            },
            &summary,
        )?;
        Ok(if pass { 0 } else { 2 })
    }
}
