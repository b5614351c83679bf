//! Deterministic text rendering of certificates and reports: one line per
//! checked condition, naming the condition, the measured residual, the
//! tolerance, and PASS / FAIL / INCONCLUSIVE. Output is stable for a given
//! record, so reports can be diffed across runs.

use std::fmt::Write as _;

use tvcert_core::calibrate::{CalibrationReport, CurvatureCondition, Shape};
use tvcert_core::certify::{Certificate, KktCertificate, Verdict};

pub fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Certified => "certified",
        Verdict::Refuted => "refuted",
        Verdict::Inconclusive => "inconclusive",
    }
}

fn sup_norm_line(out: &mut String, excess: f64, tol: f64) {
    if excess <= tol {
        let _ = writeln!(out, "sup-norm bound: PASS ({excess:?} excess ≤ {tol:?})");
    } else {
        let _ = writeln!(out, "sup-norm bound: FAIL ({excess:?} excess)");
    }
}

fn zero_ext_line(out: &mut String, ok: bool) {
    if ok {
        out.push_str("zero extension: PASS\n");
    } else {
        out.push_str("zero extension: FAIL (nonzero components on edges leaving the mask)\n");
    }
}

fn residual_line(out: &mut String, name: &str, residual: f64, tol: f64) {
    if residual <= tol {
        let _ = writeln!(out, "{name}: PASS (residual {residual:?} ≤ {tol:?})");
    } else {
        let _ = writeln!(out, "{name}: FAIL (residual {residual:?} > {tol:?})");
    }
}

/// The full-trace condition has three outcomes: aligned with a converged
/// Cauchy ladder, misaligned with a converged ladder, or undecidable
/// because the ladder never settled — in which case the last Cauchy gap
/// and the whole ladder are printed.
fn full_trace_lines(
    out: &mut String,
    residual: f64,
    tol: f64,
    converged: bool,
    log: &[(f64, f64)],
    cauchy_tol: f64,
) {
    if converged {
        residual_line(out, "full trace Tg = σ_u", residual, tol);
        return;
    }
    let gap = log.last().map_or(f64::NAN, |&(_, g)| g);
    let _ = writeln!(
        out,
        "full trace Tg = σ_u: INCONCLUSIVE (Cauchy gap {gap:.1e} > {cauchy_tol:e})"
    );
    out.push_str("  mollification ladder (epsilon → Cauchy gap):\n");
    for &(eps, g) in log {
        let _ = writeln!(out, "    {eps:?} → {g:?}");
    }
}

pub fn render_certificate(cert: &Certificate) -> String {
    let tols = &cert.tolerances;
    let mut out = String::new();
    sup_norm_line(&mut out, cert.feasibility, tols.feasibility);
    zero_ext_line(&mut out, cert.zero_ext_ok);
    residual_line(
        &mut out,
        "divergence match u* = −div g",
        cert.div_match,
        tols.divergence,
    );
    residual_line(
        &mut out,
        "integral identity",
        cert.integral_residual,
        tols.integral,
    );
    full_trace_lines(
        &mut out,
        cert.fulltrace_residual,
        tols.full_trace,
        cert.trace_converged,
        &cert.trace_log,
        cert.trace_tol,
    );
    let _ = writeln!(out, "verdict: {}", verdict_name(cert.verdict));
    out
}

pub fn render_kkt(cert: &KktCertificate) -> String {
    let tols = &cert.tolerances;
    let mut out = String::new();
    sup_norm_line(&mut out, cert.feasibility, tols.feasibility);
    zero_ext_line(&mut out, cert.zero_ext_ok);
    let signs = &cert.signs;
    let none_free =
        signs.active_upper.is_empty() && signs.active_lower.is_empty() && signs.interior.is_empty();
    if none_free {
        out.push_str("sign conditions: PASS (every coefficient pinned by a singleton interval)\n");
    } else {
        let worst = signs.worst();
        if worst <= cert.sign_scale {
            let _ = writeln!(
                out,
                "sign conditions: PASS (worst violation {worst:?} ≤ {:?})",
                cert.sign_scale
            );
        } else {
            let _ = writeln!(
                out,
                "sign conditions: FAIL (worst violation {worst:?} > {:?})",
                cert.sign_scale
            );
        }
    }
    residual_line(
        &mut out,
        "integral identity",
        cert.integral_residual,
        tols.integral,
    );
    full_trace_lines(
        &mut out,
        cert.fulltrace_residual,
        tols.full_trace,
        cert.trace_converged,
        &cert.trace_log,
        cert.trace_tol,
    );
    let _ = writeln!(out, "verdict: {}", verdict_name(cert.verdict));
    out
}

fn shape_summary(shape: &Shape) -> String {
    serde_json::to_string(shape).unwrap_or_else(|_| format!("{shape:?}"))
}

pub fn render_calibration(report: &CalibrationReport) -> String {
    let tols = &report.tolerances;
    let mut out = String::new();
    let _ = writeln!(out, "shape: {}", shape_summary(&report.shape));
    let off = (report.lambda_h / report.lambda - 1.0) * 100.0;
    let _ = writeln!(
        out,
        "cheeger ratio λ_G = P/|G|: {:?} (discrete λ_h {:?}, off by {off:.2}%)",
        report.lambda, report.lambda_h
    );
    let curvature = match report.curvature {
        CurvatureCondition::Holds => "holds",
        CurvatureCondition::Fails => "fails",
        CurvatureCondition::Undefined => "undefined (boundary not C^{1,1})",
    };
    let _ = writeln!(out, "curvature condition sup κ ≤ λ_G: {curvature}");
    sup_norm_line(&mut out, report.feasibility, tols.feasibility);
    zero_ext_line(&mut out, report.zero_ext_ok);
    let id = &report.identity;
    if id.residual <= tols.full_trace {
        let _ = writeln!(
            out,
            "divergence identity −div ξ = λ_G χ: PASS (residual {:?} ≤ {:?}; exterior max {:?})",
            id.residual, tols.full_trace, id.exterior_div_max
        );
    } else {
        let _ = writeln!(
            out,
            "divergence identity −div ξ = λ_G χ: FAIL (residual {:?} > {:?})",
            id.residual, tols.full_trace
        );
    }
    let cauchy = if report.trace_converged {
        "converged"
    } else {
        "not converged"
    };
    if report.trace_alignment_error <= tols.full_trace {
        let _ = writeln!(
            out,
            "trace alignment Tξ·ν = 1: PASS (error {:?} ≤ {:?}; Cauchy: {cauchy})",
            report.trace_alignment_error, tols.full_trace
        );
    } else {
        let _ = writeln!(
            out,
            "trace alignment Tξ·ν = 1: FAIL (error {:?} > {:?}; Cauchy: {cauchy})",
            report.trace_alignment_error, tols.full_trace
        );
    }
    let analytic = match report.analytic_calibrable {
        Some(true) => "calibrable",
        Some(false) => "not calibrable",
        None => "undecided (curvature condition undefined)",
    };
    let _ = writeln!(out, "analytic: {analytic}");
    let _ = writeln!(
        out,
        "numerical: {}",
        if report.numerically_calibrable {
            "calibrable"
        } else {
            "not calibrable"
        }
    );
    let agreement = match report.agreement {
        Some(true) => "yes",
        Some(false) => "no",
        None => "n/a",
    };
    let _ = writeln!(out, "agreement: {agreement}");
    out
}
