//! Acceptance gate for the toolkit. Each criterion is one test printing a
//! single `criterion NN …: PASS — …` line (visible with `--nocapture`)
//! with the measured quantities and elapsed time; the asserts pin the
//! tolerances and the runtime budget. Failing any assert fails the gate —
//! tolerances here are contractual, not tunable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use tvcert_core::calibrate::{
    calibrability_verdict, calibration_field, calibration_identity, cheeger_ratio,
    discrete_cheeger_ratio, rasterize, Shape,
};
use tvcert_core::certify::{
    certify, certify_interval_constrained, solve_rof, solve_rof_warm, subgradient_oracle,
    Tolerances, Verdict,
};
use tvcert_core::dct::{BlockDct8, OrthonormalBasis};
use tvcert_core::dual::{mollify_boundary_aware, MollifierSpec};
use tvcert_core::flow::run_flow;
use tvcert_core::grid::{
    default_eps_zero, discrete_divergence, discrete_gradient, discrete_tv, field_inner,
    gradient_measure, is_zero_extension_compatible, l2_norm, scalar_inner, GridDomain,
    ScalarField, VectorField,
};
use tvcert_core::io::{scalar_to_raw, vector_to_raw, write_field_file};
use tvcert_core::trace::full_trace;

fn pass(number: u8, name: &str, detail: &str, t0: Instant, budget_s: f64) {
    let dt = t0.elapsed().as_secs_f64();
    println!("criterion {number:02} ({name}): PASS — {detail} ({dt:.2} s)");
    assert!(
        dt < budget_s,
        "criterion {number:02} exceeded its {budget_s} s budget: {dt:.2} s"
    );
}

fn random_scalar(domain: &Arc<GridDomain>, rng: &mut ChaCha8Rng) -> ScalarField {
    ScalarField::from_fn(domain.clone(), |_, _| rng.gen_range(-1.0..1.0)).unwrap()
}

fn random_unit_ball_field(domain: &Arc<GridDomain>, rng: &mut ChaCha8Rng) -> VectorField {
    VectorField::from_fn(domain.clone(), |_, _| {
        let r = rng.gen_range(0.0..1.0);
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        (r * phi.cos(), r * phi.sin())
    })
    .unwrap()
}

fn disc(radius: f64) -> Shape {
    Shape::Disc {
        center: [0.5, 0.5],
        radius,
    }
}

fn amplitude(u: &ScalarField) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (k, &m) in u.domain().mask().iter().enumerate() {
        if m {
            lo = lo.min(u.values()[k]);
            hi = hi.max(u.values()[k]);
        }
    }
    hi - lo
}

// ----------------------------------------------------------------------
// 1. The discrete gradient and divergence are negative adjoints.

#[test]
fn criterion_01_gradient_divergence_adjointness() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc_01);
    let mut worst: f64 = 0.0;
    for n in [8usize, 16] {
        let full = GridDomain::full(n, n, 1.0 / n as f64).unwrap();
        // Half the pairs on the full rectangle, half on a notched mask.
        let mut mask = vec![true; n * n];
        for i in 0..n / 4 {
            for j in 0..n / 4 {
                mask[i * n + j] = false;
            }
        }
        let notched = GridDomain::new(n, n, 1.0 / n as f64, mask).unwrap();
        for k in 0..100 {
            let d = if k % 2 == 0 { &full } else { &notched };
            let u = random_scalar(d, &mut rng);
            let g = random_unit_ball_field(d, &mut rng);
            let defect = (field_inner(&discrete_gradient(&u), &g)
                + scalar_inner(&u, &discrete_divergence(&g)))
            .abs();
            let scale = l2_norm(&u) * field_inner(&g, &g).sqrt();
            assert!(
                defect <= 1e-10 * scale,
                "adjointness defect {defect:e} > 1e-10 × {scale:e} at {n}×{n}"
            );
            if scale > 0.0 {
                worst = worst.max(defect / scale);
            }
        }
    }
    pass(
        1,
        "gradient/divergence adjointness",
        &format!("200 pairs at 8×8 and 16×16, worst relative defect {worst:.2e} ≤ 1e-10"),
        t0,
        1.0,
    );
}

// ----------------------------------------------------------------------
// 2. TV equals its dual characterization: the maximum of ⟨g, ∇u⟩ over
//    compatible fields with pointwise |g| ≤ 1, certified by the duality gap.

#[test]
fn criterion_02_dual_definition_of_tv() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc_02);
    let domain = GridDomain::full(4, 4, 0.25).unwrap();
    let mut worst_rel: f64 = 0.0;
    for _ in 0..20 {
        let u = random_scalar(&domain, &mut rng);
        let grad = discrete_gradient(&u);
        let tv = discrete_tv(&u);
        assert!(tv > 0.0, "a random 4×4 field has nonzero TV");

        // Projected gradient ascent on the linear objective ⟨g, ∇u⟩ with
        // doubling steps; each iterate is feasible, so ⟨g, ∇u⟩ is a valid
        // lower bound and tv − ⟨g, ∇u⟩ ≥ 0 is a duality-gap certificate.
        let mut gx = vec![0.0f64; domain.len()];
        let mut gy = vec![0.0f64; domain.len()];
        let mut g = VectorField::zeros(domain.clone());
        let mut step = 1.0;
        for _ in 0..80 {
            for k in 0..gx.len() {
                let ax = gx[k] + step * grad.x()[k];
                let ay = gy[k] + step * grad.y()[k];
                let norm = ax.hypot(ay);
                let scale = if norm > 1.0 { 1.0 / norm } else { 1.0 };
                gx[k] = ax * scale;
                gy[k] = ay * scale;
            }
            step *= 2.0;
            g = VectorField::new(domain.clone(), gx.clone(), gy.clone()).unwrap();
            if tv - field_inner(&g, &grad) <= 1e-6 * tv {
                break;
            }
        }
        let gap = tv - field_inner(&g, &grad);
        assert!(is_zero_extension_compatible(&g), "ascent stays compatible");
        assert!(
            gap.abs() <= 1e-6 * tv,
            "dual maximization missed TV: gap {gap:e} > 1e-6 × {tv:e}"
        );
        worst_rel = worst_rel.max(gap.abs() / tv);
    }
    pass(
        2,
        "dual definition of TV",
        &format!("20 fields at 4×4, worst certified relative gap {worst_rel:.2e} ≤ 1e-6"),
        t0,
        30.0,
    );
}

// ----------------------------------------------------------------------
// 3. ROF solves self-certify and survive the sampling oracle.

#[test]
fn criterion_03_rof_certification() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc_03);
    let domain = GridDomain::full(16, 16, 1.0 / 16.0).unwrap();
    let moll = MollifierSpec::default_for_rectangle(&domain).unwrap();
    let tols = Tolerances::for_spacing(domain.spacing());
    let mut worst_oracle: f64 = 0.0;
    for case in 0..20u64 {
        let u0 = random_scalar(&domain, &mut rng);
        for &lambda in &[0.5, 1.0, 2.0] {
            let solved = solve_rof(&u0, lambda, 1e-8, 500_000).unwrap();
            let u_star = ScalarField::new(
                domain.clone(),
                u0.values()
                    .iter()
                    .zip(solved.u.values())
                    .map(|(a, b)| 2.0 * lambda * (a - b))
                    .collect(),
            )
            .unwrap();
            let cert = certify(&solved.u, &u_star, &solved.g, &moll, tols).unwrap();
            assert_eq!(
                cert.verdict,
                Verdict::Certified,
                "case {case} λ={lambda}: {cert:?}"
            );
            let worst = subgradient_oracle(&solved.u, &u_star, 1000, 7 * case + 1).unwrap();
            let scale = discrete_tv(&solved.u).max(1.0);
            assert!(
                worst <= 1e-8 * scale,
                "case {case} λ={lambda}: oracle violation {worst:e} > 1e-8 × {scale:e}"
            );
            worst_oracle = worst_oracle.max(worst / scale);
        }
    }
    pass(
        3,
        "ROF certification",
        &format!(
            "60 solves at 16×16 (λ ∈ {{0.5, 1, 2}}, gap ≤ 1e-8) all certified; \
             worst oracle violation {worst_oracle:.2e} ≤ 1e-8 over 1000 samples each"
        ),
        t0,
        60.0,
    );
}

// ----------------------------------------------------------------------
// 4. The integral identity and the pointwise full-trace condition certify
//    together on the disc, and both residuals shrink under refinement.

fn disc_certificate(n: usize, tol_gap: f64) -> (f64, f64) {
    let domain = GridDomain::full(n, n, 1.0 / n as f64).unwrap();
    let shape = disc(0.3);
    let chi = rasterize(&shape, &domain).unwrap();
    let lambda = cheeger_ratio(&shape).unwrap();
    // Cold solves of indicator data at the Cheeger weight take hundreds of
    // thousands of iterations; the analytic calibration field is the
    // natural warm start.
    let warm = calibration_field(&shape, &domain).unwrap();
    let solved = solve_rof_warm(&chi, lambda, tol_gap, 500_000, warm).unwrap();
    let u_star = ScalarField::new(
        domain.clone(),
        chi.values()
            .iter()
            .zip(solved.u.values())
            .map(|(a, b)| 2.0 * lambda * (a - b))
            .collect(),
    )
    .unwrap();
    let moll = MollifierSpec::default_for_rectangle(&domain).unwrap();
    let cert = certify(
        &solved.u,
        &u_star,
        &solved.g,
        &moll,
        Tolerances::for_spacing(domain.spacing()),
    )
    .unwrap();
    (cert.integral_residual, cert.fulltrace_residual)
}

#[test]
fn criterion_04_characterizations_agree_on_the_disc() {
    let t0 = Instant::now();
    let (int_256, ft_256) = disc_certificate(256, 1e-8);
    let integral_pass = int_256 <= 1e-3;
    let fulltrace_pass = ft_256 <= 5e-2;
    assert_eq!(
        integral_pass, fulltrace_pass,
        "characterization verdicts disagree at 256²: integral {int_256:e} vs full trace {ft_256:e}"
    );
    assert!(
        integral_pass && fulltrace_pass,
        "both characterizations must hold on the disc: integral {int_256:e}, full trace {ft_256:e}"
    );

    // The full-trace residual is a discretization error and halves with h;
    // the integral residual tracks the duality gap, so the finer run is
    // solved an order tighter to make its shrink meaningful.
    let (int_512, ft_512) = disc_certificate(512, 1e-9);
    assert!(
        int_512 <= 0.7 * int_256,
        "integral residual did not shrink: {int_256:e} → {int_512:e}"
    );
    assert!(
        ft_512 <= 0.7 * ft_256,
        "full-trace residual did not shrink: {ft_256:e} → {ft_512:e}"
    );
    pass(
        4,
        "equivalent characterizations on the disc",
        &format!(
            "integral {int_256:.2e} ≤ 1e-3 and full trace {ft_256:.2e} ≤ 5e-2 agree at 256²; \
             512² ratios {:.2}, {:.2} ≤ 0.7",
            int_512 / int_256,
            ft_512 / ft_256
        ),
        t0,
        300.0,
    );
}

// ----------------------------------------------------------------------
// 5. Boundary-aware mollification never expands the sup-norm, and its
//    W²(div) error against a smooth field halves with ε.

#[test]
fn criterion_05_mollification_bounds() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc_05);
    let domain = GridDomain::full(32, 32, 1.0 / 32.0).unwrap();
    let h = domain.spacing();
    for _ in 0..50 {
        let g = random_unit_ball_field(&domain, &mut rng);
        let sup = g.sup_norm();
        for eps in [2.0 * h, 4.0 * h, 8.0 * h] {
            let spec = MollifierSpec::for_rectangle(&domain, eps).unwrap();
            let smoothed = mollify_boundary_aware(&g, &spec).unwrap();
            assert!(
                smoothed.sup_norm() <= sup + 1e-12,
                "sup-norm grew under mollification at ε = {eps}"
            );
        }
    }

    // Convergence order against a smooth compactly supported field, in the
    // graph norm of the divergence.
    let fine = GridDomain::full(64, 64, 1.0 / 64.0).unwrap();
    let hf = fine.spacing();
    let smooth = VectorField::from_fn(fine.clone(), |i, j| {
        let (x, y) = fine.pixel_center(i, j);
        let r2 = ((x - 0.5) / 0.22).powi(2) + ((y - 0.5) / 0.22).powi(2);
        let bump = if r2 < 1.0 {
            (1.0 - 1.0 / (1.0 - r2)).exp()
        } else {
            0.0
        };
        (0.6 * bump * (3.0 * y).sin(), 0.6 * bump * (3.0 * x).cos())
    })
    .unwrap();
    let div_smooth = discrete_divergence(&smooth);
    let distance = |eps: f64| -> f64 {
        let spec = MollifierSpec::for_rectangle(&fine, eps).unwrap();
        let smoothed = mollify_boundary_aware(&smooth, &spec).unwrap();
        let diff = VectorField::new(
            fine.clone(),
            smoothed
                .x()
                .iter()
                .zip(smooth.x())
                .map(|(a, b)| a - b)
                .collect(),
            smoothed
                .y()
                .iter()
                .zip(smooth.y())
                .map(|(a, b)| a - b)
                .collect(),
        )
        .unwrap();
        let div_diff = ScalarField::new(
            fine.clone(),
            discrete_divergence(&smoothed)
                .values()
                .iter()
                .zip(div_smooth.values())
                .map(|(a, b)| a - b)
                .collect(),
        )
        .unwrap();
        (field_inner(&diff, &diff) + scalar_inner(&div_diff, &div_diff)).sqrt()
    };
    let d8 = distance(8.0 * hf);
    let d4 = distance(4.0 * hf);
    let d2 = distance(2.0 * hf);
    assert!(
        d4 <= 0.6 * d8 && d2 <= 0.6 * d4,
        "W²(div) distance does not halve: {d8:e} → {d4:e} → {d2:e}"
    );
    pass(
        5,
        "mollification bounds",
        &format!(
            "sup-norm non-expansive on 150 smoothings; W²(div) ratios {:.2}, {:.2} ≤ 0.6",
            d4 / d8,
            d2 / d4
        ),
        t0,
        60.0,
    );
}

// ----------------------------------------------------------------------
// 6. The analytic disc calibration survives every check.

#[test]
fn criterion_06_disc_calibration() {
    let t0 = Instant::now();
    let shape = disc(0.3);
    let d256 = GridDomain::full(256, 256, 1.0 / 256.0).unwrap();
    let xi = calibration_field(&shape, &d256).unwrap();
    let excess = (xi.sup_norm() - 1.0).max(0.0);
    assert_eq!(excess, 0.0, "the analytic field is feasible exactly");
    assert!(is_zero_extension_compatible(&xi));

    let ident_256 = calibration_identity(&shape, &xi).unwrap();
    assert!(
        ident_256.residual < 0.05,
        "divergence identity residual {:.4} ≥ 5%",
        ident_256.residual
    );
    let d512 = GridDomain::full(512, 512, 1.0 / 512.0).unwrap();
    let xi_512 = calibration_field(&shape, &d512).unwrap();
    let ident_512 = calibration_identity(&shape, &xi_512).unwrap();
    assert!(
        ident_512.residual < ident_256.residual,
        "identity residual does not improve: {:.4} → {:.4}",
        ident_256.residual,
        ident_512.residual
    );

    // Trace alignment with the inner normal, weighted by |Du|.
    let chi = rasterize(&shape, &d256).unwrap();
    let mu = gradient_measure(&chi, default_eps_zero(&chi));
    let spec = MollifierSpec::default_for_rectangle(&d256).unwrap();
    let trace = full_trace(&xi, &mu, &spec).unwrap();
    let (tx, ty) = trace.components();
    let mut err = 0.0;
    for k in 0..d256.len() {
        if mu.weight[k] > 0.0 {
            err += mu.weight[k] * (tx[k] * mu.dir_x[k] + ty[k] * mu.dir_y[k] - 1.0).abs();
        }
    }
    let alignment = err / mu.total_mass;
    assert!(alignment < 0.05, "trace alignment error {alignment:.4} ≥ 5%");
    pass(
        6,
        "disc calibration",
        &format!(
            "feasibility exact; divergence identity {:.4} → {:.4} under refinement; \
             trace alignment {alignment:.4} < 5e-2",
            ident_256.residual, ident_512.residual
        ),
        t0,
        120.0,
    );
}

// ----------------------------------------------------------------------
// 7. TV flow: the calibrable disc decays at its Cheeger rate and the
//    minimal-section norms never increase.

#[test]
fn criterion_07_tv_flow_on_the_disc() {
    let t0 = Instant::now();
    let n = 256;
    let domain = GridDomain::full(n, n, 1.0 / n as f64).unwrap();
    let chi = rasterize(&disc(0.12), &domain).unwrap();
    let lambda_h = discrete_cheeger_ratio(&chi);

    // Decay slope over a short horizon.
    let tau_s = 0.1 / lambda_h;
    let traj = run_flow(&chi, &vec![tau_s; 4], 1e-9).unwrap();
    let amps: Vec<f64> = traj.states.iter().map(amplitude).collect();
    let slope = (amps[0] - amps[4]) / (4.0 * tau_s);
    assert!(
        (slope - lambda_h).abs() <= 0.05 * lambda_h,
        "decay slope {slope:.4} differs from λ_h = {lambda_h:.4} by more than 5%"
    );

    // Extinction at amplitude / λ_h.
    let tau_e = 0.03 / lambda_h;
    let steps = (1.4 / (lambda_h * tau_e)).ceil() as usize + 3;
    let traj_e = run_flow(&chi, &vec![tau_e; steps], 1e-9).unwrap();
    let predicted = amplitude(&chi) / lambda_h;
    let extinction = traj_e
        .extinction_time
        .expect("the disc flow reaches extinction inside the schedule");
    assert!(
        (extinction - predicted).abs() <= 0.1 * predicted,
        "extinction at {extinction:.4} vs predicted {predicted:.4} (>10% off)"
    );

    // Minimal-section norms are non-increasing along every trajectory.
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc_07);
    let coarse = GridDomain::full(32, 32, 1.0 / 32.0).unwrap();
    let mut checked = 0usize;
    let mut check_monotone = |norms: &[f64]| {
        let slack = 1e-6 * norms.first().copied().unwrap_or(0.0);
        for w in norms.windows(2) {
            assert!(
                w[1] <= w[0] + slack,
                "minimal-section norm increased: {} → {}",
                w[0],
                w[1]
            );
        }
        checked += 1;
    };
    check_monotone(&traj_e.minimal_section_norms);
    for _ in 0..20 {
        let u0 = random_scalar(&coarse, &mut rng);
        let t = run_flow(&u0, &[0.02; 8], 1e-9).unwrap();
        check_monotone(&t.minimal_section_norms);
    }
    pass(
        7,
        "TV flow on the disc",
        &format!(
            "slope {slope:.4} within 5% of λ_h = {lambda_h:.4}; extinction {extinction:.4} \
             within 10% of {predicted:.4}; section norms non-increasing on {checked} trajectories"
        ),
        t0,
        300.0,
    );
}

// ----------------------------------------------------------------------
// 8. Negative controls refuse to certify.

#[test]
fn criterion_08_negative_controls() {
    let t0 = Instant::now();

    // (a) A forged dual with ‖g‖∞ = 2 is refuted through the binary, exit 2.
    let dir = tempfile::tempdir().unwrap();
    let n = 16;
    let domain = GridDomain::full(n, n, 1.0 / n as f64).unwrap();
    let u = ScalarField::from_fn(domain.clone(), |_, j| 0.1 * j as f64).unwrap();
    let forged = VectorField::from_fn(domain.clone(), |_, _| (2.0, 0.0)).unwrap();
    let (pu, pus, pg) = (
        dir.path().join("u.fld"),
        dir.path().join("ustar.fld"),
        dir.path().join("g.fld"),
    );
    write_field_file(&pu, &scalar_to_raw(&u)).unwrap();
    write_field_file(&pus, &scalar_to_raw(&ScalarField::zeros(domain.clone()))).unwrap();
    write_field_file(&pg, &vector_to_raw(&forged)).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_tvcert"))
        .args(["certify", "--input"])
        .arg(&pu)
        .arg("--ustar")
        .arg(&pus)
        .arg("--dual")
        .arg(&pg)
        .stdout(std::process::Stdio::null())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2), "forged certificate must exit 2");

    // (b) A thin stadium with corners tighter than the curvature threshold
    // is not calibrable, analytically or numerically.
    let thin = Shape::Stadium {
        center: [0.5, 0.5],
        width: 0.8,
        height: 0.1,
        corner_radius: 0.02,
    };
    let d128 = GridDomain::full(128, 128, 1.0 / 128.0).unwrap();
    let report = calibrability_verdict(&thin, &d128, Tolerances::for_spacing(1.0 / 128.0)).unwrap();
    assert_eq!(report.analytic_calibrable, Some(false));
    assert!(
        !report.numerically_calibrable,
        "the sub-threshold stadium must not certify: {report:?}"
    );

    // (c) A feasible constant field that does not extend by zero is refuted
    // on exactly that check.
    let ramp_g = VectorField::from_fn(domain.clone(), |_, _| (1.0, 0.0)).unwrap();
    assert!(!is_zero_extension_compatible(&ramp_g));
    let u_star = ScalarField::new(
        domain.clone(),
        discrete_divergence(&ramp_g).values().iter().map(|v| -v).collect(),
    )
    .unwrap();
    let moll = MollifierSpec::default_for_rectangle(&domain).unwrap();
    let cert = certify(
        &u,
        &u_star,
        &ramp_g,
        &moll,
        Tolerances::for_spacing(domain.spacing()),
    )
    .unwrap();
    assert!(cert.feasibility <= 1e-9, "the control is otherwise feasible");
    assert!(!cert.zero_ext_ok, "refutation must come from zero extension");
    assert_eq!(cert.verdict, Verdict::Refuted);

    pass(
        8,
        "negative controls",
        "forged sup-norm exits 2; sub-threshold stadium uncertified; \
         boundary-flux field refuted on zero extension",
        t0,
        120.0,
    );
}

// ----------------------------------------------------------------------
// 9. Interval-constrained certificates: singletons are trivial, and the
//    sign conditions match an independent finite-difference test.

#[test]
fn criterion_09_interval_certificates() {
    let t0 = Instant::now();
    let domain = GridDomain::full(8, 8, 0.125).unwrap();
    let basis = BlockDct8::new(domain.clone()).unwrap();
    let moll = MollifierSpec::default_for_rectangle(&domain).unwrap();
    let tols = Tolerances::for_spacing(domain.spacing());
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc_09);

    // Singleton intervals pin every coefficient: the zero field certifies.
    let u_rand = random_scalar(&domain, &mut rng);
    let singles: Vec<(f64, f64)> = basis
        .forward(&u_rand)
        .unwrap()
        .into_iter()
        .map(|c| (c, c))
        .collect();
    let cert = certify_interval_constrained(
        &u_rand,
        &basis,
        &singles,
        &VectorField::zeros(domain.clone()),
        &moll,
        tols,
    )
    .unwrap();
    assert_eq!(cert.verdict, Verdict::Certified);
    assert_eq!(cert.signs.fixed.len(), domain.len());

    // Single-active-bound case: with ψ a DCT mode, g = s∇ψ gives
    // −div g = s·μψ — one nonzero transform coefficient, so a constant u
    // sits at one active bound and strictly inside everywhere else.
    let mode = 9; // the (1,1) mode of the single 8×8 block
    let mut e = vec![0.0; domain.len()];
    e[mode] = 1.0;
    let psi = basis.inverse(&e).unwrap();
    let grad_psi = discrete_gradient(&psi);
    let s = 0.5 / grad_psi.sup_norm();
    let g = VectorField::new(
        domain.clone(),
        grad_psi.x().iter().map(|v| s * v).collect(),
        grad_psi.y().iter().map(|v| s * v).collect(),
    )
    .unwrap();
    let div_g = discrete_divergence(&g);
    let dcoeffs = basis.forward(&div_g).unwrap();
    for (k, &c) in dcoeffs.iter().enumerate() {
        if k != mode {
            assert!(
                c.abs() <= 1e-10 * dcoeffs[mode].abs(),
                "∇ᵀ∇ does not diagonalize in the DCT basis at coefficient {k}"
            );
        }
    }
    let h2 = domain.spacing() * domain.spacing();
    let pairing = h2 * dcoeffs[mode];
    assert!(pairing < -1e-3, "the mode pairing must be decisively signed");

    let u = ScalarField::constant(domain.clone(), 0.3).unwrap();
    let coeffs = basis.forward(&u).unwrap();
    let boxes = |active_side: i8| -> Vec<(f64, f64)> {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                if k == mode && active_side > 0 {
                    (c - 1.0, c) // active at the upper bound
                } else if k == mode {
                    (c, c + 1.0) // active at the lower bound
                } else {
                    (c - 1.0, c + 1.0)
                }
            })
            .collect()
    };

    // ⟨div g, ψ⟩ < 0 means the lower-bound multiplier is positive: the
    // lower-active claim certifies with g, the upper-active claim with −g.
    let minus_g = VectorField::new(
        domain.clone(),
        g.x().iter().map(|v| -v).collect(),
        g.y().iter().map(|v| -v).collect(),
    )
    .unwrap();
    let lower = certify_interval_constrained(&u, &basis, &boxes(-1), &g, &moll, tols).unwrap();
    assert_eq!(lower.verdict, Verdict::Certified, "{lower:?}");
    assert_eq!(lower.signs.active_lower, vec![mode]);
    assert_eq!(lower.signs.interior.len(), domain.len() - 1);
    let upper =
        certify_interval_constrained(&u, &basis, &boxes(1), &minus_g, &moll, tols).unwrap();
    assert_eq!(upper.verdict, Verdict::Certified, "{upper:?}");
    assert_eq!(upper.signs.active_upper, vec![mode]);

    // Claiming the wrong side flips the multiplier sign and is refuted.
    let flipped = certify_interval_constrained(&u, &basis, &boxes(1), &g, &moll, tols).unwrap();
    assert_eq!(flipped.verdict, Verdict::Refuted);
    assert!(flipped.signs.worst_upper > flipped.sign_scale);

    // Finite-difference cross-check of all three sign conditions: along
    // every admissible coordinate direction the one-sided difference
    // quotient of TV dominates the claimed subgradient pairing ⟨−div g, φ⟩.
    let tv_u = discrete_tv(&u);
    let step = 1e-3;
    let quotient = |dir: &[f64], sign: f64| -> f64 {
        let v = ScalarField::new(
            domain.clone(),
            u.values()
                .iter()
                .zip(dir)
                .map(|(a, d)| a + sign * step * d)
                .collect(),
        )
        .unwrap();
        (discrete_tv(&v) - tv_u) / step
    };
    let fd_tol = 1e-9;
    for (k, &dc) in dcoeffs.iter().enumerate() {
        let mut ek = vec![0.0; domain.len()];
        ek[k] = 1.0;
        let phi = basis.inverse(&ek).unwrap();
        let claimed = -h2 * dc; // ⟨−div g, φ_k⟩
        if k == mode {
            // Lower-active: only increases are admissible.
            assert!(
                quotient(phi.values(), 1.0) >= claimed - fd_tol,
                "FD test rejects the lower-active condition"
            );
            // Upper-active under −g: only decreases are admissible.
            assert!(
                quotient(phi.values(), -1.0) >= claimed - fd_tol,
                "FD test rejects the upper-active condition"
            );
        } else {
            // Interior: both directions admissible, pairing ≈ 0.
            assert!(
                quotient(phi.values(), 1.0) >= -claimed.abs() - fd_tol
                    && quotient(phi.values(), -1.0) >= -claimed.abs() - fd_tol,
                "FD test rejects the interior condition at coefficient {k}"
            );
        }
    }
    pass(
        9,
        "interval certificates",
        "singletons certify trivially; single-active-bound DCT case certified with \
         lower/upper/interior sign conditions matching the finite-difference test; \
         wrong-side claim refuted",
        t0,
        60.0,
    );
}

// ----------------------------------------------------------------------
// 10. Determinism: identical configuration and seed give byte-identical
//     artifacts through the binary.

#[test]
fn criterion_10_deterministic_artifacts() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let n = 12;
    let domain = GridDomain::full(n, n, 1.0 / n as f64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc_10);
    let u0 = random_scalar(&domain, &mut rng);
    let input = dir.path().join("u0.fld");
    write_field_file(&input, &scalar_to_raw(&u0)).unwrap();

    let run_all = |tag: &str| -> Vec<(String, Vec<u8>)> {
        let base = dir.path().join(tag);
        std::fs::create_dir_all(&base).unwrap();
        let cert = base.join("cert.json");
        let out = Command::new(env!("CARGO_BIN_EXE_tvcert"))
            .args(["denoise", "--lambda", "1.5", "--seed", "11", "--report", "json"])
            .arg("--input")
            .arg(&input)
            .arg("--certificate")
            .arg(&cert)
            .output()
            .unwrap();
        assert!(out.status.success());
        let flow_dir = base.join("flow");
        let fout = Command::new(env!("CARGO_BIN_EXE_tvcert"))
            .args(["flow", "--tau", "0.05", "--steps", "3", "--seed", "11"])
            .arg("--input")
            .arg(&input)
            .arg("--output-dir")
            .arg(&flow_dir)
            .output()
            .unwrap();
        assert!(fout.status.success());
        let mut artifacts = vec![
            ("denoise stdout".to_string(), out.stdout),
            ("cert.json".to_string(), std::fs::read(&cert).unwrap()),
            (
                "flow.json".to_string(),
                std::fs::read(flow_dir.join("flow.json")).unwrap(),
            ),
            (
                "flow.csv".to_string(),
                std::fs::read(flow_dir.join("flow.csv")).unwrap(),
            ),
        ];
        for k in 0..=3 {
            let name = format!("state_{k:04}.fld");
            artifacts.push((name.clone(), std::fs::read(flow_dir.join(name)).unwrap()));
        }
        artifacts
    };
    let first = run_all("one");
    let second = run_all("two");
    for ((name, a), (_, b)) in first.iter().zip(&second) {
        assert_eq!(a, b, "{name} differs between identical seeded runs");
    }
    pass(
        10,
        "deterministic artifacts",
        &format!("{} artifacts byte-identical across repeated runs", first.len()),
        t0,
        120.0,
    );
}
