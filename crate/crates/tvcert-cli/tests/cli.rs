//! End-to-end tests of the `tvcert` binary: exit-code triage, report
//! formats, artifact round-trips, and input validation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::process::{Command, Output};

use tvcert_core::certify::solve_rof;
use tvcert_core::grid::{GridDomain, ScalarField, VectorField};
use tvcert_core::io::{read_field_file, scalar_to_raw, vector_to_raw, write_field_file};

fn tvcert() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tvcert"))
}

fn run(cmd: &mut Command) -> (Option<i32>, String, String) {
    let Output {
        status,
        stdout,
        stderr,
    } = cmd.output().expect("binary spawns");
    (
        status.code(),
        String::from_utf8(stdout).expect("utf8 stdout"),
        String::from_utf8(stderr).expect("utf8 stderr"),
    )
}

fn write_scalar(path: &Path, u: &ScalarField) {
    write_field_file(path, &scalar_to_raw(u)).expect("scalar writes");
}

fn write_vector(path: &Path, g: &VectorField) {
    write_field_file(path, &vector_to_raw(g)).expect("vector writes");
}

fn constant_triple(dir: &Path, n: usize, value: f64) -> (String, String, String) {
    let domain = GridDomain::full(n, n, 1.0 / n as f64).unwrap();
    let u = ScalarField::constant(domain.clone(), value).unwrap();
    let zero = ScalarField::zeros(domain.clone());
    let g = VectorField::zeros(domain);
    let (pu, pus, pg) = (
        dir.join("u.fld"),
        dir.join("ustar.fld"),
        dir.join("g.fld"),
    );
    write_scalar(&pu, &u);
    write_scalar(&pus, &zero);
    write_vector(&pg, &g);
    (
        pu.display().to_string(),
        pus.display().to_string(),
        pg.display().to_string(),
    )
}

#[test]
fn constant_triple_certifies_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let (u, ustar, g) = constant_triple(dir.path(), 16, 0.7);

    let (code, stdout, _) = run(tvcert()
        .args(["certify", "--input", &u, "--ustar", &ustar, "--dual", &g]));
    assert_eq!(code, Some(0), "stdout:\n{stdout}");
    assert!(stdout.contains("verdict: certified"));
    assert!(!stdout.contains("FAIL"));

    let (code, stdout, _) = run(tvcert().args([
        "certify", "--input", &u, "--ustar", &ustar, "--dual", &g, "--report", "json",
    ]));
    assert_eq!(code, Some(0));
    let doc: serde_json::Value = serde_json::from_str(&stdout).expect("json report parses");
    assert_eq!(doc["verdict"], "certified");
}

#[test]
fn forged_sup_norm_dual_is_refuted_with_the_excess_named() {
    let dir = tempfile::tempdir().unwrap();
    let n = 16;
    let domain = GridDomain::full(n, n, 1.0 / n as f64).unwrap();
    let u = ScalarField::from_fn(domain.clone(), |_, j| 0.1 * j as f64).unwrap();
    let zero = ScalarField::zeros(domain.clone());
    let g = VectorField::from_fn(domain.clone(), |_, _| (2.0, 0.0)).unwrap();

    let (pu, pus, pg) = (
        dir.path().join("u.fld"),
        dir.path().join("ustar.fld"),
        dir.path().join("g.fld"),
    );
    write_scalar(&pu, &u);
    write_scalar(&pus, &zero);
    write_vector(&pg, &g);

    let (code, stdout, _) = run(tvcert().args([
        "certify",
        "--input",
        pu.to_str().unwrap(),
        "--ustar",
        pus.to_str().unwrap(),
        "--dual",
        pg.to_str().unwrap(),
    ]));
    assert_eq!(code, Some(2), "stdout:\n{stdout}");
    assert!(
        stdout.contains("sup-norm bound: FAIL (1.0 excess)"),
        "stdout:\n{stdout}"
    );
    assert!(stdout.contains("verdict: refuted"));
}

#[test]
fn flow_on_constant_input_reports_stationary_zero_tv_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (u, _, _) = constant_triple(dir.path(), 12, 0.4);
    let out = dir.path().join("run");

    let (code, stdout, _) = run(tvcert().args([
        "flow",
        "--input",
        &u,
        "--tau",
        "0.1",
        "--steps",
        "5",
        "--report",
        "csv",
        "--output-dir",
        out.to_str().unwrap(),
    ]));
    assert_eq!(code, Some(0));
    let rows: Vec<&str> = stdout.trim().lines().collect();
    assert_eq!(rows[0], "step,time,tv,section_norm,amplitude");
    assert_eq!(rows.len(), 6, "one row per step:\n{stdout}");
    for (k, row) in rows[1..].iter().enumerate() {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[0], (k + 1).to_string());
        assert_eq!(cols[2].parse::<f64>().unwrap(), 0.0, "TV column");
        assert_eq!(cols[3].parse::<f64>().unwrap(), 0.0, "section norm");
    }

    // Artifacts: csv on disk matches stdout, snapshots round-trip.
    let csv_disk = std::fs::read_to_string(out.join("flow.csv")).unwrap();
    assert_eq!(csv_disk, stdout);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("flow.json")).unwrap()).unwrap();
    assert_eq!(meta["steps_taken"], 5);
    assert_eq!(meta["extinction_time"], serde_json::Value::Null);
    let first = read_field_file(&out.join("state_0000.fld")).unwrap();
    let last = read_field_file(&out.join("state_0005.fld")).unwrap();
    assert_eq!(first, last, "constant data stay put");
}

#[test]
fn flow_step_certificates_appear_in_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let n = 12;
    let domain = GridDomain::full(n, n, 1.0 / n as f64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let u = ScalarField::from_fn(domain, |_, _| rng.gen_range(-1.0..1.0)).unwrap();
    let path = dir.path().join("u.fld");
    write_scalar(&path, &u);

    let (code, stdout, _) = run(tvcert().args([
        "flow",
        "--input",
        path.to_str().unwrap(),
        "--tau",
        "0.05",
        "--steps",
        "2",
        "--certify-steps",
        "--report",
        "csv",
    ]));
    assert_eq!(code, Some(0), "stdout:\n{stdout}");
    let rows: Vec<&str> = stdout.trim().lines().collect();
    assert_eq!(rows[0], "step,time,tv,section_norm,amplitude,verdict");
    for row in &rows[1..] {
        assert!(row.ends_with(",certified"), "row {row}");
    }
}

#[test]
fn calibrate_disc_via_flags_and_via_shape_file_agree() {
    let dir = tempfile::tempdir().unwrap();
    let report_a = dir.path().join("a.json");
    let report_b = dir.path().join("b.json");

    let (code, stdout, _) = run(tvcert().args([
        "calibrate",
        "--shape",
        "disc",
        "--radius",
        "0.3",
        "--grid",
        "256",
        "--output",
        report_a.to_str().unwrap(),
    ]));
    assert_eq!(code, Some(0), "stdout:\n{stdout}");
    assert!(stdout.contains("numerical: calibrable"));
    assert!(stdout.contains("agreement: yes"));

    let shape_file = dir.path().join("disc.json");
    std::fs::write(
        &shape_file,
        r#"{"kind":"disc","center":[0.5,0.5],"radius":0.3}"#,
    )
    .unwrap();
    let (code, _, _) = run(tvcert().args([
        "calibrate",
        "--shape-file",
        shape_file.to_str().unwrap(),
        "--grid",
        "256",
        "--output",
        report_b.to_str().unwrap(),
    ]));
    assert_eq!(code, Some(0));

    let a = std::fs::read(&report_a).unwrap();
    let b = std::fs::read(&report_b).unwrap();
    assert_eq!(a, b, "flag form and file form produce identical reports");
}

#[test]
fn malformed_headers_and_bad_config_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.fld");
    std::fs::write(&bad, b"FLD 16 sixteen 1\n").unwrap();
    let (u, ustar, g) = constant_triple(dir.path(), 8, 0.0);

    let (code, _, stderr) = run(tvcert().args([
        "certify",
        "--input",
        bad.to_str().unwrap(),
        "--ustar",
        &ustar,
        "--dual",
        &g,
    ]));
    assert_eq!(code, Some(1));
    assert!(
        stderr.contains("parse error at byte"),
        "position-accurate message, got: {stderr}"
    );

    // Config errors: both pair and interval modes at once, bad eps0,
    // csv report outside flow, malformed thread cap.
    let (code, _, stderr) = run(tvcert()
        .args(["certify", "--input", &u, "--dual", &g]));
    assert_eq!(code, Some(1));
    assert!(stderr.contains("exactly one of"), "{stderr}");

    let (code, _, _) = run(tvcert().args([
        "certify", "--input", &u, "--ustar", &ustar, "--dual", &g, "--eps0", "-1.0",
    ]));
    assert_eq!(code, Some(1));

    let (code, _, stderr) = run(tvcert().args([
        "certify", "--input", &u, "--ustar", &ustar, "--dual", &g, "--report", "csv",
    ]));
    assert_eq!(code, Some(1));
    assert!(stderr.contains("only available for `flow`"), "{stderr}");

    for cap in ["abc", "0", "-3"] {
        let (code, _, stderr) = run(tvcert()
            .env("TVCERT_THREADS", cap)
            .args(["certify", "--input", &u, "--ustar", &ustar, "--dual", &g]));
        assert_eq!(code, Some(1), "cap {cap:?}");
        assert!(stderr.contains("TVCERT_THREADS"), "{stderr}");
    }
    let (code, _, _) = run(tvcert()
        .env("TVCERT_THREADS", "4")
        .args(["certify", "--input", &u, "--ustar", &ustar, "--dual", &g]));
    assert_eq!(code, Some(0), "a positive cap is accepted");
}

#[test]
fn denoise_artifacts_roundtrip_and_rerun_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let n = 12;
    let domain = GridDomain::full(n, n, 1.0 / n as f64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u0 = ScalarField::from_fn(domain, |_, _| rng.gen_range(-1.0..1.0)).unwrap();
    let input = dir.path().join("u0.fld");
    write_scalar(&input, &u0);

    let outputs = |tag: &str| {
        [
            dir.path().join(format!("u_{tag}.fld")),
            dir.path().join(format!("g_{tag}.fld")),
            dir.path().join(format!("cert_{tag}.json")),
        ]
    };
    for tag in ["one", "two"] {
        let [u, g, cert] = outputs(tag);
        let (code, stdout, stderr) = run(tvcert().args([
            "denoise",
            "--input",
            input.to_str().unwrap(),
            "--lambda",
            "1.0",
            "--output",
            u.to_str().unwrap(),
            "--dual",
            g.to_str().unwrap(),
            "--certificate",
            cert.to_str().unwrap(),
        ]));
        assert_eq!(code, Some(0), "stdout:\n{stdout}\nstderr:\n{stderr}");
        assert!(stdout.contains("verdict: certified"));
    }
    let [u1, g1, c1] = outputs("one");
    let [u2, g2, c2] = outputs("two");
    for (a, b) in [(u1, u2), (g1, g2), (c1, c2)] {
        assert_eq!(
            std::fs::read(&a).unwrap(),
            std::fs::read(&b).unwrap(),
            "{} differs between identical runs",
            a.display()
        );
    }

    let cert: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(outputs("one")[2].clone()).unwrap())
            .unwrap();
    assert_eq!(cert["verdict"], "certified");
    let denoised = read_field_file(&outputs("one")[0]).unwrap();
    assert_eq!(denoised.channels, 1);
    assert!(denoised.data.iter().all(|v| v.is_finite()));
}

#[test]
fn pgm_input_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let pgm = dir.path().join("img.pgm");
    let mut bytes = b"P5\n12 12\n255\n".to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    bytes.extend((0..144).map(|_| rng.gen_range(0u8..=255)));
    std::fs::write(&pgm, &bytes).unwrap();

    let out = dir.path().join("u.fld");
    let (code, stdout, stderr) = run(tvcert().args([
        "denoise",
        "--input",
        pgm.to_str().unwrap(),
        "--lambda",
        "2.0",
        "--output",
        out.to_str().unwrap(),
    ]));
    assert_eq!(code, Some(0), "stdout:\n{stdout}\nstderr:\n{stderr}");
    let u = read_field_file(&out).unwrap();
    // Denoising 8-bit data normalised to [0, 1] keeps values in range up to
    // solver accuracy.
    assert!(u.data.iter().all(|&v| (-1e-6..=1.0 + 1e-6).contains(&v)));
}

#[test]
fn mollify_shrinks_nothing_and_writes_the_smoothed_field() {
    let dir = tempfile::tempdir().unwrap();
    let n = 24;
    let domain = GridDomain::full(n, n, 1.0 / n as f64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let g = VectorField::from_fn(domain, |_, _| {
        (rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7))
    })
    .unwrap();
    let input = dir.path().join("g.fld");
    let output = dir.path().join("gm.fld");
    write_vector(&input, &g);

    let (code, stdout, _) = run(tvcert().args([
        "mollify",
        "--input",
        input.to_str().unwrap(),
        "--epsilon",
        "0.125",
        "--output",
        output.to_str().unwrap(),
        "--report",
        "json",
    ]));
    assert_eq!(code, Some(0), "stdout:\n{stdout}");
    let doc: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let before = doc["sup_norm_before"].as_f64().unwrap();
    let after = doc["sup_norm_after"].as_f64().unwrap();
    assert!(after <= before + 1e-12, "sup-norm grew: {before} -> {after}");

    let smoothed = read_field_file(&output).unwrap();
    assert_eq!(smoothed.channels, 2);
}

#[test]
fn oracle_accepts_a_solver_pair_and_flags_a_scaled_forgery() {
    let dir = tempfile::tempdir().unwrap();
    let n = 10;
    // Strong fidelity so the minimizer keeps texture: a scaled forgery of
    // the subgradient of a constant would be invisible.
    let lambda = 50.0;
    let domain = GridDomain::full(n, n, 1.0 / n as f64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let u0 = ScalarField::from_fn(domain.clone(), |_, _| rng.gen_range(-1.0..1.0)).unwrap();
    let solved = solve_rof(&u0, lambda, 1e-9, 500_000).unwrap();
    let subgradient = |scale: f64| {
        ScalarField::new(
            domain.clone(),
            u0.values()
                .iter()
                .zip(solved.u.values())
                .map(|(a, b)| scale * 2.0 * lambda * (a - b))
                .collect(),
        )
        .unwrap()
    };

    let pu = dir.path().join("u.fld");
    write_scalar(&pu, &solved.u);
    let honest = dir.path().join("ustar.fld");
    write_scalar(&honest, &subgradient(1.0));
    let forged = dir.path().join("forged.fld");
    write_scalar(&forged, &subgradient(1.5));

    let (code, stdout, _) = run(tvcert().args([
        "oracle",
        "--input",
        pu.to_str().unwrap(),
        "--ustar",
        honest.to_str().unwrap(),
        "--samples",
        "400",
        "--seed",
        "3",
    ]));
    assert_eq!(code, Some(0), "stdout:\n{stdout}");
    assert!(stdout.contains("subgradient oracle: PASS"));

    let (code, stdout, _) = run(tvcert().args([
        "oracle",
        "--input",
        pu.to_str().unwrap(),
        "--ustar",
        forged.to_str().unwrap(),
        "--samples",
        "400",
        "--seed",
        "3",
    ]));
    assert_eq!(code, Some(2), "stdout:\n{stdout}");
    assert!(stdout.contains("subgradient oracle: FAIL"));
}

#[test]
fn interval_mode_certifies_singleton_boxes_and_rejects_escapes() {
    let dir = tempfile::tempdir().unwrap();
    let n = 8;
    let domain = GridDomain::full(n, n, 1.0 / n as f64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let u = ScalarField::from_fn(domain.clone(), |_, _| rng.gen_range(-1.0..1.0)).unwrap();
    let g = VectorField::zeros(domain.clone());

    let pu = dir.path().join("u.fld");
    let pg = dir.path().join("g.fld");
    write_scalar(&pu, &u);
    write_vector(&pg, &g);

    // Singleton intervals pinning u exactly: trivially certified.
    let pinned: Vec<(f64, f64)> = u.values().iter().map(|&v| (v, v)).collect();
    let iv = dir.path().join("pinned.json");
    std::fs::write(&iv, serde_json::to_string(&pinned).unwrap()).unwrap();
    let (code, stdout, _) = run(tvcert().args([
        "certify",
        "--input",
        pu.to_str().unwrap(),
        "--dual",
        pg.to_str().unwrap(),
        "--intervals",
        iv.to_str().unwrap(),
        "--basis",
        "identity",
    ]));
    assert_eq!(code, Some(0), "stdout:\n{stdout}");
    assert!(stdout.contains("every coefficient pinned"));

    // Boxes u violates: the certificate premise fails, which is a refutation.
    let outside: Vec<(f64, f64)> = u.values().iter().map(|&v| (v + 1.0, v + 2.0)).collect();
    let iv_bad = dir.path().join("outside.json");
    std::fs::write(&iv_bad, serde_json::to_string(&outside).unwrap()).unwrap();
    let (code, _, stderr) = run(tvcert().args([
        "certify",
        "--input",
        pu.to_str().unwrap(),
        "--dual",
        pg.to_str().unwrap(),
        "--intervals",
        iv_bad.to_str().unwrap(),
        "--basis",
        "identity",
    ]));
    assert_eq!(code, Some(2), "stderr:\n{stderr}");
    assert!(stderr.contains("interval constraint violated"), "{stderr}");
}

#[test]
fn masked_domains_flow_but_refuse_automatic_certification() {
    let dir = tempfile::tempdir().unwrap();
    let n = 12;
    // Mask out one corner block; the domain stays connected.
    let full = GridDomain::full(n, n, 1.0 / n as f64).unwrap();
    let mask_field = ScalarField::from_fn(full, |i, j| {
        if i < 3 && j < 3 {
            0.0
        } else {
            1.0
        }
    })
    .unwrap();
    let mask: Vec<bool> = mask_field.values().iter().map(|&v| v > 0.5).collect();
    let domain = GridDomain::new(n, n, 1.0 / n as f64, mask).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let u = ScalarField::from_fn(domain, |_, _| rng.gen_range(0.0..1.0)).unwrap();

    let pu = dir.path().join("u.fld");
    let pm = dir.path().join("mask.fld");
    write_scalar(&pu, &u);
    write_scalar(&pm, &mask_field);

    let (code, stdout, _) = run(tvcert().args([
        "flow",
        "--input",
        pu.to_str().unwrap(),
        "--mask",
        pm.to_str().unwrap(),
        "--tau",
        "0.05",
        "--steps",
        "2",
    ]));
    assert_eq!(code, Some(0), "stdout:\n{stdout}");

    let (code, _, stderr) = run(tvcert().args([
        "flow",
        "--input",
        pu.to_str().unwrap(),
        "--mask",
        pm.to_str().unwrap(),
        "--tau",
        "0.05",
        "--steps",
        "2",
        "--certify-steps",
    ]));
    assert_eq!(code, Some(1), "stderr:\n{stderr}");
    assert!(stderr.contains("rectangular mask"), "{stderr}");
}
