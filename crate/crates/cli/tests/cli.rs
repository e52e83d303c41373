use std::path::Path;
use std::process::{Command, Output};

fn semilab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semilab")).args(args).current_dir(cwd).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn columns(csv: &str) -> &str {
    csv.lines().find(|l| !l.starts_with('#')).unwrap()
}

#[test]
fn scan_preset_writes_csv_with_golden_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = semilab(&["scan", "--config", "combined_harmonic", "--output", "res"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("combined_limit: 3 run(s)"));
    let csv = std::fs::read_to_string(dir.path().join("res/combined_limit_000.csv")).unwrap();
    let head: Vec<&str> = csv.lines().take(5).collect();
    assert_eq!(head, ["# schema = 1", "# experiment = combined_limit", "# run = hbar=1.0000000000000000e0", "# config [numerics]", "# config n = 1024"]);
    assert_eq!(
        columns(&csv),
        "t,x_mean,p_mean,var_x,var_p,uncertainty_product,width,kurtosis_excess,quantum_term_norm,hj_residual_quantum,hj_residual_classical,newton_deviation"
    );
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1 + 33);
    assert!(dir.path().join("res/combined_limit_summary.txt").exists());
}

#[test]
fn table_headers_of_the_other_experiments() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, preset, file, header) in [
        ("detpot", "detpot_quartic", "detpot_000.csv", "epsilon,residual_absolute,residual_relative,fourier_residual"),
        ("phj", "phj_harmonic", "phj_demo_000.csv", "t,x_mean,p_mean,r_newton,hj_residual,newton_residual"),
        ("liouville", "liouville_harmonic", "liouville_demo_000.csv", "t,x_mean,p_mean,mass,l1_to_initial"),
    ] {
        let out = semilab(&[cmd, "--config", preset, "--output", preset], dir.path());
        assert_eq!(out.status.code(), Some(0), "{preset}: {}", stderr(&out));
        let csv = std::fs::read_to_string(dir.path().join(preset).join(file)).unwrap();
        assert_eq!(columns(&csv), header);
    }
}

#[test]
fn missing_config_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = semilab(&["scan", "--config", "no/such/file.ini"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no/such/file.ini"), "{}", stderr(&out));
}

#[test]
fn caustic_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = semilab(&["phj", "--config", "phj_focus"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    let t: f64 = msg.split("t = ").nth(1).unwrap().trim().parse().unwrap();
    assert!((t - std::f64::consts::FRAC_PI_2).abs() < 1e-3, "{msg}");
}

#[test]
fn unknown_flag_prints_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = semilab(&["scan", "--config", "combined_harmonic", "--bogus"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("Usage"), "{}", stderr(&out));
    let out = semilab(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn overrides_reach_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = semilab(&["detpot", "--config", "detpot_quadratic", "--potential.coeffs=0 0 0 1", "--output", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("o/detpot_000.csv")).unwrap();
    assert!(csv.contains("# config coeffs = 0 0 0 1"));
    assert!(csv.contains("# result verdict = NonDeterministic"));
    let bad = semilab(&["detpot", "--config", "detpot_quadratic", "--potential.coefs=1"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("coefs"));
}

#[test]
fn config_file_with_relative_table() {
    let dir = tempfile::tempdir().unwrap();
    let sub = dir.path().join("cfg");
    std::fs::create_dir(&sub).unwrap();
    let table: String = (0..512).map(|i| {
        let x = -8.0 + 16.0 * i as f64 / 512.0;
        format!("{x} {}\n", x.cos())
    }).collect();
    std::fs::write(sub.join("cos.txt"), table).unwrap();
    std::fs::write(
        sub.join("run.ini"),
        "[run]\nexperiment = detpot\n[potential]\nkind = tabulated\ntable = cos.txt\n[numerics]\nx_min = -8\nx_max = 8\nn = 512\n",
    )
    .unwrap();
    let out = semilab(&["detpot", "--config", "cfg/run.ini", "--output", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("o/detpot_000.csv")).unwrap();
    assert!(csv.contains("# result verdict = NonDeterministic"));
}

#[test]
fn report_lists_runs() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(semilab(&["detpot", "--config", "detpot_quartic", "--output", "o"], dir.path()).status.code(), Some(0));
    let out = semilab(&["report", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("detpot_000.csv: detpot, 3 rows"), "{text}");
    assert!(text.contains("verdict = NonDeterministic"));
    assert_eq!(semilab(&["report", "missing"], dir.path()).status.code(), Some(1));
}

#[test]
fn repeated_scans_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = semilab(&["scan", "--config", "combined_quartic", "--scan.hbar=1 0.5", "--output", out], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for i in 0..2 {
        let name = format!("combined_limit_{i:03}.csv");
        let a = std::fs::read(dir.path().join("a").join(&name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(&name)).unwrap();
        assert!(a == b, "{name} differs");
    }
}
