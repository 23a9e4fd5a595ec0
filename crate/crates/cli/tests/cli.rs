use std::path::Path;
use std::process::{Command, Output};

fn optonoise(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_optonoise"));
    cmd.args(args).env_remove("OPTONOISE_OUT");
    if let Some(dir) = out_env {
        cmd.env("OPTONOISE_OUT", dir);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn validate_reports_threshold() {
    let o = optonoise(&["validate", "--params", "paper_device", "--json"], None);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let n = v["threshold_photons"].as_f64().unwrap();
    assert!((n - 2.09e4).abs() < 0.01e4, "{n}");
    assert!((v["gamma"]["hz"].as_f64().unwrap() - 120.0).abs() < 1e-9);
    assert!(v["gamma"]["rad_s"].as_f64().unwrap() > 750.0);
}

#[test]
fn validate_rejects_zero_gamma_and_warns_unresolved() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "omega_m_hz = 1e6\ngamma_hz = 0\nkappa_hz = 1e5\ng0_hz = 10\nn_th = 5\nn_max = 1e8\n").unwrap();
    let o = optonoise(&["validate", "--params", bad.to_str().unwrap()], None);
    assert_eq!(code(&o), 1);

    let wide = dir.path().join("wide.toml");
    std::fs::write(&wide, "omega_m_hz = 1e6\ngamma_hz = 10\nkappa_hz = 2e6\ng0_hz = 10\nn_th = 5\nn_max = 1e8\n").unwrap();
    let o = optonoise(&["validate", "--params", wide.to_str().unwrap()], None);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("not resolved"));

    let missing = dir.path().join("missing.toml");
    std::fs::write(&missing, "omega_m_hz = 1e6\ngamma_hz = nan\n").unwrap();
    let o = optonoise(&["validate", "--params", missing.to_str().unwrap()], None);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("gamma_hz: NaN") && err.contains("kappa_hz: missing"), "{err}");
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        vec!["sweep", "--preset", "power_sweep_blue_noise", "--engine", ""],
        vec!["sweep", "--preset", "nonsense"],
        vec!["sweep", "--preset", "power_sweep_blue_noise", "--grid", "10:1"],
        vec!["sweep", "--preset", "power_sweep_blue_noise", "--grid", "10:10:4"],
        vec!["sweep", "--preset", "custom", "--drive", "noise"],
        vec!["sweep", "--no-such-flag"],
    ] {
        let o = optonoise(&args, None);
        assert_eq!(code(&o), 1, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn manifest_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let o = optonoise(
        &[
            "sweep", "--params", "scaled", "--preset", "power_sweep_blue_noise", "--engine", "analytic,quasistatic",
            "--grid", "20:500:5:log", "--samples", "5000", "--repeats", "2", "--jobs", "2", "--seed", "99",
        ],
        Some(&first),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = first.join("power_sweep_blue_noise.manifest.json");
    let o = optonoise(
        &["sweep", "--manifest", manifest.to_str().unwrap(), "--out", second.to_str().unwrap(), "--jobs", "3"],
        None,
    );
    assert_eq!(code(&o), 0);
    let a = std::fs::read(first.join("power_sweep_blue_noise.csv")).unwrap();
    let b = std::fs::read(second.join("power_sweep_blue_noise.csv")).unwrap();
    assert_eq!(a, b);
    // 3 bandwidths x 5 points x 2 engines x 2 repeats + header
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 61);
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(&manifest).unwrap()).unwrap();
    assert_eq!(m["plan"]["seed"], 99);
    assert_eq!(m["seeds"].as_array().unwrap().len(), 60);
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn custom_single_point_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = optonoise(
        &[
            "sweep", "--params", "scaled", "--preset", "custom", "--drive", "coherent", "--sideband", "red", "--grid",
            "50:50:1", "--engine", "analytic", "--out", out,
        ],
        None,
    );
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(dir.path().join("custom.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    // gamma_opt = 4 g0^2 nbar0 / kappa = 2e-4 with gamma = 1e-3, n_ba = 0
    let n: f64 = row[12].parse().unwrap();
    assert!((n - 100.0 / 1.2).abs() < 1e-9, "{n}");

    // a Langevin step far above 0.1/kappa fails every row
    let o = optonoise(
        &[
            "sweep", "--params", "scaled", "--preset", "custom", "--drive", "coherent", "--grid", "10:20:2", "--engine",
            "langevin", "--dt", "0.5", "--duration", "100", "--out", out,
        ],
        None,
    );
    assert_eq!(code(&o), 2);
    let o = optonoise(
        &[
            "sweep", "--params", "scaled", "--preset", "custom", "--drive", "coherent", "--grid", "10:20:2", "--engine",
            "analytic,langevin", "--dt", "0.5", "--duration", "100", "--out", out,
        ],
        None,
    );
    assert_eq!(code(&o), 3);
    let csv = std::fs::read_to_string(dir.path().join("custom.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| l.contains(",failed,")).count(), 2);
}

#[test]
fn envelope_export() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("env.bin");
    let o = optonoise(
        &[
            "envelope", "--params", "scaled", "--drive", "noise", "--sideband", "blue", "--nbar0", "100", "--width-hz",
            "0.01", "--duration", "2000", "--dt", "1", "--seed", "4", "--out", path.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..8], b"OPTOCOL1");
    assert_eq!(u64::from_le_bytes(bytes[32..40].try_into().unwrap()), 4);
}
