use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qsat::pass::{QkdWindow, QkpcSample};
use qsat::report::{read_records, read_summary};

fn qsat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsat"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("scenario.cfg");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

const SHORT_PASS: &str = "\
# high elevations only
orbit.theta_min_deg = 55
channel.zenith_loss_db = 30.85
optimizer.restarts = 4
";

#[test]
fn simulate_pass_is_reproducible_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT_PASS);
    let runs: Vec<_> = ["1", "3"]
        .iter()
        .map(|w| {
            let out = dir.path().join(format!("w{w}"));
            let o = qsat(&[
                "simulate-pass",
                "--config",
                &cfg,
                "--out",
                out.to_str().unwrap(),
                "--workers",
                w,
                "--seed",
                "17",
            ]);
            assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
            out
        })
        .collect();
    for f in ["qkd_pass.csv", "qkpc_pass.csv", "summary.json", "loss_profile.csv"] {
        assert_eq!(
            fs::read(runs[0].join(f)).unwrap(),
            fs::read(runs[1].join(f)).unwrap(),
            "{f}"
        );
    }

    let qkd: Vec<QkdWindow> = read_records(&runs[0].join("qkd_pass.csv")).unwrap();
    let qkpc: Vec<QkpcSample> = read_records(&runs[0].join("qkpc_pass.csv")).unwrap();
    let s = read_summary(&runs[0].join("summary.json")).unwrap();
    assert_eq!(s.total_skl_bits, qkd.iter().map(|w| w.skl_bits).sum::<u64>());
    let private: f64 = qkpc.iter().map(|q| q.qkpc_rate_bps).sum();
    assert!((s.total_private_bits - private).abs() <= 1e-9 * private);
    assert!(s.total_skl_bits > 0);
}

#[test]
fn plots_are_written_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT_PASS);
    let out = dir.path().join("out");
    let o = qsat(&["simulate-pass", "--config", &cfg, "--out", out.to_str().unwrap(), "--plots"]);
    assert_eq!(code(&o), 0);
    for f in ["skr_vs_time.svg", "loss_vs_elevation.svg", "qkpc_rate_vs_time.svg"] {
        assert!(fs::read_to_string(out.join(f)).unwrap().starts_with("<svg"), "{f}");
    }
}

#[test]
fn config_errors_exit_with_one_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    for (text, needle) in [
        ("qkd.optimize = false\nqkd.mu1 = 0.1\nqkd.mu2 = 0.3\n", "mu2 < mu1"),
        ("orbit.altitude = 500\n", "orbit.altitude"),
        ("channel.d_t_m = -1\n", "channel.d_t_m"),
    ] {
        let cfg = write_config(dir.path(), text);
        let o = qsat(&["simulate-pass", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code(&o), 1, "{text}");
        assert!(String::from_utf8_lossy(&o.stderr).contains(needle), "{text}");
    }
    let o = qsat(&["simulate-pass", "--config", "/nonexistent/scenario.cfg"]);
    assert_eq!(code(&o), 1);
    let o = qsat(&["simulate-pass", "--bogus-flag"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn aperture_sweep_writes_csv_and_rejects_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "channel.zenith_loss_db = 30.85\noptimizer.restarts = 4\n");
    let out = dir.path().join("sweep");
    let o = qsat(&[
        "aperture-sweep",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--apertures",
        "0.04,0.1",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("aperture_sweep.csv")).unwrap();
    assert!(text.starts_with("d_t_m,zenith_loss_db,skr_hz"));
    assert_eq!(text.lines().count(), 3);

    let o = qsat(&["aperture-sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--apertures", "0.04,0"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn qkpc_profile_from_external_losses() {
    let dir = tempfile::tempdir().unwrap();
    let loss = dir.path().join("loss.csv");
    fs::write(&loss, "t_s,loss_db\n0,30\n1,45\n2,60\n").unwrap();
    let out = dir.path().join("out");
    let o = qsat(&[
        "qkpc-profile",
        "--loss-csv",
        loss.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<QkpcSample> = read_records(&out.join("qkpc_pass.csv")).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| (r.qkpc_rate_bps - 680.9e6).abs() < 0.1e6));

    fs::write(&loss, "t_s,loss_db\n0,30\n0,45\n").unwrap();
    let o = qsat(&["qkpc-profile", "--loss-csv", loss.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn validate_requires_ten_trials() {
    let o = qsat(&["validate", "--trials", "1"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn validate_default_suite_passes() {
    let o = qsat(&["validate", "--trials", "100"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{stdout}");
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn validate_reports_rates_under_loose_secrecy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "qkd.eps_s = 0.5\n");
    let o = qsat(&["validate", "--config", &cfg, "--trials", "10"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(matches!(code(&o), 0 | 3), "{stdout}");
    assert!(stdout.contains("Chernoff interval coverage"));
    assert!(stdout.contains("/10000"));
}

#[test]
fn bundled_scenario_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/calibrated.cfg");
    let cfg = qsat::scenario::ScenarioConfig::from_file(&path).unwrap();
    assert_eq!(cfg.zenith_loss_target_db, Some(30.845));
}
