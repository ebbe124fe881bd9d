use std::path::Path;
use std::process::{Command, Output};

use deltafield::config::RunConfig;
use deltafield::field::{read_profile, write_profile, FieldState};
use deltafield::functional::VerificationReport;

const CONFIG_3D: &str = r#"
dim = 3
alpha = 1.0

[nonlinearity]
family = "power"
omega = 1.0
p = 2.5

[grid]
M = 512
grading = 5.0
"#;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deltafield")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("input.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn report(path: &Path) -> VerificationReport {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_then_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG_3D);
    let out = dir.path().join("run");
    let o = bin(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["profile.csv", "profile.json", "report.json", "summary.json", "trace.csv", "config.toml"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let solved = report(&out.join("report.json"));
    assert!(solved.charge.re > 0.0);
    assert!(solved.gradient_norm <= 1e-8);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["converged"], true);
    assert_eq!(summary["regime"], "weak_only");

    let profile = out.join("profile.csv");
    let o = bin(&["verify", "--profile", profile.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let printed: VerificationReport = serde_json::from_slice(&o.stdout).unwrap();
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
    assert!(rel(printed.energy.total, solved.energy.total) <= 1e-12);
    assert!((printed.gradient_norm - solved.gradient_norm).abs() <= 1e-12 * (1.0 + solved.energy.total.abs()));
    assert!((printed.pohozaev_residual - solved.pohozaev_residual).abs() <= 1e-12 * (1.0 + solved.energy.total.abs()));
    assert!((printed.boundary_residual - solved.boundary_residual).norm() <= 1e-12 * (1.0 + solved.charge.norm()));
    assert_eq!(report(&out.join("profile.report.json")), printed);
}

#[test]
fn unsupported_dimension_exits_with_context() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG_3D.replace("dim = 3", "dim = 4"));
    let o = bin(&["solve", "--config", &cfg, "--out", dir.path().join("run").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("{2, 3}") && err.contains("line 2"), "{err}");
}

#[test]
fn iteration_cap_exits_two_with_state_saved() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{CONFIG_3D}\n[solver]\nmax_iters = 1\nmax_newton_iters = 0\n"));
    let out = dir.path().join("run");
    let o = bin(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let state = read_profile(&out.join("profile.csv")).unwrap();
    assert!(state.l2_norm_sq() > 0.0);
    assert_eq!(report(&out.join("report.json")).lambda, state.lambda());
}

#[test]
fn verify_zero_state_and_malformed_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("config.toml"), CONFIG_3D).unwrap();
    let problem = RunConfig::from_toml(CONFIG_3D).unwrap().problem().unwrap();
    let profile = dir.path().join("zero.csv");
    write_profile(&FieldState::zero(problem.grid, 1.0).unwrap(), &profile).unwrap();
    let o = bin(&["verify", "--profile", profile.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: VerificationReport = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r.energy.total, 0.0);
    assert_eq!(r.gradient_norm, 0.0);
    assert_eq!(r.pohozaev_residual, 0.0);
    assert_eq!(r.boundary_residual.norm(), 0.0);

    let text = std::fs::read_to_string(&profile).unwrap();
    std::fs::write(&profile, &text[..text.len() / 2]).unwrap();
    let o = bin(&["verify", "--profile", profile.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("zero.csv:"), "{}", String::from_utf8_lossy(&o.stderr));

    std::fs::write(dir.path().join("zero.json"), "{\"dim\": 3,").unwrap();
    let o = bin(&["verify", "--profile", profile.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("zero.json:1:"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn identities_table_is_deterministic_and_flags_threshold() {
    let args = ["identities", "--dim", "2", "--alpha", "0", "--lambda-min", "0.5", "--lambda-max", "4", "--steps", "8"];
    let a = bin(&args);
    let b = bin(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 9);
    assert_eq!(lines.iter().filter(|l| l.ends_with(",true")).count(), 1);
}
