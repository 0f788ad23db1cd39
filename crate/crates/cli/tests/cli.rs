use std::path::Path;
use std::process::{Command, Output};

use cforge_cli::config::{parse_str, ConfigError, PsiChoice, DEFAULT_N_AXIS, DEFAULT_RELAX};

fn cforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cforge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn summary(o: &Output) -> toml::Table {
    stdout(o).parse().expect("summary is TOML")
}

fn float(t: &toml::Table, section: &str, key: &str) -> f64 {
    t[section][key]
        .as_float()
        .unwrap_or_else(|| panic!("{section}.{key} missing"))
}

#[test]
fn solve_lich_reports_closed_form_and_exits_zero() {
    let o = cforge(&["solve-lich", "--fixture", "cmc-flat", "--n-axis", "16"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = summary(&o);
    assert!((float(&s, "final", "sup_u") - 1.034366083).abs() < 1e-8);
    assert_eq!(s["run"]["subcommand"].as_str(), Some("solve-lich"));
    assert_eq!(s["run"]["exit_code"].as_integer(), Some(0));
}

#[test]
fn unknown_subcommand_exits_one() {
    let o = cforge(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn help_exits_zero() {
    assert_eq!(cforge(&["--help"]).status.code(), Some(0));
    assert_eq!(cforge(&["continuation", "--help"]).status.code(), Some(0));
}

#[test]
fn unknown_fixture_exits_one() {
    let o = cforge(&[
        "solve-coupled",
        "--fixture",
        "no-such-fixture",
        "--n-axis",
        "8",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no-such-fixture"), "{}", stderr(&o));
}

#[test]
fn vanishing_sigma_with_zero_yamabe_is_a_validation_error() {
    let o = cforge(&[
        "solve-coupled",
        "--fixture",
        "flat-sin-tau",
        "--n-axis",
        "8",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(
        e.contains("`sigma`") && e.contains("standing assumption"),
        "{e}"
    );
}

#[test]
fn sigma_scale_zero_on_positive_yamabe_is_rejected() {
    let o = cforge(&[
        "defect-far",
        "--fixture",
        "positive-yamabe",
        "--n-axis",
        "8",
        "--sigma-scale",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`sigma`"), "{}", stderr(&o));
}

#[test]
fn flat_torus_warns_about_the_killing_kernel() {
    let o = cforge(&["solve-vector", "--fixture", "cmc-flat", "--n-axis", "8"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(
        stderr(&o).contains("conformal Killing kernel dim 3; projection enabled"),
        "{}",
        stderr(&o)
    );
    assert_eq!(
        summary(&o)["assumption_flags"]["ckv_kernel_dim"].as_integer(),
        Some(3)
    );
}

#[test]
fn coupled_solve_summary_has_trace_and_certificate() {
    let o = cforge(&[
        "solve-coupled",
        "--fixture",
        "benchmark",
        "--n-axis",
        "12",
        "--relax",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = summary(&o);
    assert!(s["trace"].as_array().is_some_and(|a| !a.is_empty()));
    assert_eq!(s["certificate"]["certified"].as_bool(), Some(true));
    assert!(s.contains_key("assumption_flags"));
}

#[test]
fn modified_continuation_needs_positive_yamabe() {
    let o = cforge(&[
        "modified-continuation",
        "--fixture",
        "benchmark",
        "--n-axis",
        "8",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Yamabe"), "{}", stderr(&o));
}

#[test]
fn summary_and_dump_files_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let sum = dir.path().join("run.toml");
    let dump = dir.path().join("fields");
    let o = cforge(&[
        "defect-near",
        "--fixture",
        "near-cmc",
        "--n-axis",
        "8",
        "--summary",
        sum.to_str().unwrap(),
        "--dump-dir",
        dump.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&sum).unwrap(), stdout(&o));
    let phi: cforge_core::ScalarField = cforge_core::io::load(&dump.join("phi.field")).unwrap();
    assert_eq!(phi.grid().n_axis(), 8);
    assert!(dump.join("w.field").exists());
}

#[test]
fn study_config_runs_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.toml");
    std::fs::write(
        &cfg,
        "fixture = \"benchmark\"\n[study]\nkind = \"scaling_matrix\"\noutput = \"scaling.csv\"\n[study.params]\nc = [2.0]\n",
    )
    .unwrap();
    let o = cforge(&["study", "-c", cfg.to_str().unwrap(), "--n-axis", "8"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("scaling.csv")).unwrap();
    assert!(csv.lines().next().unwrap().contains("identity_ok"));
    assert!(dir.path().join("scaling_summary.csv").exists());
}

#[test]
fn config_defaults_are_echoed() {
    let c = parse_str("fixture = \"benchmark\"\n", Path::new("")).unwrap();
    assert_eq!(c.n_axis, DEFAULT_N_AXIS);
    assert_eq!(c.solver.relax, DEFAULT_RELAX);
    assert_eq!(c.continuation.t.len(), 11);
    assert_eq!(*c.continuation.t.last().unwrap(), 1.0);
    assert!(matches!(c.defect.psi, PsiChoice::SolutionScale(s) if s == 2.0));
    assert!(c.study.is_none());
}

#[test]
fn config_rejects_unknown_keys_and_reports_lines() {
    match parse_str(
        "fixture = \"benchmark\"\n[solver]\nrelaxx = 0.3\n",
        Path::new(""),
    ) {
        Err(ConfigError::Parse { line, message }) => {
            assert_eq!(line, 3);
            assert!(message.contains("relaxx"), "{message}");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
    assert!(matches!(
        parse_str(
            "fixture = \"benchmark\"\n[solver]\nrelax = 1.5\n",
            Path::new("")
        ),
        Err(ConfigError::Validation { .. })
    ));
    assert!(matches!(
        parse_str(
            "fixture = \"benchmark\"\n[continuation]\nt = [0.0, 0.5]\n",
            Path::new("")
        ),
        Err(ConfigError::Validation { .. })
    ));
}

#[test]
fn steep_tau_continuation_reports_the_blow_up_branch() {
    let o = cforge(&["continuation", "--fixture", "steep-tau", "--n-axis", "12"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let s = summary(&o);
    assert_eq!(s["final"]["outcome"].as_str(), Some("blow_up"));
    assert!(s["limit_diagnostic"]["status"].as_str().is_some());
}
