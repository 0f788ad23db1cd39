use cforge_core::studies::{
    run_study, run_study_to_files, StudyKind, StudyParams, StudySpec, BRACKET_WIDTH,
};
use cforge_core::StudyError;

fn spec(kind: StudyKind, fixture: &str, n: usize, params: StudyParams) -> StudySpec {
    StudySpec {
        kind,
        fixture: fixture.into(),
        n_axis: n,
        params,
        output: "table.csv".into(),
    }
}

fn csv_bytes(s: &StudySpec) -> (Vec<u8>, Vec<u8>) {
    let t = run_study(s).unwrap();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    t.write_csv(&mut a).unwrap();
    t.write_summary_csv(&mut b).unwrap();
    (a, b)
}

#[test]
fn scaling_matrix_rows_certify_and_tables_are_deterministic() {
    let s = spec(
        StudyKind::ScalingMatrix,
        "benchmark",
        12,
        StudyParams {
            c: vec![1.0, 2.0, 4.0],
            relax: Some(1.0),
            ..StudyParams::default()
        },
    );
    let t = run_study(&s).unwrap();
    assert_eq!(t.rows.len(), 3);
    assert!(t
        .column("transform_certified")
        .unwrap()
        .iter()
        .all(|v| *v == "true"));
    assert!(t
        .column("solve_certified")
        .unwrap()
        .iter()
        .all(|v| *v == "true"));
    for col in ["phi_diff", "w_diff"] {
        for v in t.column(col).unwrap() {
            assert!(v.parse::<f64>().unwrap() <= 1e-6, "{col} = {v}");
        }
    }
    assert_eq!(t.summary_value("all_identity_ok"), Some("true"));
    assert_eq!(csv_bytes(&s), csv_bytes(&s));
}

#[test]
fn cmc_blowup_sweep_is_bounded() {
    let s = spec(
        StudyKind::BlowupSweep,
        "flat-cmc",
        8,
        StudyParams {
            k: vec![10.0, 100.0, 1000.0, 10000.0],
            ..StudyParams::default()
        },
    );
    let t = run_study(&s).unwrap();
    assert_eq!(t.summary_value("ratio_sup_verdict"), Some("bounded"));
    assert!(
        t.summary_value("ratio_sup_spread")
            .unwrap()
            .parse::<f64>()
            .unwrap()
            <= 1.01
    );
}

#[test]
fn dichotomy_integrability_columns() {
    let s = spec(
        StudyKind::Dichotomy,
        "flat-sin-tau",
        8,
        StudyParams {
            k: vec![10.0, 100.0],
            alpha: vec![0.5, 2.0],
            ..StudyParams::default()
        },
    );
    let t = run_study(&s).unwrap();
    assert_eq!(t.summary_value("alpha_0.5_integrable"), Some("true"));
    assert_eq!(t.summary_value("alpha_2_integrable"), Some("false"));
    assert_eq!(
        t.columns
            .iter()
            .filter(|c| c.starts_with("ratio_alpha_"))
            .count(),
        2
    );
    assert!(t.column("certified").unwrap().iter().all(|v| *v == "true"));
}

#[test]
fn near_cmc_bisection_brackets_the_transition() {
    let s = spec(
        StudyKind::NearCmcBisect,
        "benchmark",
        12,
        StudyParams {
            epsilon: vec![1e-3, 1e5],
            relax: Some(1.0),
            ..StudyParams::default()
        },
    );
    let t = run_study(&s).unwrap();
    assert_eq!(t.summary_value("status"), Some("located"));
    let lo: f64 = t.summary_value("bracket_lo").unwrap().parse().unwrap();
    let hi: f64 = t.summary_value("bracket_hi").unwrap().parse().unwrap();
    assert!(lo < hi && (hi - lo) / hi <= BRACKET_WIDTH);
    // Failed rows carry their error instead of aborting the campaign.
    let errors = t.column("error").unwrap();
    assert!(errors.iter().any(|e| !e.is_empty()));
    assert!(errors.iter().any(|e| e.is_empty()));
}

#[test]
fn continuation_atlas_has_a_row_per_fixture_and_t() {
    let s = spec(
        StudyKind::ContinuationAtlas,
        "benchmark",
        12,
        StudyParams {
            t: vec![0.0, 0.5, 1.0],
            fixtures: vec!["flat-cmc".into()],
            relax: Some(1.0),
            ..StudyParams::default()
        },
    );
    let t = run_study(&s).unwrap();
    assert_eq!(t.rows.len(), 6);
    assert_eq!(t.summary_value("benchmark_outcome"), Some("ConvergedFull"));
    assert_eq!(t.summary_value("flat-cmc_outcome"), Some("ConvergedFull"));
}

#[test]
fn invalid_specs_are_rejected_before_solving() {
    let bad = [
        spec(
            StudyKind::ScalingMatrix,
            "no-such-fixture",
            8,
            StudyParams {
                c: vec![1.0],
                ..StudyParams::default()
            },
        ),
        spec(
            StudyKind::ScalingMatrix,
            "benchmark",
            8,
            StudyParams::default(),
        ),
        spec(
            StudyKind::BlowupSweep,
            "flat-cmc",
            8,
            StudyParams {
                k: vec![0.5],
                ..StudyParams::default()
            },
        ),
        spec(
            StudyKind::NearCmcBisect,
            "benchmark",
            8,
            StudyParams {
                epsilon: vec![1.0],
                ..StudyParams::default()
            },
        ),
        spec(
            StudyKind::FarCmcBisect,
            "positive-yamabe",
            8,
            StudyParams {
                sigma_l2_squared: vec![2.0, 1.0],
                ..StudyParams::default()
            },
        ),
        spec(
            StudyKind::ContinuationAtlas,
            "benchmark",
            4,
            StudyParams {
                t: vec![1.0],
                ..StudyParams::default()
            },
        ),
    ];
    for s in bad {
        assert!(matches!(run_study(&s), Err(StudyError::Spec(_))), "{s:?}");
    }
}

#[test]
fn spec_parses_from_toml_and_rejects_unknown_keys() {
    let text = r#"
kind = "scaling_matrix"
fixture = "benchmark"
n_axis = 8
output = "scaling.csv"
[params]
c = [1.0, 2.0]
"#;
    let s: StudySpec = toml::from_str(text).unwrap();
    assert_eq!(s.kind, StudyKind::ScalingMatrix);
    assert_eq!(s.params.c, vec![1.0, 2.0]);
    assert!(toml::from_str::<StudySpec>(&format!("{text}\nbogus = 1\n")).is_err());
}

#[test]
fn tables_are_written_next_to_each_other() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(
        StudyKind::BlowupSweep,
        "flat-cmc",
        8,
        StudyParams {
            k: vec![10.0, 100.0],
            ..StudyParams::default()
        },
    );
    let (_, out, summary) = run_study_to_files(&s, dir.path()).unwrap();
    assert_eq!(out, dir.path().join("table.csv"));
    assert_eq!(summary, dir.path().join("table_summary.csv"));
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("k,sup_u,ratio_sup,"));
    assert_eq!(text.lines().count(), 3);
}
