//! End-to-end audit runs: exit codes, reproducibility, report round-trips.

use fairaudit_core::pipeline::{
    self, AuditConfig, EXIT_GAPS_ABOVE_TOLERANCE, EXIT_INFEASIBLE, EXIT_SATISFIED,
};
use fairaudit_core::{audit, report, synth, Criterion};
use std::path::Path;

fn write_fixture(dir: &Path, name: &str, ds: &fairaudit_core::Dataset) -> (String, String) {
    let csv = dir.join(format!("{name}.csv"));
    let schema = dir.join(format!("{name}_schema.json"));
    ds.write_csv_file(&csv).unwrap();
    ds.write_schema_file(&schema).unwrap();
    (
        csv.to_string_lossy().into_owned(),
        schema.to_string_lossy().into_owned(),
    )
}

fn marital_config(dir: &Path, n: usize) -> AuditConfig {
    let ds = synth::gen_gender_marital(n, 42, &Default::default()).unwrap();
    let (dataset, schema) = write_fixture(dir, "marital", &ds);
    AuditConfig {
        dataset,
        schema,
        out_dir: dir.join("out").to_string_lossy().into_owned(),
        seed: 42,
        criterion_override: Some(Criterion::EqualizedOdds),
        group_attribute: Some("gender".to_string()),
        ..Default::default()
    }
}

#[test]
fn equalized_odds_audit_passes_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let config = marital_config(dir.path(), 800);
    let outcome = pipeline::run_audit(&config).unwrap();
    assert_eq!(outcome.exit_code, EXIT_SATISFIED);
    let post = outcome.report.post_mitigation.as_ref().unwrap();
    assert!(post.satisfied);
    assert!(post.gaps["tpr"] <= 0.05 + 1e-9);
    assert!(post.gaps["fpr"] <= 0.05 + 1e-9);
    // the unmitigated model is clearly unfair on this geometry
    assert!(outcome.report.pre_mitigation.gaps.gaps["positive_rate"] > 0.3);
    // artifacts listed and present
    for artifact in &outcome.report.artifacts {
        assert!(
            dir.path().join("out").join(artifact).exists(),
            "missing artifact {artifact}"
        );
    }
    assert!(outcome.report.artifacts.iter().any(|a| a == "scatter.svg"));
    assert!(outcome.report.artifacts.iter().any(|a| a == "correlation_matrix.csv"));
}

#[test]
fn disabled_mitigation_reports_gap_breach() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = marital_config(dir.path(), 400);
    config.mitigation = false;
    let outcome = pipeline::run_audit(&config).unwrap();
    assert_eq!(outcome.exit_code, EXIT_GAPS_ABOVE_TOLERANCE);
    assert_eq!(outcome.report.mitigation_status, "disabled");
    assert!(outcome.report.policy.is_none());
    assert!(outcome.report.post_mitigation.is_none());
}

#[test]
fn group_without_positives_is_infeasible() {
    // every F row has outcome 0: equal opportunity cannot be fit for F
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("gender,score,hired\n");
    for i in 0..60 {
        let gender = if i % 2 == 0 { "F" } else { "M" };
        let hired = if gender == "M" && i % 4 == 1 { 1 } else { 0 };
        let score = (i as f64) / 60.0;
        csv.push_str(&format!("{gender},{score},{hired}\n"));
    }
    let csv_path = dir.path().join("skew.csv");
    std::fs::write(&csv_path, csv).unwrap();
    let schema_path = dir.path().join("skew_schema.json");
    std::fs::write(
        &schema_path,
        r#"[
            {"name": "gender", "role": "protected", "dtype": "categorical"},
            {"name": "score", "role": "feature", "dtype": "numeric"},
            {"name": "hired", "role": "outcome", "dtype": "binary"}
        ]"#,
    )
    .unwrap();
    let config = AuditConfig {
        dataset: csv_path.to_string_lossy().into_owned(),
        schema: schema_path.to_string_lossy().into_owned(),
        out_dir: dir.path().join("out").to_string_lossy().into_owned(),
        criterion_override: Some(Criterion::EqualityOfOpportunity),
        ..Default::default()
    };
    let outcome = pipeline::run_audit(&config).unwrap();
    assert_eq!(outcome.exit_code, EXIT_INFEASIBLE);
    assert!(outcome.report.mitigation_status.starts_with("infeasible"));
    assert!(outcome
        .report
        .pre_mitigation
        .gaps
        .excluded_groups
        .iter()
        .any(|e| e.group == "F" && e.metric == "tpr"));
}

#[test]
fn missing_schema_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = AuditConfig {
        dataset: dir.path().join("none.csv").to_string_lossy().into_owned(),
        schema: dir.path().join("none.json").to_string_lossy().into_owned(),
        out_dir: dir.path().join("out").to_string_lossy().into_owned(),
        ..Default::default()
    };
    assert!(pipeline::run_audit(&config).is_err());
}

#[test]
fn reruns_reproduce_reports_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let config = marital_config(dir.path(), 400);
    let first = pipeline::run_audit(&config).unwrap();
    let second = pipeline::run_audit(&config).unwrap();
    assert_eq!(
        report::comparable_text(&first.report).unwrap(),
        report::comparable_text(&second.report).unwrap()
    );
    // and from the echoed config inside the report
    let echoed = first.report.config_echo.clone();
    let third = pipeline::run_audit(&echoed).unwrap();
    assert_eq!(
        report::comparable_text(&first.report).unwrap(),
        report::comparable_text(&third.report).unwrap()
    );
}

#[test]
fn report_write_read_write_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let config = marital_config(dir.path(), 400);
    let outcome = pipeline::run_audit(&config).unwrap();
    let text1 = std::fs::read_to_string(&outcome.report_path).unwrap();
    let parsed = report::read_report(&outcome.report_path).unwrap();
    let text2 = report::report_to_string(&parsed).unwrap();
    assert_eq!(text1, text2);
    assert!(report::semver_parts(&parsed.report_version).is_some());
}

#[test]
fn unknown_report_fields_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = marital_config(dir.path(), 400);
    let outcome = pipeline::run_audit(&config).unwrap();
    let mut value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&outcome.report_path).unwrap()).unwrap();
    value
        .as_object_mut()
        .unwrap()
        .insert("smuggled".to_string(), serde_json::json!(1));
    let err = report::read_report_str(&value.to_string());
    assert!(err.is_err(), "unknown field accepted");
}

#[test]
fn drift_against_own_baseline_never_triggers() {
    let dir = tempfile::tempdir().unwrap();
    let config = marital_config(dir.path(), 400);
    let outcome = pipeline::run_audit(&config).unwrap();

    // identical report as baseline: no drift
    let gaps = outcome.report.post_mitigation.as_ref().unwrap();
    let verdict = audit::drift_check(
        gaps,
        &outcome.report.dataset_fingerprint,
        gaps,
        &outcome.report.dataset_fingerprint,
        0.05,
    )
    .unwrap();
    assert!(!verdict.trigger);

    // rerun with the baseline wired into the config: still no drift
    let mut again = config.clone();
    again.baseline_report = Some(outcome.report_path.to_string_lossy().into_owned());
    again.out_dir = dir.path().join("out2").to_string_lossy().into_owned();
    let second = pipeline::run_audit(&again).unwrap();
    let re = second.report.reassessment.as_ref().unwrap();
    assert!(!re.trigger, "{:?}", re.reasons);
}

#[test]
fn probe_plan_is_embedded_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = marital_config(dir.path(), 400);
    let a = pipeline::run_audit(&config).unwrap();
    let b = pipeline::run_audit(&config).unwrap();
    assert_eq!(a.report.probe_plan, b.report.probe_plan);
    assert_eq!(a.report.probe_plan.threshold, 0.5);
    assert!((a.report.probe_plan.band_lo - 0.4).abs() < 1e-12);
}
