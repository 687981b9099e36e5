//! End-to-end audit run: design (proxy matrix, criterion selection),
//! development (normalization, representativeness, baseline model), and
//! post-hoc assessment (gaps, mitigation, subgroup scan, probe plan,
//! optional drift check), emitted as one report plus artifacts.
//!
//! Exit-code contract: 0 = fairness satisfied, 1 = usage/runtime error
//! (surfaced as Err from `run_audit`), 2 = gaps above tolerance,
//! 3 = mitigation infeasible.

use crate::correlation::{self, CorrelationMatrix};
use crate::criterion::Criterion;
use crate::dataset::{
    self, Dataset, MissingPolicy, NormalizeMethod, RepresentativenessReport, Role,
};
use crate::error::{Error, Result};
use crate::metrics::{self, GapReport, GroupPolicy};
use crate::mitigate;
use crate::model::{self, TrainConfig};
use crate::policy::{apply_policy, ThresholdPolicy};
use crate::report::{
    AuditReport, CorrelationSummary, EvaluationBlock, TauPair, REPORT_VERSION,
};
use crate::selector::{self, NodeId, SelectorThresholds, YesNo};
use crate::{audit, rng, svg};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const EXIT_SATISFIED: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_GAPS_ABOVE_TOLERANCE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeChoice {
    None,
    MinMax,
    ZScore,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    /// Acceptance threshold on the model-score scale.
    pub threshold: f64,
    pub band_width: f64,
    pub sample_fraction: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            band_width: 0.1,
            sample_fraction: 0.25,
        }
    }
}

/// Complete, explicit run configuration. The report echoes the resolved
/// struct verbatim; re-running from that echo reproduces the report
/// byte-for-byte apart from the timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditConfig {
    pub dataset: String,
    pub schema: String,
    pub out_dir: String,
    pub report_name: String,
    pub seed: u64,
    pub train_fraction: f64,
    pub missing_policy: MissingPolicy,
    pub normalize: NormalizeChoice,
    pub thresholds: SelectorThresholds,
    /// Mitigation tolerance; also gates "satisfied" for gap reports.
    pub epsilon: f64,
    /// Representativeness test significance level.
    pub alpha: f64,
    pub mitigation: bool,
    /// Forces the decision path to this leaf via human overrides on every
    /// node; mutually exclusive with `node_overrides`.
    pub criterion_override: Option<Criterion>,
    pub node_overrides: BTreeMap<NodeId, YesNo>,
    /// Protected attribute used for policy groups; defaults to the first
    /// protected column in schema order.
    pub group_attribute: Option<String>,
    /// Reference distributions per protected attribute (uniform when absent).
    pub representativeness_reference: BTreeMap<String, BTreeMap<String, f64>>,
    pub subgroup_depth: usize,
    pub subgroup_min_support: usize,
    pub probe: ProbeConfig,
    pub drift_tolerance: f64,
    pub baseline_report: Option<String>,
    pub top_k_correlations: usize,
    /// Scatter axes; defaults to the first two numeric feature columns.
    pub scatter_axes: Option<(String, String)>,
    pub train: TrainConfig,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            dataset: String::new(),
            schema: String::new(),
            out_dir: String::new(),
            report_name: "audit_report.json".to_string(),
            seed: 0,
            train_fraction: 0.7,
            missing_policy: MissingPolicy::Impute,
            normalize: NormalizeChoice::MinMax,
            thresholds: SelectorThresholds::default(),
            epsilon: 0.05,
            alpha: 0.05,
            mitigation: true,
            criterion_override: None,
            node_overrides: BTreeMap::new(),
            group_attribute: None,
            representativeness_reference: BTreeMap::new(),
            subgroup_depth: 2,
            subgroup_min_support: 30,
            probe: ProbeConfig::default(),
            drift_tolerance: 0.05,
            baseline_report: None,
            top_k_correlations: 10,
            scatter_axes: None,
            train: TrainConfig::default(),
        }
    }
}

pub fn load_config(path: &Path) -> Result<AuditConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::BadConfig(format!("cannot read '{}': {e}", path.display())))?;
    let config: AuditConfig = serde_json::from_str(&text)?;
    Ok(config)
}

#[derive(Debug)]
pub struct RunOutcome {
    pub report: AuditReport,
    pub exit_code: i32,
    pub report_path: PathBuf,
}

fn overrides_for_criterion(criterion: Criterion) -> BTreeMap<NodeId, bool> {
    let path: &[(NodeId, bool)] = match criterion {
        Criterion::Unawareness => &[(NodeId::Q1ProxiesExist, false)],
        Criterion::UnawarenessWithRemoval => &[
            (NodeId::Q1ProxiesExist, true),
            (NodeId::Q2RemovableWithinTolerance, true),
        ],
        Criterion::DemographicParity => &[
            (NodeId::Q1ProxiesExist, true),
            (NodeId::Q2RemovableWithinTolerance, false),
            (NodeId::Q3GroupsSufficientlyEqual, true),
        ],
        Criterion::EqualityOfOpportunity => &[
            (NodeId::Q1ProxiesExist, true),
            (NodeId::Q2RemovableWithinTolerance, false),
            (NodeId::Q3GroupsSufficientlyEqual, false),
            (NodeId::Q4FprGapAfterEo, false),
        ],
        Criterion::EqualizedOdds => &[
            (NodeId::Q1ProxiesExist, true),
            (NodeId::Q2RemovableWithinTolerance, false),
            (NodeId::Q3GroupsSufficientlyEqual, false),
            (NodeId::Q4FprGapAfterEo, true),
        ],
    };
    path.iter().copied().collect()
}

fn correlation_summary(
    matrix: &CorrelationMatrix,
    flags: &correlation::ProxyFlags,
    top_k: usize,
) -> CorrelationSummary {
    let mut pairs = Vec::new();
    for i in 0..matrix.labels.len() {
        for j in (i + 1)..matrix.labels.len() {
            if let Some(tau) = matrix.values[i][j] {
                pairs.push(TauPair {
                    a: matrix.labels[i].clone(),
                    b: matrix.labels[j].clone(),
                    tau,
                });
            }
        }
    }
    pairs.sort_by(|x, y| {
        y.tau
            .abs()
            .total_cmp(&x.tau.abs())
            .then(x.a.cmp(&y.a))
            .then(x.b.cmp(&y.b))
    });
    pairs.truncate(top_k);
    let undefined: Vec<String> = matrix
        .labels
        .iter()
        .enumerate()
        .filter(|(i, _)| matrix.values[*i][*i].is_none())
        .map(|(_, l)| l.clone())
        .collect();
    CorrelationSummary {
        labels: matrix.labels.clone(),
        top_pairs: pairs,
        undefined_labels: undefined,
        proxy_flags: flags.clone(),
    }
}

fn numeric_feature_columns(ds: &Dataset) -> Vec<String> {
    ds.schema()
        .iter()
        .filter(|c| c.role == Role::Feature && c.dtype == dataset::Dtype::Numeric)
        .map(|c| c.name.clone())
        .collect()
}

/// Execute the full audit. Errors map to exit code 1 at the CLI boundary;
/// fairness verdicts use 0/2/3 as documented on the module.
pub fn run_audit(config: &AuditConfig) -> Result<RunOutcome> {
    if config.dataset.is_empty() || config.schema.is_empty() || config.out_dir.is_empty() {
        return Err(Error::BadConfig(
            "config requires dataset, schema, and out_dir".into(),
        ));
    }
    let out_dir = PathBuf::from(&config.out_dir);
    std::fs::create_dir_all(&out_dir)?;
    let mut warnings: Vec<String> = Vec::new();
    let mut artifacts: Vec<String> = Vec::new();

    // Ingest.
    let schema = dataset::load_schema_file(Path::new(&config.schema))?;
    let (raw, load_log) = dataset::load_csv(Path::new(&config.dataset), &schema, config.missing_policy)?;
    let fingerprint = raw.fingerprint();

    // Development: normalization, representativeness.
    let mut ds = raw;
    if config.normalize != NormalizeChoice::None {
        let method = match config.normalize {
            NormalizeChoice::MinMax => NormalizeMethod::MinMax,
            NormalizeChoice::ZScore => NormalizeMethod::ZScore,
            NormalizeChoice::None => unreachable!(),
        };
        for column in numeric_feature_columns(&ds) {
            match dataset::normalize(&ds, method, std::slice::from_ref(&column)) {
                Ok(next) => ds = next,
                Err(Error::ConstantColumn(name)) => {
                    warnings.push(format!("column '{name}' is constant; left unnormalized"));
                }
                Err(e) => return Err(e),
            }
        }
    }
    let mut representativeness: Vec<RepresentativenessReport> = Vec::new();
    for col in ds.protected_columns() {
        let reference = config.representativeness_reference.get(&col.name);
        representativeness.push(dataset::representativeness_test(
            &ds,
            &col.name,
            reference,
            config.alpha,
        )?);
    }

    // Design: proxy matrix and flags.
    let matrix = correlation::correlation_matrix(&ds);
    warnings.extend(matrix.warnings.iter().cloned());
    let flags = correlation::flag_proxies(&matrix, ds.schema(), config.thresholds.tau_threshold)?;
    let matrix_path = out_dir.join("correlation_matrix.csv");
    std::fs::write(&matrix_path, matrix.to_csv())?;
    artifacts.push("correlation_matrix.csv".to_string());

    // Split and group attribute.
    let split = dataset::split(&ds, config.train_fraction, config.seed)?;
    warnings.extend(split.warnings.iter().cloned());
    let group_attribute = match &config.group_attribute {
        Some(name) => {
            let col = ds
                .column(name)
                .ok_or_else(|| Error::UnknownAttribute(name.clone()))?
                .0;
            if col.role != Role::Protected {
                return Err(Error::BadConfig(format!(
                    "group_attribute '{name}' is not a protected column"
                )));
            }
            name.clone()
        }
        None => ds
            .protected_columns()
            .first()
            .map(|c| c.name.clone())
            .ok_or_else(|| Error::BadConfig("no protected columns; nothing to audit".into()))?,
    };

    // Criterion selection.
    let overrides = match config.criterion_override {
        Some(criterion) => {
            if !config.node_overrides.is_empty() {
                return Err(Error::BadConfig(
                    "criterion_override and node_overrides are mutually exclusive".into(),
                ));
            }
            overrides_for_criterion(criterion)
        }
        None => config
            .node_overrides
            .iter()
            .map(|(k, v)| (*k, v.as_bool()))
            .collect(),
    };
    let ctx = selector::ModelContext {
        train: &split.train,
        validation: &split.test,
        train_config: config.train,
        group_attribute: group_attribute.clone(),
    };
    let answers = selector::evaluate_defaults(&ds, &flags, Some(&ctx), &overrides, &config.thresholds)?;
    let decision = selector::select_criterion(&answers, &config.thresholds)?;
    let criterion = decision.criterion;

    // Final model per criterion.
    let (train_ds, test_ds) = if criterion == Criterion::UnawarenessWithRemoval {
        let flagged = flags.flagged_features();
        (
            split.train.drop_columns(&flagged)?,
            split.test.drop_columns(&flagged)?,
        )
    } else {
        (split.train.clone(), split.test.clone())
    };
    let final_model = model::train(&train_ds, config.train)?;
    let scored = model::predict_scores(&final_model, &test_ds)?;
    warnings.extend(scored.warnings.iter().cloned());
    let scores = scored.scores;
    let labels = split.test.labels()?;
    let groups = split.test.group_labels(&group_attribute)?;

    // Pre-mitigation evaluation at the 0.5 score threshold. The lenient gap
    // summary keeps degenerate data (a group without positives) auditable;
    // the missing gap shows up as unsatisfied plus an exclusion entry.
    let pre_gm = metrics::group_metrics(&scores, &labels, &groups, GroupPolicy::Uniform(0.5))?;
    let pre_gaps = metrics::informational_gaps(&pre_gm, criterion, config.epsilon);
    let pre_block = EvaluationBlock {
        group_metrics: pre_gm,
        gaps: pre_gaps.clone(),
    };

    // Mitigation.
    let mut mitigation_status;
    let mut policy: Option<ThresholdPolicy> = None;
    let mut post_mitigation: Option<GapReport> = None;
    let mut infeasible = false;
    if config.mitigation {
        match mitigate::fit_thresholds(&scores, &labels, &groups, criterion, config.epsilon) {
            Ok(fitted) => {
                let post_gm = metrics::group_metrics(
                    &scores,
                    &labels,
                    &groups,
                    GroupPolicy::PerGroup(&fitted),
                )?;
                post_mitigation = Some(metrics::informational_gaps(&post_gm, criterion, config.epsilon));
                policy = Some(fitted);
                mitigation_status = "feasible".to_string();
            }
            Err(e @ (Error::Infeasible { .. } | Error::GroupWithoutPositives(_))) => {
                mitigation_status = format!("infeasible: {e}");
                infeasible = true;
            }
            Err(e) => return Err(e),
        }
    } else {
        mitigation_status = "disabled".to_string();
    }

    // Post-hoc: subgroup scan under the decisions actually in force.
    let decision_probs: Vec<f64> = match &policy {
        Some(p) => apply_policy(p, &scores, &groups)?,
        None => scores.iter().map(|s| (*s >= 0.5) as u8 as f64).collect(),
    };
    let available_depth = split.test.protected_columns().len();
    let depth = config.subgroup_depth.min(available_depth).max(1);
    if depth != config.subgroup_depth {
        warnings.push(format!(
            "subgroup depth clamped to {depth} ({available_depth} protected attribute(s))"
        ));
    }
    let subgroup_findings = audit::subgroup_scan(
        &decision_probs,
        &labels,
        &split.test,
        criterion,
        depth,
        config.subgroup_min_support,
        config.epsilon,
    )?;

    // Probe plan for false negatives just under the acceptance threshold.
    let probe_plan = audit::design_fn_probe(
        &scores,
        config.probe.threshold,
        config.probe.band_width,
        config.probe.sample_fraction,
        config.seed,
    )?;
    if let Some(w) = &probe_plan.warning {
        warnings.push(format!("probe: {w}"));
    }

    // Visual artifacts.
    let numeric = numeric_feature_columns(&split.test);
    let axes = match &config.scatter_axes {
        Some((x, y)) => Some((x.clone(), y.clone())),
        None if numeric.len() >= 2 => Some((numeric[0].clone(), numeric[1].clone())),
        None => None,
    };
    if let Some((ref x_axis, ref y_axis)) = axes {
        let combined: Vec<String> = {
            let per_attr: Vec<Vec<String>> = split
                .test
                .protected_columns()
                .iter()
                .map(|c| split.test.group_labels(&c.name))
                .collect::<Result<_>>()?;
            (0..split.test.n_rows())
                .map(|row| {
                    per_attr
                        .iter()
                        .map(|v| v[row].as_str())
                        .collect::<Vec<_>>()
                        .join("|")
                })
                .collect()
        };
        let decisions: Vec<bool> = decision_probs.iter().map(|p| *p >= 0.5).collect();
        match svg::render_scatter_svg(&split.test, x_axis, y_axis, &combined, &decisions) {
            Ok(doc) => {
                std::fs::write(out_dir.join("scatter.svg"), doc)?;
                artifacts.push("scatter.svg".to_string());
            }
            Err(e) => warnings.push(format!("scatter skipped: {e}")),
        }
    }
    let mut curves = Vec::new();
    for category in split.test.categories(&group_attribute)? {
        let idx: Vec<usize> = (0..groups.len()).filter(|&i| groups[i] == category).collect();
        let group_scores: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let group_labels: Vec<u8> = idx.iter().map(|&i| labels[i]).collect();
        match metrics::roc_curve(&group_scores, &group_labels) {
            Ok(points) => {
                let csv_name = format!("roc_{category}.csv");
                std::fs::write(out_dir.join(&csv_name), metrics::roc_to_csv(&points))?;
                artifacts.push(csv_name);
                curves.push((category, points));
            }
            Err(Error::OneClassOnly) => warnings.push(format!(
                "group '{category}' has one label class; ROC skipped"
            )),
            Err(e) => return Err(e),
        }
    }
    if !curves.is_empty() {
        let doc = svg::render_roc_svg(&curves)?;
        std::fs::write(out_dir.join("roc_by_group.svg"), doc)?;
        artifacts.push("roc_by_group.svg".to_string());
    }

    // Reassessment against a baseline report, when configured.
    let reassessment = match &config.baseline_report {
        Some(path) => {
            let baseline = crate::report::read_report(Path::new(path))?;
            let baseline_gaps = baseline
                .post_mitigation
                .as_ref()
                .unwrap_or(&baseline.pre_mitigation.gaps);
            let current_gaps = post_mitigation.as_ref().unwrap_or(&pre_gaps);
            Some(audit::drift_check(
                baseline_gaps,
                &baseline.dataset_fingerprint,
                current_gaps,
                &fingerprint,
                config.drift_tolerance,
            )?)
        }
        None => None,
    };

    let satisfied = match &post_mitigation {
        Some(post) => post.satisfied,
        None => pre_gaps.satisfied,
    };
    let exit_code = if infeasible {
        EXIT_INFEASIBLE
    } else if satisfied {
        EXIT_SATISFIED
    } else {
        EXIT_GAPS_ABOVE_TOLERANCE
    };
    if infeasible {
        mitigation_status.push_str("; pre-mitigation gaps reported");
    }

    let report_name = config.report_name.clone();
    artifacts.push(report_name.clone());
    let report = AuditReport {
        report_version: REPORT_VERSION.to_string(),
        generated_at: chrono::Utc::now().to_rfc3339(),
        rng_algorithm: rng::GENERATOR_NAME.to_string(),
        dataset_fingerprint: fingerprint,
        schema: ds.schema().to_vec(),
        load_log,
        representativeness,
        correlation_summary: correlation_summary(&matrix, &flags, config.top_k_correlations),
        decision,
        pre_mitigation: pre_block,
        mitigation_status,
        policy,
        post_mitigation,
        subgroup_findings,
        probe_plan,
        reassessment,
        config_echo: config.clone(),
        pipeline_warnings: warnings,
        artifacts,
    };
    let report_path = out_dir.join(&report_name);
    crate::report::write_report(&report, &report_path)?;

    Ok(RunOutcome {
        report,
        exit_code,
        report_path,
    })
}
