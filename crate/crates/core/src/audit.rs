//! Post-hoc assessment: false-negative probing, intersectional subgroup
//! scanning, and drift checks against a baseline report.

use crate::criterion::Criterion;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{ConfusionMatrix, GapReport, GroupMetrics};
use crate::rng::Rng64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub use crate::svg::{render_roc_svg, render_scatter_svg};

/// Wilson interval z for a 95% level; fixed constant by design so estimates
/// are reproducible.
pub const WILSON_Z: f64 = 1.96;

/// Probes below this many outcomes are marked low-confidence.
pub const LOW_CONFIDENCE_N: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbePlan {
    /// Acceptance threshold on the score scale of the inputs.
    pub threshold: f64,
    pub band_lo: f64,
    pub sample_fraction: f64,
    pub seed: u64,
    pub band_size: usize,
    /// Row indices to accept experimentally, ascending.
    pub selected_ids: Vec<usize>,
    pub warning: Option<String>,
}

/// Plan a false-negative probe: sample ceil(fraction * band) rows with
/// scores in [threshold - band_width, threshold) that would normally be
/// rejected, to be accepted experimentally so their true outcomes become
/// observable.
pub fn design_fn_probe(
    scores: &[f64],
    threshold: f64,
    band_width: f64,
    sample_fraction: f64,
    seed: u64,
) -> Result<ProbePlan> {
    if !(sample_fraction > 0.0 && sample_fraction <= 1.0) {
        return Err(Error::BadFraction(sample_fraction));
    }
    if !band_width.is_finite() || band_width <= 0.0 {
        return Err(Error::BadConfig(format!(
            "band_width must be positive; got {band_width}"
        )));
    }
    let band_lo = threshold - band_width;
    let mut band: Vec<usize> = scores
        .iter()
        .enumerate()
        .filter(|(_, s)| **s >= band_lo && **s < threshold)
        .map(|(i, _)| i)
        .collect();
    let band_size = band.len();
    if band_size == 0 {
        return Ok(ProbePlan {
            threshold,
            band_lo,
            sample_fraction,
            seed,
            band_size: 0,
            selected_ids: Vec::new(),
            warning: Some("no scores fall in the probe band".to_string()),
        });
    }
    let take = (sample_fraction * band_size as f64).ceil() as usize;
    let mut rng = Rng64::new(seed);
    rng.shuffle(&mut band);
    let mut selected: Vec<usize> = band.into_iter().take(take).collect();
    selected.sort_unstable();
    Ok(ProbePlan {
        threshold,
        band_lo,
        sample_fraction,
        seed,
        band_size,
        selected_ids: selected,
        warning: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FnRateEstimate {
    pub estimate: f64,
    pub ci95: (f64, f64),
    pub n: usize,
    pub low_confidence: bool,
}

/// Share of positives among probed rows with a Wilson 95% interval.
pub fn estimate_fn_rate(outcomes: &[(usize, u8)]) -> Result<FnRateEstimate> {
    if outcomes.is_empty() {
        return Err(Error::EmptyOutcomes);
    }
    let n = outcomes.len();
    let positives = outcomes.iter().filter(|(_, y)| *y == 1).count();
    let p = positives as f64 / n as f64;
    let z = WILSON_Z;
    let z2 = z * z;
    let nf = n as f64;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let lo = (center - half).max(0.0);
    let hi = (center + half).min(1.0);
    Ok(FnRateEstimate {
        estimate: p,
        ci95: (lo, hi),
        n,
        low_confidence: n < LOW_CONFIDENCE_N,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubgroupFinding {
    /// (attribute, category) pairs defining the subgroup; length = depth.
    pub subgroup: Vec<(String, String)>,
    pub support: usize,
    pub metrics: GroupMetrics,
    pub complement: GroupMetrics,
    /// Largest |subgroup - complement| difference over the criterion's
    /// relevant rates (positive rate for unawareness/parity criteria).
    pub worst_gap_vs_complement: f64,
    pub flagged: bool,
    pub reason: Option<String>,
}

fn confusion_over(rows: &[bool], probs: &[f64], labels: &[u8]) -> (ConfusionMatrix, usize, usize) {
    let mut cm = ConfusionMatrix::default();
    let mut support = 0usize;
    let mut positives = 0usize;
    for (i, include) in rows.iter().enumerate() {
        if !include {
            continue;
        }
        let prob = probs[i];
        if labels[i] == 1 {
            cm.tp += prob;
            cm.fn_ += 1.0 - prob;
            positives += 1;
        } else {
            cm.fp += prob;
            cm.tn += 1.0 - prob;
        }
        support += 1;
    }
    (cm, support, positives)
}

fn metrics_from_confusion(group: String, cm: ConfusionMatrix, support: usize, positives: usize) -> GroupMetrics {
    let negatives = support - positives;
    GroupMetrics {
        group,
        confusion: cm,
        support,
        positive_rate: (cm.tp + cm.fp) / support as f64,
        tpr: (positives > 0).then(|| cm.tp / (cm.tp + cm.fn_)),
        fpr: (negatives > 0).then(|| cm.fp / (cm.fp + cm.tn)),
        base_rate: positives as f64 / support as f64,
    }
}

/// Rates compared for subgroup-vs-complement gaps per criterion.
fn scan_rates(criterion: Criterion) -> &'static [&'static str] {
    match criterion {
        Criterion::Unawareness | Criterion::UnawarenessWithRemoval | Criterion::DemographicParity => {
            &["positive_rate"]
        }
        Criterion::EqualityOfOpportunity => &["tpr"],
        Criterion::EqualizedOdds => &["tpr", "fpr"],
    }
}

fn rate_value(gm: &GroupMetrics, rate: &str) -> Option<f64> {
    match rate {
        "positive_rate" => Some(gm.positive_rate),
        "tpr" => gm.tpr,
        "fpr" => gm.fpr,
        _ => None,
    }
}

/// Enumerate every category tuple over every size-k subset of protected
/// attributes for k = 1..=depth, comparing each subgroup against its
/// complement under the decisions already made (`decision_probs` is the
/// per-row positive probability from whatever policy is being audited).
/// Findings are sorted by worst gap descending; tuples below `min_support`
/// are reported but never flagged.
#[allow(clippy::needless_range_loop)]
pub fn subgroup_scan(
    decision_probs: &[f64],
    labels: &[u8],
    ds: &Dataset,
    criterion: Criterion,
    depth: usize,
    min_support: usize,
    tolerance: f64,
) -> Result<Vec<SubgroupFinding>> {
    let n = ds.n_rows();
    if decision_probs.len() != n || labels.len() != n {
        return Err(Error::LengthMismatch {
            left: decision_probs.len().max(labels.len()),
            right: n,
        });
    }
    let protected = ds.protected_columns();
    if depth == 0 || depth > protected.len() {
        return Err(Error::DepthTooLarge {
            depth,
            available: protected.len(),
        });
    }
    let names: Vec<String> = protected.iter().map(|c| c.name.clone()).collect();
    let labels_per_attr: BTreeMap<String, Vec<String>> = names
        .iter()
        .map(|name| Ok((name.clone(), ds.group_labels(name)?)))
        .collect::<Result<_>>()?;

    let mut findings = Vec::new();
    for k in 1..=depth {
        for subset in subsets(&names, k) {
            let mut tuples: std::collections::BTreeSet<Vec<String>> = Default::default();
            for row in 0..n {
                let tuple: Vec<String> = subset
                    .iter()
                    .map(|attr| labels_per_attr[attr][row].clone())
                    .collect();
                tuples.insert(tuple);
            }
            for tuple in tuples {
                let member: Vec<bool> = (0..n)
                    .map(|row| {
                        subset
                            .iter()
                            .zip(&tuple)
                            .all(|(attr, cat)| &labels_per_attr[attr][row] == cat)
                    })
                    .collect();
                let complement: Vec<bool> = member.iter().map(|m| !m).collect();
                let (cm_in, support, pos_in) = confusion_over(&member, decision_probs, labels);
                let (cm_out, support_out, pos_out) =
                    confusion_over(&complement, decision_probs, labels);
                if support == 0 || support_out == 0 {
                    continue;
                }
                let label: String = subset
                    .iter()
                    .zip(&tuple)
                    .map(|(a, c)| format!("{a}={c}"))
                    .collect::<Vec<_>>()
                    .join(" & ");
                let gm_in = metrics_from_confusion(label.clone(), cm_in, support, pos_in);
                let gm_out = metrics_from_confusion(
                    format!("not({label})"),
                    cm_out,
                    support_out,
                    pos_out,
                );

                let mut worst = 0.0f64;
                let mut comparable = false;
                for rate in scan_rates(criterion) {
                    if let (Some(a), Some(b)) = (rate_value(&gm_in, rate), rate_value(&gm_out, rate)) {
                        worst = worst.max((a - b).abs());
                        comparable = true;
                    }
                }
                let (flagged, reason) = if support < min_support {
                    (false, Some("insufficient support".to_string()))
                } else if !comparable {
                    (false, Some("relevant rates undefined".to_string()))
                } else if worst > tolerance {
                    (true, None)
                } else {
                    (false, None)
                };
                findings.push(SubgroupFinding {
                    subgroup: subset.iter().cloned().zip(tuple).collect(),
                    support,
                    metrics: gm_in,
                    complement: gm_out,
                    worst_gap_vs_complement: worst,
                    flagged,
                    reason,
                });
            }
        }
    }
    findings.sort_by(|a, b| {
        b.worst_gap_vs_complement
            .total_cmp(&a.worst_gap_vs_complement)
            .then_with(|| a.metrics.group.cmp(&b.metrics.group))
    });
    Ok(findings)
}

fn subsets(names: &[String], k: usize) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    fn recurse(
        names: &[String],
        k: usize,
        start: usize,
        current: &mut Vec<String>,
        out: &mut Vec<Vec<String>>,
    ) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..names.len() {
            current.push(names[i].clone());
            recurse(names, k, i + 1, current, out);
            current.pop();
        }
    }
    recurse(names, k, 0, &mut current, &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReassessmentVerdict {
    pub baseline_fingerprint: String,
    pub current_fingerprint: String,
    /// current gap minus baseline gap, per metric present in both reports.
    pub gap_deltas: BTreeMap<String, f64>,
    pub trigger: bool,
    pub reasons: Vec<String>,
}

/// Compare a current gap report against a baseline one computed under the
/// same criterion. Triggers when any |delta| exceeds the tolerance or when
/// groups newly lost a defined metric.
pub fn drift_check(
    baseline: &GapReport,
    baseline_fingerprint: &str,
    current: &GapReport,
    current_fingerprint: &str,
    drift_tolerance: f64,
) -> Result<ReassessmentVerdict> {
    if baseline.criterion != current.criterion {
        return Err(Error::CriterionMismatch {
            baseline: baseline.criterion.to_string(),
            current: current.criterion.to_string(),
        });
    }
    let mut deltas = BTreeMap::new();
    let mut reasons = Vec::new();
    for (metric, baseline_gap) in &baseline.gaps {
        match current.gaps.get(metric) {
            Some(current_gap) => {
                let delta = current_gap - baseline_gap;
                if delta.abs() > drift_tolerance {
                    reasons.push(format!(
                        "{metric} gap moved {baseline_gap} -> {current_gap} (|delta| > {drift_tolerance})"
                    ));
                }
                deltas.insert(metric.clone(), delta);
            }
            None => reasons.push(format!("{metric} gap no longer computable")),
        }
    }
    for metric in current.gaps.keys() {
        if !baseline.gaps.contains_key(metric) {
            deltas.insert(metric.clone(), current.gaps[metric]);
        }
    }
    let baseline_excluded: std::collections::BTreeSet<(&str, &str)> = baseline
        .excluded_groups
        .iter()
        .map(|e| (e.group.as_str(), e.metric.as_str()))
        .collect();
    for e in &current.excluded_groups {
        if !baseline_excluded.contains(&(e.group.as_str(), e.metric.as_str())) {
            reasons.push(format!(
                "group '{}' newly excluded from {} ({})",
                e.group, e.metric, e.reason
            ));
        }
    }
    Ok(ReassessmentVerdict {
        baseline_fingerprint: baseline_fingerprint.to_string(),
        current_fingerprint: current_fingerprint.to_string(),
        gap_deltas: deltas,
        trigger: !reasons.is_empty(),
        reasons,
    })
}
