//! Confusion matrices, ROC curves, and per-group fairness gaps.
//!
//! Randomized policies are evaluated in expectation: a row contributes its
//! positive probability to the positive-side counts. For deterministic
//! policies this reduces to exact integer counting.

use crate::criterion::Criterion;
use crate::error::{Error, Result};
use crate::policy::ThresholdPolicy;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfusionMatrix {
    pub tp: f64,
    pub fp: f64,
    pub tn: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
}

impl ConfusionMatrix {
    fn add(&mut self, positive_probability: f64, label: u8) {
        if label == 1 {
            self.tp += positive_probability;
            self.fn_ += 1.0 - positive_probability;
        } else {
            self.fp += positive_probability;
            self.tn += 1.0 - positive_probability;
        }
    }

    pub fn total(&self) -> f64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) / self.total()
    }
}

/// Counts with "predict positive iff score >= threshold".
pub fn confusion(scores: &[f64], labels: &[u8], threshold: f64) -> Result<ConfusionMatrix> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (score, label) in scores.iter().zip(labels) {
        cm.add((*score >= threshold) as u8 as f64, *label);
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupMetrics {
    pub group: String,
    pub confusion: ConfusionMatrix,
    pub support: usize,
    /// (tp + fp) / total
    pub positive_rate: f64,
    /// tp / (tp + fn); None when the group has no positive labels.
    pub tpr: Option<f64>,
    /// fp / (fp + tn); None when the group has no negative labels.
    pub fpr: Option<f64>,
    /// Fraction of label-1 rows in the group.
    pub base_rate: f64,
}

/// How decisions are produced when computing group metrics.
#[derive(Debug, Clone, Copy)]
pub enum GroupPolicy<'a> {
    /// One scalar threshold for every group.
    Uniform(f64),
    /// Per-group thresholds keyed by the same labels as `groups`.
    PerGroup(&'a ThresholdPolicy),
}

/// Per-group confusion and rates, ordered by group label.
pub fn group_metrics(
    scores: &[f64],
    labels: &[u8],
    groups: &[String],
    policy: GroupPolicy<'_>,
) -> Result<Vec<GroupMetrics>> {
    if scores.len() != labels.len() || scores.len() != groups.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len().max(groups.len()),
        });
    }
    let mut acc: BTreeMap<&str, (ConfusionMatrix, usize, usize)> = BTreeMap::new();
    for group in groups {
        acc.entry(group.as_str()).or_default();
    }
    // Validate policy coverage before counting anything.
    if let GroupPolicy::PerGroup(p) = policy {
        for group in acc.keys() {
            p.rule_for(group)?;
        }
    }
    for ((score, label), group) in scores.iter().zip(labels).zip(groups) {
        let prob = match policy {
            GroupPolicy::Uniform(t) => (*score >= t) as u8 as f64,
            GroupPolicy::PerGroup(p) => p.rule_for(group)?.positive_probability(*score),
        };
        let slot = acc.get_mut(group.as_str()).expect("prefilled");
        slot.0.add(prob, *label);
        slot.1 += 1;
        slot.2 += (*label == 1) as usize;
    }
    Ok(acc
        .into_iter()
        .map(|(group, (cm, support, positives))| {
            let negatives = support - positives;
            GroupMetrics {
                group: group.to_string(),
                confusion: cm,
                support,
                positive_rate: (cm.tp + cm.fp) / support as f64,
                tpr: (positives > 0).then(|| cm.tp / (cm.tp + cm.fn_)),
                fpr: (negatives > 0).then(|| cm.fp / (cm.fp + cm.tn)),
                base_rate: positives as f64 / support as f64,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcludedGroup {
    pub group: String,
    pub metric: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapReport {
    pub criterion: Criterion,
    pub tolerance: f64,
    /// Max-minus-min across groups with a defined value, for each of
    /// positive_rate / tpr / fpr that has at least two defined groups.
    pub gaps: BTreeMap<String, f64>,
    /// True iff every criterion-relevant gap is within tolerance. For the
    /// unawareness criteria nothing gates this; gaps stay informational.
    pub satisfied: bool,
    pub excluded_groups: Vec<ExcludedGroup>,
}

fn spread(values: &[f64]) -> f64 {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max - min
}

/// Gap summary for a criterion at a tolerance.
///
/// Groups whose relevant rate is undefined (empty denominator) are excluded
/// from that gap and reported, never coerced to 0 or 1.
pub fn fairness_gaps(
    group_metrics: &[GroupMetrics],
    criterion: Criterion,
    tolerance: f64,
) -> Result<GapReport> {
    if group_metrics.len() < 2 {
        return Err(Error::TooFewGroups(group_metrics.len()));
    }

    let mut gaps = BTreeMap::new();
    let mut excluded = Vec::new();

    let positive_rates: Vec<f64> = group_metrics.iter().map(|g| g.positive_rate).collect();
    gaps.insert("positive_rate".to_string(), spread(&positive_rates));

    let mut tprs = Vec::new();
    let mut fprs = Vec::new();
    for g in group_metrics {
        match g.tpr {
            Some(v) => tprs.push(v),
            None => excluded.push(ExcludedGroup {
                group: g.group.clone(),
                metric: "tpr".into(),
                reason: "no positive labels in group".into(),
            }),
        }
        match g.fpr {
            Some(v) => fprs.push(v),
            None => excluded.push(ExcludedGroup {
                group: g.group.clone(),
                metric: "fpr".into(),
                reason: "no negative labels in group".into(),
            }),
        }
    }
    if tprs.len() >= 2 {
        gaps.insert("tpr".to_string(), spread(&tprs));
    }
    if fprs.len() >= 2 {
        gaps.insert("fpr".to_string(), spread(&fprs));
    }

    let mut satisfied = true;
    for metric in criterion.relevant_gaps() {
        match gaps.get(*metric) {
            Some(gap) => {
                if *gap > tolerance {
                    satisfied = false;
                }
            }
            None => {
                // fewer than two groups have this rate defined
                let defined = if *metric == "tpr" { tprs.len() } else { fprs.len() };
                return Err(Error::TooFewGroups(defined));
            }
        }
    }

    Ok(GapReport {
        criterion,
        tolerance,
        gaps,
        satisfied,
        excluded_groups: excluded,
    })
}

/// Like [`fairness_gaps`] but total: gaps that cannot be computed (fewer
/// than two groups with the rate defined) are simply absent, and a missing
/// criterion-relevant gap forces `satisfied = false`. Lets an audit finish
/// and report the deficiency on degenerate data instead of aborting.
pub fn informational_gaps(
    group_metrics: &[GroupMetrics],
    criterion: Criterion,
    tolerance: f64,
) -> GapReport {
    match fairness_gaps(group_metrics, criterion, tolerance) {
        Ok(report) => report,
        Err(_) => {
            let mut gaps = BTreeMap::new();
            let mut excluded = Vec::new();
            if group_metrics.len() >= 2 {
                let rates: Vec<f64> = group_metrics.iter().map(|g| g.positive_rate).collect();
                gaps.insert("positive_rate".to_string(), spread(&rates));
            }
            let mut tprs = Vec::new();
            let mut fprs = Vec::new();
            for g in group_metrics {
                match g.tpr {
                    Some(v) => tprs.push(v),
                    None => excluded.push(ExcludedGroup {
                        group: g.group.clone(),
                        metric: "tpr".into(),
                        reason: "no positive labels in group".into(),
                    }),
                }
                match g.fpr {
                    Some(v) => fprs.push(v),
                    None => excluded.push(ExcludedGroup {
                        group: g.group.clone(),
                        metric: "fpr".into(),
                        reason: "no negative labels in group".into(),
                    }),
                }
            }
            if tprs.len() >= 2 {
                gaps.insert("tpr".to_string(), spread(&tprs));
            }
            if fprs.len() >= 2 {
                gaps.insert("fpr".to_string(), spread(&fprs));
            }
            let satisfied = criterion
                .relevant_gaps()
                .iter()
                .all(|m| gaps.get(*m).is_some_and(|gap| *gap <= tolerance));
            GapReport {
                criterion,
                tolerance,
                gaps,
                satisfied,
                excluded_groups: excluded,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

/// ROC points at every distinct score plus an above-max sentinel, so the
/// curve always starts at (0, 0) and ends at (1, 1) with fpr non-decreasing.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<RocPoint>> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::OneClassOnly);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / negatives as f64,
            tpr: tp as f64 / positives as f64,
            threshold,
        });
    }
    Ok(points)
}

/// Trapezoid area under an ROC curve.
pub fn auc(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
        .sum()
}

pub fn roc_to_csv(points: &[RocPoint]) -> String {
    let mut out = String::from("fpr,tpr,threshold\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.fpr, p.tpr, p.threshold));
    }
    out
}
