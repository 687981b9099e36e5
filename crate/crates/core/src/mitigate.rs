//! Post-processing mitigation: fit per-group threshold policies that satisfy
//! the selected criterion while maximizing expected accuracy.
//!
//! Candidate thresholds are the observed distinct scores plus a reject-all
//! sentinel; group metrics are step functions of the threshold, so nothing
//! between candidates matters. Demographic parity and equality of opportunity
//! use deterministic thresholds searched over rate windows, which is exact
//! for any number of groups. Equalized odds needs interior ROC points, so
//! policies there are mixtures of two thresholds with the mixing probability
//! on a 0.01 grid; the two-group search is exhaustive over that space, and
//! three or more groups use a box search anchored at deterministic operating
//! points. An exact LP over ROC hull vertices would replace the mix grid in
//! a later version.

use crate::criterion::Criterion;
use crate::error::{Error, Result};
use crate::metrics::{self, GroupPolicy};
use crate::policy::{GroupRule, ThresholdPolicy};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Shared slack for every gap-feasibility comparison, so the search, the
/// returned policy, and any independent recomputation agree on what "within
/// epsilon" means despite float rounding of rate quotients.
pub const GAP_SLACK: f64 = 1e-12;

/// Mixing probabilities are multiples of 1/MIX_STEPS.
pub const MIX_STEPS: u32 = 100;

/// Distinct-score cap for the equalized-odds pair enumeration. Inputs at or
/// below the cap (every oracle-checked instance) are searched exactly;
/// larger inputs thin candidates to quantiles, keeping the extremes.
const EODDS_CANDIDATE_CAP: usize = 33;
const EODDS_CANDIDATE_CAP_MULTI: usize = 17;

#[derive(Debug, Clone, Copy)]
struct DetPoint {
    threshold: f64,
    tp: f64,
    fp: f64,
    positive_rate: f64,
    tpr: f64,
    fpr: f64,
    correct: f64,
}

#[derive(Debug)]
struct GroupData {
    name: String,
    n_pos: f64,
    n_neg: f64,
    /// Ascending by threshold; last entry is the reject-all sentinel.
    points: Vec<DetPoint>,
}

fn build_groups(
    scores: &[f64],
    labels: &[u8],
    groups: &[String],
    cap: Option<usize>,
) -> Result<Vec<GroupData>> {
    if scores.len() != labels.len() || scores.len() != groups.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len().max(groups.len()),
        });
    }
    let mut by_group: BTreeMap<&str, Vec<(f64, u8)>> = BTreeMap::new();
    for ((s, y), g) in scores.iter().zip(labels).zip(groups) {
        by_group.entry(g.as_str()).or_default().push((*s, *y));
    }
    let mut out = Vec::new();
    for (name, mut rows) in by_group {
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = rows.len();
        let n_pos = rows.iter().filter(|(_, y)| *y == 1).count();
        let n_neg = n - n_pos;

        // Suffix counts at each distinct threshold, ascending.
        let mut points = Vec::new();
        let mut i = 0;
        let mut tp_at_or_above = n_pos; // threshold = min accepts everyone
        let mut fp_at_or_above = n_neg;
        while i < n {
            let threshold = rows[i].0;
            points.push(make_point(
                threshold,
                tp_at_or_above as f64,
                fp_at_or_above as f64,
                n as f64,
                n_pos as f64,
                n_neg as f64,
            ));
            while i < n && rows[i].0 == threshold {
                if rows[i].1 == 1 {
                    tp_at_or_above -= 1;
                } else {
                    fp_at_or_above -= 1;
                }
                i += 1;
            }
        }
        // Reject-all sentinel just above the max score.
        let sentinel = rows[n - 1].0 + 1.0;
        points.push(make_point(sentinel, 0.0, 0.0, n as f64, n_pos as f64, n_neg as f64));

        if let Some(cap) = cap {
            points = thin_points(points, cap);
        }
        out.push(GroupData {
            name: name.to_string(),
            n_pos: n_pos as f64,
            n_neg: n_neg as f64,
            points,
        });
    }
    Ok(out)
}

fn make_point(threshold: f64, tp: f64, fp: f64, n: f64, n_pos: f64, n_neg: f64) -> DetPoint {
    DetPoint {
        threshold,
        tp,
        fp,
        positive_rate: (tp + fp) / n,
        tpr: if n_pos > 0.0 { tp / n_pos } else { 0.0 },
        fpr: if n_neg > 0.0 { fp / n_neg } else { 0.0 },
        correct: tp + n_neg - fp,
    }
}

/// Quantile thinning that always keeps the accept-all point and the sentinel.
fn thin_points(points: Vec<DetPoint>, cap: usize) -> Vec<DetPoint> {
    if points.len() <= cap.max(2) {
        return points;
    }
    let last = points.len() - 1;
    let mut kept = Vec::with_capacity(cap);
    for k in 0..cap {
        let idx = (k as f64 * last as f64 / (cap - 1) as f64).round() as usize;
        kept.push(points[idx]);
    }
    kept.dedup_by(|a, b| a.threshold == b.threshold);
    kept
}

/// Search candidate: one rule per group plus its pooled correct count and
/// worst criterion gap. Ordered by accuracy, then smallest gap, then lowest
/// thresholds (ties break toward acceptance), then lexical group order.
#[derive(Debug, Clone)]
struct Candidate {
    rules: Vec<GroupRule>,
    correct: f64,
    worst_gap: f64,
}

fn candidate_better(a: &Candidate, b: &Candidate) -> bool {
    if a.correct != b.correct {
        return a.correct > b.correct;
    }
    if a.worst_gap != b.worst_gap {
        return a.worst_gap < b.worst_gap;
    }
    for (ra, rb) in a.rules.iter().zip(&b.rules) {
        if ra.t_hi != rb.t_hi {
            return ra.t_hi < rb.t_hi;
        }
        if ra.t_lo != rb.t_lo {
            return ra.t_lo < rb.t_lo;
        }
        if ra.mix != rb.mix {
            return ra.mix > rb.mix;
        }
    }
    false
}

fn spread(values: &[f64]) -> f64 {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max - min
}

/// Single-rate criteria (demographic parity on positive rate, equality of
/// opportunity on TPR): exact window search over deterministic thresholds.
/// Any feasible assignment has its minimum rate at some group's candidate
/// rate, so anchoring windows there loses nothing.
fn fit_single_rate(
    groups: &[GroupData],
    rate_of: impl Fn(&DetPoint) -> f64,
    epsilon: f64,
) -> std::result::Result<Candidate, f64> {
    let mut anchors: Vec<f64> = groups
        .iter()
        .flat_map(|g| g.points.iter().map(&rate_of))
        .collect();
    anchors.sort_by(f64::total_cmp);
    anchors.dedup();

    let mut best: Option<Candidate> = None;
    let mut best_gap_seen = f64::INFINITY;
    for &anchor in &anchors {
        let hi = anchor + epsilon + 2.0 * GAP_SLACK;
        let mut rules = Vec::with_capacity(groups.len());
        let mut rates = Vec::with_capacity(groups.len());
        let mut correct = 0.0;
        let mut feasible = true;
        for g in groups {
            let mut chosen: Option<&DetPoint> = None;
            for p in &g.points {
                let r = rate_of(p);
                if r < anchor || r > hi {
                    continue;
                }
                let better = match chosen {
                    None => true,
                    Some(c) => {
                        p.correct > c.correct
                            || (p.correct == c.correct && p.threshold < c.threshold)
                    }
                };
                if better {
                    chosen = Some(p);
                }
            }
            match chosen {
                Some(p) => {
                    rules.push(GroupRule::deterministic(p.threshold));
                    rates.push(rate_of(p));
                    correct += p.correct;
                }
                None => {
                    feasible = false;
                    break;
                }
            }
        }
        if !feasible {
            continue;
        }
        let gap = spread(&rates);
        best_gap_seen = best_gap_seen.min(gap);
        if gap > epsilon + GAP_SLACK {
            continue;
        }
        let candidate = Candidate {
            rules,
            correct,
            worst_gap: gap,
        };
        if best.as_ref().is_none_or(|b| candidate_better(&candidate, b)) {
            best = Some(candidate);
        }
    }
    best.ok_or(best_gap_seen)
}

#[derive(Debug, Clone, Copy)]
struct MixPoint {
    tpr: f64,
    fpr: f64,
    correct: f64,
    rule: GroupRule,
}

fn mix_point(lo: &DetPoint, hi: &DetPoint, mix: f64, g: &GroupData) -> MixPoint {
    // Decisions are a mix-weighted blend of the two deterministic rules, so
    // every statistic interpolates linearly between them.
    let tp = hi.tp + mix * (lo.tp - hi.tp);
    let fp = hi.fp + mix * (lo.fp - hi.fp);
    MixPoint {
        tpr: if g.n_pos > 0.0 { tp / g.n_pos } else { 0.0 },
        fpr: if g.n_neg > 0.0 { fp / g.n_neg } else { 0.0 },
        correct: tp + g.n_neg - fp,
        rule: GroupRule::randomized(lo.threshold, hi.threshold, mix),
    }
}

fn enumerate_mixtures(g: &GroupData) -> Vec<MixPoint> {
    let mut dedup: std::collections::HashMap<(u64, u64), MixPoint> = Default::default();
    let mut push = |p: MixPoint| {
        let key = (p.tpr.to_bits(), p.fpr.to_bits());
        match dedup.entry(key) {
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(p);
            }
            std::collections::hash_map::Entry::Occupied(mut e) => {
                let cur = e.get();
                let better = p.correct > cur.correct
                    || (p.correct == cur.correct
                        && (p.rule.t_hi, p.rule.t_lo).partial_cmp(&(cur.rule.t_hi, cur.rule.t_lo))
                            == Some(std::cmp::Ordering::Less));
                if better {
                    e.insert(p);
                }
            }
        }
    };
    for p in &g.points {
        push(MixPoint {
            tpr: p.tpr,
            fpr: p.fpr,
            correct: p.correct,
            rule: GroupRule::deterministic(p.threshold),
        });
    }
    for i in 0..g.points.len() {
        for j in (i + 1)..g.points.len() {
            let (lo, hi) = (&g.points[i], &g.points[j]);
            for step in 1..MIX_STEPS {
                let mix = step as f64 / MIX_STEPS as f64;
                push(mix_point(lo, hi, mix, g));
            }
        }
    }
    let mut points: Vec<MixPoint> = dedup.into_values().collect();
    points.sort_by(|a, b| {
        a.tpr
            .total_cmp(&b.tpr)
            .then(a.fpr.total_cmp(&b.fpr))
            .then(a.rule.t_hi.total_cmp(&b.rule.t_hi))
            .then(a.rule.t_lo.total_cmp(&b.rule.t_lo))
    });
    points
}

/// Exhaustive two-group equalized-odds search over mixture policies:
/// for every point of the first group, scan the second group's points inside
/// the TPR window and keep the best FPR-compatible partner.
fn fit_eodds_two_groups(groups: &[GroupData], epsilon: f64) -> std::result::Result<Candidate, f64> {
    let pa = enumerate_mixtures(&groups[0]);
    let pb = enumerate_mixtures(&groups[1]);
    let window = epsilon + GAP_SLACK;

    let mut best: Option<Candidate> = None;
    let mut best_gap_seen = f64::INFINITY;
    for a in &pa {
        let lo = pb.partition_point(|p| p.tpr < a.tpr - window);
        let hi = pb.partition_point(|p| p.tpr <= a.tpr + window);
        let mut partner: Option<&MixPoint> = None;
        for b in &pb[lo..hi] {
            let gap = (a.tpr - b.tpr).abs().max((a.fpr - b.fpr).abs());
            best_gap_seen = best_gap_seen.min(gap);
            if (a.fpr - b.fpr).abs() > window {
                continue;
            }
            let better = match partner {
                None => true,
                Some(cur) => {
                    b.correct > cur.correct
                        || (b.correct == cur.correct
                            && (b.rule.t_hi, b.rule.t_lo, -b.rule.mix)
                                .partial_cmp(&(cur.rule.t_hi, cur.rule.t_lo, -cur.rule.mix))
                                == Some(std::cmp::Ordering::Less))
                }
            };
            if better {
                partner = Some(b);
            }
        }
        if let Some(b) = partner {
            let candidate = Candidate {
                rules: vec![a.rule, b.rule],
                correct: a.correct + b.correct,
                worst_gap: (a.tpr - b.tpr).abs().max((a.fpr - b.fpr).abs()),
            };
            if best.as_ref().is_none_or(|cur| candidate_better(&candidate, cur)) {
                best = Some(candidate);
            }
        }
    }
    best.ok_or(best_gap_seen)
}

/// Equalized odds for three or more groups: boxes anchored at deterministic
/// operating points; inside a box each group picks its best mixture
/// analytically (the objective is linear in the mixing probability, so only
/// the clipped interval's grid endpoints matter). Optimal within the anchor
/// set, which is what keeps the search tractable.
fn fit_eodds_multi(groups: &[GroupData], epsilon: f64) -> std::result::Result<Candidate, f64> {
    let window = epsilon + GAP_SLACK;
    let mut anchors_t: Vec<f64> = groups
        .iter()
        .flat_map(|g| g.points.iter().map(|p| p.tpr))
        .collect();
    anchors_t.sort_by(f64::total_cmp);
    anchors_t.dedup();
    let mut anchors_f: Vec<f64> = groups
        .iter()
        .flat_map(|g| g.points.iter().map(|p| p.fpr))
        .collect();
    anchors_f.sort_by(f64::total_cmp);
    anchors_f.dedup();

    let mut best: Option<Candidate> = None;
    let mut best_gap_seen = f64::INFINITY;
    for &t0 in &anchors_t {
        for &f0 in &anchors_f {
            let t_box = (t0, t0 + window);
            let f_box = (f0, f0 + window);
            let mut rules = Vec::with_capacity(groups.len());
            let mut tprs = Vec::with_capacity(groups.len());
            let mut fprs = Vec::with_capacity(groups.len());
            let mut correct = 0.0;
            let mut feasible = true;
            for g in groups {
                match best_in_box(g, t_box, f_box) {
                    Some(p) => {
                        rules.push(p.rule);
                        tprs.push(p.tpr);
                        fprs.push(p.fpr);
                        correct += p.correct;
                    }
                    None => {
                        feasible = false;
                        break;
                    }
                }
            }
            if !feasible {
                continue;
            }
            let gap = spread(&tprs).max(spread(&fprs));
            best_gap_seen = best_gap_seen.min(gap);
            if gap > epsilon + GAP_SLACK {
                continue;
            }
            let candidate = Candidate {
                rules,
                correct,
                worst_gap: gap,
            };
            if best.as_ref().is_none_or(|cur| candidate_better(&candidate, cur)) {
                best = Some(candidate);
            }
        }
    }
    best.ok_or(best_gap_seen)
}

fn best_in_box(g: &GroupData, t_box: (f64, f64), f_box: (f64, f64)) -> Option<MixPoint> {
    let mut best: Option<MixPoint> = None;
    let mut consider = |p: MixPoint| {
        if p.tpr < t_box.0 || p.tpr > t_box.1 || p.fpr < f_box.0 || p.fpr > f_box.1 {
            return;
        }
        let better = match &best {
            None => true,
            Some(cur) => {
                p.correct > cur.correct
                    || (p.correct == cur.correct
                        && (p.rule.t_hi, p.rule.t_lo, -p.rule.mix)
                            .partial_cmp(&(cur.rule.t_hi, cur.rule.t_lo, -cur.rule.mix))
                            == Some(std::cmp::Ordering::Less))
            }
        };
        if better {
            best = Some(p);
        }
    };

    for p in &g.points {
        consider(MixPoint {
            tpr: p.tpr,
            fpr: p.fpr,
            correct: p.correct,
            rule: GroupRule::deterministic(p.threshold),
        });
    }
    for i in 0..g.points.len() {
        for j in (i + 1)..g.points.len() {
            let (lo, hi) = (&g.points[i], &g.points[j]);
            // Feasible mix interval from the four box constraints; each is
            // linear in mix: value(m) = hi + m * (lo - hi).
            let mut m_lo = 0.0f64;
            let mut m_hi = 1.0f64;
            for (vl, vh, bounds) in [
                (lo.tpr, hi.tpr, t_box),
                (lo.fpr, hi.fpr, f_box),
            ] {
                let delta = vl - vh;
                for (bound, at_least) in [(bounds.0, true), (bounds.1, false)] {
                    // vh + m*delta >= bound (or <=)
                    if delta == 0.0 {
                        let ok = if at_least { vh >= bound } else { vh <= bound };
                        if !ok {
                            m_lo = 1.0;
                            m_hi = 0.0;
                        }
                        continue;
                    }
                    let m_star = (bound - vh) / delta;
                    let lower_bound = (delta > 0.0) == at_least;
                    if lower_bound {
                        m_lo = m_lo.max(m_star);
                    } else {
                        m_hi = m_hi.min(m_star);
                    }
                }
            }
            if m_lo > m_hi {
                continue;
            }
            let step_lo = ((m_lo * MIX_STEPS as f64) - 1e-9).ceil().max(0.0) as u32;
            let step_hi = ((m_hi * MIX_STEPS as f64) + 1e-9).floor().min(MIX_STEPS as f64) as u32;
            if step_lo > step_hi {
                continue;
            }
            for step in [step_lo, step_hi] {
                let mix = step as f64 / MIX_STEPS as f64;
                consider(mix_point(lo, hi, mix, g));
            }
        }
    }
    best
}

/// Fit a policy for the criterion at tolerance epsilon.
///
/// Unawareness criteria get the single shared threshold that maximizes
/// accuracy. The constrained criteria always admit the trivial all-negative
/// policy, so `Infeasible` cannot occur for them; it is reported if a future
/// criterion breaks that property.
pub fn fit_thresholds(
    scores: &[f64],
    labels: &[u8],
    groups: &[String],
    criterion: Criterion,
    epsilon: f64,
) -> Result<ThresholdPolicy> {
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::BadConfig(format!("epsilon must be >= 0; got {epsilon}")));
    }
    let needs_positives = matches!(
        criterion,
        Criterion::EqualityOfOpportunity | Criterion::EqualizedOdds
    );
    let cap = if criterion == Criterion::EqualizedOdds {
        let distinct_groups: std::collections::BTreeSet<&String> = groups.iter().collect();
        if distinct_groups.len() > 2 {
            Some(EODDS_CANDIDATE_CAP_MULTI)
        } else {
            Some(EODDS_CANDIDATE_CAP)
        }
    } else {
        None
    };
    let group_data = build_groups(scores, labels, groups, cap)?;
    if group_data.len() < 2 && criterion.is_constrained() {
        return Err(Error::TooFewGroups(group_data.len()));
    }
    if needs_positives {
        for g in &group_data {
            if g.n_pos == 0.0 {
                return Err(Error::GroupWithoutPositives(g.name.clone()));
            }
        }
    }

    let searched = match criterion {
        Criterion::Unawareness | Criterion::UnawarenessWithRemoval => {
            Ok(fit_uniform(&group_data))
        }
        Criterion::DemographicParity => {
            fit_single_rate(&group_data, |p| p.positive_rate, epsilon)
        }
        Criterion::EqualityOfOpportunity => fit_single_rate(&group_data, |p| p.tpr, epsilon),
        Criterion::EqualizedOdds => {
            if group_data.len() == 2 {
                fit_eodds_two_groups(&group_data, epsilon)
            } else {
                fit_eodds_multi(&group_data, epsilon)
            }
        }
    };
    let candidate = searched.map_err(|best_gap| Error::Infeasible {
        epsilon,
        best_gap,
    })?;

    let per_group: BTreeMap<String, GroupRule> = group_data
        .iter()
        .map(|g| g.name.clone())
        .zip(candidate.rules.iter().copied())
        .collect();
    let mut policy = ThresholdPolicy {
        per_group,
        criterion,
        epsilon,
        achieved_gaps: BTreeMap::new(),
        achieved_accuracy: 0.0,
    };
    // Recompute achieved numbers through the metrics module rather than
    // trusting the search arithmetic.
    let gm = metrics::group_metrics(scores, labels, groups, GroupPolicy::PerGroup(&policy))?;
    let total: f64 = gm.iter().map(|g| g.confusion.total()).sum();
    let correct: f64 = gm.iter().map(|g| g.confusion.tp + g.confusion.tn).sum();
    policy.achieved_accuracy = correct / total;
    let mut insert_gap = |name: &str, values: Vec<f64>| {
        if values.len() >= 2 {
            policy.achieved_gaps.insert(name.to_string(), spread(&values));
        }
    };
    insert_gap("positive_rate", gm.iter().map(|g| g.positive_rate).collect());
    insert_gap("tpr", gm.iter().filter_map(|g| g.tpr).collect());
    insert_gap("fpr", gm.iter().filter_map(|g| g.fpr).collect());
    Ok(policy)
}

fn fit_uniform(groups: &[GroupData]) -> Candidate {
    // Shared threshold over the union of candidates.
    let mut thresholds: Vec<f64> = groups
        .iter()
        .flat_map(|g| g.points.iter().map(|p| p.threshold))
        .collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let mut best_t = thresholds[0];
    let mut best_correct = f64::NEG_INFINITY;
    for &t in &thresholds {
        let correct: f64 = groups
            .iter()
            .map(|g| {
                // "accept score >= t" matches the first candidate at or
                // above t; past the sentinel it rejects everything.
                let idx = g.points.partition_point(|p| p.threshold < t);
                g.points
                    .get(idx)
                    .unwrap_or_else(|| g.points.last().expect("sentinel"))
                    .correct
            })
            .sum();
        if correct > best_correct || (correct == best_correct && t < best_t) {
            best_correct = correct;
            best_t = t;
        }
    }
    Candidate {
        rules: vec![GroupRule::deterministic(best_t); groups.len()],
        correct: best_correct,
        worst_gap: 0.0,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontierPoint {
    pub epsilon: f64,
    pub best_accuracy: Option<f64>,
    pub achieved_gaps: BTreeMap<String, f64>,
    pub error: Option<String>,
}

/// Fit at each epsilon; per-point failures are recorded, not fatal.
pub fn accuracy_fairness_frontier(
    scores: &[f64],
    labels: &[u8],
    groups: &[String],
    criterion: Criterion,
    epsilon_grid: &[f64],
) -> Vec<FrontierPoint> {
    epsilon_grid
        .iter()
        .map(|&epsilon| match fit_thresholds(scores, labels, groups, criterion, epsilon) {
            Ok(policy) => FrontierPoint {
                epsilon,
                best_accuracy: Some(policy.achieved_accuracy),
                achieved_gaps: policy.achieved_gaps,
                error: None,
            },
            Err(e) => FrontierPoint {
                epsilon,
                best_accuracy: None,
                achieved_gaps: BTreeMap::new(),
                error: Some(e.to_string()),
            },
        })
        .collect()
}

pub use crate::policy::apply_policy;

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parity_example_two_groups() {
        let scores = vec![0.9, 0.6, 0.3, 0.8, 0.7, 0.2];
        let labels = vec![1, 0, 0, 1, 0, 0];
        let groups = strings(&["A", "A", "A", "B", "B", "B"]);
        let policy =
            fit_thresholds(&scores, &labels, &groups, Criterion::DemographicParity, 0.0).unwrap();
        assert_eq!(policy.per_group["A"].t_hi, 0.9);
        assert_eq!(policy.per_group["B"].t_hi, 0.8);
        assert_eq!(policy.achieved_accuracy, 1.0);
        assert_eq!(policy.achieved_gaps["positive_rate"], 0.0);
    }

    #[test]
    fn identical_groups_share_threshold() {
        let scores = vec![0.9, 0.6, 0.3, 0.9, 0.6, 0.3];
        let labels = vec![1, 1, 0, 1, 1, 0];
        let groups = strings(&["A", "A", "A", "B", "B", "B"]);
        let policy =
            fit_thresholds(&scores, &labels, &groups, Criterion::DemographicParity, 0.0).unwrap();
        assert_eq!(policy.per_group["A"], policy.per_group["B"]);
        assert_eq!(policy.achieved_accuracy, 1.0);
    }

    #[test]
    fn eodds_disjoint_rankings_fall_back_to_trivial() {
        // A ranks its positives above its negatives, B exactly inverted, so
        // the achievable regions touch only along the chance diagonal. At
        // epsilon = 0 the best shared operating points are the trivial ones
        // and accuracy is max(base rate, 1 - base rate) of the pool.
        let scores = vec![0.9, 0.8, 0.1, 0.9, 0.8, 0.1];
        let labels = vec![1, 1, 0, 0, 0, 1];
        let groups = strings(&["A", "A", "A", "B", "B", "B"]);
        let policy =
            fit_thresholds(&scores, &labels, &groups, Criterion::EqualizedOdds, 0.0).unwrap();
        assert!((policy.achieved_gaps["tpr"]).abs() <= 1e-12);
        assert!((policy.achieved_gaps["fpr"]).abs() <= 1e-12);
        assert!((policy.achieved_accuracy - 0.5).abs() < 1e-12);
        // ties break toward acceptance: both groups get the accept-all rule
        for rule in policy.per_group.values() {
            assert!(rule.is_deterministic());
            assert_eq!(rule.t_hi, 0.1);
        }
    }

    #[test]
    fn eo_requires_positives_per_group() {
        let scores = vec![0.9, 0.1, 0.8, 0.2];
        let labels = vec![1, 0, 0, 0];
        let groups = strings(&["A", "A", "B", "B"]);
        let err = fit_thresholds(
            &scores,
            &labels,
            &groups,
            Criterion::EqualityOfOpportunity,
            0.1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::GroupWithoutPositives(g) if g == "B"));
    }

    #[test]
    fn unawareness_unconstrained_maximizes_accuracy() {
        let scores = vec![0.9, 0.7, 0.4, 0.2, 0.8, 0.1];
        let labels = vec![1, 1, 0, 0, 1, 0];
        let groups = strings(&["A", "A", "A", "B", "B", "B"]);
        let policy = fit_thresholds(&scores, &labels, &groups, Criterion::Unawareness, 0.0).unwrap();
        let rules: Vec<&GroupRule> = policy.per_group.values().collect();
        assert_eq!(rules[0], rules[1]);
        assert_eq!(policy.achieved_accuracy, 1.0);
    }

    #[test]
    fn frontier_shapes_and_monotonicity() {
        let mut rng = crate::rng::Rng64::new(77);
        let n = 60;
        let scores: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
        let labels: Vec<u8> = scores.iter().map(|s| rng.bernoulli(*s) as u8).collect();
        let groups: Vec<String> = (0..n)
            .map(|i| if i % 2 == 0 { "A".into() } else { "B".into() })
            .collect();
        if labels.iter().all(|&y| y == labels[0]) {
            return; // degenerate draw; other seeds cover this path
        }
        let grid = [0.01, 0.1, 1.0];
        let frontier = accuracy_fairness_frontier(
            &scores,
            &labels,
            &groups,
            Criterion::DemographicParity,
            &grid,
        );
        assert_eq!(frontier.len(), 3);
        let accs: Vec<f64> = frontier.iter().map(|f| f.best_accuracy.unwrap()).collect();
        assert!(accs[0] <= accs[1] + 1e-12);
        assert!(accs[1] <= accs[2] + 1e-12);

        // vacuous constraint matches the unconstrained optimum
        let unconstrained =
            fit_thresholds(&scores, &labels, &groups, Criterion::Unawareness, 0.0).unwrap();
        assert!(accs[2] >= unconstrained.achieved_accuracy - 1e-12);
    }

    #[test]
    fn parity_never_infeasible() {
        let mut rng = crate::rng::Rng64::new(3);
        for trial in 0..50 {
            let n = 4 + (trial % 10);
            let scores: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
            let labels: Vec<u8> = (0..n).map(|_| rng.bernoulli(0.5) as u8).collect();
            let groups: Vec<String> = (0..n)
                .map(|i| if i % 2 == 0 { "A".into() } else { "B".into() })
                .collect();
            let result =
                fit_thresholds(&scores, &labels, &groups, Criterion::DemographicParity, 0.0);
            assert!(result.is_ok(), "trial {trial}: {result:?}");
        }
    }

    #[test]
    fn policy_gaps_within_epsilon_by_metrics_recount() {
        let mut rng = crate::rng::Rng64::new(9);
        for &criterion in &[
            Criterion::DemographicParity,
            Criterion::EqualityOfOpportunity,
            Criterion::EqualizedOdds,
        ] {
            for trial in 0..20 {
                let n = 16;
                let scores: Vec<f64> = (0..n).map(|_| (rng.next_below(10) as f64) / 10.0).collect();
                let mut labels: Vec<u8> = (0..n).map(|_| rng.bernoulli(0.5) as u8).collect();
                // both groups need a positive for EO/EOdds
                labels[0] = 1;
                labels[1] = 1;
                let groups: Vec<String> = (0..n)
                    .map(|i| if i % 2 == 0 { "A".into() } else { "B".into() })
                    .collect();
                let epsilon = [0.0, 0.05, 0.2][trial % 3];
                let policy =
                    fit_thresholds(&scores, &labels, &groups, criterion, epsilon).unwrap();
                for metric in criterion.relevant_gaps() {
                    let gap = policy.achieved_gaps[*metric];
                    assert!(
                        gap <= epsilon + 1e-9,
                        "{criterion} trial {trial}: {metric} gap {gap} > {epsilon}"
                    );
                }
            }
        }
    }
}
