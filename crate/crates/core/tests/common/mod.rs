//! Independent oracles shared by the integration and acceptance suites.
//! Everything here recomputes expected values from first principles and must
//! stay independent of the implementation paths it checks.

#![allow(dead_code)]

use fairaudit_core::mitigate::{GAP_SLACK, MIX_STEPS};
use fairaudit_core::rng::Rng64;
use fairaudit_core::Criterion;
use std::cmp::Ordering;

/// O(n^2) pair-enumeration tau-b.
pub fn oracle_tau(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    let mut tied_x = 0i64;
    let mut tied_y = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i].total_cmp(&x[j]);
            let dy = y[i].total_cmp(&y[j]);
            if dx == Ordering::Equal {
                tied_x += 1;
            }
            if dy == Ordering::Equal {
                tied_y += 1;
            }
            if dx == Ordering::Equal || dy == Ordering::Equal {
                continue;
            }
            if dx == dy {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let den = ((n0 - tied_x) as f64 * (n0 - tied_y) as f64).sqrt();
    if den == 0.0 {
        return None;
    }
    Some((concordant - discordant) as f64 / den)
}

/// Chi-square CDF by Simpson quadrature with the substitution t = u^2,
/// which removes the k = 1 singularity at the origin.
pub fn chi2_cdf_quadrature(x: f64, k: usize) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    // Gamma(k/2) from Gamma(1/2) = sqrt(pi) and Gamma(1) = 1.
    let mut gamma = if k % 2 == 1 {
        std::f64::consts::PI.sqrt()
    } else {
        1.0
    };
    let mut z = if k % 2 == 1 { 0.5 } else { 1.0 };
    while z + 1.0 <= k as f64 / 2.0 + 1e-12 {
        gamma *= z;
        z += 1.0;
    }
    let norm = 2.0 / (2.0f64.powf(k as f64 / 2.0) * gamma);
    // integrand over u: 2 * u^(k-1) * exp(-u^2 / 2) / norm-denominator
    let f = |u: f64| -> f64 { norm * u.powi(k as i32 - 1) * (-u * u / 2.0).exp() };
    let upper = x.sqrt();
    let steps = 40_000;
    let h = upper / steps as f64;
    let mut sum = f(0.0) + f(upper);
    for i in 1..steps {
        let u = i as f64 * h;
        sum += f(u) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    (sum * h / 3.0).clamp(0.0, 1.0)
}

const SLACK: f64 = GAP_SLACK;

struct BruteGroup {
    n: f64,
    n_pos: f64,
    n_neg: f64,
    /// (threshold, tp, fp) at each distinct score, ascending, plus sentinel.
    dets: Vec<(f64, f64, f64)>,
}

fn brute_group(rows: &[(f64, u8)]) -> BruteGroup {
    let n_pos = rows.iter().filter(|(_, y)| *y == 1).count() as f64;
    let n_neg = rows.len() as f64 - n_pos;
    let mut thresholds: Vec<f64> = rows.iter().map(|(s, _)| *s).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.push(thresholds.last().unwrap() + 1.0);
    let dets = thresholds
        .into_iter()
        .map(|t| {
            let tp = rows.iter().filter(|(s, y)| *s >= t && *y == 1).count() as f64;
            let fp = rows.iter().filter(|(s, y)| *s >= t && *y == 0).count() as f64;
            (t, tp, fp)
        })
        .collect();
    BruteGroup {
        n: rows.len() as f64,
        n_pos,
        n_neg,
        dets,
    }
}

fn split_two_groups(scores: &[f64], labels: &[u8], groups: &[String]) -> Vec<Vec<(f64, u8)>> {
    let mut names: Vec<&String> = groups.iter().collect();
    names.sort();
    names.dedup();
    names
        .iter()
        .map(|name| {
            scores
                .iter()
                .zip(labels)
                .zip(groups)
                .filter(|(_, g)| *g == *name)
                .map(|((s, y), _)| (*s, *y))
                .collect()
        })
        .collect()
}

/// Exhaustive best accuracy over deterministic per-group thresholds under a
/// single-rate constraint.
fn brute_single_rate(
    parts: &[BruteGroup],
    rate: impl Fn(&BruteGroup, (f64, f64, f64)) -> f64,
    epsilon: f64,
) -> Option<f64> {
    assert_eq!(parts.len(), 2);
    let total: f64 = parts.iter().map(|p| p.n).sum();
    let mut best: Option<f64> = None;
    for &a in &parts[0].dets {
        for &b in &parts[1].dets {
            let ra = rate(&parts[0], a);
            let rb = rate(&parts[1], b);
            if (ra - rb).abs() > epsilon + SLACK {
                continue;
            }
            let correct =
                a.1 + (parts[0].n_neg - a.2) + b.1 + (parts[1].n_neg - b.2);
            let acc = correct / total;
            if best.is_none_or(|cur| acc > cur) {
                best = Some(acc);
            }
        }
    }
    best
}

/// All mixture operating points of a group: deterministic thresholds plus
/// two-threshold mixes on the shared grid, deduplicated by (tpr, fpr) with
/// the best expected-correct kept.
fn mixture_points(g: &BruteGroup) -> Vec<(f64, f64, f64)> {
    let mut dedup: std::collections::HashMap<(u64, u64), f64> = Default::default();
    let mut push = |tpr: f64, fpr: f64, correct: f64| {
        let key = (tpr.to_bits(), fpr.to_bits());
        let entry = dedup.entry(key).or_insert(f64::NEG_INFINITY);
        if correct > *entry {
            *entry = correct;
        }
    };
    for &(_, tp, fp) in &g.dets {
        push(tp / g.n_pos, fp / g.n_neg, tp + g.n_neg - fp);
    }
    for i in 0..g.dets.len() {
        for j in (i + 1)..g.dets.len() {
            let (lo, hi) = (g.dets[i], g.dets[j]);
            for step in 1..MIX_STEPS {
                let m = step as f64 / MIX_STEPS as f64;
                let tp = m * lo.1 + (1.0 - m) * hi.1;
                let fp = m * lo.2 + (1.0 - m) * hi.2;
                push(tp / g.n_pos, fp / g.n_neg, tp + g.n_neg - fp);
            }
        }
    }
    dedup
        .into_iter()
        .map(|((t, f), c)| (f64::from_bits(t), f64::from_bits(f), c))
        .collect()
}

fn brute_equalized_odds(parts: &[BruteGroup], epsilon: f64) -> Option<f64> {
    assert_eq!(parts.len(), 2);
    let total: f64 = parts.iter().map(|p| p.n).sum();
    let pa = mixture_points(&parts[0]);
    let mut pb = mixture_points(&parts[1]);
    // scan partners best-first so the first feasible hit is the max
    pb.sort_by(|x, y| y.2.total_cmp(&x.2));
    let mut best: Option<f64> = None;
    for &(tpr_a, fpr_a, correct_a) in &pa {
        for &(tpr_b, fpr_b, correct_b) in &pb {
            if (tpr_a - tpr_b).abs() <= epsilon + SLACK && (fpr_a - fpr_b).abs() <= epsilon + SLACK
            {
                let acc = (correct_a + correct_b) / total;
                if best.is_none_or(|cur| acc > cur) {
                    best = Some(acc);
                }
                break;
            }
        }
    }
    best
}

/// Brute-force optimal accuracy for two-group instances; None = infeasible.
pub fn brute_best_accuracy(
    scores: &[f64],
    labels: &[u8],
    groups: &[String],
    criterion: Criterion,
    epsilon: f64,
) -> Option<f64> {
    let parts: Vec<BruteGroup> = split_two_groups(scores, labels, groups)
        .iter()
        .map(|rows| brute_group(rows))
        .collect();
    match criterion {
        Criterion::DemographicParity => {
            brute_single_rate(&parts, |g, (_, tp, fp)| (tp + fp) / g.n, epsilon)
        }
        Criterion::EqualityOfOpportunity => {
            brute_single_rate(&parts, |g, (_, tp, _)| tp / g.n_pos, epsilon)
        }
        Criterion::EqualizedOdds => brute_equalized_odds(&parts, epsilon),
        _ => panic!("oracle covers constrained criteria only"),
    }
}

/// Random two-group instance with quantized scores (ties on purpose) and at
/// least one positive and one negative in each group.
pub fn random_instance(seed: u64) -> (Vec<f64>, Vec<u8>, Vec<String>) {
    let mut rng = Rng64::new(seed);
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    let mut groups = Vec::new();
    for name in ["A", "B"] {
        let rows = 6 + rng.next_below(7); // 6..=12
        let mut ys: Vec<u8> = (0..rows).map(|_| rng.bernoulli(0.5) as u8).collect();
        ys[0] = 1;
        ys[1] = 0;
        for y in ys {
            scores.push((rng.next_below(10) as f64) / 10.0);
            labels.push(y);
            groups.push(name.to_string());
        }
    }
    (scores, labels, groups)
}
