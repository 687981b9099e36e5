//! Per-group acceptance rules, possibly randomized.

use crate::criterion::Criterion;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One group's rule: accept at or above `t_hi`, reject below `t_lo`, accept
/// with probability `mix` in between. A deterministic rule has t_lo = t_hi
/// (mix stored as 1). Randomized rules are always evaluated in expectation,
/// never sampled, so verdicts are deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupRule {
    pub t_lo: f64,
    pub t_hi: f64,
    pub mix: f64,
}

impl GroupRule {
    pub fn deterministic(threshold: f64) -> Self {
        Self {
            t_lo: threshold,
            t_hi: threshold,
            mix: 1.0,
        }
    }

    pub fn randomized(t_lo: f64, t_hi: f64, mix: f64) -> Self {
        debug_assert!(t_lo <= t_hi);
        debug_assert!((0.0..=1.0).contains(&mix));
        if t_lo == t_hi {
            Self::deterministic(t_lo)
        } else {
            Self { t_lo, t_hi, mix }
        }
    }

    pub fn is_deterministic(&self) -> bool {
        self.t_lo == self.t_hi
    }

    /// Expected probability of a positive decision for a score.
    pub fn positive_probability(&self, score: f64) -> f64 {
        if score >= self.t_hi {
            1.0
        } else if score < self.t_lo {
            0.0
        } else {
            self.mix
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdPolicy {
    pub per_group: BTreeMap<String, GroupRule>,
    pub criterion: Criterion,
    pub epsilon: f64,
    /// Gaps of the policy on its fitting data, recomputed by the metrics
    /// module rather than trusted from the search.
    pub achieved_gaps: BTreeMap<String, f64>,
    pub achieved_accuracy: f64,
}

impl ThresholdPolicy {
    pub fn rule_for(&self, group: &str) -> Result<&GroupRule> {
        self.per_group
            .get(group)
            .ok_or_else(|| Error::MissingGroupPolicy(group.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        for (group, rule) in &self.per_group {
            if rule.t_lo > rule.t_hi {
                return Err(Error::BadConfig(format!(
                    "group '{group}': t_lo {} exceeds t_hi {}",
                    rule.t_lo, rule.t_hi
                )));
            }
            if !(0.0..=1.0).contains(&rule.mix) {
                return Err(Error::BadConfig(format!(
                    "group '{group}': mix {} outside [0, 1]",
                    rule.mix
                )));
            }
        }
        Ok(())
    }
}

/// Expected positive probability per row under a policy.
pub fn apply_policy(policy: &ThresholdPolicy, scores: &[f64], groups: &[String]) -> Result<Vec<f64>> {
    if scores.len() != groups.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: groups.len(),
        });
    }
    scores
        .iter()
        .zip(groups)
        .map(|(score, group)| Ok(policy.rule_for(group)?.positive_probability(*score)))
        .collect()
}
