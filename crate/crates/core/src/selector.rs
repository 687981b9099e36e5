//! Criterion selection as an explicit decision tree.
//!
//! Four nodes, each with a data-derived default and a human override
//! channel; the full trace (evidence, defaults, overrides, sources) is
//! recorded so a review committee can reconstruct exactly why a criterion
//! was chosen. Path logic:
//!
//!   Q1 no  -> unawareness
//!   Q1 yes, Q2 yes -> unawareness_with_removal
//!   Q2 no,  Q3 yes -> demographic_parity
//!   Q3 no,  Q4 no  -> equality_of_opportunity
//!   Q3 no,  Q4 yes -> equalized_odds
//!
//! Q2 and Q4 defaults need a trained-model context (they retrain and refit);
//! without one they are unanswerable and require an override.

use crate::correlation::ProxyFlags;
use crate::criterion::Criterion;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics;
use crate::mitigate;
use crate::model::{self, TrainConfig};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeId {
    #[serde(rename = "Q1_proxies_exist")]
    Q1ProxiesExist,
    #[serde(rename = "Q2_removable_within_tolerance")]
    Q2RemovableWithinTolerance,
    #[serde(rename = "Q3_groups_sufficiently_equal")]
    Q3GroupsSufficientlyEqual,
    #[serde(rename = "Q4_fpr_gap_after_eo")]
    Q4FprGapAfterEo,
}

impl NodeId {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeId::Q1ProxiesExist => "Q1_proxies_exist",
            NodeId::Q2RemovableWithinTolerance => "Q2_removable_within_tolerance",
            NodeId::Q3GroupsSufficientlyEqual => "Q3_groups_sufficiently_equal",
            NodeId::Q4FprGapAfterEo => "Q4_fpr_gap_after_eo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerSource {
    Data,
    Human,
}

mod yes_no {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<bool>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(true) => s.serialize_str("yes"),
            Some(false) => s.serialize_str("no"),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<bool>, D::Error> {
        let raw: Option<String> = Option::deserialize(d)?;
        match raw.as_deref() {
            None => Ok(None),
            Some("yes") => Ok(Some(true)),
            Some("no") => Ok(Some(false)),
            Some(other) => Err(serde::de::Error::custom(format!(
                "expected \"yes\" or \"no\", got \"{other}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeAnswer {
    pub node_id: NodeId,
    /// Data-derived default; None when no model context was available to
    /// compute it (Q2/Q4), in which case an override must be present.
    #[serde(with = "yes_no")]
    pub default_answer: Option<bool>,
    pub evidence: BTreeMap<String, f64>,
    #[serde(rename = "override", with = "yes_no")]
    pub override_answer: Option<bool>,
    pub source: AnswerSource,
}

impl NodeAnswer {
    fn from_default(node_id: NodeId, default: Option<bool>, evidence: BTreeMap<String, f64>, overrides: &BTreeMap<NodeId, bool>) -> Self {
        let override_answer = overrides.get(&node_id).copied();
        Self {
            node_id,
            default_answer: default,
            evidence,
            override_answer,
            source: if override_answer.is_some() {
                AnswerSource::Human
            } else {
                AnswerSource::Data
            },
        }
    }

    /// Override beats default.
    pub fn effective(&self) -> Result<bool> {
        self.override_answer
            .or(self.default_answer)
            .ok_or_else(|| Error::MissingModelContext(self.node_id.as_str().to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectorThresholds {
    /// Proxy-flagging cutoff on |tau|; flagging itself uses strict ">".
    pub tau_threshold: f64,
    /// Q2: max tolerable test-accuracy drop from removing flagged features.
    pub acc_tolerance: f64,
    /// Q3: max tolerable base-rate gap across protected categories.
    pub base_rate_tolerance: f64,
    /// Q4: max tolerable FPR gap after an equal-opportunity fit.
    pub fpr_tolerance: f64,
}

impl Default for SelectorThresholds {
    fn default() -> Self {
        Self {
            tau_threshold: 0.5,
            acc_tolerance: 0.02,
            base_rate_tolerance: 0.05,
            fpr_tolerance: 0.05,
        }
    }
}

impl SelectorThresholds {
    pub fn as_map(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([
            ("tau_threshold".to_string(), self.tau_threshold),
            ("acc_tolerance".to_string(), self.acc_tolerance),
            ("base_rate_tolerance".to_string(), self.base_rate_tolerance),
            ("fpr_tolerance".to_string(), self.fpr_tolerance),
        ])
    }
}

/// Everything Q2 and Q4 need: a train/validation pair, the training config,
/// and the protected attribute used for grouping.
pub struct ModelContext<'a> {
    pub train: &'a Dataset,
    pub validation: &'a Dataset,
    pub train_config: TrainConfig,
    pub group_attribute: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionDecision {
    pub criterion: Criterion,
    /// Root-to-leaf answers in path order.
    pub trace: Vec<NodeAnswer>,
    pub thresholds_used: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum YesNo {
    Yes,
    No,
}

impl YesNo {
    pub fn as_bool(self) -> bool {
        matches!(self, YesNo::Yes)
    }

    pub fn from_bool(b: bool) -> Self {
        if b {
            YesNo::Yes
        } else {
            YesNo::No
        }
    }
}

/// Parse a human-override file: `{"Q3_groups_sufficiently_equal": "no", ...}`.
pub fn parse_overrides(json: &str) -> Result<BTreeMap<NodeId, bool>> {
    let raw: BTreeMap<NodeId, YesNo> = serde_json::from_str(json)?;
    Ok(raw.into_iter().map(|(k, v)| (k, v.as_bool())).collect())
}

/// Walk the tree, computing data defaults for every node on the effective
/// path (overrides included when deciding where the path goes). Only nodes
/// on the path appear in the result.
pub fn evaluate_defaults(
    ds: &Dataset,
    flags: &ProxyFlags,
    ctx: Option<&ModelContext<'_>>,
    overrides: &BTreeMap<NodeId, bool>,
    thresholds: &SelectorThresholds,
) -> Result<Vec<NodeAnswer>> {
    let mut answers = Vec::new();

    // Q1: do proxy correlations exist?
    let max_abs_tau = flags
        .flags
        .iter()
        .map(|f| f.tau.abs())
        .fold(0.0f64, f64::max);
    let q1 = NodeAnswer::from_default(
        NodeId::Q1ProxiesExist,
        Some(!flags.flags.is_empty()),
        BTreeMap::from([
            ("proxy_flag_count".to_string(), flags.flags.len() as f64),
            ("max_abs_tau".to_string(), max_abs_tau),
        ]),
        overrides,
    );
    let q1_yes = q1.effective()?;
    answers.push(q1);
    if !q1_yes {
        return Ok(answers);
    }

    // Q2: are the flagged features removable within the accuracy tolerance?
    let q2 = tolerate_with_override(
        NodeId::Q2RemovableWithinTolerance,
        answer_q2(flags, ctx, overrides, thresholds),
        overrides,
    )?;
    let q2_yes = q2.effective()?;
    answers.push(q2);
    if q2_yes {
        return Ok(answers);
    }

    // Q3: are group base rates sufficiently equal for demographic parity?
    let q3 = answer_q3(ds, overrides, thresholds)?;
    let q3_yes = q3.effective()?;
    answers.push(q3);
    if q3_yes {
        return Ok(answers);
    }

    // Q4: does an FPR gap remain after an equal-opportunity fit?
    let q4 = tolerate_with_override(
        NodeId::Q4FprGapAfterEo,
        answer_q4(ctx, overrides, thresholds),
        overrides,
    )?;
    q4.effective()?;
    answers.push(q4);
    Ok(answers)
}

/// A failing default computation is fatal only when nothing overrides the
/// node; with a human answer on file the node degrades to "no data default".
fn tolerate_with_override(
    node: NodeId,
    computed: Result<NodeAnswer>,
    overrides: &BTreeMap<NodeId, bool>,
) -> Result<NodeAnswer> {
    match computed {
        Ok(answer) => Ok(answer),
        Err(_) if overrides.contains_key(&node) => Ok(NodeAnswer::from_default(
            node,
            None,
            BTreeMap::new(),
            overrides,
        )),
        Err(e) => Err(e),
    }
}

fn majority_accuracy(labels: &[u8]) -> f64 {
    let positives = labels.iter().filter(|&&y| y == 1).count() as f64;
    let rate = positives / labels.len() as f64;
    rate.max(1.0 - rate)
}

fn answer_q2(
    flags: &ProxyFlags,
    ctx: Option<&ModelContext<'_>>,
    overrides: &BTreeMap<NodeId, bool>,
    thresholds: &SelectorThresholds,
) -> Result<NodeAnswer> {
    let node = NodeId::Q2RemovableWithinTolerance;
    let ctx = match ctx {
        Some(c) => c,
        None => {
            let answer = NodeAnswer::from_default(node, None, BTreeMap::new(), overrides);
            answer.effective()?; // MissingModelContext unless overridden
            return Ok(answer);
        }
    };
    let labels = ctx.validation.labels()?;
    let baseline = model::train(ctx.train, ctx.train_config)?;
    let baseline_scores = model::predict_scores(&baseline, ctx.validation)?.scores;
    let acc_with = model::accuracy_at_half(&baseline_scores, &labels);

    let flagged = flags.flagged_features();
    let acc_without = {
        let reduced = ctx.train.drop_columns(&flagged)?;
        match model::train(&reduced, ctx.train_config) {
        Ok(m) => {
            let scores = model::predict_scores(&m, ctx.validation)?.scores;
            model::accuracy_at_half(&scores, &labels)
        }
        // Removing every feature leaves a constant majority predictor.
        Err(Error::NoFeatures) => majority_accuracy(&labels),
        Err(e) => return Err(e),
    }
    };
    let drop = acc_with - acc_without;
    Ok(NodeAnswer::from_default(
        node,
        Some(drop <= thresholds.acc_tolerance),
        BTreeMap::from([
            ("accuracy_with_flagged".to_string(), acc_with),
            ("accuracy_without_flagged".to_string(), acc_without),
            ("accuracy_drop".to_string(), drop),
        ]),
        overrides,
    ))
}

fn answer_q3(
    ds: &Dataset,
    overrides: &BTreeMap<NodeId, bool>,
    thresholds: &SelectorThresholds,
) -> Result<NodeAnswer> {
    let labels = ds.labels()?;
    let mut evidence = BTreeMap::new();
    let mut max_gap = 0.0f64;
    for col in ds.protected_columns() {
        let groups = ds.group_labels(&col.name)?;
        let mut per_cat: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for (g, y) in groups.iter().zip(&labels) {
            let slot = per_cat.entry(g.as_str()).or_default();
            slot.0 += 1;
            slot.1 += (*y == 1) as usize;
        }
        let rates: Vec<f64> = per_cat
            .values()
            .map(|(n, pos)| *pos as f64 / *n as f64)
            .collect();
        let gap = if rates.len() < 2 {
            0.0
        } else {
            let min = rates.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            max - min
        };
        evidence.insert(format!("base_rate_gap:{}", col.name), gap);
        max_gap = max_gap.max(gap);
    }
    evidence.insert("max_base_rate_gap".to_string(), max_gap);
    Ok(NodeAnswer::from_default(
        NodeId::Q3GroupsSufficientlyEqual,
        Some(max_gap <= thresholds.base_rate_tolerance),
        evidence,
        overrides,
    ))
}

fn answer_q4(
    ctx: Option<&ModelContext<'_>>,
    overrides: &BTreeMap<NodeId, bool>,
    thresholds: &SelectorThresholds,
) -> Result<NodeAnswer> {
    let node = NodeId::Q4FprGapAfterEo;
    let ctx = match ctx {
        Some(c) => c,
        None => {
            let answer = NodeAnswer::from_default(node, None, BTreeMap::new(), overrides);
            answer.effective()?;
            return Ok(answer);
        }
    };
    let baseline = model::train(ctx.train, ctx.train_config)?;
    let scores = model::predict_scores(&baseline, ctx.validation)?.scores;
    let labels = ctx.validation.labels()?;
    let groups = ctx.validation.group_labels(&ctx.group_attribute)?;
    let policy = mitigate::fit_thresholds(
        &scores,
        &labels,
        &groups,
        Criterion::EqualityOfOpportunity,
        thresholds.fpr_tolerance,
    )?;
    // The EO policy controls TPR; what FPR gap does it leave behind?
    let gm = metrics::group_metrics(&scores, &labels, &groups, metrics::GroupPolicy::PerGroup(&policy))?;
    let report = metrics::fairness_gaps(&gm, Criterion::EqualizedOdds, thresholds.fpr_tolerance);
    let (tpr_gap, fpr_gap) = match report {
        Ok(r) => (
            r.gaps.get("tpr").copied().unwrap_or(0.0),
            r.gaps.get("fpr").copied(),
        ),
        Err(_) => (0.0, None),
    };
    match fpr_gap {
        Some(fpr_gap) => Ok(NodeAnswer::from_default(
            node,
            Some(fpr_gap > thresholds.fpr_tolerance),
            BTreeMap::from([
                ("tpr_gap_after_eo".to_string(), tpr_gap),
                ("fpr_gap_after_eo".to_string(), fpr_gap),
            ]),
            overrides,
        )),
        None => {
            // FPR undefined for too many groups; only a human can answer.
            let answer = NodeAnswer::from_default(node, None, BTreeMap::new(), overrides);
            answer.effective()?;
            Ok(answer)
        }
    }
}

/// Map a complete answer set onto a criterion. The answers must cover the
/// implied path exactly: missing nodes are `IncompletePath`, answers for
/// nodes off the path are `ContradictoryAnswers`.
pub fn select_criterion(
    answers: &[NodeAnswer],
    thresholds: &SelectorThresholds,
) -> Result<CriterionDecision> {
    let mut by_node: BTreeMap<NodeId, &NodeAnswer> = BTreeMap::new();
    for a in answers {
        if by_node.insert(a.node_id, a).is_some() {
            return Err(Error::ContradictoryAnswers(format!(
                "duplicate answer for {}",
                a.node_id.as_str()
            )));
        }
    }
    let take = |node: NodeId| -> Result<&NodeAnswer> {
        by_node
            .get(&node)
            .copied()
            .ok_or_else(|| Error::IncompletePath(node.as_str().to_string()))
    };

    let mut path = vec![take(NodeId::Q1ProxiesExist)?];
    let criterion = if !path[0].effective()? {
        Criterion::Unawareness
    } else {
        path.push(take(NodeId::Q2RemovableWithinTolerance)?);
        if path[1].effective()? {
            Criterion::UnawarenessWithRemoval
        } else {
            path.push(take(NodeId::Q3GroupsSufficientlyEqual)?);
            if path[2].effective()? {
                Criterion::DemographicParity
            } else {
                path.push(take(NodeId::Q4FprGapAfterEo)?);
                if path[3].effective()? {
                    Criterion::EqualizedOdds
                } else {
                    Criterion::EqualityOfOpportunity
                }
            }
        }
    };

    if by_node.len() != path.len() {
        let on_path: Vec<NodeId> = path.iter().map(|a| a.node_id).collect();
        let spurious: Vec<&str> = by_node
            .keys()
            .filter(|n| !on_path.contains(n))
            .map(|n| n.as_str())
            .collect();
        return Err(Error::ContradictoryAnswers(format!(
            "answers supplied for nodes off the decision path: {}",
            spurious.join(", ")
        )));
    }

    Ok(CriterionDecision {
        criterion,
        trace: path.into_iter().cloned().collect(),
        thresholds_used: thresholds.as_map(),
    })
}

/// Human-readable trace: one line per node, then the selected criterion with
/// its rationale.
pub fn explain(decision: &CriterionDecision) -> String {
    let mut out = String::from("Decision trace:\n");
    for answer in &decision.trace {
        let effective = answer
            .effective()
            .map(|b| if b { "yes" } else { "no" })
            .unwrap_or("unanswered");
        let default = match answer.default_answer {
            Some(true) => "yes",
            Some(false) => "no",
            None => "unanswerable without model context",
        };
        let source = match answer.source {
            AnswerSource::Data => "data",
            AnswerSource::Human => "human",
        };
        let evidence = if answer.evidence.is_empty() {
            String::from("none")
        } else {
            answer
                .evidence
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let override_note = match answer.override_answer {
            Some(true) => ", override: yes",
            Some(false) => ", override: no",
            None => "",
        };
        out.push_str(&format!(
            "  {}: {} (default: {}{}, source: {}; evidence: {})\n",
            answer.node_id.as_str(),
            effective,
            default,
            override_note,
            source,
            evidence
        ));
    }
    let rationale = match decision.criterion {
        Criterion::Unawareness => {
            "no proxy correlations were found, so excluding protected attributes from the inputs suffices"
        }
        Criterion::UnawarenessWithRemoval => {
            "flagged proxy features can be removed without degrading accuracy beyond tolerance, so the model trains without them"
        }
        Criterion::DemographicParity => {
            "group base rates are close enough that equal positive-decision rates across categories are a reasonable target"
        }
        Criterion::EqualityOfOpportunity => {
            "equalizing true positive rates gives qualified candidates the same acceptance chance in every category"
        }
        Criterion::EqualizedOdds => {
            "an equal-opportunity policy leaves a false positive rate gap, so both TPR and FPR are equalized"
        }
    };
    out.push_str(&format!(
        "Selected criterion: {} — {}.\n",
        decision.criterion, rationale
    ));
    let thresholds = decision
        .thresholds_used
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(", ");
    out.push_str(&format!("Thresholds used: {thresholds}\n"));
    out
}
