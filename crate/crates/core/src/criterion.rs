//! The five fairness criteria the decision tree can select.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Protected attributes excluded from the model; no rate constraint.
    Unawareness,
    /// Unawareness plus removal of flagged proxy features.
    UnawarenessWithRemoval,
    /// Equal predicted-positive rates across protected categories.
    DemographicParity,
    /// Equal true positive rates across protected categories.
    EqualityOfOpportunity,
    /// Equal true positive AND false positive rates across categories.
    EqualizedOdds,
}

impl Criterion {
    /// Gap metrics that gate "satisfied" for this criterion. Unawareness
    /// variants constrain nothing; their gaps are informational only.
    pub fn relevant_gaps(self) -> &'static [&'static str] {
        match self {
            Criterion::Unawareness | Criterion::UnawarenessWithRemoval => &[],
            Criterion::DemographicParity => &["positive_rate"],
            Criterion::EqualityOfOpportunity => &["tpr"],
            Criterion::EqualizedOdds => &["tpr", "fpr"],
        }
    }

    pub fn is_constrained(self) -> bool {
        !self.relevant_gaps().is_empty()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Unawareness => "unawareness",
            Criterion::UnawarenessWithRemoval => "unawareness_with_removal",
            Criterion::DemographicParity => "demographic_parity",
            Criterion::EqualityOfOpportunity => "equality_of_opportunity",
            Criterion::EqualizedOdds => "equalized_odds",
        }
    }

    pub const ALL: [Criterion; 5] = [
        Criterion::Unawareness,
        Criterion::UnawarenessWithRemoval,
        Criterion::DemographicParity,
        Criterion::EqualityOfOpportunity,
        Criterion::EqualizedOdds,
    ];
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown criterion '{s}'"))
    }
}
