//! Fairness-audit toolkit for tabular binary classifiers.
//!
//! The pipeline walks three phases. Design: declare protected attributes,
//! compute the tie-corrected Kendall correlation matrix over all inputs,
//! flag proxy features, and pick a fairness criterion through an explicit
//! decision tree with human overrides. Development: normalize, test
//! representativeness, and train a deterministic logistic baseline.
//! Post-hoc: per-group metrics and gaps, threshold-policy mitigation,
//! false-negative probes, intersectional subgroup scans, drift checks, and
//! SVG visualizations, all aggregated into a canonical JSON report.
//!
//! Every operation is a pure function over immutable inputs; randomized
//! steps draw from a named seeded generator so runs reproduce bit-for-bit.

pub mod audit;
pub mod correlation;
pub mod criterion;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod mitigate;
pub mod model;
pub mod pipeline;
pub mod policy;
pub mod report;
pub mod rng;
pub mod selector;
pub mod svg;
pub mod synth;

pub use criterion::Criterion;
pub use dataset::{ColumnSchema, Dataset, Dtype, Role};
pub use error::{Error, Result};
pub use policy::{GroupRule, ThresholdPolicy};
