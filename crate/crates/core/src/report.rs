//! Versioned audit report with canonical JSON serialization.
//!
//! Canonical form: object keys sorted, floats rendered at 17 significant
//! digits (exact f64 round-trip), two-space indentation. Write -> read ->
//! write reproduces identical bytes, and the only run-varying value (the
//! timestamp) is isolated in the single `generated_at` key so golden-file
//! diffs stay clean.

use crate::audit::{ProbePlan, ReassessmentVerdict, SubgroupFinding};
use crate::correlation::ProxyFlags;
use crate::dataset::{ColumnSchema, LoadLog, RepresentativenessReport};
use crate::error::{Error, Result};
use crate::metrics::{GapReport, GroupMetrics};
use crate::pipeline::AuditConfig;
use crate::policy::ThresholdPolicy;
use crate::selector::CriterionDecision;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::Path;

pub const REPORT_VERSION: &str = "1.0.0";

/// 17 significant digits; round-trips every finite f64 exactly.
pub fn fmt_f64_17(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauPair {
    pub a: String,
    pub b: String,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationSummary {
    pub labels: Vec<String>,
    /// Strongest |tau| pairs, descending.
    pub top_pairs: Vec<TauPair>,
    /// Expanded labels whose correlations are undefined (constant columns).
    pub undefined_labels: Vec<String>,
    pub proxy_flags: ProxyFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationBlock {
    pub group_metrics: Vec<GroupMetrics>,
    pub gaps: GapReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditReport {
    pub report_version: String,
    /// Isolated timestamp; everything else is a pure function of the config.
    pub generated_at: String,
    pub rng_algorithm: String,
    pub dataset_fingerprint: String,
    pub schema: Vec<ColumnSchema>,
    pub load_log: LoadLog,
    pub representativeness: Vec<RepresentativenessReport>,
    pub correlation_summary: CorrelationSummary,
    pub decision: CriterionDecision,
    pub pre_mitigation: EvaluationBlock,
    pub mitigation_status: String,
    pub policy: Option<ThresholdPolicy>,
    pub post_mitigation: Option<GapReport>,
    pub subgroup_findings: Vec<SubgroupFinding>,
    pub probe_plan: ProbePlan,
    pub reassessment: Option<ReassessmentVerdict>,
    pub config_echo: AuditConfig,
    pub pipeline_warnings: Vec<String>,
    /// Paths of emitted artifacts, relative to the output directory.
    pub artifacts: Vec<String>,
}

/// Render any JSON value canonically.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(value, 0, &mut out);
    out.push('\n');
    out
}

fn write_value(value: &Value, indent: usize, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                // finite by construction: serde_json rejects NaN/inf
                out.push_str(&fmt_f64_17(n.as_f64().expect("numeric")));
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string serializes"));
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                push_indent(indent + 1, out);
                write_value(item, indent + 1, out);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            push_indent(indent, out);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, key) in keys.iter().enumerate() {
                push_indent(indent + 1, out);
                out.push_str(&serde_json::to_string(key).expect("key serializes"));
                out.push_str(": ");
                write_value(&map[*key], indent + 1, out);
                if i + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            push_indent(indent, out);
            out.push('}');
        }
    }
}

fn push_indent(indent: usize, out: &mut String) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

pub fn report_to_string(report: &AuditReport) -> Result<String> {
    let value = serde_json::to_value(report)?;
    Ok(canonical_json(&value))
}

pub fn write_report(report: &AuditReport, path: &Path) -> Result<()> {
    std::fs::write(path, report_to_string(report)?)?;
    Ok(())
}

/// Strict read: unknown fields anywhere in the document are rejected.
pub fn read_report(path: &Path) -> Result<AuditReport> {
    let text = std::fs::read_to_string(path)?;
    read_report_str(&text)
}

pub fn read_report_str(text: &str) -> Result<AuditReport> {
    let report: AuditReport = serde_json::from_str(text)?;
    if semver_parts(&report.report_version).is_none() {
        return Err(Error::BadConfig(format!(
            "report_version '{}' is not semver",
            report.report_version
        )));
    }
    Ok(report)
}

pub fn semver_parts(version: &str) -> Option<(u64, u64, u64)> {
    let mut parts = version.split('.');
    let major = parts.next()?.parse().ok()?;
    let minor = parts.next()?.parse().ok()?;
    let patch = parts.next()?.parse().ok()?;
    if parts.next().is_some() {
        return None;
    }
    Some((major, minor, patch))
}

/// Canonical text with `generated_at` nulled, for run-to-run comparisons.
pub fn comparable_text(report: &AuditReport) -> Result<String> {
    let mut value = serde_json::to_value(report)?;
    if let Some(obj) = value.as_object_mut() {
        obj.insert("generated_at".to_string(), Value::Null);
    }
    Ok(canonical_json(&value))
}
