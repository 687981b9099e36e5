//! Rank correlation over model inputs and protected attributes.
//!
//! The matrix is tau-b (tie-corrected Kendall) computed in O(n log n) per
//! pair via merge-sort inversion counting. Nominal columns have no rank
//! order, so categorical columns expand to one-vs-rest indicators per
//! category and an attribute's proxy score is the max |tau| over its
//! indicators.

use crate::dataset::{ColumnData, ColumnSchema, Dataset, Dtype, Role};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Tau-b between two equal-length vectors.
///
/// tau = (C - D) / sqrt((n0 - n1)(n0 - n2)) with n0 = n(n-1)/2 and n1/n2 the
/// tied-pair counts of x/y. Returns Ok(None) when either vector is constant
/// (the denominator vanishes and the coefficient is undefined).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::TooShort);
    }
    if is_constant(x) || is_constant(y) {
        return Ok(None);
    }

    // Sort by (x, y).
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    // Tied pairs in x and joint ties, from runs of the primary sort.
    let mut tied_x: u64 = 0;
    let mut tied_xy: u64 = 0;
    let mut run_x: u64 = 1;
    let mut run_xy: u64 = 1;
    for w in order.windows(2) {
        let (a, b) = (w[0], w[1]);
        if x[a] == x[b] {
            run_x += 1;
            if y[a] == y[b] {
                run_xy += 1;
            } else {
                tied_xy += pairs(run_xy);
                run_xy = 1;
            }
        } else {
            tied_x += pairs(run_x);
            tied_xy += pairs(run_xy);
            run_x = 1;
            run_xy = 1;
        }
    }
    tied_x += pairs(run_x);
    tied_xy += pairs(run_xy);

    // Merge sort the y sequence, counting swaps (= discordant pairs).
    let mut ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0f64; n];
    let swaps = merge_count(&mut ys, &mut buf);

    // Tied pairs in y, from runs of the fully sorted y.
    let mut tied_y: u64 = 0;
    let mut run_y: u64 = 1;
    for w in ys.windows(2) {
        if w[0] == w[1] {
            run_y += 1;
        } else {
            tied_y += pairs(run_y);
            run_y = 1;
        }
    }
    tied_y += pairs(run_y);

    let n0 = pairs(n as u64);
    // C - D = n0 - n1 - n2 + n3 - 2 * swaps (joint ties added back once).
    let num = n0 as f64 - tied_x as f64 - tied_y as f64 + tied_xy as f64 - 2.0 * swaps as f64;
    let den = ((n0 - tied_x) as f64 * (n0 - tied_y) as f64).sqrt();
    if den == 0.0 {
        return Ok(None);
    }
    Ok(Some((num / den).clamp(-1.0, 1.0)))
}

fn pairs(run: u64) -> u64 {
    run * (run - 1) / 2
}

fn is_constant(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] == w[1])
}

/// Bottom-up merge sort counting the number of exchanged pairs.
fn merge_count(xs: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = xs.len();
    let mut swaps: u64 = 0;
    let mut width = 1;
    while width < n {
        let mut lo = 0;
        while lo < n {
            let mid = usize::min(lo + width, n);
            let hi = usize::min(lo + 2 * width, n);
            if mid < hi {
                swaps += merge(&xs[lo..mid], &xs[mid..hi], &mut buf[lo..hi]);
                xs[lo..hi].copy_from_slice(&buf[lo..hi]);
            }
            lo += 2 * width;
        }
        width *= 2;
    }
    swaps
}

fn merge(left: &[f64], right: &[f64], out: &mut [f64]) -> u64 {
    let (mut i, mut j, mut k) = (0, 0, 0);
    let mut swaps: u64 = 0;
    while i < left.len() && j < right.len() {
        if right[j] < left[i] {
            swaps += (left.len() - i) as u64;
            out[k] = right[j];
            j += 1;
        } else {
            out[k] = left[i];
            i += 1;
        }
        k += 1;
    }
    while i < left.len() {
        out[k] = left[i];
        i += 1;
        k += 1;
    }
    while j < right.len() {
        out[k] = right[j];
        j += 1;
        k += 1;
    }
    swaps
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationMatrix {
    /// Expanded column labels in schema order, categories lexically within.
    pub labels: Vec<String>,
    /// Symmetric tau values; None marks an undefined (constant-column) entry.
    pub values: Vec<Vec<Option<f64>>>,
    /// Original column name -> its expanded labels.
    pub expansion_map: BTreeMap<String, Vec<String>>,
    pub warnings: Vec<String>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<Option<f64>> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.values[i][j])
    }

    /// CSV with labels as header and first column; undefined entries as "nan".
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("label");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (i, l) in self.labels.iter().enumerate() {
            out.push_str(l);
            for j in 0..self.labels.len() {
                out.push(',');
                match self.values[i][j] {
                    Some(v) => out.push_str(&format!("{v}")),
                    None => out.push_str("nan"),
                }
            }
            out.push('\n');
        }
        out
    }
}

struct ExpandedColumn {
    label: String,
    source: String,
    values: Vec<f64>,
}

fn expand_columns(ds: &Dataset) -> Vec<ExpandedColumn> {
    let mut expanded = Vec::new();
    for col in ds.schema() {
        if !matches!(col.role, Role::Feature | Role::Protected) {
            continue;
        }
        let (_, data) = ds.column(&col.name).expect("schema column");
        match (col.dtype, data) {
            (Dtype::Numeric, ColumnData::Numeric(v)) => expanded.push(ExpandedColumn {
                label: col.name.clone(),
                source: col.name.clone(),
                values: v.clone(),
            }),
            (Dtype::Binary, ColumnData::Binary(v)) => expanded.push(ExpandedColumn {
                label: col.name.clone(),
                source: col.name.clone(),
                values: v.iter().map(|b| *b as f64).collect(),
            }),
            (Dtype::Categorical, ColumnData::Categorical(v)) => {
                let categories: std::collections::BTreeSet<&String> = v.iter().collect();
                for cat in categories {
                    expanded.push(ExpandedColumn {
                        label: format!("{}={}", col.name, cat),
                        source: col.name.clone(),
                        values: v.iter().map(|c| (c == cat) as u8 as f64).collect(),
                    });
                }
            }
            _ => unreachable!("dtype validated at construction"),
        }
    }
    expanded
}

/// Tau-b over every unordered pair of expanded model-input and protected
/// columns. Constant columns yield undefined entries with a warning instead
/// of an error; the diagonal is 1 for non-constant columns.
pub fn correlation_matrix(ds: &Dataset) -> CorrelationMatrix {
    let expanded = expand_columns(ds);
    let m = expanded.len();
    let mut values = vec![vec![None; m]; m];
    let mut warnings = Vec::new();
    for i in 0..m {
        if is_constant(&expanded[i].values) {
            warnings.push(format!(
                "column '{}' is constant; its correlations are undefined",
                expanded[i].label
            ));
            continue;
        }
        values[i][i] = Some(1.0);
    }
    for i in 0..m {
        for j in (i + 1)..m {
            let tau = kendall_tau(&expanded[i].values, &expanded[j].values).unwrap_or_default();
            values[i][j] = tau;
            values[j][i] = tau;
        }
    }
    let mut expansion_map: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for col in &expanded {
        expansion_map
            .entry(col.source.clone())
            .or_default()
            .push(col.label.clone());
    }
    CorrelationMatrix {
        labels: expanded.iter().map(|c| c.label.clone()).collect(),
        values,
        expansion_map,
        warnings,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxyFlag {
    pub feature: String,
    pub protected: String,
    /// Signed tau of the strongest expanded pair between the two columns.
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxyFlags {
    pub threshold: f64,
    /// Sorted by |tau| descending, then (feature, protected) lexically.
    pub flags: Vec<ProxyFlag>,
}

impl ProxyFlags {
    pub fn flagged_features(&self) -> Vec<String> {
        let mut names: Vec<String> = self.flags.iter().map(|f| f.feature.clone()).collect();
        names.sort();
        names.dedup();
        names
    }
}

/// Flag (feature, protected) column pairs whose strongest expanded entry has
/// |tau| strictly above the threshold. Undefined entries never flag.
pub fn flag_proxies(
    matrix: &CorrelationMatrix,
    schema: &[ColumnSchema],
    threshold: f64,
) -> Result<ProxyFlags> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::BadThreshold(threshold));
    }
    let role_of = |name: &str| -> Option<Role> {
        schema.iter().find(|c| c.name == name).map(|c| c.role)
    };
    // label index -> source column
    let mut source_of: BTreeMap<&str, &str> = BTreeMap::new();
    for (src, labels) in &matrix.expansion_map {
        for l in labels {
            source_of.insert(l.as_str(), src.as_str());
        }
    }

    let mut best: BTreeMap<(String, String), f64> = BTreeMap::new();
    for (i, li) in matrix.labels.iter().enumerate() {
        for (j, lj) in matrix.labels.iter().enumerate() {
            if j <= i {
                continue;
            }
            let (si, sj) = (source_of[li.as_str()], source_of[lj.as_str()]);
            let (ri, rj) = match (role_of(si), role_of(sj)) {
                (Some(a), Some(b)) => (a, b),
                _ => continue,
            };
            let (feature, protected) = match (ri, rj) {
                (Role::Feature, Role::Protected) => (si, sj),
                (Role::Protected, Role::Feature) => (sj, si),
                _ => continue,
            };
            if let Some(tau) = matrix.values[i][j] {
                let key = (feature.to_string(), protected.to_string());
                let entry = best.entry(key).or_insert(0.0);
                if tau.abs() > entry.abs() {
                    *entry = tau;
                }
            }
        }
    }

    let mut flags: Vec<ProxyFlag> = best
        .into_iter()
        .filter(|(_, tau)| tau.abs() > threshold)
        .map(|((feature, protected), tau)| ProxyFlag {
            feature,
            protected,
            tau,
        })
        .collect();
    flags.sort_by(|a, b| {
        b.tau
            .abs()
            .total_cmp(&a.tau.abs())
            .then(a.feature.cmp(&b.feature))
            .then(a.protected.cmp(&b.protected))
    });
    Ok(ProxyFlags { threshold, flags })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ColumnSchema, Dataset};

    #[test]
    fn tau_plain_jumble() {
        // C = 5, D = 1 by enumeration.
        let tau = kendall_tau(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0])
            .unwrap()
            .unwrap();
        assert!((tau - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn tau_full_reversal() {
        let tau = kendall_tau(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap().unwrap();
        assert_eq!(tau, -1.0);
    }

    #[test]
    fn tau_with_ties() {
        // C = 1, D = 0, n1 = n2 = 1, denominator sqrt(2 * 2) = 2.
        let tau = kendall_tau(&[1.0, 1.0, 2.0], &[1.0, 2.0, 2.0]).unwrap().unwrap();
        assert_eq!(tau, 0.5);
    }

    #[test]
    fn tau_undefined_for_constant() {
        assert_eq!(kendall_tau(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap(), None);
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[7.0, 7.0, 7.0]).unwrap(), None);
    }

    #[test]
    fn tau_errors() {
        assert!(matches!(
            kendall_tau(&[1.0, 2.0], &[1.0]).unwrap_err(),
            Error::LengthMismatch { .. }
        ));
        assert!(matches!(kendall_tau(&[1.0], &[1.0]).unwrap_err(), Error::TooShort));
    }

    #[test]
    fn tau_self_is_one() {
        let x = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        assert_eq!(kendall_tau(&x, &x).unwrap(), Some(1.0));
    }

    fn three_column_ds() -> Dataset {
        use crate::dataset::{ColumnData, Dtype, Role};
        Dataset::new(
            vec![
                ColumnSchema::new("gender", Role::Protected, Dtype::Binary),
                ColumnSchema::new("zip_indicator", Role::Feature, Dtype::Numeric),
                ColumnSchema::new("score", Role::Feature, Dtype::Numeric),
                ColumnSchema::new("hired", Role::Outcome, Dtype::Binary),
            ],
            vec![
                ColumnData::Binary(vec![0, 1, 0, 1, 1, 0]),
                ColumnData::Numeric(vec![0.1, 0.9, 0.2, 0.8, 0.7, 0.3]),
                ColumnData::Numeric(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
                ColumnData::Binary(vec![0, 1, 0, 1, 1, 1]),
            ],
            6,
        )
        .unwrap()
    }

    #[test]
    fn matrix_diagonal_and_symmetry() {
        let ds = three_column_ds();
        let m = correlation_matrix(&ds);
        assert_eq!(m.labels, vec!["gender", "zip_indicator", "score"]);
        for i in 0..3 {
            assert_eq!(m.values[i][i], Some(1.0));
            for j in 0..3 {
                assert_eq!(m.values[i][j], m.values[j][i]);
            }
        }
        // outcome and id columns stay out of the matrix
        assert!(!m.labels.iter().any(|l| l == "hired"));
    }

    #[test]
    fn flags_strict_threshold() {
        let ds = three_column_ds();
        let m = correlation_matrix(&ds);
        // gender and zip_indicator are perfectly rank-aligned here
        let flags = flag_proxies(&m, ds.schema(), 0.5).unwrap();
        assert_eq!(flags.flags.len(), 1);
        assert_eq!(flags.flags[0].feature, "zip_indicator");
        assert_eq!(flags.flags[0].protected, "gender");

        // exactly at the boundary: strict inequality keeps it unflagged
        let tau = m.get("zip_indicator", "gender").unwrap().unwrap();
        let at_boundary = flag_proxies(&m, ds.schema(), tau).unwrap();
        assert!(at_boundary.flags.is_empty());
    }

    #[test]
    fn undefined_entries_never_flag() {
        use crate::dataset::{ColumnData, Dtype, Role};
        let ds = Dataset::new(
            vec![
                ColumnSchema::new("g", Role::Protected, Dtype::Binary),
                ColumnSchema::new("const", Role::Feature, Dtype::Numeric),
                ColumnSchema::new("y", Role::Outcome, Dtype::Binary),
            ],
            vec![
                ColumnData::Binary(vec![0, 1, 0, 1]),
                ColumnData::Numeric(vec![2.0, 2.0, 2.0, 2.0]),
                ColumnData::Binary(vec![0, 1, 1, 0]),
            ],
            4,
        )
        .unwrap();
        let m = correlation_matrix(&ds);
        assert_eq!(m.get("const", "g").unwrap(), None);
        assert!(!m.warnings.is_empty());
        let flags = flag_proxies(&m, ds.schema(), 0.1).unwrap();
        assert!(flags.flags.is_empty());
    }

    #[test]
    fn categorical_expansion_labels() {
        use crate::dataset::{ColumnData, Dtype, Role};
        let ds = Dataset::new(
            vec![
                ColumnSchema::new("race", Role::Protected, Dtype::Categorical),
                ColumnSchema::new("x", Role::Feature, Dtype::Numeric),
                ColumnSchema::new("y", Role::Outcome, Dtype::Binary),
            ],
            vec![
                ColumnData::Categorical(vec!["b".into(), "a".into(), "c".into(), "a".into()]),
                ColumnData::Numeric(vec![1.0, 2.0, 3.0, 4.0]),
                ColumnData::Binary(vec![0, 1, 0, 1]),
            ],
            4,
        )
        .unwrap();
        let m = correlation_matrix(&ds);
        assert_eq!(m.labels, vec!["race=a", "race=b", "race=c", "x"]);
        assert_eq!(
            m.expansion_map["race"],
            vec!["race=a".to_string(), "race=b".into(), "race=c".into()]
        );
    }

    #[test]
    fn id_and_outcome_columns_stay_out() {
        use crate::dataset::{ColumnData, Dtype, Role};
        let ds = Dataset::new(
            vec![
                ColumnSchema::new("candidate_id", Role::Id, Dtype::Categorical),
                ColumnSchema::new("g", Role::Protected, Dtype::Binary),
                ColumnSchema::new("x", Role::Feature, Dtype::Numeric),
                ColumnSchema::new("y", Role::Outcome, Dtype::Binary),
            ],
            vec![
                ColumnData::Categorical(vec!["a1".into(), "a2".into(), "a3".into(), "a4".into()]),
                ColumnData::Binary(vec![0, 1, 0, 1]),
                ColumnData::Numeric(vec![1.0, 2.0, 3.0, 4.0]),
                ColumnData::Binary(vec![0, 1, 1, 0]),
            ],
            4,
        )
        .unwrap();
        let m = correlation_matrix(&ds);
        assert_eq!(m.labels, vec!["g", "x"]);
    }

    #[test]
    fn csv_export_shape() {
        let ds = three_column_ds();
        let m = correlation_matrix(&ds);
        let csv = m.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("label,gender,"));
    }
}
