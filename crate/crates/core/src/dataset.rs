//! Tabular datasets with declared column roles.
//!
//! Loading validates dtypes against a schema sidecar, applies the missing
//! value policy, and records everything it did in a [`LoadLog`]. Every
//! operation here is a pure function over immutable inputs; transforms return
//! new datasets.

use crate::error::{Error, Result};
use crate::rng::Rng64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::collections::BTreeMap;
use std::path::Path;

pub const MISSING_CATEGORY: &str = "__missing__";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Feature,
    Protected,
    Outcome,
    Id,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dtype {
    Numeric,
    Categorical,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSchema {
    pub name: String,
    pub role: Role,
    pub dtype: Dtype,
}

impl ColumnSchema {
    pub fn new(name: &str, role: Role, dtype: Dtype) -> Self {
        Self {
            name: name.to_string(),
            role,
            dtype,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
    Binary(Vec<u8>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
            ColumnData::Binary(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn matches(&self, dtype: Dtype) -> bool {
        matches!(
            (self, dtype),
            (ColumnData::Numeric(_), Dtype::Numeric)
                | (ColumnData::Categorical(_), Dtype::Categorical)
                | (ColumnData::Binary(_), Dtype::Binary)
        )
    }

    /// Cell rendered as text; numerics use Rust's shortest exact repr.
    pub fn render(&self, row: usize) -> String {
        match self {
            ColumnData::Numeric(v) => format!("{}", v[row]),
            ColumnData::Categorical(v) => v[row].clone(),
            ColumnData::Binary(v) => format!("{}", v[row]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Vec<ColumnSchema>,
    columns: Vec<ColumnData>,
    n_rows: usize,
}

impl Dataset {
    /// Build a dataset from parallel columns. Validates name uniqueness,
    /// dtype agreement, row counts, and that at most one outcome column
    /// exists (audit entry points additionally require exactly one).
    pub fn new(schema: Vec<ColumnSchema>, columns: Vec<ColumnData>, n_rows: usize) -> Result<Self> {
        if schema.len() != columns.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} schema entries but {} columns",
                schema.len(),
                columns.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for col in &schema {
            if col.name.is_empty() {
                return Err(Error::SchemaMismatch("empty column name".into()));
            }
            if !seen.insert(col.name.as_str()) {
                return Err(Error::SchemaMismatch(format!(
                    "duplicate column name '{}'",
                    col.name
                )));
            }
        }
        let outcomes = schema.iter().filter(|c| c.role == Role::Outcome).count();
        if outcomes > 1 {
            return Err(Error::MultipleOutcomes(outcomes));
        }
        for (col, data) in schema.iter().zip(&columns) {
            if !data.matches(col.dtype) {
                return Err(Error::SchemaMismatch(format!(
                    "column '{}' data does not match declared dtype",
                    col.name
                )));
            }
            if data.len() != n_rows {
                return Err(Error::SchemaMismatch(format!(
                    "column '{}' has {} rows; expected {}",
                    col.name,
                    data.len(),
                    n_rows
                )));
            }
            if let ColumnData::Binary(values) = data {
                if values.iter().any(|v| *v > 1) {
                    return Err(Error::SchemaMismatch(format!(
                        "binary column '{}' holds values outside {{0, 1}}",
                        col.name
                    )));
                }
            }
            if let ColumnData::Numeric(values) = data {
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::SchemaMismatch(format!(
                        "numeric column '{}' holds non-finite values",
                        col.name
                    )));
                }
            }
        }
        Ok(Self {
            schema,
            columns,
            n_rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<(&ColumnSchema, &ColumnData)> {
        self.column_index(name)
            .map(|i| (&self.schema[i], &self.columns[i]))
    }

    pub fn column_data(&self, index: usize) -> &ColumnData {
        &self.columns[index]
    }

    pub fn feature_columns(&self) -> Vec<&ColumnSchema> {
        self.schema
            .iter()
            .filter(|c| c.role == Role::Feature)
            .collect()
    }

    pub fn protected_columns(&self) -> Vec<&ColumnSchema> {
        self.schema
            .iter()
            .filter(|c| c.role == Role::Protected)
            .collect()
    }

    pub fn outcome_column(&self) -> Result<&ColumnSchema> {
        let mut it = self.schema.iter().filter(|c| c.role == Role::Outcome);
        match (it.next(), it.next()) {
            (Some(c), None) => Ok(c),
            (None, _) => Err(Error::MultipleOutcomes(0)),
            (Some(_), Some(_)) => Err(Error::MultipleOutcomes(2)),
        }
    }

    /// Outcome labels as 0/1.
    pub fn labels(&self) -> Result<Vec<u8>> {
        let outcome = self.outcome_column()?;
        match self.column(&outcome.name) {
            Some((_, ColumnData::Binary(v))) => Ok(v.clone()),
            _ => Err(Error::NonBinaryOutcome),
        }
    }

    /// Per-row category label of a categorical or binary column.
    pub fn group_labels(&self, attribute: &str) -> Result<Vec<String>> {
        let (schema, data) = self
            .column(attribute)
            .ok_or_else(|| Error::UnknownAttribute(attribute.to_string()))?;
        match data {
            ColumnData::Categorical(v) => Ok(v.clone()),
            ColumnData::Binary(v) => Ok(v.iter().map(|b| b.to_string()).collect()),
            ColumnData::Numeric(_) => Err(Error::ContinuousProtected(schema.name.clone())),
        }
    }

    /// Distinct categories of a column in lexical order.
    pub fn categories(&self, attribute: &str) -> Result<Vec<String>> {
        let labels = self.group_labels(attribute)?;
        let set: std::collections::BTreeSet<String> = labels.into_iter().collect();
        Ok(set.into_iter().collect())
    }

    /// Content hash over the canonical serialization: schema entries sorted
    /// by name, then row-major cells in schema order with numerics rendered
    /// at 17 significant digits. Stable across reloads of the same data.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(b"schema\n");
        let mut sorted: Vec<&ColumnSchema> = self.schema.iter().collect();
        sorted.sort_by(|a, b| a.name.cmp(&b.name));
        for col in sorted {
            let line = format!(
                "{}|{}|{}\n",
                col.name,
                serde_json::to_string(&col.role).unwrap(),
                serde_json::to_string(&col.dtype).unwrap()
            );
            hasher.update(line.as_bytes());
        }
        hasher.update(b"rows\n");
        for row in 0..self.n_rows {
            for data in &self.columns {
                let cell = match data {
                    ColumnData::Numeric(v) => crate::report::fmt_f64_17(v[row]),
                    ColumnData::Categorical(v) => v[row].clone(),
                    ColumnData::Binary(v) => v[row].to_string(),
                };
                // Length prefix keeps cell boundaries unambiguous.
                hasher.update(format!("{}:", cell.len()).as_bytes());
                hasher.update(cell.as_bytes());
            }
            hasher.update(b"\n");
        }
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// New dataset holding the given rows (indices in ascending order of the
    /// slice as passed).
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let columns = self
            .columns
            .iter()
            .map(|data| match data {
                ColumnData::Numeric(v) => {
                    ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect())
                }
                ColumnData::Categorical(v) => {
                    ColumnData::Categorical(rows.iter().map(|&r| v[r].clone()).collect())
                }
                ColumnData::Binary(v) => ColumnData::Binary(rows.iter().map(|&r| v[r]).collect()),
            })
            .collect();
        Dataset {
            schema: self.schema.clone(),
            columns,
            n_rows: rows.len(),
        }
    }

    /// New dataset keeping only the named columns (schema order preserved).
    pub fn select_columns(&self, names: &[String]) -> Result<Dataset> {
        for name in names {
            if self.column_index(name).is_none() {
                return Err(Error::UnknownAttribute(name.clone()));
            }
        }
        let mut schema = Vec::new();
        let mut columns = Vec::new();
        for (col, data) in self.schema.iter().zip(&self.columns) {
            if names.iter().any(|n| n == &col.name) {
                schema.push(col.clone());
                columns.push(data.clone());
            }
        }
        Dataset::new(schema, columns, self.n_rows)
    }

    /// New dataset without the named columns.
    pub fn drop_columns(&self, names: &[String]) -> Result<Dataset> {
        let keep: Vec<String> = self
            .schema
            .iter()
            .filter(|c| !names.iter().any(|n| n == &c.name))
            .map(|c| c.name.clone())
            .collect();
        self.select_columns(&keep)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.schema.iter().map(|c| c.name.as_str()))?;
        for row in 0..self.n_rows {
            let record: Vec<String> = self.columns.iter().map(|c| c.render(row)).collect();
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(file)
    }

    pub fn write_schema_file(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.schema)?;
        std::fs::write(path, json)?;
        Ok(())
    }
}

/// What to do with rows whose feature cells are missing. Rows missing an
/// outcome or protected value are always dropped: an audit can neither invent
/// labels nor protected-group membership.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Mean-impute numeric features; categorical features get "__missing__".
    #[default]
    Impute,
    /// Drop any row with a missing cell.
    DropRow,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadLog {
    pub rows_read: usize,
    pub rows_kept: usize,
    /// Rows dropped because the outcome or a protected value was missing
    /// (or, under `MissingPolicy::DropRow`, any cell).
    pub dropped_rows: usize,
    pub imputed_numeric_cells: usize,
    pub imputed_categorical_cells: usize,
    pub warnings: Vec<String>,
}

pub fn load_schema_file(path: &Path) -> Result<Vec<ColumnSchema>> {
    let text = std::fs::read_to_string(path)?;
    let schema: Vec<ColumnSchema> = serde_json::from_str(&text)?;
    Ok(schema)
}

/// Load an RFC-4180 CSV with a header row against a declared schema.
///
/// Header names must match schema names exactly (any order; schema order wins
/// in the result). Protected columns must be categorical or binary; a
/// continuous protected attribute is rejected so the caller bins it
/// deliberately instead of this library guessing cut points.
pub fn load_csv(path: &Path, schema: &[ColumnSchema], policy: MissingPolicy) -> Result<(Dataset, LoadLog)> {
    let file = std::fs::File::open(path).map_err(|e| {
        Error::SchemaMismatch(format!("cannot open '{}': {e}", path.display()))
    })?;
    load_csv_reader(file, schema, policy)
}

pub fn load_csv_reader<R: std::io::Read>(
    reader: R,
    schema: &[ColumnSchema],
    policy: MissingPolicy,
) -> Result<(Dataset, LoadLog)> {
    validate_schema_for_audit(schema)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let header_names: Vec<&str> = headers.iter().collect();

    // Map each schema column to its CSV position.
    let mut positions = Vec::with_capacity(schema.len());
    for col in schema {
        match header_names.iter().position(|h| *h == col.name) {
            Some(p) => positions.push(p),
            None => {
                return Err(Error::SchemaMismatch(format!(
                    "schema column '{}' not found in CSV header",
                    col.name
                )))
            }
        }
    }
    for name in &header_names {
        if !schema.iter().any(|c| &c.name == name) {
            return Err(Error::SchemaMismatch(format!(
                "CSV column '{name}' not declared in schema"
            )));
        }
    }

    let mut log = LoadLog::default();
    // Cells as Option<String>; None = missing.
    let mut raw_rows: Vec<Vec<Option<String>>> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        log.rows_read += 1;
        let row: Vec<Option<String>> = positions
            .iter()
            .map(|&p| {
                let cell = record.get(p).unwrap_or("").trim();
                if cell.is_empty() {
                    None
                } else {
                    Some(cell.to_string())
                }
            })
            .collect();
        raw_rows.push(row);
    }

    // Drop rows with missing key cells (outcome / protected), or any missing
    // cell under DropRow.
    let key_cols: Vec<usize> = schema
        .iter()
        .enumerate()
        .filter(|(_, c)| matches!(c.role, Role::Outcome | Role::Protected))
        .map(|(i, _)| i)
        .collect();
    let kept: Vec<Vec<Option<String>>> = raw_rows
        .into_iter()
        .filter(|row| {
            let drop = match policy {
                MissingPolicy::Impute => key_cols.iter().any(|&i| row[i].is_none()),
                MissingPolicy::DropRow => row.iter().any(|c| c.is_none()),
            };
            if drop {
                log.dropped_rows += 1;
            }
            !drop
        })
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyData);
    }
    log.rows_kept = kept.len();

    // Parse column-wise, imputing feature gaps.
    let n = kept.len();
    let mut columns = Vec::with_capacity(schema.len());
    for (ci, col) in schema.iter().enumerate() {
        let data = match col.dtype {
            Dtype::Numeric => {
                let mut values = vec![0.0f64; n];
                let mut missing = Vec::new();
                let mut sum = 0.0;
                let mut count = 0usize;
                for (ri, row) in kept.iter().enumerate() {
                    match &row[ci] {
                        Some(cell) => {
                            let v: f64 = cell.parse().map_err(|_| Error::BadValue {
                                column: col.name.clone(),
                                row: ri,
                                detail: format!("'{cell}' is not numeric"),
                            })?;
                            if !v.is_finite() {
                                return Err(Error::BadValue {
                                    column: col.name.clone(),
                                    row: ri,
                                    detail: "non-finite value".into(),
                                });
                            }
                            values[ri] = v;
                            sum += v;
                            count += 1;
                        }
                        None => missing.push(ri),
                    }
                }
                if !missing.is_empty() {
                    if count == 0 {
                        return Err(Error::BadValue {
                            column: col.name.clone(),
                            row: missing[0],
                            detail: "entire column missing; nothing to impute from".into(),
                        });
                    }
                    let mean = sum / count as f64;
                    for ri in &missing {
                        values[*ri] = mean;
                    }
                    log.imputed_numeric_cells += missing.len();
                }
                ColumnData::Numeric(values)
            }
            Dtype::Categorical => {
                let mut values = Vec::with_capacity(n);
                for row in &kept {
                    match &row[ci] {
                        Some(cell) => values.push(cell.clone()),
                        None => {
                            values.push(MISSING_CATEGORY.to_string());
                            log.imputed_categorical_cells += 1;
                        }
                    }
                }
                ColumnData::Categorical(values)
            }
            Dtype::Binary => {
                let mut values = Vec::with_capacity(n);
                for (ri, row) in kept.iter().enumerate() {
                    let cell = row[ci].as_ref().expect("key cells never missing here");
                    match cell.as_str() {
                        "0" => values.push(0),
                        "1" => values.push(1),
                        other => {
                            return Err(Error::BadValue {
                                column: col.name.clone(),
                                row: ri,
                                detail: format!("'{other}' is not 0/1"),
                            })
                        }
                    }
                }
                ColumnData::Binary(values)
            }
        };
        columns.push(data);
    }

    if log.dropped_rows > 0 {
        log.warnings.push(format!(
            "dropped {} row(s) with missing outcome/protected values",
            log.dropped_rows
        ));
    }
    let ds = Dataset::new(schema.to_vec(), columns, n)?;
    Ok((ds, log))
}

fn validate_schema_for_audit(schema: &[ColumnSchema]) -> Result<()> {
    let outcomes: Vec<&ColumnSchema> = schema.iter().filter(|c| c.role == Role::Outcome).collect();
    if outcomes.len() != 1 {
        return Err(Error::MultipleOutcomes(outcomes.len()));
    }
    if outcomes[0].dtype != Dtype::Binary {
        return Err(Error::NonBinaryOutcome);
    }
    for col in schema {
        if col.role == Role::Protected && col.dtype == Dtype::Numeric {
            return Err(Error::ContinuousProtected(col.name.clone()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeMethod {
    MinMax,
    ZScore,
}

/// Rescale the named numeric columns; everything else is untouched.
///
/// MinMax maps to [0, 1]; ZScore maps to mean 0 and population standard
/// deviation 1. MinMax is idempotent bit-for-bit: once min = 0 and max = 1,
/// (x - 0) / 1 reproduces x exactly.
pub fn normalize(ds: &Dataset, method: NormalizeMethod, columns: &[String]) -> Result<Dataset> {
    let mut new_columns = ds.columns.clone();
    for name in columns {
        let idx = ds
            .column_index(name)
            .ok_or_else(|| Error::UnknownAttribute(name.clone()))?;
        let values = match &ds.columns[idx] {
            ColumnData::Numeric(v) => v,
            _ => return Err(Error::NotNumeric(name.clone())),
        };
        let transformed = match method {
            NormalizeMethod::MinMax => {
                let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if max <= min {
                    return Err(Error::ConstantColumn(name.clone()));
                }
                let range = max - min;
                values.iter().map(|v| (v - min) / range).collect()
            }
            NormalizeMethod::ZScore => {
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                let std = var.sqrt();
                if std <= 0.0 {
                    return Err(Error::ConstantColumn(name.clone()));
                }
                values.iter().map(|v| (v - mean) / std).collect()
            }
        };
        new_columns[idx] = ColumnData::Numeric(transformed);
    }
    Dataset::new(ds.schema.clone(), new_columns, ds.n_rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepresentativenessVerdict {
    Representative,
    Skewed,
    Insufficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepresentativenessReport {
    pub attribute: String,
    pub category_counts: BTreeMap<String, usize>,
    pub reference: BTreeMap<String, f64>,
    pub statistic: f64,
    pub p_value: f64,
    pub degrees_of_freedom: usize,
    pub alpha: f64,
    pub verdict: RepresentativenessVerdict,
    pub warnings: Vec<String>,
}

/// Pearson chi-square goodness-of-fit of an attribute's category counts
/// against a reference distribution (uniform over observed categories when
/// `reference` is None). Cells with expected count below 5 make the verdict
/// `insufficient` rather than pretending the asymptotic test applies.
pub fn representativeness_test(
    ds: &Dataset,
    attribute: &str,
    reference: Option<&BTreeMap<String, f64>>,
    alpha: f64,
) -> Result<RepresentativenessReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::BadConfig(format!("alpha must be in (0, 1); got {alpha}")));
    }
    let labels = ds.group_labels(attribute)?;
    let n = labels.len();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for l in &labels {
        *counts.entry(l.clone()).or_insert(0) += 1;
    }

    let reference: BTreeMap<String, f64> = match reference {
        Some(r) => {
            let sum: f64 = r.values().sum();
            if r.values().any(|p| *p < 0.0) {
                return Err(Error::BadReference("negative proportion".into()));
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::BadReference(format!("proportions sum to {sum}, not 1")));
            }
            r.clone()
        }
        None => {
            let k = counts.len() as f64;
            counts.keys().map(|c| (c.clone(), 1.0 / k)).collect()
        }
    };

    // Cells = union of observed categories and reference support.
    let mut cells: std::collections::BTreeSet<String> = counts.keys().cloned().collect();
    cells.extend(reference.keys().cloned());

    let mut warnings = Vec::new();
    let mut statistic = 0.0;
    let mut used_cells = 0usize;
    let mut insufficient = false;
    for cell in &cells {
        let observed = *counts.get(cell).unwrap_or(&0) as f64;
        let expected = reference.get(cell).copied().unwrap_or(0.0) * n as f64;
        if expected <= 0.0 {
            if observed > 0.0 {
                warnings.push(format!(
                    "category '{cell}' observed but has zero reference mass; excluded from statistic"
                ));
                insufficient = true;
            }
            continue;
        }
        if expected < 5.0 {
            insufficient = true;
        }
        let delta = observed - expected;
        statistic += delta * delta / expected;
        used_cells += 1;
    }

    let dof = used_cells.saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        let chi = ChiSquared::new(dof as f64)
            .map_err(|e| Error::BadReference(format!("chi-square setup: {e}")))?;
        (1.0 - chi.cdf(statistic)).clamp(0.0, 1.0)
    };

    let verdict = if insufficient {
        RepresentativenessVerdict::Insufficient
    } else if p_value < alpha {
        RepresentativenessVerdict::Skewed
    } else {
        RepresentativenessVerdict::Representative
    };

    Ok(RepresentativenessReport {
        attribute: attribute.to_string(),
        category_counts: counts,
        reference,
        statistic,
        p_value,
        degrees_of_freedom: dof,
        alpha,
        verdict,
        warnings,
    })
}

#[derive(Debug)]
pub struct SplitResult {
    pub train: Dataset,
    pub test: Dataset,
    pub warnings: Vec<String>,
}

/// Deterministic stratified train/test split.
///
/// Strata are (outcome x every protected attribute) combinations. Row quotas
/// come from largest-remainder allocation against round(n * fraction), so the
/// global sizes are exact; a repair pass then guarantees every stratum with
/// at least two rows lands on both sides whenever arithmetically possible.
/// Single-row strata go to train with a warning.
pub fn split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<SplitResult> {
    let n = ds.n_rows();
    if n < 2 {
        return Err(Error::TooFewRows(format!("{n} row(s); need at least 2")));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::TooFewRows(format!(
            "train fraction {train_fraction} leaves one side empty"
        )));
    }

    let outcome = ds.outcome_column()?.name.clone();
    let outcome_labels = ds.group_labels(&outcome).unwrap_or_else(|_| {
        // outcome is binary by invariant; group_labels handles it
        vec![String::new(); n]
    });
    let protected: Vec<Vec<String>> = ds
        .protected_columns()
        .iter()
        .map(|c| ds.group_labels(&c.name))
        .collect::<Result<_>>()?;

    let mut strata: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for row in 0..n {
        let mut key = outcome_labels[row].clone();
        for p in &protected {
            key.push('\x1f');
            key.push_str(&p[row]);
        }
        strata.entry(key).or_default().push(row);
    }

    let total_train = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
    let keys: Vec<String> = strata.keys().cloned().collect();
    let sizes: Vec<usize> = keys.iter().map(|k| strata[k].len()).collect();

    // Largest-remainder quotas.
    let mut quotas: Vec<usize> = sizes
        .iter()
        .map(|&s| (s as f64 * train_fraction).floor() as usize)
        .collect();
    let mut remainders: Vec<(usize, f64)> = sizes
        .iter()
        .enumerate()
        .map(|(i, &s)| (i, s as f64 * train_fraction - quotas[i] as f64))
        .collect();
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut assigned: usize = quotas.iter().sum();
    for (i, _) in &remainders {
        if assigned >= total_train {
            break;
        }
        if quotas[*i] < sizes[*i] {
            quotas[*i] += 1;
            assigned += 1;
        }
    }
    // Rounding may still leave a deficit when some strata saturated.
    let mut idx = 0;
    while assigned < total_train {
        if quotas[idx] < sizes[idx] {
            quotas[idx] += 1;
            assigned += 1;
        }
        idx = (idx + 1) % quotas.len();
    }

    let mut warnings = Vec::new();
    // Singletons must train; both sides of every >=2 stratum should be
    // populated when possible.
    for i in 0..quotas.len() {
        if sizes[i] == 1 && quotas[i] == 0 {
            quotas[i] = 1;
            assigned += 1;
        }
        if sizes[i] == 1 {
            warnings.push(format!(
                "stratum '{}' has a single row; assigned to train",
                keys[i].replace('\x1f', "|")
            ));
        }
    }
    while assigned > total_train {
        // Shed overflow from the largest multi-row quota that can spare a row.
        let donor = (0..quotas.len())
            .filter(|&i| sizes[i] >= 2 && quotas[i] >= 2)
            .max_by_key(|&i| quotas[i]);
        match donor {
            Some(i) => {
                quotas[i] -= 1;
                assigned -= 1;
            }
            None => break,
        }
    }
    loop {
        let starved = (0..quotas.len()).find(|&i| sizes[i] >= 2 && quotas[i] == 0);
        let stuffed = (0..quotas.len()).find(|&i| sizes[i] >= 2 && quotas[i] == sizes[i]);
        match (starved, stuffed) {
            (Some(s), _) => {
                let donor = (0..quotas.len()).find(|&i| i != s && sizes[i] >= 2 && quotas[i] >= 2);
                match donor {
                    Some(d) => {
                        quotas[d] -= 1;
                        quotas[s] += 1;
                    }
                    None => {
                        warnings.push(format!(
                            "stratum '{}' could not be represented in train",
                            keys[s].replace('\x1f', "|")
                        ));
                        break;
                    }
                }
            }
            (None, Some(s)) => {
                let taker =
                    (0..quotas.len()).find(|&i| i != s && sizes[i] >= 2 && quotas[i] + 1 < sizes[i]);
                match taker {
                    Some(t) => {
                        quotas[t] += 1;
                        quotas[s] -= 1;
                    }
                    None => {
                        warnings.push(format!(
                            "stratum '{}' could not be represented in test",
                            keys[s].replace('\x1f', "|")
                        ));
                        break;
                    }
                }
            }
            (None, None) => break,
        }
    }

    let mut rng = Rng64::new(seed);
    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for (i, key) in keys.iter().enumerate() {
        let mut rows = strata[key].clone();
        rng.shuffle(&mut rows);
        for (j, row) in rows.into_iter().enumerate() {
            if j < quotas[i] {
                train_rows.push(row);
            } else {
                test_rows.push(row);
            }
        }
    }
    train_rows.sort_unstable();
    test_rows.sort_unstable();

    Ok(SplitResult {
        train: ds.subset(&train_rows),
        test: ds.subset(&test_rows),
        warnings,
    })
}

/// Remove protected columns from the model-input table, returning the inputs
/// plus a side table holding exactly the protected columns (same row count,
/// same order) for metric grouping. The side table is never fed to training.
pub fn drop_protected(ds: &Dataset) -> (Dataset, Dataset) {
    let mut input_schema = Vec::new();
    let mut input_columns = Vec::new();
    let mut side_schema = Vec::new();
    let mut side_columns = Vec::new();
    for (col, data) in ds.schema.iter().zip(&ds.columns) {
        if col.role == Role::Protected {
            side_schema.push(col.clone());
            side_columns.push(data.clone());
        } else {
            input_schema.push(col.clone());
            input_columns.push(data.clone());
        }
    }
    let inputs = Dataset::new(input_schema, input_columns, ds.n_rows).expect("subset of valid dataset");
    let side = Dataset::new(side_schema, side_columns, ds.n_rows).expect("subset of valid dataset");
    (inputs, side)
}
