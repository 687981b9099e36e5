//! Baseline scoring classifier: L2-regularized logistic regression trained
//! by full-batch gradient descent from zero-initialized weights, so two
//! trainings on identical inputs produce bit-identical models.

use crate::dataset::{ColumnData, Dataset, Dtype, Role};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Scores are clamped into the open interval so downstream rate arithmetic
/// never sees an exact 0 or 1 from a saturated sigmoid.
const SCORE_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchMode {
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2_penalty: f64,
    /// Reserved: weight init is zeros and batches are full, so the seed has
    /// no effect in this version.
    pub seed: u64,
    pub batch: BatchMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 500,
            l2_penalty: 1e-4,
            seed: 0,
            batch: BatchMode::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum EncodingKind {
    Numeric,
    Binary,
    OneHot { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodedColumn {
    pub column: String,
    pub kind: EncodingKind,
    /// First slot this column occupies in the encoded row.
    pub offset: usize,
}

/// Maps feature columns onto encoded slots: numeric and binary columns take
/// one slot each, categorical columns one-hot expand (unseen categories at
/// prediction time map to the all-zero indicator, with a warning).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureEncoding {
    pub columns: Vec<EncodedColumn>,
    pub width: usize,
}

impl FeatureEncoding {
    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        let mut columns = Vec::new();
        let mut offset = 0usize;
        for col in ds.schema() {
            if col.role != Role::Feature {
                continue;
            }
            let kind = match col.dtype {
                Dtype::Numeric => EncodingKind::Numeric,
                Dtype::Binary => EncodingKind::Binary,
                Dtype::Categorical => {
                    let cats = ds.categories(&col.name)?;
                    EncodingKind::OneHot { categories: cats }
                }
            };
            let width = match &kind {
                EncodingKind::Numeric | EncodingKind::Binary => 1,
                EncodingKind::OneHot { categories } => categories.len(),
            };
            columns.push(EncodedColumn {
                column: col.name.clone(),
                kind,
                offset,
            });
            offset += width;
        }
        if columns.is_empty() {
            return Err(Error::NoFeatures);
        }
        Ok(Self {
            columns,
            width: offset,
        })
    }

    /// Row-major encoded matrix plus warnings about unseen categories.
    pub fn encode(&self, ds: &Dataset) -> Result<(Vec<f64>, Vec<String>)> {
        let n = ds.n_rows();
        let mut matrix = vec![0.0; n * self.width];
        let mut unseen: std::collections::BTreeMap<String, usize> = Default::default();
        for enc in &self.columns {
            let (_, data) = ds.column(&enc.column).ok_or_else(|| {
                Error::SchemaMismatch(format!(
                    "dataset lacks encoded column '{}'",
                    enc.column
                ))
            })?;
            match (&enc.kind, data) {
                (EncodingKind::Numeric, ColumnData::Numeric(v)) => {
                    for (row, value) in v.iter().enumerate() {
                        matrix[row * self.width + enc.offset] = *value;
                    }
                }
                (EncodingKind::Binary, ColumnData::Binary(v)) => {
                    for (row, value) in v.iter().enumerate() {
                        matrix[row * self.width + enc.offset] = *value as f64;
                    }
                }
                (EncodingKind::OneHot { categories }, ColumnData::Categorical(v)) => {
                    for (row, value) in v.iter().enumerate() {
                        match categories.iter().position(|c| c == value) {
                            Some(slot) => matrix[row * self.width + enc.offset + slot] = 1.0,
                            None => {
                                *unseen
                                    .entry(format!("{}='{}'", enc.column, value))
                                    .or_insert(0) += 1;
                            }
                        }
                    }
                }
                _ => {
                    return Err(Error::SchemaMismatch(format!(
                        "column '{}' dtype changed since encoding",
                        enc.column
                    )))
                }
            }
        }
        let warnings = unseen
            .into_iter()
            .map(|(what, count)| {
                format!("unseen category {what} in {count} row(s); encoded as all-zero")
            })
            .collect();
        Ok((matrix, warnings))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Model {
    /// One weight per encoded slot, bias last (length = width + 1).
    pub weights: Vec<f64>,
    pub encoding: FeatureEncoding,
    pub config: TrainConfig,
    pub train_loss_curve: Vec<f64>,
}

impl Model {
    /// Model at explicit weights; used for gradient checks and serialization.
    pub fn with_weights(weights: Vec<f64>, encoding: FeatureEncoding, config: TrainConfig) -> Self {
        assert_eq!(weights.len(), encoding.width + 1, "weights = width + bias");
        Self {
            weights,
            encoding,
            config,
            train_loss_curve: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Model = serde_json::from_str(text)?;
        if model.weights.len() != model.encoding.width + 1 {
            return Err(Error::BadConfig(
                "model weights do not match encoding width".into(),
            ));
        }
        Ok(model)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^t) without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn linear_scores(weights: &[f64], matrix: &[f64], n: usize, width: usize) -> Vec<f64> {
    let bias = weights[width];
    (0..n)
        .map(|row| {
            let mut z = bias;
            let base = row * width;
            for j in 0..width {
                z += weights[j] * matrix[base + j];
            }
            z
        })
        .collect()
}

fn validated_labels(ds: &Dataset) -> Result<Vec<u8>> {
    let labels = ds.labels()?;
    if labels.iter().all(|&y| y == 1) {
        return Err(Error::DegenerateLabels(1));
    }
    if labels.iter().all(|&y| y == 0) {
        return Err(Error::DegenerateLabels(0));
    }
    Ok(labels)
}

/// Mean logistic loss plus (l2/2)*||w||^2 over the non-bias weights, and its
/// exact gradient: dL/dw_j = mean((p - y) x_j) + l2 * w_j.
pub fn loss_and_gradient(model: &Model, ds: &Dataset) -> Result<(f64, Vec<f64>)> {
    let labels = validated_labels(ds)?;
    let (matrix, _) = model.encoding.encode(ds)?;
    Ok(loss_and_gradient_raw(
        &model.weights,
        &matrix,
        &labels,
        model.encoding.width,
        model.config.l2_penalty,
    ))
}

fn loss_and_gradient_raw(
    weights: &[f64],
    matrix: &[f64],
    labels: &[u8],
    width: usize,
    l2: f64,
) -> (f64, Vec<f64>) {
    let n = labels.len();
    let zs = linear_scores(weights, matrix, n, width);
    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; width + 1];
    for (row, (&z, &y)) in zs.iter().zip(labels).enumerate() {
        // softplus(-z) for y = 1, softplus(z) for y = 0
        loss += if y == 1 { softplus(-z) } else { softplus(z) };
        let residual = sigmoid(z) - y as f64;
        let base = row * width;
        for j in 0..width {
            grad[j] += residual * matrix[base + j];
        }
        grad[width] += residual;
    }
    loss *= inv_n;
    for g in grad.iter_mut() {
        *g *= inv_n;
    }
    for j in 0..width {
        loss += 0.5 * l2 * weights[j] * weights[j];
        grad[j] += l2 * weights[j];
    }
    (loss, grad)
}

/// Train on the dataset's feature columns against its binary outcome.
/// Protected and id columns are never encoded as inputs.
pub fn train(ds: &Dataset, config: TrainConfig) -> Result<Model> {
    let labels = validated_labels(ds)?;
    let encoding = FeatureEncoding::from_dataset(ds)?;
    let (matrix, _) = encoding.encode(ds)?;
    let width = encoding.width;

    let mut weights = vec![0.0; width + 1];
    let mut curve = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let (_, grad) = loss_and_gradient_raw(&weights, &matrix, &labels, width, config.l2_penalty);
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= config.learning_rate * g;
        }
        let (loss, _) = loss_and_gradient_raw(&weights, &matrix, &labels, width, config.l2_penalty);
        curve.push(loss);
    }

    Ok(Model {
        weights,
        encoding,
        config,
        train_loss_curve: curve,
    })
}

#[derive(Debug, Clone)]
pub struct ScoreOutput {
    pub scores: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Sigmoid of the linear score per row, clamped into (0, 1).
pub fn predict_scores(model: &Model, ds: &Dataset) -> Result<ScoreOutput> {
    let (matrix, warnings) = model.encoding.encode(ds)?;
    let zs = linear_scores(&model.weights, &matrix, ds.n_rows(), model.encoding.width);
    let scores = zs
        .iter()
        .map(|&z| sigmoid(z).clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP))
        .collect();
    Ok(ScoreOutput { scores, warnings })
}

/// Fraction of rows where thresholding the score at 0.5 matches the label.
pub fn accuracy_at_half(scores: &[f64], labels: &[u8]) -> f64 {
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(s, &y)| (**s >= 0.5) as u8 == y)
        .count();
    correct as f64 / labels.len() as f64
}
