use thiserror::Error;

/// Errors produced by the audit toolkit.
///
/// Variants map one-to-one onto the failure modes of the public operations;
/// warnings (unseen categories, empty probe bands, singleton strata) are not
/// errors and travel in the result structs instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("bad value in column '{column}', row {row}: {detail}")]
    BadValue {
        column: String,
        row: usize,
        detail: String,
    },
    #[error("no usable rows after ingestion")]
    EmptyData,
    #[error("schema declares {0} outcome column(s); exactly one required")]
    MultipleOutcomes(usize),
    #[error("column '{0}' is constant; cannot normalize")]
    ConstantColumn(String),
    #[error("column '{0}' is not numeric")]
    NotNumeric(String),
    #[error("unknown attribute '{0}'")]
    UnknownAttribute(String),
    #[error("bad reference distribution: {0}")]
    BadReference(String),
    #[error("too few rows: {0}")]
    TooFewRows(String),
    #[error("protected column '{0}' is continuous; bin it into categories before auditing")]
    ContinuousProtected(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 2 observations")]
    TooShort,
    #[error("threshold must lie in (0, 1]; got {0}")]
    BadThreshold(f64),

    #[error("{0} has no data-derived default and no override; supply a model context or an override")]
    MissingModelContext(String),
    #[error("decision path incomplete: no answer for {0}")]
    IncompletePath(String),
    #[error("contradictory answers: {0}")]
    ContradictoryAnswers(String),

    #[error("no feature columns available for training")]
    NoFeatures,
    #[error("outcome column must be binary with values {{0, 1}}")]
    NonBinaryOutcome,
    #[error("degenerate labels: every outcome equals {0}")]
    DegenerateLabels(u8),

    #[error("missing policy for group '{0}'")]
    MissingGroupPolicy(String),
    #[error("need at least 2 groups with defined metrics; got {0}")]
    TooFewGroups(usize),
    #[error("ROC requires both label classes to be present")]
    OneClassOnly,

    #[error("no policy meets epsilon {epsilon}; best gap found {best_gap}")]
    Infeasible { epsilon: f64, best_gap: f64 },
    #[error("group '{0}' has no positive labels; cannot equalize positive-class rates")]
    GroupWithoutPositives(String),

    #[error("sample fraction must be in (0, 1]; got {0}")]
    BadFraction(f64),
    #[error("no probe outcomes supplied")]
    EmptyOutcomes,
    #[error("scan depth {depth} exceeds the {available} protected attribute(s)")]
    DepthTooLarge { depth: usize, available: usize },
    #[error("criterion mismatch: baseline {baseline} vs current {current}")]
    CriterionMismatch { baseline: String, current: String },
    #[error("axis column '{0}' is not numeric")]
    NotNumericAxis(String),
    #[error("no ROC curves supplied")]
    EmptyCurves,

    #[error("target tau {0} outside [-0.95, 0.95]")]
    BadTau(f64),
    #[error("generator needs at least {min} rows; got {got}")]
    TooSmall { min: usize, got: usize },
    #[error("bad scenario parameters: {0}")]
    BadParams(String),

    #[error("bad config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
