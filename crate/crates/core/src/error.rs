use thiserror::Error;

/// Everything that can go wrong while building series, frames, ledgers or towers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("field mismatch: F_{{{0}}} vs F_{{{1}}}")]
    FieldMismatch(String, String),
    #[error("field F_{{{p}^{n}}} too small: {reason}")]
    FieldTooSmall { p: u32, n: u32, reason: String },
    #[error("duplicate exponent pair ({0}, {1})")]
    DuplicateExponent(u32, u32),
    #[error("variable names differ: {0:?} vs {1:?}")]
    VariableMismatch([String; 2], [String; 2]),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("series is not a unit (zero constant term)")]
    NotAUnit,
    #[error("substitution is not local: image has a nonzero constant term")]
    NotLocal,
    #[error("precision exhausted: need {needed}, have {available}")]
    PrecisionExhausted { needed: i64, available: i64 },
    #[error("indeterminate: {0}")]
    Indeterminate(String),
    #[error("Jacobian is not a power of x times a unit (exponent {0})")]
    NotPrincipalPowerOfX(u32),
    #[error("translation constant beta vanished")]
    DegenerateTranslation,
    #[error("formula mismatch: {0}")]
    FormulaMismatch(String),
    #[error("invalid step data: {0}")]
    InvalidStep(String),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("cannot normalize: {0}")]
    NotNormalizable(String),
    #[error("parameter mismatch: {0}")]
    ParameterMismatch(String),
    #[error("search exhausted: {0}")]
    SearchExhausted(String),
    #[error("side condition of a step fails: {0}")]
    SideCondition(String),
    #[error("level {level}: the {tier} frame needs y-weight {y_weight} to survive a change of parameters")]
    WeightsTooCoarse { level: i64, tier: String, y_weight: u32 },
    #[error("value tie between monomials {0:?} and {1:?}")]
    ValueTie((i64, i64), (i64, i64)),
    #[error("level {0} beyond recorded history")]
    LevelOutOfRange(usize),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn precision(needed: i64, available: i64) -> Self {
        Error::PrecisionExhausted { needed, available }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
