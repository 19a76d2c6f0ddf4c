use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("portfolio contains no items")]
    EmptyPortfolio,

    #[error("duplicate item id `{id}`{}", at_line(*.line))]
    DuplicateItem { id: String, line: Option<u64> },

    #[error("negative value for item `{id}`{}", at_line(*.line))]
    NegativeValue { id: String, line: Option<u64> },

    #[error("item id must be nonempty{}", at_line(*.line))]
    EmptyItemId { line: Option<u64> },

    #[error("unknown hierarchy dimension `{0}`")]
    UnknownDimension(String),

    #[error("item `{id}` has hierarchy dimensions inconsistent with the portfolio: {detail}")]
    InconsistentHierarchy { id: String, detail: String },

    #[error("portfolio slice has zero total value")]
    ZeroTotal,

    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),

    #[error("removed share {removed_share} leaves no room for class B (t_b = {t_b})")]
    DegenerateRenormalization { removed_share: f64, t_b: f64 },

    #[error("invalid concentration policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("value overflow: {0}")]
    Overflow(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn at_line(line: Option<u64>) -> String {
    match line {
        Some(l) => format!(" at line {l}"),
        None => String::new(),
    }
}

impl Error {
    /// Stable snake_case name of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyPortfolio => "empty_portfolio",
            Error::DuplicateItem { .. } => "duplicate_item",
            Error::NegativeValue { .. } => "negative_value",
            Error::EmptyItemId { .. } => "empty_item_id",
            Error::UnknownDimension(_) => "unknown_dimension",
            Error::InconsistentHierarchy { .. } => "inconsistent_hierarchy",
            Error::ZeroTotal => "zero_total",
            Error::InvalidThresholds(_) => "invalid_thresholds",
            Error::DegenerateRenormalization { .. } => "degenerate_renormalization",
            Error::InvalidPolicy(_) => "invalid_policy",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Parse { .. } => "parse_error",
            Error::Schema(_) => "schema_error",
            Error::Overflow(_) => "overflow",
            Error::Io(_) => "io_error",
        }
    }

    /// Source line, for errors tied to one.
    pub fn line(&self) -> Option<u64> {
        match self {
            Error::Parse { line, .. } => Some(*line),
            Error::DuplicateItem { line, .. }
            | Error::NegativeValue { line, .. }
            | Error::EmptyItemId { line } => *line,
            _ => None,
        }
    }

    /// Attaches a source line to errors raised while building from a file.
    pub(crate) fn with_line(self, line: u64) -> Self {
        match self {
            Error::DuplicateItem { id, .. } => Error::DuplicateItem {
                id,
                line: Some(line),
            },
            Error::NegativeValue { id, .. } => Error::NegativeValue {
                id,
                line: Some(line),
            },
            Error::EmptyItemId { .. } => Error::EmptyItemId { line: Some(line) },
            Error::InconsistentHierarchy { id, detail } => Error::Parse {
                line,
                message: format!("item `{id}`: {detail}"),
            },
            other => other,
        }
    }
}
