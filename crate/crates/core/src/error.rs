use thiserror::Error;

/// Errors raised by the extension machinery.
///
/// Every variant maps to one of the CLI exit codes through [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input data.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Argument outside the domain of a modulus inverse.
    #[error("argument {value} outside the domain [0, {beta}) of the modulus inverse")]
    Domain { value: f64, beta: f64 },

    /// The data fail an admissibility condition, so no extension exists.
    #[error(
        "condition {condition} fails at {} (margin {margin:e})",
        pair_text(worst_pair)
    )]
    ConditionFailed {
        condition: String,
        worst_pair: Option<(usize, usize)>,
        margin: f64,
    },

    /// A query fell inside the truncation collar around the closed set.
    #[error("query point lies in E or within the truncation collar (distance {distance:e})")]
    Collar { distance: f64 },

    /// A numerical certificate could not be established.
    #[error("certification failed in {stage}: {detail}")]
    Certification { stage: String, detail: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn certification(stage: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Certification {
            stage: stage.into(),
            detail: detail.into(),
        }
    }

    /// Process exit code: 3 condition failure, 4 invalid input, 5 certification.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConditionFailed { .. } => 3,
            Error::Certification { .. } => 5,
            Error::InvalidInput(_)
            | Error::Domain { .. }
            | Error::Collar { .. }
            | Error::Io(_)
            | Error::Json(_) => 4,
        }
    }
}

fn pair_text(pair: &Option<(usize, usize)>) -> String {
    match pair {
        Some((i, j)) => format!("pair ({i}, {j})"),
        None => String::from("no recorded pair"),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
