use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate uid {0:?}")]
    DuplicateUid(String),

    #[error("year {0} is not covered by any time bin")]
    UncoveredYear(i32),

    #[error("corpus too small: {0}")]
    CorpusTooSmall(String),

    #[error("vocabulary is empty after pruning (min_df={min_df}, max_df_ratio={max_df_ratio})")]
    EmptyVocabulary { min_df: usize, max_df_ratio: f64 },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("embeddings missing for {} corpus uid(s): {}", .missing.len(), preview(.missing))]
    Alignment { missing: Vec<String> },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("fit did not converge: {0}")]
    Convergence(String),

    #[error("coherence undefined: {0}")]
    UndefinedScore(String),

    #[error("no viable configuration: all {0} trial(s) failed")]
    NoViableConfiguration(usize),

    #[error("no fitted models found in {0}")]
    MissingModels(PathBuf),

    #[error("missing temporal data: {0}")]
    MissingTemporal(String),

    #[error("output directory {0} is locked by another run")]
    Locked(PathBuf),
}

fn preview(uids: &[String]) -> String {
    const SHOWN: usize = 10;
    let mut s = uids.iter().take(SHOWN).cloned().collect::<Vec<_>>().join(", ");
    if uids.len() > SHOWN {
        s.push_str(&format!(", ... ({} more)", uids.len() - SHOWN));
    }
    s
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.to_string(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Alignment { .. } => 3,
            Error::MissingModels(_) => 4,
            Error::MissingTemporal(_) => 5,
            Error::NoViableConfiguration(_) => 6,
            Error::Domain(_) | Error::Convergence(_) | Error::UndefinedScore(_) => 1,
            _ => 2,
        }
    }
}
