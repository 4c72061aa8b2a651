use std::path::PathBuf;

use serde::Serialize;

/// Exit code for unreadable or inconsistent input.
pub const EXIT_DATA: i32 = 2;
/// Exit code for a failed fit, sampler or bootstrap.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, line {line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Model(#[from] dnamix_core::Error),
    #[error("writing {path}: {message}")]
    Output { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use dnamix_core::Error as E;
        match self {
            CliError::Io { .. } | CliError::Parse { .. } | CliError::Data(_) => EXIT_DATA,
            CliError::Model(e) => match e {
                E::Domain(_) | E::InvalidData(_) | E::MissingAllele { .. } | E::MissingGenotype { .. } | E::ZeroLikelihood(_) => {
                    EXIT_DATA
                }
                E::UndefinedRatio | E::NotConcave { .. } | E::Numerical(_) | E::TooManyFailures { .. } => EXIT_NUMERICAL,
            },
            CliError::Output { .. } => EXIT_NUMERICAL,
        }
    }

    pub fn kind(&self) -> &'static str {
        if self.exit_code() == EXIT_DATA {
            "data"
        } else {
            "numerical"
        }
    }

    /// One-line JSON record for standard error.
    pub fn to_json_line(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            error: &'a str,
            kind: &'a str,
            exit_code: i32,
            #[serde(skip_serializing_if = "Option::is_none")]
            path: Option<String>,
            #[serde(skip_serializing_if = "Option::is_none")]
            line: Option<u64>,
        }
        let (path, line) = match self {
            CliError::Io { path, .. } | CliError::Output { path, .. } => (Some(path.display().to_string()), None),
            CliError::Parse { path, line, .. } => (Some(path.display().to_string()), Some(*line)),
            _ => (None, None),
        };
        let msg = self.to_string();
        serde_json::to_string(&Line { error: &msg, kind: self.kind(), exit_code: self.exit_code(), path, line })
            .unwrap_or_else(|_| format!("{{\"error\":{msg:?}}}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
