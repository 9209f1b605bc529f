use std::path::Path;

pub type Result<T> = std::result::Result<T, Error>;

/// Recoverable failures: bad input files, inconsistent data, unusable
/// checkpoints, diverged training. Programming errors (shape mismatches,
/// out-of-range indices) panic instead; the CLI maps panics to exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// File-based parse failure with a 1-based line number.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// SMILES parse failure with a 0-based byte offset into the string.
    #[error("SMILES {smiles:?} at offset {pos}: {msg}")]
    Smiles {
        smiles: String,
        pos: usize,
        msg: String,
    },

    /// Dataset assembly or split problems (missing columns, no join overlap,
    /// zero target variance, too few records).
    #[error("{0}")]
    Data(String),

    #[error("config: {0}")]
    Config(String),

    #[error("checkpoint {path}: {msg}")]
    Checkpoint { path: String, msg: String },

    /// Non-finite loss or gradient. The best checkpoint written so far stays
    /// on disk; its path is reported when one exists.
    #[error("training aborted at epoch {epoch}: {msg}{}", retained(.checkpoint))]
    Diverged {
        epoch: usize,
        msg: String,
        checkpoint: Option<String>,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn retained(checkpoint: &Option<String>) -> String {
    match checkpoint {
        Some(p) => format!(" (last good checkpoint retained at {p})"),
        None => String::new(),
    }
}

impl Error {
    pub fn parse(path: &Path, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.display().to_string(),
            line,
            msg: msg.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
