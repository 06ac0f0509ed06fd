use eit_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{key}: {reason}")]
    Config { key: String, reason: String },
    #[error("{line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Machine-readable category printed on stderr.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config { .. } | CliError::Parse { .. } => "config",
            CliError::Validation(_) => "validation",
            CliError::Core(e) => core_category(e),
            CliError::Io { .. } => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "usage" | "config" => 2,
            "validation" => 3,
            "numerical" => 4,
            _ => 5,
        }
    }
}

fn core_category(e: &CoreError) -> &'static str {
    match e {
        CoreError::AtPosition { source, .. } => core_category(source),
        CoreError::InvalidRabi(_)
        | CoreError::InvalidDetuning(_)
        | CoreError::InvalidParameter { .. }
        | CoreError::Schedule(_) => "config",
        _ => "numerical",
    }
}
