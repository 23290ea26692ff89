use spf_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error at {path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("bad magic bytes (not an SPFD container)")]
    BadMagic,

    #[error("unsupported container version {0}")]
    Version(u16),

    #[error("unknown payload kind {0}")]
    UnknownKind(u8),

    #[error("container truncated: {0}")]
    Truncated(String),

    #[error("declared lengths do not match payload: {0}")]
    LengthMismatch(String),

    #[error("CRC mismatch: stored {stored:08x}, computed {computed:08x}")]
    Crc { stored: u32, computed: u32 },

    #[error("container metadata: {0}")]
    Meta(String),

    #[error("csv format: {0}")]
    Csv(String),
}

/// 0 success, 2 config, 3 numeric/solver, 4 I/O and container format.
pub fn exit_code(err: &CliError) -> i32 {
    match err {
        CliError::Core(core) => match core {
            CoreError::Numeric(_)
            | CoreError::Stability { .. }
            | CoreError::Drying { .. }
            | CoreError::Divergence { .. } => 3,
            _ => 2,
        },
        CliError::Config(_) => 2,
        CliError::Io { .. }
        | CliError::BadMagic
        | CliError::Version(_)
        | CliError::UnknownKind(_)
        | CliError::Truncated(_)
        | CliError::LengthMismatch(_)
        | CliError::Crc { .. }
        | CliError::Meta(_)
        | CliError::Csv(_) => 4,
    }
}

pub(crate) fn io_err(path: &std::path::Path, source: std::io::Error) -> CliError {
    CliError::Io { path: path.display().to_string(), source }
}
