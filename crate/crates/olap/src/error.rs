use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A malformed input cell; `line` is 1-based including the header.
    #[error("line {line}, column {column} ({name}): {message}")]
    Parse { line: u64, column: usize, name: String, message: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] olap_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// 1 for input that fails validation, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        use olap_core::Error as C;
        match self {
            Error::Parse { .. } | Error::Validation(_) | Error::Config(_) | Error::Csv(_) => 1,
            Error::Core(C::InvalidData(_) | C::InvalidArgument(_) | C::Dimension(_) | C::TooLarge { .. } | C::WrongFamily { .. }) => 1,
            Error::Core(_) | Error::Io(_) | Error::Json(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
