use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

/// Failures of a subcommand, grouped by the exit code they map to.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error("{0}")]
    Numeric(String),

    #[error("{0}")]
    Io(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<CliError>,
    },

    #[error(transparent)]
    Core(#[from] carma_field::Error),
}

impl CliError {
    /// 0 success, 1 validation, 2 numeric failure, 3 I/O failure.
    pub fn exit_code(&self) -> i32 {
        use carma_field::Error as E;
        match self {
            CliError::Validation(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Io(_) => 3,
            CliError::Stage { source, .. } => source.exit_code(),
            CliError::Core(e) => match e {
                E::Io(_) => 3,
                E::IllConditionedVandermonde { .. }
                | E::SingularDesign { .. }
                | E::SingularHankel { .. }
                | E::RootOutsideBand { .. }
                | E::UnstableRoot { .. }
                | E::NegativeVarianceEstimate(_)
                | E::InconsistentMonomials(_)
                | E::RankDeficient { .. } => 2,
                _ => 1,
            },
        }
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

/// Names the workflow stage an error came from.
pub trait StageContext<T> {
    fn stage(self, stage: impl Into<String>) -> Result<T>;
}

impl<T, E: Into<CliError>> StageContext<T> for std::result::Result<T, E> {
    fn stage(self, stage: impl Into<String>) -> Result<T> {
        self.map_err(|e| CliError::Stage {
            stage: stage.into(),
            source: Box::new(e.into()),
        })
    }
}
