//! Exit-code discipline: every failure is validation (1), I/O (2), or
//! numerical (3).

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<timetag_core::ClockError> for CliError {
    fn from(e: timetag_core::ClockError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<timetag_core::FormatError> for CliError {
    fn from(e: timetag_core::FormatError) -> Self {
        // Decode failures mean the file on disk is unreadable as a run.
        CliError::Io(e.to_string())
    }
}

impl From<timetag_core::MergeError> for CliError {
    fn from(e: timetag_core::MergeError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<beam_sim::BeamError> for CliError {
    fn from(e: beam_sim::BeamError) -> Self {
        match e {
            beam_sim::BeamError::CalibrationFailed(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<detector_sim::DetectorError> for CliError {
    fn from(e: detector_sim::DetectorError) -> Self {
        match e {
            detector_sim::DetectorError::Merge(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<coincidence::AnalysisError> for CliError {
    fn from(e: coincidence::AnalysisError) -> Self {
        use coincidence::AnalysisError as A;
        match e {
            A::Io(_) | A::MalformedCsv { .. } => CliError::Io(e.to_string()),
            A::NormalizationZero | A::TooFewNormBins(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<model_fit::ModelError> for CliError {
    fn from(e: model_fit::ModelError) -> Self {
        use model_fit::ModelError as M;
        match e {
            M::SingularNormalMatrix | M::QuadratureNoConverge { .. } => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}
