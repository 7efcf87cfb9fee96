use squeeze3d::analysis::AnalysisError;
use squeeze3d::bridge::BridgeError;
use squeeze3d::codec::CodecError;
use squeeze3d::geometry::GeometryError;
use squeeze3d::nn::NnError;
use squeeze3d::payload::PayloadError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("provenance error: {0} (pass --force to proceed anyway)")]
    Provenance(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{0}")]
    Artifact(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Provenance(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Artifact(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::NonFinite(_) => CliError::Numeric(e.to_string()),
            e => CliError::Artifact(e.to_string()),
        }
    }
}

impl From<CodecError> for CliError {
    fn from(e: CodecError) -> Self {
        match e {
            CodecError::Diverged { .. } => CliError::Numeric(e.to_string()),
            CodecError::Nn(e) => e.into(),
            CodecError::Invalid(m) => CliError::Config(m),
            e => CliError::Artifact(e.to_string()),
        }
    }
}

impl From<BridgeError> for CliError {
    fn from(e: BridgeError) -> Self {
        match e {
            BridgeError::Provenance { .. } | BridgeError::CodecModified => {
                CliError::Provenance(e.to_string())
            }
            BridgeError::Diverged { .. } | BridgeError::TooManySkips { .. } => {
                CliError::Numeric(e.to_string())
            }
            BridgeError::Config(m) => CliError::Config(m),
            BridgeError::Codec(e) => e.into(),
            BridgeError::Nn(e) => e.into(),
            e => CliError::Artifact(e.to_string()),
        }
    }
}

impl From<PayloadError> for CliError {
    fn from(e: PayloadError) -> Self {
        CliError::Artifact(e.to_string())
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::Artifact(e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Artifact(e.to_string())
    }
}
