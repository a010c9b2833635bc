use std::fmt;
use std::process::ExitCode;

use neurotopo_core::augment::AugmentError;
use neurotopo_core::contrastive::ContrastiveError;
use neurotopo_core::nn::ModelError;
use neurotopo_core::pimage::ImageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Data,
    Config,
    Numeric,
}

impl Kind {
    pub fn exit_code(self) -> u8 {
        match self {
            Kind::Data => 1,
            Kind::Config => 2,
            Kind::Numeric => 3,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub error: anyhow::Error,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn new(kind: Kind, error: impl Into<anyhow::Error>) -> Self {
        Self { kind, error: error.into() }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.kind.exit_code())
    }

    pub fn context(self, msg: impl fmt::Display) -> Self {
        Self { kind: self.kind, error: self.error.context(msg.to_string()) }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub fn data(e: impl Into<anyhow::Error>) -> CliError {
    CliError::new(Kind::Data, e)
}

pub fn config(e: impl Into<anyhow::Error>) -> CliError {
    CliError::new(Kind::Config, e)
}

impl From<ContrastiveError> for CliError {
    fn from(e: ContrastiveError) -> Self {
        let kind = match &e {
            ContrastiveError::NonFiniteInput(_) | ContrastiveError::NonFiniteLoss { .. } => Kind::Numeric,
            ContrastiveError::InvalidConfig(_) | ContrastiveError::InvalidEpsilon(_) => Kind::Config,
            ContrastiveError::Model(ModelError::ShapeMismatch(_)) => Kind::Config,
            ContrastiveError::Image(ImageError::InvalidConfig(_) | ImageError::InvalidChannels(_)) => Kind::Config,
            ContrastiveError::Augment(AugmentError::InvalidConfig(_)) => Kind::Config,
            _ => Kind::Data,
        };
        CliError::new(kind, e)
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::new(Kind::Data, e)
    }
}
