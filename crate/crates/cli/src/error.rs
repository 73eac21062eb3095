//! Failure classes and their process exit codes.

use std::fmt;

use opf_activeset_core::dcopf::DcopfError;
use opf_activeset_core::nn::NnError;
use opf_activeset_core::scenario::ScenarioError;

use crate::case::LoadError;
use crate::config::ConfigError;
use crate::dataset_io::DatasetIoError;
use crate::model_io::ModelIoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    /// Unreadable or invalid input: exit 2.
    Input,
    /// Model and dataset or configuration disagree: exit 3.
    Mismatch,
    /// A solver or the network produced no usable number: exit 4.
    Numerical,
}

#[derive(Debug)]
pub struct Failure {
    pub kind: FailureKind,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self { kind: FailureKind::Input, message: message.into() }
    }

    pub fn mismatch(message: impl Into<String>) -> Self {
        Self { kind: FailureKind::Mismatch, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self { kind: FailureKind::Numerical, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            FailureKind::Input => 2,
            FailureKind::Mismatch => 3,
            FailureKind::Numerical => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<DatasetIoError> for Failure {
    fn from(e: DatasetIoError) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<ModelIoError> for Failure {
    fn from(e: ModelIoError) -> Self {
        match e {
            ModelIoError::VersionMismatch { .. } => Failure::mismatch(e.to_string()),
            _ => Failure::input(e.to_string()),
        }
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<NnError> for Failure {
    fn from(e: NnError) -> Self {
        match e {
            NnError::BindingMismatch | NnError::DimensionMismatch(_) => Failure::mismatch(e.to_string()),
            NnError::NonfiniteActivation { .. } | NnError::StaleCache => Failure::numerical(e.to_string()),
            _ => Failure::input(e.to_string()),
        }
    }
}

impl From<DcopfError> for Failure {
    fn from(e: DcopfError) -> Self {
        match e {
            DcopfError::Dimension(_) => Failure::mismatch(e.to_string()),
            _ => Failure::numerical(e.to_string()),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Solve(inner) => inner.into(),
            ScenarioError::Unbounded(_) => Failure::numerical(e.to_string()),
            ScenarioError::LabelOutOfRange { .. } | ScenarioError::MalformedDictionary => {
                Failure::mismatch(e.to_string())
            }
            _ => Failure::input(e.to_string()),
        }
    }
}
