//! Data-driven component models: regular-grid tables and dense networks,
//! their exchange file format, table fitting, validation metrics and
//! component wrapping.

mod fit;
mod model;
mod net;
mod table;
mod wrap;

use std::path::Path;

pub use fit::{fit_table, fit_table_model, summarize, validate, Dataset, OutputMetrics, Sample, TableFit};
pub use model::{load_model, save_model, Metadata, Payload, PortInfo, SurrogateModel, ValidationSummary, SCHEMA_VERSION};
pub use net::{eval_net, Activation, DenseNet, Layer, Normalization};
pub use table::{eval_table, Axis, GridTable, MAX_TABLE_DIMS};
pub use wrap::{bind_core, wrap_component, BoundModel, Feedthrough, SurrogateComponent};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("{0}")]
    Io(String),
    #[error("model file does not parse: {0}")]
    Parse(String),
    #[error("unsupported schema_version {0} (expected 1)")]
    SchemaVersion(u64),
    #[error("invalid model at {location}: {reason}")]
    Invalid { location: String, reason: String },
    #[error("port mismatch: {0}")]
    PortMismatch(String),
    #[error("grid node {node} ({point}) has no samples within half a cell")]
    Coverage { node: usize, point: String },
    #[error("data error: {0}")]
    Data(String),
    #[error("{path}: {source}")]
    InFile { path: String, source: Box<ModelError> },
}

impl ModelError {
    pub(crate) fn invalid(location: impl Into<String>, reason: impl Into<String>) -> Self {
        ModelError::Invalid { location: location.into(), reason: reason.into() }
    }

    pub(crate) fn in_file(self, path: &Path) -> Self {
        ModelError::InFile { path: path.display().to_string(), source: Box::new(self) }
    }

    /// The underlying error with file context removed.
    pub fn root(&self) -> &ModelError {
        match self {
            ModelError::InFile { source, .. } => source.root(),
            other => other,
        }
    }
}
