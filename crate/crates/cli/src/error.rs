use std::fmt;
use std::path::Path;

use roadlabel_core::annotation::AnnotationError;
use roadlabel_core::compositor::CompositeError;
use roadlabel_core::roadgraph::GraphError;
use roadlabel_core::taxonomy::TaxonomyError;
use roadlabel_core::viewplan::PlanError;
use roadlabel_core::world::WorldError;
use roadlabel_service::ServiceError;
use serde_json::json;

/// Failure with a stable category for machine consumers.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::new("io", format!("{}: {e}", path.display()))
    }

    pub fn to_json(&self) -> String {
        json!({ "error": self.kind, "message": self.message }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

macro_rules! from_error {
    ($($ty:ty => $kind:literal),* $(,)?) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::new($kind, e.to_string())
            }
        })*
    };
}

from_error! {
    GraphError => "graph",
    PlanError => "plan",
    WorldError => "world",
    CompositeError => "composite",
    TaxonomyError => "taxonomy",
    AnnotationError => "annotation",
    ServiceError => "service",
    serde_json::Error => "json",
}
