//! Targetless k-nearest-neighbor modeling with surprisal-based conviction
//! measures, anomaly reduction, imputation, synthesis and explanation.

pub mod conviction;
pub mod data;
pub mod engine;
pub mod error;
pub mod evaluation;
pub mod explain;
pub mod imputation;
pub mod metric;
pub mod persistence;
pub mod reduction;
pub mod residuals;
pub mod synthesis;

pub use data::{Case, CaseValue, Dataset, FeatureKind, FeatureSchema, Origin};
pub use engine::{Hyperparameters, Model};
pub use error::{Error, ErrorClass, Result};
pub use metric::{DeviationMode, DeviationVector, MetricConfig};
