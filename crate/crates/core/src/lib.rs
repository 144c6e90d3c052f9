//! D-optimal experimental designs for multinomial logistic models.

pub mod analytic;
pub mod error;
pub mod fisher;
pub mod linalg;
pub mod model;
pub mod optimize;
pub mod poly;

pub use error::{Error, Result};
pub use model::{
    CategoryProbabilities, Feasibility, LinkKind, ModelSpec, OddsStructure, ParameterVector,
    PredictorSpec,
};
