//! Design optimizers: lift-one for approximate designs, exchange for exact designs, grid
//! search, EW designs under a prior, and the efficiency and equivalence diagnostics.

mod config;
mod equivalence;
mod ew;
mod exchange;
mod grid;
mod lift_one;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fisher::{fisher_at_point, fisher_sum};
use crate::linalg::log_det_psd;
use crate::model::{ModelSpec, ParameterVector};

pub use config::OptimizerConfig;
pub use equivalence::{efficiency, equivalence_check, EquivalenceReport};
pub use ew::{bayesian_objective, ew_information, ew_lift_one, BayesianObjective, PriorSample};
pub use exchange::{exchange, exchange_order, exchange_profile, ExchangeOutcome, ExchangeProfile};
pub use grid::{grid_search, GridAxis, GridOutcome, GridSpec};
pub use lift_one::{
    lift_one, lift_one_from, lift_one_profile, maximize_profile, LiftOneOutcome, LiftOneProfile,
    ProfileMaximum,
};

/// Per-point information matrices over a fixed candidate set.
///
/// The objective of a weight vector `w` is `log det Σ w_i F_i`.
#[derive(Debug, Clone)]
pub struct InformationSet {
    points: Vec<Vec<f64>>,
    matrices: Vec<DMatrix<f64>>,
    categories: usize,
}

impl InformationSet {
    /// Local information at `theta`.
    pub fn local(model: &ModelSpec, theta: &ParameterVector, points: &[Vec<f64>]) -> Result<Self> {
        let matrices = points
            .iter()
            .map(|x| fisher_at_point(model, theta, x))
            .collect::<Result<Vec<_>>>()?;
        Self::from_matrices(points.to_vec(), matrices, model.categories())
    }

    pub fn from_matrices(
        points: Vec<Vec<f64>>,
        matrices: Vec<DMatrix<f64>>,
        categories: usize,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidDesign("no candidate points".into()));
        }
        if matrices.len() != points.len() {
            return Err(Error::Dimension {
                what: "information matrices",
                expected: points.len(),
                found: matrices.len(),
            });
        }
        Ok(Self {
            points,
            matrices,
            categories,
        })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn num_params(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn categories(&self) -> usize {
        self.categories
    }

    /// `Σ w_i F_i`.
    pub fn information(&self, weights: &[f64]) -> DMatrix<f64> {
        fisher_sum(&self.matrices, weights)
    }

    /// `log det Σ w_i F_i`, `-inf` when singular.
    pub fn log_det(&self, weights: &[f64]) -> f64 {
        log_det_psd(&self.information(weights))
    }
}
