use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lift_one::{lift_one_from, LiftOneOutcome};
use super::{InformationSet, OptimizerConfig};
use crate::error::{Error, Result};
use crate::fisher::{fisher_total, DesignRef};
use crate::linalg::symmetrize;
use crate::model::{build_model_matrix, compute_pi, compute_u, ModelSpec, ParameterVector};

/// Draws of `θ` from a prior.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSample {
    thetas: Vec<ParameterVector>,
    dropped: usize,
}

impl PriorSample {
    pub fn new(thetas: Vec<ParameterVector>) -> Result<Self> {
        if thetas.is_empty() {
            return Err(Error::EmptyPrior { dropped: 0 });
        }
        Ok(Self { thetas, dropped: 0 })
    }

    /// Keeps the draws under which every point in `points` lies in the design space.
    pub fn filtered(
        model: &ModelSpec,
        thetas: Vec<ParameterVector>,
        points: &[Vec<f64>],
    ) -> Result<Self> {
        let total = thetas.len();
        let keep: Vec<bool> = thetas
            .par_iter()
            .map(|t| points.iter().all(|x| compute_pi(model, t, x).is_ok()))
            .collect();
        let thetas: Vec<ParameterVector> = thetas
            .into_iter()
            .zip(keep)
            .filter_map(|(t, k)| k.then_some(t))
            .collect();
        let dropped = total - thetas.len();
        if thetas.is_empty() {
            return Err(Error::EmptyPrior { dropped });
        }
        Ok(Self { thetas, dropped })
    }

    pub fn thetas(&self) -> &[ParameterVector] {
        &self.thetas
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    /// Draws removed by [`PriorSample::filtered`].
    pub fn dropped(&self) -> usize {
        self.dropped
    }
}

/// `E(F_i) = Xᵀ E(U) X` at `x`, averaging `U` over the draws feasible at `x`.
pub fn ew_information(model: &ModelSpec, prior: &PriorSample, x: &[f64]) -> Result<DMatrix<f64>> {
    let jm1 = model.categories() - 1;
    let us: Vec<Option<DMatrix<f64>>> = prior
        .thetas()
        .par_iter()
        .map(|t| match compute_pi(model, t, x) {
            Ok(pi) => Ok(Some(compute_u(model.link(), &pi))),
            Err(Error::DesignSpace(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let mut sum = DMatrix::zeros(jm1, jm1);
    let mut used = 0usize;
    for u in us.iter().flatten() {
        sum += u;
        used += 1;
    }
    if used == 0 {
        return Err(Error::EmptyPrior {
            dropped: prior.len(),
        });
    }
    let mean = sum / used as f64;
    let xm = build_model_matrix(model, x)?;
    let core = xm.rows(0, jm1);
    let mut f = core.transpose() * mean * core;
    symmetrize(&mut f);
    Ok(f)
}

/// EW D-optimal approximate design: lift-one against `Σ w_i E(F_i)`.
pub fn ew_lift_one(
    model: &ModelSpec,
    prior: &PriorSample,
    points: &[Vec<f64>],
    config: &OptimizerConfig,
) -> Result<LiftOneOutcome> {
    let matrices = points
        .iter()
        .map(|x| ew_information(model, prior, x))
        .collect::<Result<Vec<_>>>()?;
    let info = InformationSet::from_matrices(points.to_vec(), matrices, model.categories())?;
    lift_one_from(&info, None, config)
}

/// Mean log-determinant of a design's information across prior draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesianObjective {
    /// `-inf` when any draw gives a singular matrix.
    pub value: f64,
    pub draws: usize,
    pub singular_draws: usize,
}

pub fn bayesian_objective<'a>(
    model: &ModelSpec,
    prior: &PriorSample,
    design: impl Into<DesignRef<'a>>,
) -> Result<BayesianObjective> {
    let design = design.into();
    let lds: Vec<f64> = prior
        .thetas()
        .par_iter()
        .map(|t| fisher_total(model, t, design).map(|f| f.log_det))
        .collect::<Result<_>>()?;
    let singular_draws = lds.iter().filter(|v| **v == f64::NEG_INFINITY).count();
    let value = if singular_draws > 0 {
        f64::NEG_INFINITY
    } else {
        lds.iter().sum::<f64>() / lds.len() as f64
    };
    Ok(BayesianObjective {
        value,
        draws: lds.len(),
        singular_draws,
    })
}
