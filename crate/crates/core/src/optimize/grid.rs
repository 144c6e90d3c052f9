use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lift_one::{lift_one_from, LiftOneOutcome};
use super::{InformationSet, OptimizerConfig};
use crate::error::{Error, Result};
use crate::fisher::{fisher_at_point, DesignApprox};
use crate::model::{ModelSpec, ParameterVector};

/// One factor's range `lower, lower + step, ..., ≤ upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub lower: f64,
    pub upper: f64,
    pub step: f64,
}

/// Cartesian grid over the design factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<GridAxis>,
}

impl GridSpec {
    pub fn new(axes: Vec<GridAxis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidArgument("grid has no axes".into()));
        }
        for a in &axes {
            if !(a.step > 0.0) || !a.lower.is_finite() || !a.upper.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "grid axis {a:?} needs finite bounds and a positive step"
                )));
            }
            if a.upper < a.lower {
                return Err(Error::InvalidArgument(format!(
                    "grid axis upper bound {} below lower bound {}",
                    a.upper, a.lower
                )));
            }
        }
        Ok(Self { axes })
    }

    /// One axis `[lower, upper]` with spacing `step`.
    pub fn interval(lower: f64, upper: f64, step: f64) -> Result<Self> {
        Self::new(vec![GridAxis { lower, upper, step }])
    }

    fn axis_values(a: &GridAxis) -> Vec<f64> {
        let n = ((a.upper - a.lower) / a.step + 1e-9).floor() as usize;
        (0..=n).map(|k| a.lower + k as f64 * a.step).collect()
    }

    /// Grid points, last factor varying fastest.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = vec![Vec::new()];
        for a in &self.axes {
            let vals = Self::axis_values(a);
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    vals.iter().map(move |&v| {
                        let mut x = prefix.clone();
                        x.push(v);
                        x
                    })
                })
                .collect();
        }
        out
    }
}

/// Result of a grid search.
#[derive(Debug, Clone)]
pub struct GridOutcome {
    /// Points carrying positive weight.
    pub support: DesignApprox,
    pub log_det: f64,
    /// Grid points dropped as outside the design space.
    pub dropped: usize,
    pub candidates: usize,
    /// Absent when the feasible grid cannot support a nonsingular design.
    pub lift: Option<LiftOneOutcome>,
}

/// Lift-one over every feasible grid point.
pub fn grid_search(
    model: &ModelSpec,
    theta: &ParameterVector,
    grid: &GridSpec,
    config: &OptimizerConfig,
) -> Result<GridOutcome> {
    if grid.axes.len() != model.factors() {
        return Err(Error::Dimension {
            what: "grid axes",
            expected: model.factors(),
            found: grid.axes.len(),
        });
    }
    let all = grid.points();
    let candidates = all.len();
    let evaluated: Vec<_> = all
        .into_par_iter()
        .map(|x| fisher_at_point(model, theta, &x).map(|f| (x, f)))
        .collect();
    let mut points = Vec::new();
    let mut matrices = Vec::new();
    let mut dropped = 0;
    for r in evaluated {
        match r {
            Ok((x, f)) => {
                points.push(x);
                matrices.push(f);
            }
            Err(Error::DesignSpace(_)) => dropped += 1,
            Err(e) => return Err(e),
        }
    }
    if points.is_empty() {
        return Err(Error::Infeasible(format!(
            "all {candidates} grid points lie outside the design space"
        )));
    }
    let info = InformationSet::from_matrices(points, matrices, model.categories())?;
    match lift_one_from(&info, None, config) {
        Ok(lift) => Ok(GridOutcome {
            support: lift.design.support(),
            log_det: lift.log_det,
            dropped,
            candidates,
            lift: Some(lift),
        }),
        Err(Error::Infeasible(_)) => Ok(GridOutcome {
            support: DesignApprox::uniform(info.points().to_vec())?,
            log_det: f64::NEG_INFINITY,
            dropped,
            candidates,
            lift: None,
        }),
        Err(e) => Err(e),
    }
}
