use serde::{Deserialize, Serialize};

use super::lift_one::{maximize_profile, profile_on};
use super::InformationSet;
use crate::error::{Error, Result};
use crate::fisher::{fisher_total, DesignApprox, DesignRef};
use crate::model::{ModelSpec, ParameterVector};

/// General-equivalence diagnostics: how much each one-point lift could still gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    /// `(max_z f_i(z) - f_i(w_i)) / f(w)` per point.
    pub slacks: Vec<f64>,
    /// Maximizing weight per point.
    pub maximizers: Vec<f64>,
    pub max_slack: f64,
    /// Index of the point with the largest slack.
    pub worst_point: usize,
    pub tol: f64,
    pub optimal: bool,
}

pub(crate) fn certify(
    info: &InformationSet,
    weights: &[f64],
    tol: f64,
    fallback_points: usize,
) -> Result<EquivalenceReport> {
    if info.log_det(weights) == f64::NEG_INFINITY {
        return Err(Error::Singular(
            "equivalence check needs a nonsingular design".into(),
        ));
    }
    let mut slacks = Vec::with_capacity(weights.len());
    let mut maximizers = Vec::with_capacity(weights.len());
    for (i, &wi) in weights.iter().enumerate() {
        if wi >= 1.0 {
            // all mass on one point: no proportional rescaling exists
            slacks.push(0.0);
            maximizers.push(wi);
            continue;
        }
        let profile = profile_on(info, weights, i)?;
        let best = maximize_profile(&profile, fallback_points);
        slacks.push(best.value - profile.eval(wi));
        maximizers.push(best.z);
    }
    let (worst_point, max_slack) =
        slacks
            .iter()
            .cloned()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, s)| if s > acc.1 { (i, s) } else { acc },
            );
    Ok(EquivalenceReport {
        optimal: max_slack <= tol,
        slacks,
        maximizers,
        max_slack,
        worst_point,
        tol,
    })
}

/// Checks whether every one-point profile of `design` peaks at its current weight.
pub fn equivalence_check(
    model: &ModelSpec,
    theta: &ParameterVector,
    design: &DesignApprox,
    tol: f64,
) -> Result<EquivalenceReport> {
    let info = InformationSet::local(model, theta, design.points())?;
    certify(&info, design.weights(), tol, 200)
}

/// D-efficiency `(|F(target)| / |F(reference)|)^{1/p}`.
///
/// Zero when the target is singular.
pub fn efficiency<'a, 'b>(
    model: &ModelSpec,
    theta: &ParameterVector,
    target: impl Into<DesignRef<'a>>,
    reference: impl Into<DesignRef<'b>>,
) -> Result<f64> {
    let r = fisher_total(model, theta, reference)?;
    if r.is_singular() {
        return Err(Error::Singular("reference design".into()));
    }
    let t = fisher_total(model, theta, target)?;
    if t.is_singular() {
        return Ok(0.0);
    }
    Ok(((t.log_det - r.log_det) / model.num_params() as f64).exp())
}
