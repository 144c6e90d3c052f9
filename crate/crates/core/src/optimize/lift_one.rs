use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::equivalence::{certify, EquivalenceReport};
use super::{InformationSet, OptimizerConfig};
use crate::error::{Error, Result};
use crate::fisher::DesignApprox;
use crate::linalg::{log_det_psd, solve_vandermonde};
use crate::model::{ModelSpec, ParameterVector};
use crate::poly::{axpy, monomial_times_one_minus, real_roots};

/// `f_i(z) / f(w) = Σ_{j≤K} b_j z^j (1-z)^{p-j}`, `K = min(J-1, p)`, where `f_i(z)` is the
/// determinant after moving point `i` to weight `z` and rescaling the others.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftOneProfile {
    pub b: Vec<f64>,
    pub p: usize,
    /// Weight of the point in the design the profile was taken at; the profile equals one there.
    pub current: f64,
    /// `log f(w)`, the unit of the profile values.
    pub log_scale: f64,
}

impl LiftOneProfile {
    pub fn degree(&self) -> usize {
        self.b.len() - 1
    }

    /// Profile value relative to `f(w)`.
    pub fn eval(&self, z: f64) -> f64 {
        let k = self.degree();
        let tail = (1.0 - z).powi((self.p - k) as i32);
        let mut inner = 0.0;
        for (j, &b) in self.b.iter().enumerate() {
            inner += b * z.powi(j as i32) * (1.0 - z).powi((k - j) as i32);
        }
        inner * tail
    }

    /// Coefficients, in ascending powers, of a polynomial whose roots in (0, 1) are the
    /// interior stationary points of the profile.
    pub fn stationary_polynomial(&self) -> Vec<f64> {
        let k = self.degree();
        let p = self.p as f64;
        let mut out = Vec::new();
        for (j, &b) in self.b.iter().enumerate() {
            if j > 0 {
                axpy(
                    &mut out,
                    j as f64 * b,
                    &monomial_times_one_minus(j - 1, k - j),
                );
            }
            axpy(&mut out, -p * b, &monomial_times_one_minus(j, k - j));
        }
        out
    }
}

/// Weights after moving point `i` to `z` and rescaling the rest proportionally.
pub(crate) fn lifted_weights(weights: &[f64], i: usize, z: f64) -> Vec<f64> {
    let scale = (1.0 - z) / (1.0 - weights[i]);
    weights
        .iter()
        .enumerate()
        .map(|(k, &w)| if k == i { z } else { w * scale })
        .collect()
}

pub(crate) fn profile_on(
    info: &InformationSet,
    weights: &[f64],
    i: usize,
) -> Result<LiftOneProfile> {
    let wi = weights[i];
    if !(0.0..1.0).contains(&wi) {
        return Err(Error::InvalidArgument(format!(
            "profile needs 0 <= w_i < 1, got {wi}"
        )));
    }
    let log_scale = info.log_det(weights);
    if log_scale == f64::NEG_INFINITY {
        return Err(Error::Singular("design has zero determinant".into()));
    }
    let p = info.num_params();
    let k = (info.categories() - 1).min(p);
    let fi = &info.matrices()[i];
    let mut rest = DMatrix::zeros(p, p);
    for (idx, (f, &w)) in info.matrices().iter().zip(weights).enumerate() {
        if idx != i && w != 0.0 {
            rest += f * (w / (1.0 - wi));
        }
    }
    let log_at = |z: f64| log_det_psd(&(&rest * (1.0 - z) + fi * z));
    let b0 = (log_at(0.0) - log_scale).exp();
    let mut nodes = Vec::with_capacity(k);
    let mut rhs = Vec::with_capacity(k);
    for j in 1..=k {
        let jf = j as f64;
        let l = log_at(1.0 / (jf + 1.0));
        let scaled =
            (p as f64 * (jf + 1.0).ln() + (k as f64 - p as f64) * jf.ln() + l - log_scale).exp();
        nodes.push(jf);
        rhs.push(scaled - b0 * jf.powi(k as i32));
    }
    let sol = solve_vandermonde(&nodes, &rhs)
        .ok_or_else(|| Error::Singular("profile interpolation failed".into()))?;
    let mut b = vec![0.0; k + 1];
    b[0] = b0;
    for (t, v) in sol.into_iter().enumerate() {
        b[k - t] = v;
    }
    Ok(LiftOneProfile {
        b,
        p,
        current: wi,
        log_scale,
    })
}

/// Profile of point `i` (0-based) for an approximate design.
pub fn lift_one_profile(
    model: &ModelSpec,
    theta: &ParameterVector,
    design: &DesignApprox,
    i: usize,
) -> Result<LiftOneProfile> {
    if i >= design.len() {
        return Err(Error::InvalidArgument(format!(
            "point index {i} out of range for {} points",
            design.len()
        )));
    }
    let info = InformationSet::local(model, theta, design.points())?;
    profile_on(&info, design.weights(), i)
}

/// Global maximizer of a profile on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileMaximum {
    pub z: f64,
    pub value: f64,
    /// The dense-grid path was used because root finding failed.
    pub used_fallback: bool,
}

/// Maximizes `profile` over `[0, 1]`.
///
/// Candidates are `0`, the stationary points in `(0, 1)`, the current weight, and `1` when the
/// profile does not vanish there. Ties go to the smaller `z`.
pub fn maximize_profile(profile: &LiftOneProfile, fallback_points: usize) -> ProfileMaximum {
    let mut candidates = vec![0.0, profile.current];
    if profile.degree() == profile.p {
        candidates.push(1.0);
    }
    let poly = profile.stationary_polynomial();
    let used_fallback = match real_roots(&poly) {
        Some((roots, _)) => {
            candidates.extend(roots.into_iter().filter(|&r| r > 0.0 && r < 1.0));
            false
        }
        None => {
            candidates.push(grid_maximizer(profile, fallback_points.max(2)));
            true
        }
    };
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best = ProfileMaximum {
        z: candidates[0],
        value: profile.eval(candidates[0]),
        used_fallback,
    };
    for &z in &candidates[1..] {
        let v = profile.eval(z);
        if v > best.value + 1e-14 * best.value.abs() {
            best.z = z;
            best.value = v;
        }
    }
    best
}

fn grid_maximizer(profile: &LiftOneProfile, points: usize) -> f64 {
    let step = 1.0 / (points - 1) as f64;
    let best = (0..points)
        .map(|k| k as f64 * step)
        .fold((0.0, f64::NEG_INFINITY), |acc, z| {
            let v = profile.eval(z);
            if v > acc.1 {
                (z, v)
            } else {
                acc
            }
        })
        .0;
    // golden-section refinement on the neighbouring cells
    let (mut lo, mut hi) = ((best - step).max(0.0), (best + step).min(1.0));
    let g = 0.5 * (5.0_f64.sqrt() - 1.0);
    for _ in 0..80 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if profile.eval(a) >= profile.eval(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let mid = 0.5 * (lo + hi);
    if profile.eval(mid) > profile.eval(best) {
        mid
    } else {
        best
    }
}

/// Newton steps on the support after each lift-one pass.
const NEWTON_STEPS: usize = 50;

/// One damped Newton step on the weights of the current support.
///
/// Coordinate steps crawl when neighbouring support points carry nearly parallel
/// information; this step resolves such splits quadratically. Returns the new weights only
/// when the log-determinant increases.
fn newton_on_support(info: &InformationSet, w: &[f64], ld: f64) -> Option<(Vec<f64>, f64)> {
    let support: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
    let s = support.len();
    if s < 2 {
        return None;
    }
    let finv = info.information(w).cholesky()?.inverse();
    let a: Vec<DMatrix<f64>> = support
        .iter()
        .map(|&i| &finv * &info.matrices()[i])
        .collect();
    let g: Vec<f64> = a.iter().map(|m| m.trace()).collect();
    // -d²/dw_i dw_k log det = tr(A_i A_k)
    let h = DMatrix::from_fn(s, s, |i, k| a[i].component_mul(&a[k].transpose()).sum());
    let r = s - 1;
    let hr = DMatrix::from_fn(r, r, |i, k| h[(i, k)] - h[(i, r)] - h[(r, k)] + h[(r, r)]);
    let gr = nalgebra::DVector::from_fn(r, |i, _| g[i] - g[r]);
    // pseudo-inverse: with many support points the Hessian is singular along directions
    // that leave Σ w_i F_i unchanged, and the objective is flat there
    let eig = hr.symmetric_eigen();
    let top = eig.eigenvalues.max();
    if !(top > 0.0) {
        return None;
    }
    let mut d = nalgebra::DVector::zeros(r);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > 1e-12 * top {
            let v = eig.eigenvectors.column(k);
            d += v * (v.dot(&gr) / lambda);
        }
    }
    let mut step = vec![0.0; s];
    for i in 0..r {
        step[i] = d[i];
    }
    step[r] = -d.sum();
    // a step that crosses the boundary stops there and drops the blocking point
    let mut t = 1.0f64;
    for (k, &i) in support.iter().enumerate() {
        if step[k] < 0.0 {
            t = t.min(w[i] / -step[k]);
        }
    }
    for _ in 0..30 {
        let mut cand = w.to_vec();
        for (k, &i) in support.iter().enumerate() {
            cand[i] = (w[i] + t * step[k]).max(0.0);
            if cand[i] <= 1e-15 {
                cand[i] = 0.0;
            }
        }
        let total: f64 = cand.iter().sum();
        for v in cand.iter_mut() {
            *v /= total;
        }
        let new_ld = info.log_det(&cand);
        if new_ld > ld {
            return Some((cand, new_ld));
        }
        t *= 0.5;
    }
    None
}

/// Result of a lift-one run.
#[derive(Debug, Clone)]
pub struct LiftOneOutcome {
    /// Weights over every candidate point, zeros included.
    pub design: DesignApprox,
    pub log_det: f64,
    pub passes: usize,
    pub converged: bool,
    /// Log-determinant after every coordinate step.
    pub trace: Vec<f64>,
    pub certificate: EquivalenceReport,
    pub seed: u64,
}

/// Locally D-optimal approximate design over `points`.
pub fn lift_one(
    model: &ModelSpec,
    theta: &ParameterVector,
    points: &[Vec<f64>],
    config: &OptimizerConfig,
) -> Result<LiftOneOutcome> {
    let info = InformationSet::local(model, theta, points)?;
    lift_one_from(&info, None, config)
}

/// Lift-one over an arbitrary information set, starting from `init` or uniform weights.
pub fn lift_one_from(
    info: &InformationSet,
    init: Option<&[f64]>,
    config: &OptimizerConfig,
) -> Result<LiftOneOutcome> {
    config.validate()?;
    let m = info.len();
    let mut w = match init {
        Some(w0) => {
            if w0.len() != m {
                return Err(Error::Dimension {
                    what: "initial weights",
                    expected: m,
                    found: w0.len(),
                });
            }
            DesignApprox::new(info.points().to_vec(), w0.to_vec())?;
            w0.to_vec()
        }
        None => vec![1.0 / m as f64; m],
    };
    let mut ld = info.log_det(&w);
    if ld == f64::NEG_INFINITY {
        return Err(Error::Infeasible(
            "the starting design has a singular information matrix".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..m).collect();
    let mut trace = vec![ld];
    let mut passes = 0;
    let mut converged = false;
    while passes < config.max_passes {
        passes += 1;
        let start = ld;
        order.shuffle(&mut rng);
        for &i in &order {
            if w[i] >= 1.0 {
                continue;
            }
            let profile = profile_on(info, &w, i)?;
            let best = maximize_profile(&profile, config.grid_fallback_points);
            if best.z == w[i] {
                continue;
            }
            let candidate = lifted_weights(&w, i, best.z);
            let new_ld = info.log_det(&candidate);
            if new_ld > ld {
                w = candidate;
                ld = new_ld;
                trace.push(ld);
            }
        }
        for _ in 0..NEWTON_STEPS {
            let Some((candidate, new_ld)) = newton_on_support(info, &w, ld) else {
                break;
            };
            let gain = new_ld - ld;
            w = candidate;
            ld = new_ld;
            trace.push(ld);
            if gain < config.rel_tol {
                break;
            }
        }
        if ld - start < config.rel_tol {
            converged = true;
            break;
        }
    }
    // floor tiny weights, then renormalize
    if w.iter().any(|&v| v > 0.0 && v < config.weight_floor) {
        let floored: Vec<f64> = w
            .iter()
            .map(|&v| if v < config.weight_floor { 0.0 } else { v })
            .collect();
        let total: f64 = floored.iter().sum();
        let floored: Vec<f64> = floored.into_iter().map(|v| v / total).collect();
        let floored_ld = info.log_det(&floored);
        if floored_ld > f64::NEG_INFINITY {
            w = floored;
            ld = floored_ld;
        }
    }
    let total: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= total;
    }
    let design = DesignApprox::new(info.points().to_vec(), w)?;
    let certificate = certify(
        info,
        design.weights(),
        10.0 * config.rel_tol,
        config.grid_fallback_points,
    )?;
    Ok(LiftOneOutcome {
        design,
        log_det: ld,
        passes,
        converged,
        trace,
        certificate,
        seed: config.seed,
    })
}
