//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use optdesign::fisher::fisher_at_point;
use optdesign::model::{compute_pi, LinkConstants};
use optdesign::{LinkKind, ModelSpec, OddsStructure, ParameterVector, PredictorSpec};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const FLIES_THETA: [f64; 5] = [-1.935, -0.02642, 0.0003174, -9.159, 0.06386];
pub const TRAUMA_THETA: [f64; 8] = [-0.865, -0.113, -0.094, -0.269, 0.706, -0.182, 1.909, -0.119];

pub fn flies_model(link: LinkKind) -> ModelSpec {
    ModelSpec::new(
        link,
        1,
        3,
        vec![PredictorSpec::polynomial(2), PredictorSpec::polynomial(1)],
        PredictorSpec::empty(1),
    )
    .unwrap()
}

pub fn flies() -> (ModelSpec, ParameterVector, Vec<Vec<f64>>) {
    let m = flies_model(LinkKind::Continuation);
    let t = ParameterVector::from_flat(&m, &FLIES_THETA).unwrap();
    let pts = (0..7).map(|k| vec![80.0 + 20.0 * k as f64]).collect();
    (m, t, pts)
}

pub fn trauma() -> (ModelSpec, ParameterVector, Vec<Vec<f64>>) {
    let m = ModelSpec::npo(LinkKind::Cumulative, 5, PredictorSpec::polynomial(1)).unwrap();
    let t = ParameterVector::from_flat(&m, &TRAUMA_THETA).unwrap();
    let pts = (1..=4).map(|k| vec![k as f64]).collect();
    (m, t, pts)
}

/// Predictor block from exponent tuples.
pub fn terms(d: usize, t: &[&[u32]]) -> PredictorSpec {
    PredictorSpec::new(d, t.iter().map(|e| e.to_vec()).collect()).unwrap()
}

pub fn random_points(rng: &mut ChaCha8Rng, m: usize, d: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

/// A random model of the requested link and odds structure with one or two factors.
pub fn random_model(rng: &mut ChaCha8Rng, link: LinkKind, odds: OddsStructure) -> ModelSpec {
    let d = rng.gen_range(1..=2usize);
    let j = rng.gen_range(3..=4usize);
    let linear: Vec<Vec<u32>> = (0..=d)
        .map(|k| (0..d).map(|f| u32::from(k == f + 1)).collect())
        .collect();
    let slopes: Vec<Vec<u32>> = linear[1..].to_vec();
    let full = PredictorSpec::new(d, linear.clone()).unwrap();
    let m = match odds {
        OddsStructure::Npo => ModelSpec::npo(link, j, full),
        OddsStructure::Po => ModelSpec::po(link, j, PredictorSpec::new(d, slopes).unwrap()),
        OddsStructure::Ppo => {
            let mut per = vec![PredictorSpec::intercept(d); j - 1];
            per[0] = PredictorSpec::new(d, linear[..2].to_vec()).unwrap();
            let common = if d == 2 {
                terms(2, &[&[0, 1]])
            } else {
                terms(1, &[&[2]])
            };
            ModelSpec::new(link, d, j, per, common)
        }
    }
    .unwrap();
    assert_eq!(m.odds_structure(), odds);
    m
}

/// Parameters with intercepts increasing by at least 1.5 and small slopes, so cumulative
/// models stay feasible on `[-1, 1]^d`.
pub fn random_theta(rng: &mut ChaCha8Rng, model: &ModelSpec) -> ParameterVector {
    let mut base = rng.gen_range(-2.0..-1.0);
    let beta = model
        .category_predictors()
        .iter()
        .map(|spec| {
            let v = spec
                .terms()
                .iter()
                .map(|t| {
                    if t.iter().all(|&e| e == 0) {
                        base
                    } else {
                        rng.gen_range(-0.2..0.2)
                    }
                })
                .collect();
            base += rng.gen_range(1.5..2.5);
            v
        })
        .collect();
    let zeta = (0..model.common_size())
        .map(|_| rng.gen_range(-0.5..0.5))
        .collect();
    ParameterVector::new(model, beta, zeta).unwrap()
}

/// `log det` through a Cholesky factorization, `-inf` when it fails.
pub fn chol_log_det(m: &DMatrix<f64>) -> f64 {
    match m.clone().cholesky() {
        Some(c) => 2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>(),
        None => f64::NEG_INFINITY,
    }
}

pub fn weighted_log_det(per_point: &[DMatrix<f64>], w: &[f64]) -> f64 {
    let p = per_point[0].nrows();
    let mut f = DMatrix::zeros(p, p);
    for (fi, &wi) in per_point.iter().zip(w) {
        f += fi * wi;
    }
    chol_log_det(&f)
}

pub fn point_matrices(
    model: &ModelSpec,
    theta: &ParameterVector,
    points: &[Vec<f64>],
) -> Vec<DMatrix<f64>> {
    points
        .iter()
        .map(|x| fisher_at_point(model, theta, x).unwrap())
        .collect()
}

/// Best log-determinant over the simplex grid with the given step on three points.
pub fn simplex_grid_best(per_point: &[DMatrix<f64>], step: f64) -> f64 {
    assert_eq!(per_point.len(), 3);
    let k = (1.0 / step).round() as usize;
    let mut best = f64::NEG_INFINITY;
    for a in 0..=k {
        for b in 0..=(k - a) {
            let w = [a as f64 * step, b as f64 * step, (k - a - b) as f64 * step];
            best = best.max(weighted_log_det(per_point, &w));
        }
    }
    best
}

/// Every allocation of `n` units over `m` points.
pub fn compositions(n: u64, m: usize) -> Vec<Vec<u64>> {
    if m == 1 {
        return vec![vec![n]];
    }
    (0..=n)
        .flat_map(|first| {
            compositions(n - first, m - 1)
                .into_iter()
                .map(move |mut rest| {
                    rest.insert(0, first);
                    rest
                })
        })
        .collect()
}

/// Exhaustive maximum of `log det Σ n_i F_i`.
pub fn exhaustive_exact_best(per_point: &[DMatrix<f64>], n: u64) -> f64 {
    compositions(n, per_point.len())
        .iter()
        .map(|c| {
            let w: Vec<f64> = c.iter().map(|&v| v as f64).collect();
            weighted_log_det(per_point, &w)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `dim ∩ rowspace(M_k)` from the null space of `[B_1 -B_2 0 ...; B_1 0 -B_3 ...]`, where
/// `B_k` are orthonormal bases of the row spaces.
pub fn null_space_intersection_dim(matrices: &[&DMatrix<f64>]) -> usize {
    let bases: Vec<DMatrix<f64>> = matrices
        .iter()
        .map(|m| {
            // eigenvectors of MᵀM with nonzero eigenvalues span the row space
            let eig = (m.transpose() * *m).symmetric_eigen();
            let emax = eig.eigenvalues.amax();
            let keep: Vec<usize> = (0..eig.eigenvalues.len())
                .filter(|&k| emax > 0.0 && eig.eigenvalues[k] > 1e-14 * emax)
                .collect();
            eig.eigenvectors.select_columns(keep.iter())
        })
        .collect();
    let dim = matrices[0].ncols();
    if bases.iter().any(|b| b.ncols() == 0) {
        return 0;
    }
    if bases.len() == 1 {
        return bases[0].ncols();
    }
    let widths: Vec<usize> = bases.iter().map(|b| b.ncols()).collect();
    let cols: usize = widths.iter().sum();
    let rows = dim * (bases.len() - 1);
    let mut sys = DMatrix::zeros(rows, cols);
    let mut offset = widths[0];
    for (k, b) in bases.iter().enumerate().skip(1) {
        let r = (k - 1) * dim;
        sys.view_mut((r, 0), (dim, widths[0])).copy_from(&bases[0]);
        sys.view_mut((r, offset), (dim, widths[k])).copy_from(&(-b));
        offset += widths[k];
    }
    let sv = sys.svd(false, false).singular_values;
    let smax = sv.max();
    let rank = sv.iter().filter(|&&s| s > 1e-9 * smax.max(1.0)).count();
    cols - rank
}

/// `log |U|` from `(∏ n_i)^{J-1} ∏_i (∏_j π_ij)^{-1} |CᵀD_i⁻¹L|^{-2}`, with the middle matrix
/// formed explicitly.
pub fn u_log_det_closed_form(
    model: &ModelSpec,
    theta: &ParameterVector,
    points: &[Vec<f64>],
    counts: &[f64],
) -> f64 {
    let j = model.categories();
    let lc = LinkConstants::new(model.link(), j);
    let mut out = 0.0;
    for (x, &n) in points.iter().zip(counts) {
        let pi = compute_pi(model, theta, x).unwrap();
        out += (j - 1) as f64 * n.ln();
        out -= pi.pi().iter().map(|v| v.ln()).sum::<f64>();
        out -= 2.0 * lc.cdl(&pi).determinant().abs().ln();
    }
    out
}

/// Monomial `coef · w1^e1 w2^e2 w3^e3`.
type Term = (f64, [i32; 3]);

fn poly_eval(terms: &[Term], w: [f64; 3]) -> f64 {
    terms
        .iter()
        .map(|(c, e)| c * w[0].powi(e[0]) * w[1].powi(e[1]) * w[2].powi(e[2]))
        .sum()
}

fn poly_diff(terms: &[Term], k: usize) -> Vec<Term> {
    terms
        .iter()
        .filter(|(_, e)| e[k] > 0)
        .map(|(c, e)| {
            let mut e2 = *e;
            e2[k] -= 1;
            (c * e[k] as f64, e2)
        })
        .collect()
}

/// Maximizer of `w₁w₂w₃(c₁w₂w₃ + c₂w₁w₃ + c₃w₁w₂)` on the simplex: grid start, then Newton on
/// the reduced gradient in `(w₁, w₂)`.
pub fn numeric_three_point(c: [f64; 3]) -> [f64; 3] {
    let f: Vec<Term> = vec![(c[0], [1, 2, 2]), (c[1], [2, 1, 2]), (c[2], [2, 2, 1])];
    let d1: Vec<Vec<Term>> = (0..3).map(|k| poly_diff(&f, k)).collect();
    let d2: Vec<Vec<Vec<Term>>> = d1
        .iter()
        .map(|g| (0..3).map(|k| poly_diff(g, k)).collect())
        .collect();
    let at = |u: f64, v: f64| [u, v, 1.0 - u - v];
    let mut best = (0.0, 1.0 / 3.0, 1.0 / 3.0);
    let k = 400;
    for a in 1..k {
        for b in 1..(k - a) {
            let (u, v) = (a as f64 / k as f64, b as f64 / k as f64);
            let val = poly_eval(&f, at(u, v));
            if val > best.0 {
                best = (val, u, v);
            }
        }
    }
    let (mut u, mut v) = (best.1, best.2);
    for _ in 0..100 {
        let w = at(u, v);
        let g: Vec<f64> = d1.iter().map(|t| poly_eval(t, w)).collect();
        let h = |a: usize, b: usize| poly_eval(&d2[a][b], w);
        let gu = g[0] - g[2];
        let gv = g[1] - g[2];
        let huu = h(0, 0) - 2.0 * h(0, 2) + h(2, 2);
        let hvv = h(1, 1) - 2.0 * h(1, 2) + h(2, 2);
        let huv = h(0, 1) - h(0, 2) - h(1, 2) + h(2, 2);
        let det = huu * hvv - huv * huv;
        let du = (hvv * gu - huv * gv) / det;
        let dv = (huu * gv - huv * gu) / det;
        u -= du;
        v -= dv;
        if du.abs().max(dv.abs()) < 1e-15 {
            break;
        }
    }
    [u, v, 1.0 - u - v]
}

pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}

/// `Σ w_i F_i` has eigenvalue ratio above `1e-10`.
pub fn well_conditioned(per_point: &[DMatrix<f64>], w: &[f64]) -> bool {
    let p = per_point[0].nrows();
    let mut f = DMatrix::zeros(p, p);
    for (fi, &wi) in per_point.iter().zip(w) {
        f += fi * wi;
    }
    let ev = f.symmetric_eigen().eigenvalues;
    ev.min() > 1e-10 * ev.amax()
}
