//! Fisher information for approximate and exact designs, in three equivalent forms, plus the
//! rank analysis that decides positive definiteness and the minimal support size.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    log_det_psd, min_eigenvalue, numeric_rank, row_space_complement, symmetrize, vstack,
};
use crate::model::{
    build_model_matrix, cdl_inverse_columns, compute_pi, compute_u, ModelSpec, ParameterVector,
    PredictorSpec,
};

/// Tolerance on the sum of approximate-design weights.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

fn check_points(points: &[Vec<f64>]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::InvalidDesign("design has no points".into()));
    }
    let d = points[0].len();
    for (k, x) in points.iter().enumerate() {
        if x.len() != d {
            return Err(Error::Dimension {
                what: "design point",
                expected: d,
                found: x.len(),
            });
        }
        if points[..k].contains(x) {
            return Err(Error::InvalidDesign(format!("point {x:?} appears twice")));
        }
    }
    Ok(())
}

/// Support points with nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignApprox {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DesignApprox {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        check_points(&points)?;
        if weights.len() != points.len() {
            return Err(Error::Dimension {
                what: "weights",
                expected: points.len(),
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidDesign(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidDesign(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(Self { points, weights })
    }

    /// Rescales nonnegative `weights` to sum to one.
    pub fn normalized(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidDesign("weights have no positive mass".into()));
        }
        Self::new(points, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let m = points.len();
        Self::normalized(points, vec![1.0; m])
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points with positive weight.
    pub fn support(&self) -> DesignApprox {
        let (points, weights) = self
            .points
            .iter()
            .zip(&self.weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(x, &w)| (x.clone(), w))
            .unzip();
        DesignApprox { points, weights }
    }
}

/// Support points with integer allocations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignExact {
    points: Vec<Vec<f64>>,
    counts: Vec<u64>,
}

impl DesignExact {
    pub fn new(points: Vec<Vec<f64>>, counts: Vec<u64>) -> Result<Self> {
        check_points(&points)?;
        if counts.len() != points.len() {
            return Err(Error::Dimension {
                what: "counts",
                expected: points.len(),
                found: counts.len(),
            });
        }
        if counts.iter().sum::<u64>() == 0 {
            return Err(Error::InvalidDesign("exact design needs n >= 1".into()));
        }
        Ok(Self { points, counts })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Allocation proportions `n_i / n`.
    pub fn proportions(&self) -> DesignApprox {
        let n = self.total() as f64;
        DesignApprox::normalized(
            self.points.clone(),
            self.counts.iter().map(|&c| c as f64 / n).collect(),
        )
        .expect("n >= 1")
    }
}

/// Either kind of design.
#[derive(Debug, Clone, Copy)]
pub enum DesignRef<'a> {
    Approx(&'a DesignApprox),
    Exact(&'a DesignExact),
}

impl<'a> From<&'a DesignApprox> for DesignRef<'a> {
    fn from(d: &'a DesignApprox) -> Self {
        DesignRef::Approx(d)
    }
}

impl<'a> From<&'a DesignExact> for DesignRef<'a> {
    fn from(d: &'a DesignExact) -> Self {
        DesignRef::Exact(d)
    }
}

impl DesignRef<'_> {
    pub fn points(&self) -> &[Vec<f64>] {
        match self {
            DesignRef::Approx(d) => d.points(),
            DesignRef::Exact(d) => d.points(),
        }
    }

    /// Weights `n_i` entering `F = Σ n_i F_i`.
    pub fn raw_weights(&self) -> Vec<f64> {
        match self {
            DesignRef::Approx(d) => d.weights().to_vec(),
            DesignRef::Exact(d) => d.counts().iter().map(|&c| c as f64).collect(),
        }
    }

    /// Total `n`; one for approximate designs.
    pub fn total(&self) -> f64 {
        match self {
            DesignRef::Approx(_) => 1.0,
            DesignRef::Exact(d) => d.total() as f64,
        }
    }
}

/// A Fisher information matrix with its log-determinant and smallest eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    pub matrix: DMatrix<f64>,
    /// `-inf` when singular.
    pub log_det: f64,
    pub min_eigenvalue: f64,
}

impl FisherMatrix {
    pub fn from_matrix(mut matrix: DMatrix<f64>) -> Self {
        symmetrize(&mut matrix);
        let log_det = log_det_psd(&matrix);
        let min_eigenvalue = min_eigenvalue(&matrix);
        Self {
            matrix,
            log_det,
            min_eigenvalue,
        }
    }

    /// Log-determinant of `scale · matrix`.
    fn scaled(matrix: DMatrix<f64>, scale: f64) -> Self {
        let p = matrix.nrows() as f64;
        let mut out = Self::from_matrix(matrix);
        out.log_det += p * scale.ln();
        out.matrix *= scale;
        out.min_eigenvalue *= scale;
        out
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_singular(&self) -> bool {
        self.log_det == f64::NEG_INFINITY
    }

    /// Determinant, which may overflow for large designs.
    pub fn det(&self) -> f64 {
        self.log_det.exp()
    }
}

/// `F_i = X_iᵀ U_i X_i` at a single point.
pub fn fisher_at_point(
    model: &ModelSpec,
    theta: &ParameterVector,
    x: &[f64],
) -> Result<DMatrix<f64>> {
    let pi = compute_pi(model, theta, x)?;
    let xm = build_model_matrix(model, x)?;
    let j = model.categories();
    let u = compute_u(model.link(), &pi);
    let core = xm.rows(0, j - 1);
    let mut f = core.transpose() * u * core;
    symmetrize(&mut f);
    Ok(f)
}

/// `Σ n_i F_i` from per-point information matrices.
pub fn fisher_sum(per_point: &[DMatrix<f64>], weights: &[f64]) -> DMatrix<f64> {
    let p = per_point.first().map_or(0, |f| f.nrows());
    let mut out = DMatrix::zeros(p, p);
    for (f, &w) in per_point.iter().zip(weights) {
        if w != 0.0 {
            out += f * w;
        }
    }
    out
}

fn design_points_feasible(design: &DesignRef<'_>) -> Result<()> {
    check_points(design.points())
}

/// Fisher information of a design.
///
/// Approximate designs use `GᵀWG`; exact designs use `Σ n_i F_i` with the log-determinant
/// taken on proportions and `p·ln n` added back.
pub fn fisher_total<'a>(
    model: &ModelSpec,
    theta: &ParameterVector,
    design: impl Into<DesignRef<'a>>,
) -> Result<FisherMatrix> {
    let design = design.into();
    design_points_feasible(&design)?;
    match design {
        DesignRef::Approx(_) => {
            let gw = gw_factorization(model, theta, design)?;
            Ok(FisherMatrix::from_matrix(gw.fisher()))
        }
        DesignRef::Exact(d) => {
            let per_point = d
                .points()
                .iter()
                .map(|x| fisher_at_point(model, theta, x))
                .collect::<Result<Vec<_>>>()?;
            let n = d.total() as f64;
            let props: Vec<f64> = d.counts().iter().map(|&c| c as f64 / n).collect();
            Ok(FisherMatrix::scaled(fisher_sum(&per_point, &props), n))
        }
    }
}

/// `H`, the `p × m(J-1)` predictor matrix, with its blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct HStack {
    /// `H_j`, each `p_j × m`.
    pub per_category: Vec<DMatrix<f64>>,
    /// `H_c`, `p_c × m`.
    pub common: DMatrix<f64>,
    pub matrix: DMatrix<f64>,
}

fn predictor_block(spec: &PredictorSpec, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(spec.len(), points.len());
    for (i, x) in points.iter().enumerate() {
        for (k, v) in spec.evaluate(x)?.into_iter().enumerate() {
            out[(k, i)] = v;
        }
    }
    Ok(out)
}

impl HStack {
    pub fn new(model: &ModelSpec, points: &[Vec<f64>]) -> Result<Self> {
        let m = points.len();
        let jm1 = model.categories() - 1;
        let per_category = model
            .category_predictors()
            .iter()
            .map(|s| predictor_block(s, points))
            .collect::<Result<Vec<_>>>()?;
        let common = predictor_block(model.common_predictors(), points)?;
        let offsets = model.block_offsets();
        let mut matrix = DMatrix::zeros(model.num_params(), m * jm1);
        for (j, h) in per_category.iter().enumerate() {
            matrix
                .view_mut((offsets[j], j * m), (h.nrows(), m))
                .copy_from(h);
            matrix
                .view_mut((offsets[jm1], j * m), (common.nrows(), m))
                .copy_from(&common);
        }
        Ok(Self {
            per_category,
            common,
            matrix,
        })
    }

    /// `H*`: the columns of points with positive weight.
    pub fn reduced(&self, weights: &[f64]) -> DMatrix<f64> {
        let m = weights.len();
        let keep: Vec<usize> = (0..self.matrix.ncols())
            .filter(|c| weights[c % m] > 0.0)
            .collect();
        self.matrix.select_columns(keep.iter())
    }
}

/// `U = (U_st)` with `U_st = diag(n_i u_st(π_i))`, size `m(J-1)`.
pub fn u_block_matrix(
    model: &ModelSpec,
    theta: &ParameterVector,
    points: &[Vec<f64>],
    weights: &[f64],
) -> Result<DMatrix<f64>> {
    let m = points.len();
    let jm1 = model.categories() - 1;
    let mut u = DMatrix::zeros(m * jm1, m * jm1);
    for (i, (x, &n)) in points.iter().zip(weights).enumerate() {
        let core = compute_u(model.link(), &compute_pi(model, theta, x)?);
        for s in 0..jm1 {
            for t in 0..jm1 {
                u[(s * m + i, t * m + i)] = n * core[(s, t)];
            }
        }
    }
    Ok(u)
}

/// `F = H U Hᵀ`.
pub fn fisher_huh<'a>(
    model: &ModelSpec,
    theta: &ParameterVector,
    design: impl Into<DesignRef<'a>>,
) -> Result<FisherMatrix> {
    let design = design.into();
    design_points_feasible(&design)?;
    let h = HStack::new(model, design.points())?;
    let u = u_block_matrix(model, theta, design.points(), &design.raw_weights())?;
    Ok(FisherMatrix::from_matrix(
        &h.matrix * u * h.matrix.transpose(),
    ))
}

/// `G` (`mJ × p`) and the diagonal of `W` such that `F = n GᵀWG`.
#[derive(Debug, Clone, PartialEq)]
pub struct GWFactorization {
    pub g: DMatrix<f64>,
    pub w_diag: DVector<f64>,
    pub n: f64,
}

impl GWFactorization {
    pub fn fisher(&self) -> DMatrix<f64> {
        let mut wg = self.g.clone();
        for r in 0..wg.nrows() {
            let s = self.w_diag[r];
            wg.row_mut(r).scale_mut(s);
        }
        let mut f = self.g.transpose() * wg * self.n;
        symmetrize(&mut f);
        f
    }
}

pub fn gw_factorization<'a>(
    model: &ModelSpec,
    theta: &ParameterVector,
    design: impl Into<DesignRef<'a>>,
) -> Result<GWFactorization> {
    let design = design.into();
    let points = design.points();
    let n = design.total();
    let raw = design.raw_weights();
    let j = model.categories();
    let p = model.num_params();
    let mut g = DMatrix::zeros(points.len() * j, p);
    let mut w_diag = DVector::zeros(points.len() * j);
    for (i, x) in points.iter().enumerate() {
        let pi = compute_pi(model, theta, x)?;
        let c_inv = cdl_inverse_columns(model.link(), &pi);
        let xm = build_model_matrix(model, x)?;
        g.view_mut((i * j, 0), (j, p)).copy_from(&(c_inv * xm));
        for (k, &v) in pi.pi().iter().enumerate() {
            w_diag[i * j + k] = raw[i] / n / v;
        }
    }
    Ok(GWFactorization { g, w_diag, n })
}

/// `dim ∩ rowspace(M_k)` for matrices sharing a column count `m`.
///
/// Computed as `m - rank` of the stacked orthogonal complements, which is exact for any
/// number of subspaces.
pub fn subspace_intersection_dim(matrices: &[&DMatrix<f64>]) -> usize {
    let Some(first) = matrices.first() else {
        return 0;
    };
    let m = first.ncols();
    let complements: Vec<DMatrix<f64>> = matrices.iter().map(|h| row_space_complement(h)).collect();
    let refs: Vec<&DMatrix<f64>> = complements.iter().collect();
    m - numeric_rank(&vstack(&refs, m))
}

/// Alternating sum of ranks of all column-stacked subfamilies.
///
/// Agrees with [`subspace_intersection_dim`] for one or two matrices; for three or more it
/// can differ and even go negative.
pub fn inclusion_exclusion_dim(matrices: &[&DMatrix<f64>]) -> i64 {
    let n = matrices.len();
    if n == 0 {
        return 0;
    }
    let m = matrices[0].ncols();
    let mut total = 0i64;
    for mask in 1u32..(1 << n) {
        let chosen: Vec<&DMatrix<f64>> = (0..n)
            .filter(|k| mask & (1 << k) != 0)
            .map(|k| matrices[k])
            .collect();
        let r = numeric_rank(&vstack(&chosen, m)) as i64;
        if chosen.len() % 2 == 1 {
            total += r;
        } else {
            total -= r;
        }
    }
    total
}

/// Positive-definiteness analysis for a candidate point set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub category_sizes: Vec<usize>,
    pub common_size: usize,
    pub category_ranks: Vec<usize>,
    pub common_rank: usize,
    pub p_h: usize,
    /// `dim(rowspace(H_c) ∩ ∩ rowspace(H_j))`.
    pub common_overlap: usize,
    pub k_min: usize,
    pub num_points: usize,
    pub num_params: usize,
    pub rank_h: usize,
    /// Fisher matrix is positive definite with positive weight on every point.
    pub positive_definite: bool,
    pub violations: Vec<String>,
}

/// Rank analysis of `H` at `points`.
pub fn analyze_rank(model: &ModelSpec, points: &[Vec<f64>]) -> Result<RankReport> {
    check_points(points)?;
    let h = HStack::new(model, points)?;
    let category_sizes = model.category_sizes();
    let common_size = model.common_size();
    let category_ranks: Vec<usize> = h.per_category.iter().map(numeric_rank).collect();
    let common_rank = numeric_rank(&h.common);
    let blocks: Vec<&DMatrix<f64>> = h.per_category.iter().collect();
    let p_h = subspace_intersection_dim(&blocks);
    let common_overlap = if common_size == 0 {
        0
    } else {
        let mut all = blocks.clone();
        all.push(&h.common);
        subspace_intersection_dim(&all)
    };
    let max_pj = category_sizes.iter().cloned().max().unwrap_or(0);
    let k_min = if common_size == 0 {
        max_pj
    } else {
        max_pj.max(common_size + p_h)
    };
    let rank_h = numeric_rank(&h.matrix);
    let p = model.num_params();

    let mut violations = Vec::new();
    if points.len() < k_min {
        violations.push(format!(
            "{} distinct points, at least {k_min} needed",
            points.len()
        ));
    }
    for (j, (&r, &pj)) in category_ranks.iter().zip(&category_sizes).enumerate() {
        if r < pj {
            violations.push(format!("H_{} has rank {r} < {pj}", j + 1));
        }
    }
    if common_rank < common_size {
        violations.push(format!("H_c has rank {common_rank} < {common_size}"));
    }
    if common_overlap > 0 {
        violations.push(format!(
            "row space of H_c meets the common row space of the H_j in dimension {common_overlap}"
        ));
    }
    let positive_definite = rank_h == p;
    if !positive_definite && violations.is_empty() {
        violations.push(format!("H has rank {rank_h} < {p}"));
    }
    Ok(RankReport {
        category_sizes,
        common_size,
        category_ranks,
        common_rank,
        p_h,
        common_overlap,
        k_min,
        num_points: points.len(),
        num_params: p,
        rank_h,
        positive_definite,
        violations,
    })
}
