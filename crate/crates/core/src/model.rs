//! Multinomial logistic model family: links, predictors, category probabilities and the
//! per-point matrices used to assemble Fisher information.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest magnitude allowed for a linear predictor before exponentiation.
pub const PREDICTOR_CLAMP: f64 = 700.0;

/// Probabilities below this are treated as leaving the design space.
pub const MIN_PROBABILITY: f64 = 1e-300;

/// Minimum gap between consecutive cumulative-logit predictors.
pub const CUMULATIVE_GAP: f64 = 1e-12;

/// The four logit transformations of category probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Baseline,
    Cumulative,
    Adjacent,
    Continuation,
}

impl LinkKind {
    pub const ALL: [LinkKind; 4] = [
        LinkKind::Baseline,
        LinkKind::Cumulative,
        LinkKind::Adjacent,
        LinkKind::Continuation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LinkKind::Baseline => "baseline",
            LinkKind::Cumulative => "cumulative",
            LinkKind::Adjacent => "adjacent",
            LinkKind::Continuation => "continuation",
        }
    }
}

impl fmt::Display for LinkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LinkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "baseline" | "baseline-category" | "nominal" => Ok(LinkKind::Baseline),
            "cumulative" => Ok(LinkKind::Cumulative),
            "adjacent" | "adjacent-categories" => Ok(LinkKind::Adjacent),
            "continuation" | "continuation-ratio" => Ok(LinkKind::Continuation),
            other => Err(Error::InvalidModel(format!("unknown link `{other}`"))),
        }
    }
}

/// Odds structure implied by the predictor layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OddsStructure {
    /// Proportional odds: intercept-only category blocks.
    Po,
    /// Non-proportional odds: no common block.
    Npo,
    /// Partial proportional odds.
    Ppo,
}

impl fmt::Display for OddsStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OddsStructure::Po => "po",
            OddsStructure::Npo => "npo",
            OddsStructure::Ppo => "ppo",
        })
    }
}

/// An ordered list of monomials over the design factors.
///
/// Each term is an exponent vector; the all-zero vector is the intercept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictorSpec {
    factors: usize,
    terms: Vec<Vec<u32>>,
}

impl PredictorSpec {
    pub fn new(factors: usize, terms: Vec<Vec<u32>>) -> Result<Self> {
        for (k, t) in terms.iter().enumerate() {
            if t.len() != factors {
                return Err(Error::InvalidModel(format!(
                    "term {} has {} exponents, model has {} factors",
                    k + 1,
                    t.len(),
                    factors
                )));
            }
            if terms[..k].contains(t) {
                return Err(Error::InvalidModel(format!("duplicate term {t:?}")));
            }
        }
        Ok(Self { factors, terms })
    }

    /// Intercept only.
    pub fn intercept(factors: usize) -> Self {
        Self {
            factors,
            terms: vec![vec![0; factors]],
        }
    }

    /// No terms at all.
    pub fn empty(factors: usize) -> Self {
        Self {
            factors,
            terms: Vec::new(),
        }
    }

    /// Univariate polynomial `1, x, ..., x^degree`.
    pub fn polynomial(degree: u32) -> Self {
        Self {
            factors: 1,
            terms: (0..=degree).map(|e| vec![e]).collect(),
        }
    }

    pub fn terms(&self) -> &[Vec<u32>] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn factors(&self) -> usize {
        self.factors
    }

    pub fn is_intercept_only(&self) -> bool {
        self.terms.len() == 1 && self.terms[0].iter().all(|&e| e == 0)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        evaluate_predictors(self, x)
    }
}

/// Evaluates every monomial of `spec` at `x`.
pub fn evaluate_predictors(spec: &PredictorSpec, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != spec.factors {
        return Err(Error::Dimension {
            what: "design point",
            expected: spec.factors,
            found: x.len(),
        });
    }
    Ok(spec
        .terms
        .iter()
        .map(|t| {
            t.iter()
                .zip(x)
                .map(|(&e, &v)| if e == 0 { 1.0 } else { v.powi(e as i32) })
                .product()
        })
        .collect())
}

/// A multinomial logistic model over `factors` design factors and `categories` response
/// categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    factors: usize,
    categories: usize,
    link: LinkKind,
    per_category: Vec<PredictorSpec>,
    common: PredictorSpec,
}

impl ModelSpec {
    pub fn new(
        link: LinkKind,
        factors: usize,
        categories: usize,
        per_category: Vec<PredictorSpec>,
        common: PredictorSpec,
    ) -> Result<Self> {
        if categories < 2 {
            return Err(Error::InvalidModel(format!(
                "need at least 2 categories, got {categories}"
            )));
        }
        if per_category.len() != categories - 1 {
            return Err(Error::InvalidModel(format!(
                "expected {} category predictor blocks, got {}",
                categories - 1,
                per_category.len()
            )));
        }
        for spec in per_category.iter().chain(std::iter::once(&common)) {
            if spec.factors() != factors {
                return Err(Error::InvalidModel(format!(
                    "predictor block defined over {} factors, model has {}",
                    spec.factors(),
                    factors
                )));
            }
        }
        let p = per_category.iter().map(|s| s.len()).sum::<usize>() + common.len();
        if p == 0 {
            return Err(Error::InvalidModel("model has no parameters".into()));
        }
        Ok(Self {
            factors,
            categories,
            link,
            per_category,
            common,
        })
    }

    /// Non-proportional odds model with the same predictors in every category.
    pub fn npo(link: LinkKind, categories: usize, predictors: PredictorSpec) -> Result<Self> {
        let d = predictors.factors();
        Self::new(
            link,
            d,
            categories,
            vec![predictors; categories - 1],
            PredictorSpec::empty(d),
        )
    }

    /// Proportional odds model with category intercepts and common slopes.
    pub fn po(link: LinkKind, categories: usize, common: PredictorSpec) -> Result<Self> {
        let d = common.factors();
        Self::new(
            link,
            d,
            categories,
            vec![PredictorSpec::intercept(d); categories - 1],
            common,
        )
    }

    pub fn link(&self) -> LinkKind {
        self.link
    }

    pub fn factors(&self) -> usize {
        self.factors
    }

    /// Number of response categories `J`.
    pub fn categories(&self) -> usize {
        self.categories
    }

    pub fn category_predictors(&self) -> &[PredictorSpec] {
        &self.per_category
    }

    pub fn common_predictors(&self) -> &PredictorSpec {
        &self.common
    }

    /// Sizes `p_1, ..., p_{J-1}`.
    pub fn category_sizes(&self) -> Vec<usize> {
        self.per_category.iter().map(|s| s.len()).collect()
    }

    pub fn common_size(&self) -> usize {
        self.common.len()
    }

    /// Total parameter count.
    pub fn num_params(&self) -> usize {
        self.per_category.iter().map(|s| s.len()).sum::<usize>() + self.common.len()
    }

    /// Column offset of each category block followed by the common block.
    pub fn block_offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.categories);
        let mut acc = 0;
        for s in &self.per_category {
            out.push(acc);
            acc += s.len();
        }
        out.push(acc);
        out
    }

    pub fn odds_structure(&self) -> OddsStructure {
        if self.common.is_empty() {
            OddsStructure::Npo
        } else if self.per_category.iter().all(|s| s.is_intercept_only()) {
            OddsStructure::Po
        } else {
            OddsStructure::Ppo
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.factors {
            return Err(Error::Dimension {
                what: "design point",
                expected: self.factors,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "design point {x:?} is not finite"
            )));
        }
        Ok(())
    }
}

/// Coefficients `(β_1, ..., β_{J-1}, ζ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    beta: Vec<Vec<f64>>,
    zeta: Vec<f64>,
}

impl ParameterVector {
    pub fn new(model: &ModelSpec, beta: Vec<Vec<f64>>, zeta: Vec<f64>) -> Result<Self> {
        if beta.len() != model.categories() - 1 {
            return Err(Error::Dimension {
                what: "beta blocks",
                expected: model.categories() - 1,
                found: beta.len(),
            });
        }
        for (b, spec) in beta.iter().zip(model.category_predictors()) {
            if b.len() != spec.len() {
                return Err(Error::Dimension {
                    what: "beta block",
                    expected: spec.len(),
                    found: b.len(),
                });
            }
        }
        if zeta.len() != model.common_size() {
            return Err(Error::Dimension {
                what: "zeta",
                expected: model.common_size(),
                found: zeta.len(),
            });
        }
        Ok(Self { beta, zeta })
    }

    /// Splits a flat `(β_1, ..., β_{J-1}, ζ)` vector according to `model`.
    pub fn from_flat(model: &ModelSpec, flat: &[f64]) -> Result<Self> {
        if flat.len() != model.num_params() {
            return Err(Error::Dimension {
                what: "parameter vector",
                expected: model.num_params(),
                found: flat.len(),
            });
        }
        let mut beta = Vec::with_capacity(model.categories() - 1);
        let mut at = 0;
        for size in model.category_sizes() {
            beta.push(flat[at..at + size].to_vec());
            at += size;
        }
        Ok(Self {
            beta,
            zeta: flat[at..].to_vec(),
        })
    }

    pub fn zeros(model: &ModelSpec) -> Self {
        Self::from_flat(model, &vec![0.0; model.num_params()]).expect("sizes match")
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.beta
            .iter()
            .flatten()
            .chain(self.zeta.iter())
            .cloned()
            .collect()
    }

    pub fn beta(&self) -> &[Vec<f64>] {
        &self.beta
    }

    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }

    pub fn len(&self) -> usize {
        self.beta.iter().map(|b| b.len()).sum::<usize>() + self.zeta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn matches(&self, model: &ModelSpec) -> Result<()> {
        if self.beta.len() != model.categories() - 1
            || self
                .beta
                .iter()
                .zip(model.category_predictors())
                .any(|(b, s)| b.len() != s.len())
            || self.zeta.len() != model.common_size()
        {
            return Err(Error::Dimension {
                what: "parameter vector",
                expected: model.num_params(),
                found: self.len(),
            });
        }
        Ok(())
    }
}

/// `a_j = h_j(x)ᵀβ_j + h_c(x)ᵀζ` for `j = 1..J-1`; `η_J = 0` is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPredictors(pub Vec<f64>);

impl LinearPredictors {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Model matrix `X_i` (J × p) at a single design point.
pub fn build_model_matrix(model: &ModelSpec, x: &[f64]) -> Result<DMatrix<f64>> {
    model.check_point(x)?;
    let j_cat = model.categories();
    let p = model.num_params();
    let offsets = model.block_offsets();
    let hc = model.common.evaluate(x)?;
    let mut m = DMatrix::zeros(j_cat, p);
    for (j, spec) in model.per_category.iter().enumerate() {
        let h = spec.evaluate(x)?;
        for (k, v) in h.into_iter().enumerate() {
            m[(j, offsets[j] + k)] = v;
        }
        for (k, &v) in hc.iter().enumerate() {
            m[(j, offsets[j_cat - 1] + k)] = v;
        }
    }
    Ok(m)
}

pub fn linear_predictors(
    model: &ModelSpec,
    theta: &ParameterVector,
    x: &[f64],
) -> Result<LinearPredictors> {
    model.check_point(x)?;
    theta.matches(model)?;
    let hc = model.common.evaluate(x)?;
    let common: f64 = hc.iter().zip(&theta.zeta).map(|(h, z)| h * z).sum();
    let mut a = Vec::with_capacity(model.categories() - 1);
    for (spec, beta) in model.per_category.iter().zip(&theta.beta) {
        let h = spec.evaluate(x)?;
        a.push(h.iter().zip(beta).map(|(h, b)| h * b).sum::<f64>() + common);
    }
    Ok(LinearPredictors(a))
}

/// Outcome of a design-space check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Feasibility {
    Feasible,
    /// Predictor `index` (0-based) is not finite.
    NonFinite {
        index: usize,
    },
    /// Cumulative predictors `pair.0` and `pair.1` (1-based) are not strictly increasing.
    NotIncreasing {
        pair: (usize, usize),
    },
    /// Category `category` (1-based) has probability below the representable floor.
    Underflow {
        category: usize,
    },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible)
    }
}

impl fmt::Display for Feasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Feasibility::Feasible => f.write_str("feasible"),
            Feasibility::NonFinite { index } => {
                write!(f, "linear predictor a_{} is not finite", index + 1)
            }
            Feasibility::NotIncreasing { pair } => write!(
                f,
                "cumulative predictors a_{} < a_{} violated",
                pair.0, pair.1
            ),
            Feasibility::Underflow { category } => {
                write!(f, "probability of category {category} underflows")
            }
        }
    }
}

/// Design-space verdict from the linear predictors alone.
pub fn feasibility_of(link: LinkKind, a: &[f64]) -> Feasibility {
    if let Some(index) = a.iter().position(|v| !v.is_finite()) {
        return Feasibility::NonFinite { index };
    }
    if link == LinkKind::Cumulative {
        for j in 1..a.len() {
            if !(a[j] - a[j - 1] > CUMULATIVE_GAP) {
                return Feasibility::NotIncreasing { pair: (j, j + 1) };
            }
        }
    }
    Feasibility::Feasible
}

pub fn validate_design_point(
    model: &ModelSpec,
    theta: &ParameterVector,
    x: &[f64],
) -> Result<Feasibility> {
    let a = linear_predictors(model, theta, x)?;
    Ok(feasibility_of(model.link(), &a.0))
}

/// Category probabilities at one design point.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryProbabilities {
    pi: Vec<f64>,
    gamma: Vec<f64>,
    tail: Vec<f64>,
}

impl CategoryProbabilities {
    /// Wraps a strictly positive probability vector.
    pub fn new(pi: Vec<f64>) -> Result<Self> {
        if pi.len() < 2 {
            return Err(Error::InvalidArgument(
                "need at least two categories".into(),
            ));
        }
        if let Some(k) = pi
            .iter()
            .position(|&v| !(v >= MIN_PROBABILITY) || !v.is_finite())
        {
            return Err(Error::DesignSpace(Feasibility::Underflow {
                category: k + 1,
            }));
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let j = pi.len();
        let mut gamma = Vec::with_capacity(j - 1);
        let mut acc = 0.0;
        for &v in &pi[..j - 1] {
            acc += v;
            gamma.push(acc);
        }
        // upper tails summed from the end keep 1 - γ accurate when γ is close to one
        let mut tail = vec![0.0; j - 1];
        let mut acc = pi[j - 1];
        for k in (0..j - 1).rev() {
            tail[k] = acc;
            acc += pi[k];
        }
        Ok(Self { pi, gamma, tail })
    }

    /// Uniform over `categories`.
    pub fn uniform(categories: usize) -> Self {
        let v = 1.0 / categories as f64;
        let mut pi = vec![v; categories];
        let s: f64 = pi[..categories - 1].iter().sum();
        pi[categories - 1] = 1.0 - s;
        Self::new(pi).expect("uniform is valid")
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// Cumulative sums `γ_j = π_1 + ... + π_j`, `j = 1..J-1`.
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn categories(&self) -> usize {
        self.pi.len()
    }

    /// `1 - γ_j` for 0-based `j`, with `1 - γ_0 = 1` when `j` is `None`.
    fn upper(&self, j: Option<usize>) -> f64 {
        match j {
            None => 1.0,
            Some(k) => self.tail[k],
        }
    }
}

fn clamp(a: f64) -> f64 {
    a.clamp(-PREDICTOR_CLAMP, PREDICTOR_CLAMP)
}

fn softplus(a: f64) -> f64 {
    if a > 0.0 {
        a + (-a).exp().ln_1p()
    } else {
        a.exp().ln_1p()
    }
}

fn logistic(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// Normalizes `exp(logs)` into a probability vector.
fn softmax(logs: &[f64]) -> Vec<f64> {
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Probabilities from the linear predictors via the closed-form inverse of each link.
pub fn probabilities_from_predictors(link: LinkKind, a: &[f64]) -> Result<CategoryProbabilities> {
    let verdict = feasibility_of(link, a);
    if !verdict.is_feasible() {
        return Err(Error::DesignSpace(verdict));
    }
    let a: Vec<f64> = a.iter().map(|&v| clamp(v)).collect();
    let jm1 = a.len();
    let pi = match link {
        LinkKind::Baseline => {
            let mut logs = a.clone();
            logs.push(0.0);
            softmax(&logs)
        }
        LinkKind::Adjacent => {
            let mut logs = vec![0.0; jm1 + 1];
            for j in (0..jm1).rev() {
                logs[j] = logs[j + 1] + a[j];
            }
            softmax(&logs)
        }
        LinkKind::Continuation => {
            let mut pi = Vec::with_capacity(jm1 + 1);
            let mut acc = 0.0;
            for &aj in &a {
                acc += softplus(aj);
                pi.push((aj - acc).exp());
            }
            pi.push((-acc).exp());
            pi
        }
        LinkKind::Cumulative => {
            let g: Vec<f64> = a.iter().map(|&v| logistic(v)).collect();
            let mut pi = Vec::with_capacity(jm1 + 1);
            pi.push(g[0]);
            for j in 1..jm1 {
                pi.push(g[j] - g[j - 1]);
            }
            // upper tail as a logistic of -a keeps precision when a is large
            pi.push(logistic(-a[jm1 - 1]));
            pi
        }
    };
    let total: f64 = pi.iter().sum();
    let pi: Vec<f64> = pi.into_iter().map(|v| v / total).collect();
    if let Some(k) = pi.iter().position(|&v| !(v >= MIN_PROBABILITY)) {
        return Err(Error::DesignSpace(Feasibility::Underflow {
            category: k + 1,
        }));
    }
    let mut pi = pi;
    // make the sum exactly representable as one
    let head: f64 = pi[..jm1].iter().sum();
    if 1.0 - head >= MIN_PROBABILITY {
        pi[jm1] = 1.0 - head;
    }
    CategoryProbabilities::new(pi)
}

pub fn compute_pi(
    model: &ModelSpec,
    theta: &ParameterVector,
    x: &[f64],
) -> Result<CategoryProbabilities> {
    let a = linear_predictors(model, theta, x)?;
    probabilities_from_predictors(model.link(), &a.0)
}

/// Applies the model's logit map to `pi`, returning `(η_1, ..., η_{J-1})`.
pub fn logits(link: LinkKind, pi: &CategoryProbabilities) -> Vec<f64> {
    let p = pi.pi();
    let j = p.len();
    (0..j - 1)
        .map(|k| match link {
            LinkKind::Baseline => (p[k] / p[j - 1]).ln(),
            LinkKind::Cumulative => (pi.gamma[k] / pi.tail[k]).ln(),
            LinkKind::Adjacent => (p[k] / p[k + 1]).ln(),
            LinkKind::Continuation => (p[k] / pi.tail[k]).ln(),
        })
        .collect()
}

/// The constant matrices `Cᵀ` (J × 2J-1) and `L` (2J-1 × J) of the unified model form.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkConstants {
    pub c_transpose: DMatrix<f64>,
    pub l: DMatrix<f64>,
}

impl LinkConstants {
    pub fn new(link: LinkKind, categories: usize) -> Self {
        let j = categories;
        let mut c_t = DMatrix::zeros(j, 2 * j - 1);
        for k in 0..j - 1 {
            c_t[(k, k)] = 1.0;
            c_t[(k, j - 1 + k)] = -1.0;
        }
        c_t[(j - 1, 2 * j - 2)] = 1.0;

        let mut l = DMatrix::zeros(2 * j - 1, j);
        for k in 0..j - 1 {
            match link {
                LinkKind::Cumulative => {
                    for col in 0..=k {
                        l[(k, col)] = 1.0;
                    }
                }
                _ => l[(k, k)] = 1.0,
            }
            let row = j - 1 + k;
            match link {
                LinkKind::Baseline => l[(row, j - 1)] = 1.0,
                LinkKind::Cumulative | LinkKind::Continuation => {
                    for col in (k + 1)..j {
                        l[(row, col)] = 1.0;
                    }
                }
                LinkKind::Adjacent => l[(row, k + 1)] = 1.0,
            }
        }
        for col in 0..j {
            l[(2 * j - 2, col)] = 1.0;
        }
        Self {
            c_transpose: c_t,
            l,
        }
    }

    /// `D = diag(Lπ)`.
    pub fn d_matrix(&self, pi: &CategoryProbabilities) -> DMatrix<f64> {
        let lp = &self.l * nalgebra::DVector::from_column_slice(pi.pi());
        DMatrix::from_diagonal(&lp)
    }

    /// `Cᵀ D⁻¹ L` evaluated at `pi`.
    pub fn cdl(&self, pi: &CategoryProbabilities) -> DMatrix<f64> {
        let lp = &self.l * nalgebra::DVector::from_column_slice(pi.pi());
        let mut dl = self.l.clone();
        for r in 0..dl.nrows() {
            let s = 1.0 / lp[r];
            dl.row_mut(r).scale_mut(s);
        }
        &self.c_transpose * dl
    }
}

/// Closed form of `det(Cᵀ D⁻¹ L)`.
pub fn cdl_determinant(link: LinkKind, pi: &CategoryProbabilities) -> f64 {
    match link {
        LinkKind::Cumulative => pi
            .gamma
            .iter()
            .zip(&pi.tail)
            .map(|(g, t)| 1.0 / (g * t))
            .product(),
        _ => pi.pi.iter().map(|v| 1.0 / v).product(),
    }
}

/// Columns `c_1, ..., c_J` of `(Cᵀ D⁻¹ L)⁻¹`, returned as a J × J matrix.
pub fn cdl_inverse_columns(link: LinkKind, pi: &CategoryProbabilities) -> DMatrix<f64> {
    let p = pi.pi();
    let j = p.len();
    let mut c = DMatrix::zeros(j, j);
    for col in 0..j - 1 {
        match link {
            LinkKind::Baseline => {
                for row in 0..j {
                    let e = if row == col { 1.0 } else { 0.0 };
                    c[(row, col)] = p[col] * (e - p[row]);
                }
            }
            LinkKind::Cumulative => {
                let v = pi.gamma[col] * pi.tail[col];
                c[(col, col)] = v;
                c[(col + 1, col)] = -v;
            }
            LinkKind::Continuation => {
                let scale = p[col] / pi.upper(col.checked_sub(1));
                c[(col, col)] = scale * pi.tail[col];
                for row in (col + 1)..j {
                    c[(row, col)] = -scale * p[row];
                }
            }
            LinkKind::Adjacent => {
                let g = pi.gamma[col];
                let t = pi.tail[col];
                for row in 0..j {
                    c[(row, col)] = if row <= col { t * p[row] } else { -g * p[row] };
                }
            }
        }
    }
    for row in 0..j {
        c[(row, j - 1)] = p[row];
    }
    c
}

/// The (J-1) × (J-1) matrix of `u_st(π)`, from the per-link closed forms.
pub fn compute_u(link: LinkKind, pi: &CategoryProbabilities) -> DMatrix<f64> {
    let p = pi.pi();
    let n = p.len() - 1;
    let g = &pi.gamma;
    let t = &pi.tail;
    let mut u = DMatrix::zeros(n, n);
    for s in 0..n {
        u[(s, s)] = match link {
            LinkKind::Baseline => p[s] * (1.0 - p[s]),
            LinkKind::Cumulative => g[s] * g[s] * t[s] * t[s] * (1.0 / p[s] + 1.0 / p[s + 1]),
            LinkKind::Adjacent => g[s] * t[s],
            LinkKind::Continuation => p[s] * t[s] / pi.upper(s.checked_sub(1)),
        };
        for r in (s + 1)..n {
            let v = match link {
                LinkKind::Baseline => -p[s] * p[r],
                LinkKind::Cumulative if r == s + 1 => -g[s] * g[r] * t[s] * t[r] / p[r],
                LinkKind::Cumulative => 0.0,
                LinkKind::Adjacent => g[s] * t[r],
                LinkKind::Continuation => 0.0,
            };
            u[(s, r)] = v;
            u[(r, s)] = v;
        }
    }
    u
}

/// Extends the (J-1) × (J-1) core with `u_sJ = 0`, `u_JJ = 1`.
pub fn extend_u(core: &DMatrix<f64>) -> DMatrix<f64> {
    let n = core.nrows();
    let mut u = DMatrix::zeros(n + 1, n + 1);
    u.view_mut((0, 0), (n, n)).copy_from(core);
    u[(n, n)] = 1.0;
    u
}

/// Closed form of `det V` for the (J-1) × (J-1) core of `U`.
pub fn u_core_determinant(link: LinkKind, pi: &CategoryProbabilities) -> f64 {
    let p = pi.pi();
    match link {
        LinkKind::Cumulative => {
            let j = p.len();
            let mut v = 1.0 / p[j - 1];
            for k in 0..j - 1 {
                v *= pi.gamma[k] * pi.gamma[k] * pi.tail[k] * pi.tail[k] / p[k];
            }
            v
        }
        _ => p.iter().product(),
    }
}
