//! Closed forms for minimally supported designs.
//!
//! For three support points and `J = 3` models with quadratic first and linear second
//! predictors, the determinant reduces to `C·w₁w₂w₃(c₁w₂w₃ + c₂w₁w₃ + c₃w₁w₂)`. Its maximizer
//! on the simplex comes from a quartic in `y₁ = w₁/w₃`.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{analyze_rank, DesignApprox};
use crate::model::{
    compute_pi, LinkKind, ModelSpec, OddsStructure, ParameterVector, PredictorSpec,
};

/// Relative gap below which two coefficients are treated as equal.
pub const EQUAL_REL_TOL: f64 = 1e-12;

/// Largest imaginary residue tolerated in the quartic root.
const IMAG_TOL: f64 = 1e-9;

/// Coefficients `0 < c₁ ≤ c₂ ≤ c₃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreePointProblem {
    c: [f64; 3],
}

impl ThreePointProblem {
    pub fn new(c1: f64, c2: f64, c3: f64) -> Result<Self> {
        let c = [c1, c2, c3];
        if c.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "coefficients must be positive and finite, got {c:?}"
            )));
        }
        if !(c1 <= c2 && c2 <= c3) {
            return Err(Error::InvalidArgument(format!(
                "coefficients must be sorted ascending, got {c:?}"
            )));
        }
        Ok(Self { c })
    }

    pub fn coefficients(&self) -> [f64; 3] {
        self.c
    }

    /// `w₁w₂w₃(c₁w₂w₃ + c₂w₁w₃ + c₃w₁w₂)`.
    pub fn objective(&self, w: [f64; 3]) -> f64 {
        three_point_objective(self.c, w)
    }

    /// Partial derivatives of the objective.
    pub fn gradient(&self, w: [f64; 3]) -> [f64; 3] {
        let [c1, c2, c3] = self.c;
        let [w1, w2, w3] = w;
        [
            c1 * w2 * w2 * w3 * w3 + 2.0 * c2 * w1 * w2 * w3 * w3 + 2.0 * c3 * w1 * w2 * w2 * w3,
            2.0 * c1 * w1 * w2 * w3 * w3 + c2 * w1 * w1 * w3 * w3 + 2.0 * c3 * w1 * w1 * w2 * w3,
            2.0 * c1 * w1 * w2 * w2 * w3 + 2.0 * c2 * w1 * w1 * w2 * w3 + c3 * w1 * w1 * w2 * w2,
        ]
    }

    /// Coefficients `(a₀, a₁, a₂, a₃)` of the monic quartic `h(y₁)`.
    pub fn quartic(&self) -> [f64; 4] {
        let [c1, c2, c3] = self.c;
        [
            c1 * c1 / (c3 * c3),
            4.0 * c1 * (-2.0 * c1 + c2 + 2.0 * c3) / (3.0 * c3 * c3),
            2.0 * (2.0 * c1 * c1 - 2.0 * c1 * c2 - 7.0 * c1 * c3 - 2.0 * c2 * c3 + 2.0 * c3 * c3)
                / (3.0 * c3 * c3),
            4.0 * (2.0 * c1 + c2 - 2.0 * c3) / (3.0 * c3),
        ]
    }
}

/// `w₁w₂w₃(c₁w₂w₃ + c₂w₁w₃ + c₃w₁w₂)` for unsorted coefficients.
pub fn three_point_objective(c: [f64; 3], w: [f64; 3]) -> f64 {
    let [w1, w2, w3] = w;
    w1 * w2 * w3 * (c[0] * w2 * w3 + c[1] * w1 * w3 + c[2] * w1 * w2)
}

/// Which closed form produced the weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThreePointCase {
    AllEqual,
    FirstTwoEqual,
    LastTwoEqual,
    Distinct,
}

/// How the quartic root was obtained in the distinct case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuarticMethod {
    ClosedForm,
    /// The closed form was ill-conditioned; the root was bracketed on `(1, ∞)` instead.
    Bracketed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreePointSolution {
    /// Weights matching the order of the input coefficients.
    pub weights: [f64; 3],
    pub case: ThreePointCase,
    /// `w₁/w₃` for the sorted problem, when the quartic was used.
    pub y1: Option<f64>,
    pub method: Option<QuarticMethod>,
}

fn nearly_equal(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= EQUAL_REL_TOL * scale
}

/// Maximizer of the three-point objective on the simplex.
pub fn solve_three_point(problem: &ThreePointProblem) -> Result<ThreePointSolution> {
    let [c1, c2, c3] = problem.c;
    let eq12 = nearly_equal(c1, c2, c3);
    let eq23 = nearly_equal(c2, c3, c3);
    if eq12 && eq23 {
        return Ok(ThreePointSolution {
            weights: [1.0 / 3.0; 3],
            case: ThreePointCase::AllEqual,
            y1: None,
            method: None,
        });
    }
    if eq12 {
        let d1 = (4.0 * c1 * c1 - c1 * c3 + c3 * c3).sqrt();
        let den = -4.0 * c1 + 3.0 * c3 + 2.0 * d1;
        let w = (-2.0 * c1 + c3 + d1) / den;
        return Ok(ThreePointSolution {
            weights: [w, w, c3 / den],
            case: ThreePointCase::FirstTwoEqual,
            y1: None,
            method: None,
        });
    }
    if eq23 {
        let d2 = (c1 * c1 - c1 * c3 + 4.0 * c3 * c3).sqrt();
        let den = -c1 + 8.0 * c3 + d2;
        let w = 3.0 * c3 / den;
        return Ok(ThreePointSolution {
            weights: [(-c1 + 2.0 * c3 + d2) / den, w, w],
            case: ThreePointCase::LastTwoEqual,
            y1: None,
            method: None,
        });
    }
    let a = problem.quartic();
    let (y1, method) = match quartic_closed_form(a) {
        Some(y) if root_is_valid(a, y) => (y, QuarticMethod::ClosedForm),
        _ => (bracketed_root(a), QuarticMethod::Bracketed),
    };
    let y2 = 2.0 * c2 * (1.0 - y1) * y1 / (c3 * y1 * y1 - 2.0 * (c3 - c1) * y1 - c1);
    let s = y1 + y2 + 1.0;
    Ok(ThreePointSolution {
        weights: [y1 / s, y2 / s, 1.0 / s],
        case: ThreePointCase::Distinct,
        y1: Some(y1),
        method: Some(method),
    })
}

/// `h(y) = a₀ + a₁y + a₂y² + a₃y³ + y⁴`.
pub fn quartic_value(a: [f64; 4], y: f64) -> f64 {
    a[0] + y * (a[1] + y * (a[2] + y * (a[3] + y)))
}

fn quartic_scale(a: [f64; 4], y: f64) -> f64 {
    a[0].abs() + (a[1] * y).abs() + (a[2] * y * y).abs() + (a[3] * y.powi(3)).abs() + y.powi(4)
}

fn root_is_valid(a: [f64; 4], y: f64) -> bool {
    y.is_finite() && y > 1.0 && quartic_value(a, y).abs() <= 1e-8 * quartic_scale(a, y)
}

/// Real root in `(1, ∞)` from the radical formula, evaluated in complex arithmetic.
fn quartic_closed_form(a: [f64; 4]) -> Option<f64> {
    let [a0, a1, a2, a3] = a;
    let e1 = 12.0 * a0 + a2 * a2 - 3.0 * a1 * a3;
    let f1 = 27.0 * a1 * a1 - 72.0 * a0 * a2 + 2.0 * a2.powi(3) - 9.0 * a1 * a2 * a3
        + 27.0 * a0 * a3 * a3;
    let disc = f1 * f1 - 4.0 * e1.powi(3);
    let g1 = if disc >= 0.0 {
        let s = disc.sqrt();
        Complex::new((f1 - s).cbrt() + (f1 + s).cbrt(), 0.0)
    } else {
        let s = Complex::new(0.0, (-disc).sqrt());
        let f = Complex::new(f1, 0.0);
        (f - s).powf(1.0 / 3.0) + (f + s).powf(1.0 / 3.0)
    };
    let cube2 = 3.0 * 2.0_f64.cbrt();
    let a1c = Complex::new(-2.0 * a2 / 3.0 + a3 * a3 / 4.0, 0.0) + g1 / cube2;
    let sqrt_a1 = a1c.sqrt();
    if sqrt_a1.norm() == 0.0 {
        return None;
    }
    let c1c = Complex::new(-4.0 * a2 / 3.0 + a3 * a3 / 2.0, 0.0) - g1 / cube2
        + Complex::new(-8.0 * a1 + 4.0 * a2 * a3 - a3.powi(3), 0.0) / (sqrt_a1 * 4.0);
    let y = Complex::new(-a3 / 4.0, 0.0) + sqrt_a1 / 2.0 + c1c.sqrt() / 2.0;
    if y.im.abs() > IMAG_TOL * y.re.abs().max(1.0) {
        return None;
    }
    Some(y.re)
}

/// The unique root of `h` in `(1, ∞)` by bisection with Newton polish.
fn bracketed_root(a: [f64; 4]) -> f64 {
    let mut lo = 1.0;
    let mut hi = 2.0;
    while quartic_value(a, hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if quartic_value(a, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    let mut y = 0.5 * (lo + hi);
    for _ in 0..3 {
        let d = a[1] + y * (2.0 * a[2] + y * (3.0 * a[3] + 4.0 * y));
        let step = quartic_value(a, y) / d;
        if step.is_finite() && (y - step) > lo && (y - step) < hi {
            y -= step;
        }
    }
    y
}

/// Solves for unsorted positive coefficients, returning weights in the input order.
pub fn solve_three_point_unsorted(c: [f64; 3]) -> Result<ThreePointSolution> {
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| c[a].partial_cmp(&c[b]).unwrap_or(std::cmp::Ordering::Equal));
    let problem = ThreePointProblem::new(c[idx[0]], c[idx[1]], c[idx[2]])?;
    let mut sol = solve_three_point(&problem)?;
    let sorted = sol.weights;
    for (rank, &orig) in idx.iter().enumerate() {
        sol.weights[orig] = sorted[rank];
    }
    Ok(sol)
}

/// `C` and `(c₁, c₂, c₃)` with `det F(w) = C·w₁w₂w₃(c₁w₂w₃ + c₂w₁w₃ + c₃w₁w₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreePointCoefficients {
    pub scale: f64,
    pub c: [f64; 3],
}

impl ThreePointCoefficients {
    pub fn determinant(&self, w: [f64; 3]) -> f64 {
        self.scale * three_point_objective(self.c, w)
    }
}

fn is_three_point_family(model: &ModelSpec) -> bool {
    let blocks = model.category_predictors();
    model.categories() == 3
        && model.factors() == 1
        && model.odds_structure() == OddsStructure::Npo
        && blocks[0] == PredictorSpec::polynomial(2)
        && blocks[1] == PredictorSpec::polynomial(1)
        && matches!(model.link(), LinkKind::Continuation | LinkKind::Cumulative)
}

/// Constants of the three-point determinant for continuation-ratio and cumulative models with
/// `h₁ = (1, x, x²)` and `h₂ = (1, x)`.
pub fn three_point_coefficients(
    model: &ModelSpec,
    theta: &ParameterVector,
    x: [f64; 3],
) -> Result<ThreePointCoefficients> {
    if !is_three_point_family(model) {
        return Err(Error::Unsupported(
            "three-point closed form needs J = 3, one factor, npo, h1 = (1, x, x^2), \
             h2 = (1, x), and a continuation or cumulative link"
                .into(),
        ));
    }
    let pis = x
        .iter()
        .map(|&v| compute_pi(model, theta, &[v]).map(|p| p.pi().to_vec()))
        .collect::<Result<Vec<_>>>()?;
    let [x1, x2, x3] = x;
    let vander = ((x1 - x2) * (x1 - x3) * (x2 - x3)).powi(2);
    let gaps = [(x2 - x3).powi(2), (x1 - x3).powi(2), (x1 - x2).powi(2)];
    let (scale, c) = match model.link() {
        LinkKind::Continuation => {
            let prod: f64 = pis.iter().flatten().product();
            let c = [0, 1, 2].map(|i| gaps[i] * (1.0 / pis[i][1] + 1.0 / pis[i][2]));
            (vander * prod, c)
        }
        _ => {
            let prod: f64 = pis
                .iter()
                .map(|p| p[0] / p[1] * p[2] * (p[0] + p[1]).powi(2) * (p[1] + p[2]).powi(2))
                .product();
            let c = [0, 1, 2].map(|i| gaps[i] / (pis[i][2] * (pis[i][0] + pis[i][1])));
            (vander * prod, c)
        }
    };
    Ok(ThreePointCoefficients { scale, c })
}

/// D-optimal weights on three points of a supported model.
pub fn three_point_design(
    model: &ModelSpec,
    theta: &ParameterVector,
    x: [f64; 3],
) -> Result<(DesignApprox, ThreePointSolution)> {
    let coef = three_point_coefficients(model, theta, x)?;
    let sol = solve_three_point_unsorted(coef.c)?;
    let design =
        DesignApprox::normalized(x.iter().map(|&v| vec![v]).collect(), sol.weights.to_vec())?;
    Ok((design, sol))
}

/// Whether the uniform allocation is known to be optimal among minimally supported designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UniformVerdict {
    UniformOptimal,
    NotGuaranteed,
}

/// Verdict for a minimally supported design on `points`.
pub fn uniform_minimal_verdict(model: &ModelSpec, points: &[Vec<f64>]) -> Result<UniformVerdict> {
    let report = analyze_rank(model, points)?;
    if points.len() != report.k_min {
        return Err(Error::InvalidArgument(format!(
            "{} points given, minimal support is {}",
            points.len(),
            report.k_min
        )));
    }
    let binary =
        model.categories() == 2 && points.len() == model.num_params() && report.positive_definite;
    let sizes = &report.category_sizes;
    let regular_npo = model.odds_structure() == OddsStructure::Npo
        && sizes.iter().all(|&s| s == sizes[0])
        && report.category_ranks.iter().zip(sizes).all(|(r, s)| r == s);
    Ok(if binary || regular_npo {
        UniformVerdict::UniformOptimal
    } else {
        UniformVerdict::NotGuaranteed
    })
}
