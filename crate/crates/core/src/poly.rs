//! Univariate polynomial helpers. Coefficients are stored in ascending powers.

use nalgebra::DMatrix;

/// Horner evaluation.
pub fn eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Derivative coefficients.
pub fn derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect()
}

/// Coefficients of `z^j (1 - z)^k`.
pub fn monomial_times_one_minus(j: usize, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; j + k + 1];
    let mut binom = 1.0;
    for i in 0..=k {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        out[j + i] = sign * binom;
        binom = binom * (k - i) as f64 / (i + 1) as f64;
    }
    out
}

/// Adds `scale * other` into `acc`, growing it when needed.
pub fn axpy(acc: &mut Vec<f64>, scale: f64, other: &[f64]) {
    if acc.len() < other.len() {
        acc.resize(other.len(), 0.0);
    }
    for (a, &o) in acc.iter_mut().zip(other) {
        *a += scale * o;
    }
}

/// Drops leading coefficients that are negligible against the largest one.
fn trimmed(coeffs: &[f64]) -> &[f64] {
    let max = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let mut end = coeffs.len();
    while end > 0 && coeffs[end - 1].abs() <= 1e-14 * max {
        end -= 1;
    }
    &coeffs[..end]
}

/// How roots were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootMethod {
    ClosedForm,
    Companion,
}

/// Real roots of a polynomial, sorted ascending.
///
/// Degrees one and two use closed forms; higher degrees use the eigenvalues of the companion
/// matrix followed by a few Newton corrections. Returns `None` when the eigen-solve produced
/// non-finite values.
pub fn real_roots(coeffs: &[f64]) -> Option<(Vec<f64>, RootMethod)> {
    let c = trimmed(coeffs);
    let degree = c.len().saturating_sub(1);
    let mut roots = match degree {
        0 => return Some((Vec::new(), RootMethod::ClosedForm)),
        1 => return Some((vec![-c[0] / c[1]], RootMethod::ClosedForm)),
        2 => return Some((quadratic_roots(c[2], c[1], c[0]), RootMethod::ClosedForm)),
        _ => companion_real_roots(c)?,
    };
    let d = derivative(c);
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let fp = eval(&d, *r);
            if fp == 0.0 {
                break;
            }
            let step = eval(c, *r) / fp;
            if !step.is_finite() {
                break;
            }
            *r -= step;
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some((roots, RootMethod::Companion))
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    // avoid cancellation: q = -(b + sign(b) sqrt(disc)) / 2
    let q = -0.5 * (b + b.signum() * sq);
    let mut out = if q == 0.0 {
        vec![0.0, 0.0]
    } else {
        vec![q / a, c / q]
    };
    out.sort_by(|x, y| x.partial_cmp(y).unwrap());
    out
}

fn companion_real_roots(c: &[f64]) -> Option<Vec<f64>> {
    let n = c.len() - 1;
    let lead = c[n];
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        m[(i, n - 1)] = -c[i] / lead;
    }
    let eig = m.complex_eigenvalues();
    if eig.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }
    Some(
        eig.iter()
            .filter(|z| z.im.abs() <= 1e-7 * (1.0 + z.re.abs()))
            .map(|z| z.re)
            .collect(),
    )
}
