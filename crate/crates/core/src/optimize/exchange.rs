use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{InformationSet, OptimizerConfig};
use crate::error::{Error, Result};
use crate::fisher::{analyze_rank, DesignExact};
use crate::linalg::{log_det_psd, numeric_rank, solve_vandermonde};
use crate::model::{ModelSpec, ParameterVector};
use crate::poly::eval;

/// Smallest log-determinant gain that counts as an improving exchange.
const MIN_GAIN: f64 = 1e-12;

/// Degree bound `q = min{2J-2, p-k_min+2, p}` of the exchange profile.
pub fn exchange_order(categories: usize, p: usize, k_min: usize) -> usize {
    (2 * categories - 2)
        .min((p + 2).saturating_sub(k_min))
        .min(p)
}

/// `f_ij(z) / f(n)`, the determinant after giving `z` of the `c = n_i + n_j` units to point `i`
/// and the rest to point `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeProfile {
    pub i: usize,
    pub j: usize,
    pub c: u64,
    pub q: usize,
    /// Integer abscissae where the determinant was evaluated directly.
    pub nodes: Vec<u64>,
    pub values: Vec<f64>,
    /// Polynomial in `t = z / c`, present when `c > q`.
    pub coeffs: Option<Vec<f64>>,
    /// `log f(n)`.
    pub log_scale: f64,
}

impl ExchangeProfile {
    pub fn is_direct(&self) -> bool {
        self.coeffs.is_none()
    }

    /// Profile value at integer `z ≤ c`, relative to `f(n)`.
    pub fn eval(&self, z: u64) -> f64 {
        match &self.coeffs {
            None => self.values[z as usize],
            Some(g) => eval(g, z as f64 / self.c as f64),
        }
    }
}

struct PairSystem<'a> {
    info: &'a InformationSet,
    base: DMatrix<f64>,
    i: usize,
    j: usize,
    c: u64,
}

impl<'a> PairSystem<'a> {
    fn new(info: &'a InformationSet, counts: &[u64], i: usize, j: usize) -> Self {
        let p = info.num_params();
        let mut base = DMatrix::zeros(p, p);
        for (k, (f, &n)) in info.matrices().iter().zip(counts).enumerate() {
            if k != i && k != j && n > 0 {
                base += f * n as f64;
            }
        }
        Self {
            info,
            base,
            i,
            j,
            c: counts[i] + counts[j],
        }
    }

    fn log_det(&self, z: u64) -> f64 {
        let m = &self.base
            + &self.info.matrices()[self.i] * z as f64
            + &self.info.matrices()[self.j] * (self.c - z) as f64;
        log_det_psd(&m)
    }
}

fn profile_from(sys: &PairSystem<'_>, q: usize, log_scale: f64) -> Result<ExchangeProfile> {
    let c = sys.c;
    let nodes: Vec<u64> = if c <= q as u64 {
        (0..=c).collect()
    } else {
        // spread the nodes over [0, c] so the fit interpolates rather than extrapolates
        (0..=q as u64)
            .map(|k| ((k as f64 * c as f64) / q as f64).round() as u64)
            .collect()
    };
    let values: Vec<f64> = nodes
        .iter()
        .map(|&z| (sys.log_det(z) - log_scale).exp())
        .collect();
    let coeffs = if c <= q as u64 {
        None
    } else {
        let t: Vec<f64> = nodes.iter().map(|&z| z as f64 / c as f64).collect();
        Some(
            solve_vandermonde(&t, &values)
                .ok_or_else(|| Error::Singular("exchange interpolation failed".into()))?,
        )
    };
    Ok(ExchangeProfile {
        i: sys.i,
        j: sys.j,
        c,
        q,
        nodes,
        values,
        coeffs,
        log_scale,
    })
}

/// Profile of moving units between points `i` and `j` of an exact design.
pub fn exchange_profile(
    model: &ModelSpec,
    theta: &ParameterVector,
    design: &DesignExact,
    i: usize,
    j: usize,
) -> Result<ExchangeProfile> {
    let m = design.len();
    if i >= m || j >= m || i == j {
        return Err(Error::InvalidArgument(format!(
            "invalid exchange pair ({i}, {j}) for {m} points"
        )));
    }
    let info = InformationSet::local(model, theta, design.points())?;
    let k_min = analyze_rank(model, design.points())?.k_min;
    let q = exchange_order(model.categories(), model.num_params(), k_min);
    let counts = design.counts();
    let log_scale = info.log_det(&as_weights(counts));
    if log_scale == f64::NEG_INFINITY {
        return Err(Error::Singular("design has zero determinant".into()));
    }
    profile_from(&PairSystem::new(&info, counts, i, j), q, log_scale)
}

fn as_weights(counts: &[u64]) -> Vec<f64> {
    counts.iter().map(|&c| c as f64).collect()
}

/// Best integer split for a pair, or `None` when nothing beats the current one.
fn best_split(
    sys: &PairSystem<'_>,
    q: usize,
    current: u64,
    log_scale: f64,
) -> Result<Option<(u64, f64)>> {
    let profile = profile_from(sys, q, log_scale)?;
    let mut guess = 0;
    let mut guess_val = f64::NEG_INFINITY;
    for z in 0..=sys.c {
        let v = profile.eval(z);
        if v > guess_val {
            guess = z;
            guess_val = v;
        }
    }
    // the fit locates the peak; direct evaluations settle the last few units
    let mut z = guess;
    let mut ld = sys.log_det(z);
    loop {
        let mut moved = false;
        let neighbours = [z.checked_sub(1), (z < sys.c).then_some(z + 1)];
        for next in neighbours.into_iter().flatten() {
            let v = sys.log_det(next);
            if v > ld + MIN_GAIN {
                z = next;
                ld = v;
                moved = true;
                break;
            }
        }
        if !moved {
            break;
        }
    }
    if z != current && ld > log_scale + MIN_GAIN {
        Ok(Some((z, ld)))
    } else {
        Ok(None)
    }
}

fn rounded_uniform(n: u64, slots: &[usize], m: usize) -> Vec<u64> {
    let mut counts = vec![0; m];
    let k = slots.len() as u64;
    for (r, &s) in slots.iter().enumerate() {
        counts[s] = n / k + u64::from((r as u64) < n % k);
    }
    counts
}

fn initial_allocation(info: &InformationSet, n: u64) -> Result<Vec<u64>> {
    let m = info.len();
    let p = info.num_params();
    if n >= m as u64 {
        let all: Vec<usize> = (0..m).collect();
        let counts = rounded_uniform(n, &all, m);
        if info.log_det(&as_weights(&counts)) > f64::NEG_INFINITY {
            return Ok(counts);
        }
        return Err(Error::Infeasible(
            "the candidate points cannot support a nonsingular design".into(),
        ));
    }
    // greedily add the point that raises the rank most
    let mut acc = DMatrix::zeros(p, p);
    let mut chosen = Vec::new();
    let mut rank = 0;
    while rank < p {
        let best = (0..m)
            .filter(|k| !chosen.contains(k))
            .map(|k| (k, numeric_rank(&(&acc + &info.matrices()[k]))))
            .fold(None, |best: Option<(usize, usize)>, (k, r)| match best {
                Some((_, br)) if br >= r => best,
                _ => Some((k, r)),
            });
        match best {
            Some((k, r)) if r > rank => {
                acc += &info.matrices()[k];
                chosen.push(k);
                rank = r;
            }
            _ => break,
        }
    }
    if rank < p || chosen.len() as u64 > n {
        return Err(Error::Infeasible(format!(
            "no allocation of {n} units over these points has a nonsingular information matrix"
        )));
    }
    chosen.sort_unstable();
    let counts = rounded_uniform(n, &chosen, m);
    if info.log_det(&as_weights(&counts)) == f64::NEG_INFINITY {
        return Err(Error::Infeasible("greedy start is singular".into()));
    }
    Ok(counts)
}

/// Result of an exchange run.
#[derive(Debug, Clone)]
pub struct ExchangeOutcome {
    pub design: DesignExact,
    /// `log det Σ n_i F_i`.
    pub log_det: f64,
    pub initial_log_det: f64,
    pub passes: usize,
    pub converged: bool,
    pub seed: u64,
}

fn run(
    info: &InformationSet,
    q: usize,
    mut counts: Vec<u64>,
    rng: &mut ChaCha8Rng,
    config: &OptimizerConfig,
) -> Result<(Vec<u64>, f64, usize, bool)> {
    let m = info.len();
    let mut ld = info.log_det(&as_weights(&counts));
    let mut pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| ((i + 1)..m).map(move |j| (i, j)))
        .collect();
    let mut passes = 0;
    let mut converged = false;
    while passes < config.max_passes {
        passes += 1;
        pairs.shuffle(rng);
        let mut moved = false;
        for &(i, j) in &pairs {
            if counts[i] + counts[j] == 0 {
                continue;
            }
            let sys = PairSystem::new(info, &counts, i, j);
            if let Some((z, new_ld)) = best_split(&sys, q, counts[i], ld)? {
                counts[j] = sys.c - z;
                counts[i] = z;
                ld = new_ld;
                moved = true;
            }
        }
        if !moved {
            converged = true;
            break;
        }
    }
    Ok((counts, ld, passes, converged))
}

/// Exact design with `n` units over `points`, by pairwise exchange.
pub fn exchange(
    model: &ModelSpec,
    theta: &ParameterVector,
    points: &[Vec<f64>],
    n: u64,
    init: Option<&DesignExact>,
    config: &OptimizerConfig,
) -> Result<ExchangeOutcome> {
    config.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let info = InformationSet::local(model, theta, points)?;
    let k_min = analyze_rank(model, points)?.k_min;
    let q = exchange_order(model.categories(), model.num_params(), k_min);
    let start = match init {
        Some(d) => {
            if d.points() != points {
                return Err(Error::InvalidDesign(
                    "initial design must use the candidate points in order".into(),
                ));
            }
            if d.total() != n {
                return Err(Error::InvalidDesign(format!(
                    "initial design allocates {} units, expected {n}",
                    d.total()
                )));
            }
            if info.log_det(&as_weights(d.counts())) == f64::NEG_INFINITY {
                return Err(Error::Infeasible("initial design is singular".into()));
            }
            d.counts().to_vec()
        }
        None => initial_allocation(&info, n)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let initial_log_det = info.log_det(&as_weights(&start));
    let mut best = run(&info, q, start, &mut rng, config)?;
    for _ in 0..config.restarts {
        let mut counts = vec![0u64; info.len()];
        for _ in 0..n {
            counts[rng.gen_range(0..info.len())] += 1;
        }
        if info.log_det(&as_weights(&counts)) == f64::NEG_INFINITY {
            continue;
        }
        let cand = run(&info, q, counts, &mut rng, config)?;
        if cand.1 > best.1 {
            best = cand;
        }
    }
    let (counts, log_det, passes, converged) = best;
    Ok(ExchangeOutcome {
        design: DesignExact::new(points.to_vec(), counts)?,
        log_det,
        initial_log_det,
        passes,
        converged,
        seed: config.seed,
    })
}
