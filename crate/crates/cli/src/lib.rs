//! Command-line front end: file parsing, run assembly and report rendering.
//!
//! Exit codes: 0 success, 1 parse or usage error, 2 infeasible or singular design.

pub mod format;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use optdesign::analytic::{
    three_point_coefficients, three_point_design, uniform_minimal_verdict, UniformVerdict,
};
use optdesign::fisher::{analyze_rank, fisher_total, DesignApprox, DesignExact, RankReport};
use optdesign::optimize::{
    bayesian_objective, efficiency, ew_lift_one, exchange, grid_search, lift_one, GridSpec,
    LiftOneOutcome, OptimizerConfig, PriorSample,
};
use optdesign::{Error, ModelSpec, ParameterVector};
use serde_json::{json, Value};

use format::{Design, DesignRecord, ModelFile, PriorRows};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

/// Environment variable capping the worker threads used for prior and grid evaluation.
pub const THREADS_ENV: &str = "OPTDESIGN_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn parse(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_PARSE,
            message: message.into(),
        }
    }

    pub fn infeasible(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INFEASIBLE,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Singular(_)
            | Error::Infeasible(_)
            | Error::EmptyPrior { .. }
            | Error::DesignSpace(_) => Self::infeasible(e.to_string()),
            _ => Self::parse(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "optdesign",
    version,
    about = "D-optimal designs for multinomial logistic models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub args: RunArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank analysis of the candidate points: p_H, k_min and positive definiteness.
    Analyze,
    /// Approximate design over the candidate points by lift-one.
    OptimizeApprox,
    /// Exact design with --n units by pairwise exchange.
    OptimizeExact,
    /// Approximate design over a grid of candidate points.
    Grid,
    /// EW design: lift-one against the prior-averaged information.
    Ew,
    /// Mean log-determinant of each design across the prior draws.
    BayesEval {
        #[arg(required = true)]
        designs: Vec<PathBuf>,
    },
    /// D-efficiency of TARGET relative to REFERENCE.
    Efficiency { target: PathBuf, reference: PathBuf },
    /// Closed-form optimal weights on three points.
    ThreePoint,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Model file (TOML).
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// File with a [theta] section; defaults to the model file's own.
    #[arg(long, global = true)]
    pub theta: Option<PathBuf>,
    /// Prior draws (CSV with beta_j_k and zeta_k columns).
    #[arg(long, global = true)]
    pub prior: Option<PathBuf>,
    /// Candidate points: `80,100,120` with one factor, `1,2;3,4` in general.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub points: Option<String>,
    /// Candidate grid: `lower:upper:step` per factor, comma separated.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// Number of experimental units for exact designs.
    #[arg(long, global = true)]
    pub n: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Convergence tolerance on the log-determinant gain per pass.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Write a full-precision JSON record here.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

/// Where the candidate points come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Candidates {
    Points(Vec<Vec<f64>>),
    Grid(GridSpec),
}

impl Candidates {
    pub fn points(&self) -> Vec<Vec<f64>> {
        match self {
            Candidates::Points(p) => p.clone(),
            Candidates::Grid(g) => g.points(),
        }
    }
}

/// Parameter source: a single `θ` or prior draws.
#[derive(Debug, Clone, PartialEq)]
pub enum Parameters {
    Theta(ParameterVector),
    Prior(PriorRows),
}

/// Everything one invocation needs, parsed and validated.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub model_path: PathBuf,
    pub model: ModelSpec,
    pub parameters: Option<Parameters>,
    pub candidates: Option<Candidates>,
    /// The model file's `[grid]`, used by `grid` when no grid flag is given.
    pub file_grid: Option<GridSpec>,
    pub n: Option<u64>,
    pub config: OptimizerConfig,
}

impl RunSpec {
    pub fn from_args(args: &RunArgs) -> Result<Self, CliError> {
        let model_path = args
            .model
            .clone()
            .ok_or_else(|| CliError::parse("--model is required"))?;
        let file: ModelFile = format::parse_model_file(&model_path)?;
        let model = file.model.to_model()?;
        let d = model.factors();
        let parameters = match (&args.theta, &args.prior) {
            (Some(_), Some(_)) => {
                return Err(CliError::parse("give either --theta or --prior, not both"))
            }
            (None, Some(path)) => Some(Parameters::Prior(format::parse_prior_csv(path, &model)?)),
            (Some(path), None) => Some(Parameters::Theta(format::parse_theta_file(path, &model)?)),
            (None, None) => file
                .theta
                .as_ref()
                .map(|t| t.to_theta(&model).map(Parameters::Theta))
                .transpose()?,
        };
        let candidates = match (&args.points, &args.grid) {
            (Some(_), Some(_)) => {
                return Err(CliError::parse("give either --points or --grid, not both"))
            }
            (Some(p), None) => Some(Candidates::Points(format::parse_points_arg(p, d)?)),
            (None, Some(g)) => Some(Candidates::Grid(format::parse_grid_arg(g, d)?)),
            (None, None) => match (&file.points, &file.grid) {
                (Some(p), _) => Some(Candidates::Points(format::points_from_section(p, d)?)),
                (None, Some(g)) => Some(Candidates::Grid(format::grid_spec(g.axes.clone(), d)?)),
                (None, None) => None,
            },
        };
        let file_grid = match (&file.grid, &args.points) {
            (Some(g), None) => Some(format::grid_spec(g.axes.clone(), d)?),
            _ => None,
        };
        let mut config = OptimizerConfig::with_seed(args.seed.unwrap_or(0));
        if let Some(tol) = args.tol {
            config.rel_tol = tol;
        }
        config
            .validate()
            .map_err(|e| CliError::parse(format!("--tol: {e}")))?;
        Ok(Self {
            model_path,
            model,
            parameters,
            candidates,
            file_grid,
            n: args.n,
            config,
        })
    }

    fn theta(&self) -> Result<&ParameterVector, CliError> {
        match &self.parameters {
            Some(Parameters::Theta(t)) => Ok(t),
            Some(Parameters::Prior(_)) => Err(CliError::parse(
                "this command needs a single theta, not --prior",
            )),
            None => Err(CliError::parse(
                "no theta: add [theta] to the model file or pass --theta",
            )),
        }
    }

    fn prior_rows(&self) -> Result<&PriorRows, CliError> {
        match &self.parameters {
            Some(Parameters::Prior(p)) => Ok(p),
            _ => Err(CliError::parse("this command needs --prior")),
        }
    }

    fn points(&self) -> Result<Vec<Vec<f64>>, CliError> {
        self.candidates
            .as_ref()
            .map(Candidates::points)
            .ok_or_else(|| CliError::parse("no candidate points: pass --points or --grid"))
    }

    fn grid(&self) -> Result<&GridSpec, CliError> {
        match (&self.candidates, &self.file_grid) {
            (Some(Candidates::Grid(g)), _) | (_, Some(g)) => Ok(g),
            _ => Err(CliError::parse(
                "this command needs --grid or a [grid] section",
            )),
        }
    }
}

/// Rendered outcome of one command.
#[derive(Debug, Clone)]
pub struct Report {
    pub text: String,
    pub record: Value,
    pub exit_code: i32,
}

impl Report {
    fn ok(text: String, record: Value) -> Self {
        Self {
            text,
            record,
            exit_code: EXIT_OK,
        }
    }
}

/// Caps the global thread pool from the environment.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::parse(format!(
            "{THREADS_ENV} must be a positive integer, got `{raw}`"
        ))
    })?;
    // a pool built earlier in the process keeps its size
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    Ok(())
}

pub fn run(cli: &Cli) -> Result<Report, CliError> {
    let spec = RunSpec::from_args(&cli.args)?;
    let report = match &cli.command {
        Command::Analyze => cmd_analyze(&spec),
        Command::OptimizeApprox => cmd_optimize_approx(&spec),
        Command::OptimizeExact => cmd_optimize_exact(&spec),
        Command::Grid => cmd_grid(&spec),
        Command::Ew => cmd_ew(&spec),
        Command::BayesEval { designs } => cmd_bayes_eval(&spec, designs),
        Command::Efficiency { target, reference } => cmd_efficiency(&spec, target, reference),
        Command::ThreePoint => cmd_three_point(&spec),
    }?;
    if let Some(path) = &cli.args.out {
        let body = serde_json::to_string_pretty(&report.record).expect("records are plain data");
        std::fs::write(path, body + "\n")
            .map_err(|e| CliError::parse(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(report)
}

fn fmt_point(x: &[f64]) -> String {
    x.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn fmt_log_det(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf (singular)".into()
    } else {
        format!("{v:.9}")
    }
}

fn rank_text(r: &RankReport) -> String {
    let mut s = String::new();
    let sizes = |v: &[usize]| {
        v.iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    };
    let _ = writeln!(s, "points         {}", r.num_points);
    let _ = writeln!(s, "parameters     {}", r.num_params);
    let _ = writeln!(s, "p_j            {}", sizes(&r.category_sizes));
    let _ = writeln!(s, "p_c            {}", r.common_size);
    let _ = writeln!(s, "rank H_j       {}", sizes(&r.category_ranks));
    let _ = writeln!(s, "rank H_c       {}", r.common_rank);
    let _ = writeln!(s, "p_H            {}", r.p_h);
    let _ = writeln!(s, "k_min          {}", r.k_min);
    let _ = writeln!(s, "rank H         {}", r.rank_h);
    let _ = writeln!(s, "positive def.  {}", r.positive_definite);
    for v in &r.violations {
        let _ = writeln!(s, "violated       {v}");
    }
    s
}

/// Turns an optimizer's infeasibility into exit 2 carrying the rank report.
fn with_rank_report(spec: &RunSpec, points: &[Vec<f64>], e: Error) -> CliError {
    let mut err = CliError::from(e);
    if err.code == EXIT_INFEASIBLE {
        if let Ok(r) = analyze_rank(&spec.model, points) {
            err.message = format!("{}\n{}", err.message, rank_text(&r).trim_end());
        }
    }
    err
}

fn header(command: &str, spec: &RunSpec) -> Value {
    json!({
        "command": command,
        "model_file": spec.model_path.display().to_string(),
        "model": spec.model,
        "seed": spec.config.seed,
        "rel_tol": spec.config.rel_tol,
    })
}

fn extend(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(a), Value::Object(b)) = (&mut base, extra) {
        a.extend(b);
    }
    base
}

fn weights_table(design: &DesignApprox) -> String {
    let mut s = String::from("point                weight\n");
    for (x, w) in design.points().iter().zip(design.weights()) {
        let _ = writeln!(s, "{:<20} {w:.4}", fmt_point(x));
    }
    s
}

fn counts_table(design: &DesignExact) -> String {
    let mut s = String::from("point                count      proportion\n");
    let n = design.total() as f64;
    for (x, &c) in design.points().iter().zip(design.counts()) {
        let _ = writeln!(s, "{:<20} {c:<10} {:.4}", fmt_point(x), c as f64 / n);
    }
    s
}

/// `shown` is printed; the slack's worst point indexes the full candidate set.
fn lift_text(shown: &DesignApprox, out: &LiftOneOutcome) -> String {
    let mut s = weights_table(shown);
    let c = &out.certificate;
    let _ = writeln!(s, "log det        {}", fmt_log_det(out.log_det));
    let _ = writeln!(
        s,
        "max slack      {:.3e} at point {} ({})",
        c.max_slack,
        fmt_point(&out.design.points()[c.worst_point]),
        if c.optimal {
            "optimal"
        } else {
            "not certified"
        }
    );
    let _ = writeln!(
        s,
        "passes         {} ({})",
        out.passes,
        if out.converged {
            "converged"
        } else {
            "pass limit reached"
        }
    );
    let _ = writeln!(s, "seed           {}", out.seed);
    s
}

fn lift_record(out: &LiftOneOutcome) -> Value {
    json!({
        "design": DesignRecord::from(&out.design),
        "log_det": out.log_det,
        "passes": out.passes,
        "converged": out.converged,
        "certificate": out.certificate,
    })
}

pub fn cmd_analyze(spec: &RunSpec) -> Result<Report, CliError> {
    let points = spec.points()?;
    let r = analyze_rank(&spec.model, &points)?;
    let mut text = rank_text(&r);
    let mut record = extend(header("analyze", spec), json!({ "rank": r }));
    if r.positive_definite && points.len() == r.k_min {
        let verdict = uniform_minimal_verdict(&spec.model, &points)?;
        let verdict_name = match verdict {
            UniformVerdict::UniformOptimal => "uniform-optimal",
            UniformVerdict::NotGuaranteed => "not-guaranteed",
        };
        let _ = writeln!(
            text,
            "uniform weights {verdict_name} among minimally supported designs"
        );
        record = extend(record, json!({ "uniform_verdict": verdict }));
    }
    Ok(Report {
        text,
        record,
        exit_code: if r.positive_definite {
            EXIT_OK
        } else {
            EXIT_INFEASIBLE
        },
    })
}

pub fn cmd_optimize_approx(spec: &RunSpec) -> Result<Report, CliError> {
    let theta = spec.theta()?;
    let points = spec.points()?;
    let out = lift_one(&spec.model, theta, &points, &spec.config)
        .map_err(|e| with_rank_report(spec, &points, e))?;
    let text = format!(
        "approximate design over {} points\n{}",
        points.len(),
        lift_text(&out.design, &out)
    );
    let record = extend(header("optimize-approx", spec), lift_record(&out));
    Ok(Report::ok(text, record))
}

pub fn cmd_optimize_exact(spec: &RunSpec) -> Result<Report, CliError> {
    let theta = spec.theta()?;
    let points = spec.points()?;
    let n = spec
        .n
        .ok_or_else(|| CliError::parse("optimize-exact needs --n"))?;
    if n == 0 {
        return Err(CliError::parse("--n must be at least 1"));
    }
    let out = exchange(&spec.model, theta, &points, n, None, &spec.config)
        .map_err(|e| with_rank_report(spec, &points, e))?;
    let mut text = format!("exact design with n = {n} over {} points\n", points.len());
    text += &counts_table(&out.design);
    let _ = writeln!(text, "log det        {}", fmt_log_det(out.log_det));
    let _ = writeln!(
        text,
        "passes         {} ({})",
        out.passes,
        if out.converged {
            "converged"
        } else {
            "pass limit reached"
        }
    );
    let _ = writeln!(text, "seed           {}", out.seed);
    let record = extend(
        header("optimize-exact", spec),
        json!({
            "n": n,
            "design": DesignRecord::from(&out.design),
            "log_det": out.log_det,
            "initial_log_det": out.initial_log_det,
            "passes": out.passes,
            "converged": out.converged,
        }),
    );
    Ok(Report::ok(text, record))
}

pub fn cmd_grid(spec: &RunSpec) -> Result<Report, CliError> {
    let theta = spec.theta()?;
    let grid = spec.grid()?;
    let out = grid_search(&spec.model, theta, grid, &spec.config)?;
    let Some(lift) = &out.lift else {
        let points = grid.points();
        return Err(with_rank_report(
            spec,
            &points,
            Error::Infeasible(
                "the feasible grid points cannot support a nonsingular design".into(),
            ),
        ));
    };
    let mut text = format!(
        "grid of {} points, {} outside the design space\nsupport\n",
        out.candidates, out.dropped
    );
    text += &lift_text(&out.support, lift);
    let record = extend(
        header("grid", spec),
        json!({
            "grid": grid,
            "candidates": out.candidates,
            "dropped": out.dropped,
            "support": DesignRecord::from(&out.support),
        }),
    );
    let record = extend(record, lift_record(lift));
    Ok(Report::ok(text, record))
}

fn prior_sample(spec: &RunSpec, points: &[Vec<f64>]) -> Result<(PriorSample, usize), CliError> {
    let rows = spec.prior_rows()?;
    if rows.thetas.is_empty() {
        return Err(CliError::parse(format!(
            "prior has no valid rows ({} skipped)",
            rows.skipped
        )));
    }
    let prior = PriorSample::filtered(&spec.model, rows.thetas.clone(), points)?;
    Ok((prior, rows.skipped))
}

fn prior_text(prior: &PriorSample, skipped: usize) -> String {
    format!(
        "prior draws    {} used, {} outside the design space, {} malformed rows skipped\n",
        prior.len(),
        prior.dropped(),
        skipped
    )
}

fn prior_record(prior: &PriorSample, skipped: usize) -> Value {
    json!({ "prior": { "used": prior.len(), "dropped": prior.dropped(), "skipped_rows": skipped } })
}

pub fn cmd_ew(spec: &RunSpec) -> Result<Report, CliError> {
    let points = spec.points()?;
    let (prior, skipped) = prior_sample(spec, &points)?;
    let out = ew_lift_one(&spec.model, &prior, &points, &spec.config)
        .map_err(|e| with_rank_report(spec, &points, e))?;
    let text = format!(
        "EW design over {} points\n{}{}",
        points.len(),
        prior_text(&prior, skipped),
        lift_text(&out.design, &out)
    );
    let record = extend(header("ew", spec), prior_record(&prior, skipped));
    Ok(Report::ok(text, extend(record, lift_record(&out))))
}

pub fn cmd_bayes_eval(spec: &RunSpec, files: &[PathBuf]) -> Result<Report, CliError> {
    let d = spec.model.factors();
    let designs = files
        .iter()
        .map(|f| format::parse_design_file(f, d))
        .collect::<Result<Vec<_>, _>>()?;
    let mut all_points: Vec<Vec<f64>> = Vec::new();
    for x in designs.iter().flat_map(|d| d.points()) {
        if !all_points.contains(x) {
            all_points.push(x.clone());
        }
    }
    let (prior, skipped) = prior_sample(spec, &all_points)?;
    let mut text = prior_text(&prior, skipped);
    let mut rows = Vec::new();
    let mut singular = false;
    for (file, design) in files.iter().zip(&designs) {
        let v = bayesian_objective(&spec.model, &prior, &design.approx())?;
        singular |= v.singular_draws > 0;
        let _ = writeln!(
            text,
            "{:<30} mean log det {}  ({} singular draws)",
            file.display(),
            fmt_log_det(v.value),
            v.singular_draws
        );
        rows.push(json!({ "file": file.display().to_string(), "objective": v }));
    }
    let record = extend(header("bayes-eval", spec), prior_record(&prior, skipped));
    let record = extend(record, json!({ "designs": rows }));
    Ok(Report {
        text,
        record,
        exit_code: if singular { EXIT_INFEASIBLE } else { EXIT_OK },
    })
}

pub fn cmd_efficiency(spec: &RunSpec, target: &Path, reference: &Path) -> Result<Report, CliError> {
    let theta = spec.theta()?;
    let d = spec.model.factors();
    let a = format::parse_design_file(target, d)?.approx();
    let b = format::parse_design_file(reference, d)?.approx();
    let eff = efficiency(&spec.model, theta, &a, &b)?;
    let la = fisher_total(&spec.model, theta, &a)?.log_det;
    let lb = fisher_total(&spec.model, theta, &b)?.log_det;
    let text = format!(
        "efficiency     {eff:.3}\nlog det target {}\nlog det ref.   {}\n",
        fmt_log_det(la),
        fmt_log_det(lb)
    );
    let record = extend(
        header("efficiency", spec),
        json!({
            "target": target.display().to_string(),
            "reference": reference.display().to_string(),
            "efficiency": eff,
            "target_log_det": la,
            "reference_log_det": lb,
        }),
    );
    Ok(Report::ok(text, record))
}

pub fn cmd_three_point(spec: &RunSpec) -> Result<Report, CliError> {
    let theta = spec.theta()?;
    let points = spec.points()?;
    let x: [f64; 3] = match points.as_slice() {
        [a, b, c] if a.len() == 1 => [a[0], b[0], c[0]],
        _ => {
            return Err(CliError::parse(
                "three-point needs exactly three one-factor points",
            ))
        }
    };
    let coef = three_point_coefficients(&spec.model, theta, x)?;
    let (design, sol) = three_point_design(&spec.model, theta, x)?;
    let log_det = fisher_total(&spec.model, theta, &design)?.log_det;
    let mut text = format!(
        "C              {:.6e}\nc              {:.6e}, {:.6e}, {:.6e}\ncase           {:?}\n",
        coef.scale, coef.c[0], coef.c[1], coef.c[2], sol.case
    );
    if let Some(m) = sol.method {
        let _ = writeln!(
            text,
            "quartic root   {:?}, y1 = {:.9}",
            m,
            sol.y1.unwrap_or(f64::NAN)
        );
    }
    text += &weights_table(&design);
    let _ = writeln!(text, "log det        {}", fmt_log_det(log_det));
    let record = extend(
        header("three-point", spec),
        json!({
            "coefficients": coef,
            "solution": sol,
            "design": DesignRecord::from(&design),
            "log_det": log_det,
        }),
    );
    Ok(Report::ok(text, record))
}

/// Re-reads a design emitted by `--out`.
pub fn design_from_record(record: &Value, model: &ModelSpec) -> Result<Design, CliError> {
    let r: DesignRecord = serde_json::from_value(record["design"].clone())
        .map_err(|e| CliError::parse(format!("record has no design: {e}")))?;
    r.to_design(model.factors())
}
