//! On-disk formats: model files, prior CSV and design records.

use std::collections::HashMap;
use std::path::Path;

use optdesign::fisher::{DesignApprox, DesignExact, WEIGHT_SUM_TOL};
use optdesign::optimize::{GridAxis, GridSpec};
use optdesign::{LinkKind, ModelSpec, ParameterVector, PredictorSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// A model file: `[model]` plus optional `[theta]`, `[points]` and `[grid]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub model: ModelSection,
    pub theta: Option<ThetaSection>,
    pub points: Option<PointsSection>,
    pub grid: Option<GridSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub link: String,
    #[serde(rename = "J")]
    pub categories: usize,
    pub d: usize,
    /// Exponent tuples of each category block `h_1, ..., h_{J-1}`.
    pub blocks: Vec<Vec<Vec<u32>>>,
    /// Exponent tuples of the common block `h_c`.
    #[serde(default)]
    pub common: Vec<Vec<u32>>,
    /// Checked against the odds structure the blocks imply.
    pub odds: Option<String>,
}

/// Either a flat `values = [β_1.., β_2.., ζ..]` or `beta = [[..], ..]` with `zeta = [..]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaSection {
    pub values: Option<Vec<f64>>,
    pub beta: Option<Vec<Vec<f64>>>,
    pub zeta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointValue {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl PointValue {
    fn coords(&self) -> Vec<f64> {
        match self {
            PointValue::Scalar(v) => vec![*v],
            PointValue::Vector(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointsSection {
    pub values: Vec<PointValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub axes: Vec<GridAxis>,
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::parse(format!("cannot read {}: {e}", path.display())))
}

fn toml_error(path: &Path, e: toml::de::Error) -> CliError {
    CliError::parse(format!("{}: {e}", path.display()))
}

pub fn parse_model_file(path: &Path) -> Result<ModelFile, CliError> {
    let text = read_text(path)?;
    toml::from_str(&text).map_err(|e| toml_error(path, e))
}

fn predictor(d: usize, terms: &[Vec<u32>], what: &str) -> Result<PredictorSpec, CliError> {
    PredictorSpec::new(d, terms.to_vec()).map_err(|e| CliError::parse(format!("{what}: {e}")))
}

impl ModelSection {
    pub fn to_model(&self) -> Result<ModelSpec, CliError> {
        let link: LinkKind = self
            .link
            .parse()
            .map_err(|e| CliError::parse(format!("{e}")))?;
        let per = self
            .blocks
            .iter()
            .enumerate()
            .map(|(j, b)| predictor(self.d, b, &format!("block {}", j + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        let common = predictor(self.d, &self.common, "common block")?;
        let model = ModelSpec::new(link, self.d, self.categories, per, common)
            .map_err(|e| CliError::parse(e.to_string()))?;
        if let Some(odds) = &self.odds {
            let found = model.odds_structure();
            if !odds.eq_ignore_ascii_case(&found.to_string()) {
                return Err(CliError::parse(format!(
                    "model declares odds `{odds}` but its blocks give `{found}`"
                )));
            }
        }
        Ok(model)
    }
}

impl ThetaSection {
    pub fn to_theta(&self, model: &ModelSpec) -> Result<ParameterVector, CliError> {
        let theta = match (&self.values, &self.beta) {
            (Some(flat), None) if self.zeta.is_none() => ParameterVector::from_flat(model, flat),
            (None, Some(beta)) => {
                ParameterVector::new(model, beta.clone(), self.zeta.clone().unwrap_or_default())
            }
            _ => {
                return Err(CliError::parse(
                    "[theta] needs either `values` or `beta` (with optional `zeta`)",
                ))
            }
        };
        let theta = theta.map_err(|e| CliError::parse(format!("[theta]: {e}")))?;
        if theta.to_flat().iter().any(|v| !v.is_finite()) {
            return Err(CliError::parse("[theta] values must be finite"));
        }
        Ok(theta)
    }
}

/// `[theta]` of any TOML file, other sections ignored.
pub fn parse_theta_file(path: &Path, model: &ModelSpec) -> Result<ParameterVector, CliError> {
    #[derive(Deserialize)]
    struct OnlyTheta {
        theta: Option<ThetaSection>,
    }
    let text = read_text(path)?;
    let doc: OnlyTheta = toml::from_str(&text).map_err(|e| toml_error(path, e))?;
    doc.theta
        .ok_or_else(|| CliError::parse(format!("{}: no [theta] section", path.display())))?
        .to_theta(model)
}

pub fn points_from_section(section: &PointsSection, d: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let points: Vec<Vec<f64>> = section.values.iter().map(PointValue::coords).collect();
    check_points(&points, d)?;
    Ok(points)
}

fn check_points(points: &[Vec<f64>], d: usize) -> Result<(), CliError> {
    if points.is_empty() {
        return Err(CliError::parse("candidate point list is empty"));
    }
    for (i, x) in points.iter().enumerate() {
        if x.len() != d {
            return Err(CliError::parse(format!(
                "point {} has {} coordinates, model has {d} factors",
                i + 1,
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(CliError::parse(format!("point {} is not finite", i + 1)));
        }
    }
    Ok(())
}

fn number(s: &str, what: &str) -> Result<f64, CliError> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::parse(format!("{what}: `{}` is not a finite number", s.trim())))
}

/// `--points`: points separated by `;`, coordinates by `,`. With one factor a plain
/// comma list gives one point per entry.
pub fn parse_points_arg(arg: &str, d: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let trimmed = arg.trim();
    let points: Vec<Vec<f64>> = if trimmed.is_empty() {
        Vec::new()
    } else if d == 1 && !trimmed.contains(';') {
        trimmed
            .split(',')
            .map(|s| number(s, "--points").map(|v| vec![v]))
            .collect::<Result<_, _>>()?
    } else {
        trimmed
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|p| p.split(',').map(|s| number(s, "--points")).collect())
            .collect::<Result<_, _>>()?
    };
    check_points(&points, d)?;
    Ok(points)
}

/// `--grid`: one `lower:upper:step` per factor, separated by `,`.
pub fn parse_grid_arg(arg: &str, d: usize) -> Result<GridSpec, CliError> {
    let axes = arg
        .split(',')
        .map(|axis| {
            let parts: Vec<&str> = axis.split(':').collect();
            let [lower, upper, step] = parts[..] else {
                return Err(CliError::parse(format!(
                    "--grid axis `{axis}` must look like lower:upper:step"
                )));
            };
            Ok(GridAxis {
                lower: number(lower, "--grid")?,
                upper: number(upper, "--grid")?,
                step: number(step, "--grid")?,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    grid_spec(axes, d)
}

pub fn grid_spec(axes: Vec<GridAxis>, d: usize) -> Result<GridSpec, CliError> {
    if axes.len() != d {
        return Err(CliError::parse(format!(
            "grid has {} axes, model has {d} factors",
            axes.len()
        )));
    }
    GridSpec::new(axes).map_err(|e| CliError::parse(e.to_string()))
}

/// Prior CSV column name of every flat parameter position.
pub fn prior_columns(model: &ModelSpec) -> Vec<String> {
    let mut names = Vec::with_capacity(model.num_params());
    for (j, size) in model.category_sizes().into_iter().enumerate() {
        names.extend((1..=size).map(|k| format!("beta_{}_{k}", j + 1)));
    }
    names.extend((1..=model.common_size()).map(|k| format!("zeta_{k}")));
    names
}

/// Prior draws with the number of rows skipped as malformed.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorRows {
    pub thetas: Vec<ParameterVector>,
    pub skipped: usize,
}

/// One draw per row; the header names every `beta_j_k` and `zeta_k` column once.
pub fn parse_prior_csv(path: &Path, model: &ModelSpec) -> Result<PriorRows, CliError> {
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?
        .clone();
    let wanted = prior_columns(model);
    let index: HashMap<&str, usize> = wanted
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let mut position = vec![usize::MAX; wanted.len()];
    let mut order = Vec::with_capacity(header.len());
    for (col, name) in header.iter().enumerate() {
        let Some(&slot) = index.get(name) else {
            return Err(CliError::parse(format!(
                "{}: unknown prior column `{name}` (expected {})",
                path.display(),
                wanted.join(", ")
            )));
        };
        if position[slot] != usize::MAX {
            return Err(CliError::parse(format!(
                "{}: duplicate column `{name}`",
                path.display()
            )));
        }
        position[slot] = col;
        order.push(slot);
    }
    if let Some(missing) = position.iter().position(|&c| c == usize::MAX) {
        return Err(CliError::parse(format!(
            "{}: missing prior column `{}`",
            path.display(),
            wanted[missing]
        )));
    }
    let mut thetas = Vec::new();
    let mut skipped = 0;
    for record in reader.records() {
        let Ok(record) = record else {
            skipped += 1;
            continue;
        };
        if record.len() != wanted.len() {
            skipped += 1;
            continue;
        }
        let mut flat = vec![0.0; wanted.len()];
        let ok = record
            .iter()
            .zip(&order)
            .all(|(field, &slot)| match field.parse::<f64>() {
                Ok(v) if v.is_finite() => {
                    flat[slot] = v;
                    true
                }
                _ => false,
            });
        if !ok {
            skipped += 1;
            continue;
        }
        thetas.push(ParameterVector::from_flat(model, &flat).expect("column count matches"));
    }
    Ok(PriorRows { thetas, skipped })
}

/// Serialized design: `weights` for approximate designs, `counts` for exact ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignRecord {
    pub points: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counts: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Design {
    Approx(DesignApprox),
    Exact(DesignExact),
}

impl Design {
    pub fn points(&self) -> &[Vec<f64>] {
        match self {
            Design::Approx(d) => d.points(),
            Design::Exact(d) => d.points(),
        }
    }

    /// Proportions, so exact and approximate designs compare on the same scale.
    pub fn approx(&self) -> DesignApprox {
        match self {
            Design::Approx(d) => d.clone(),
            Design::Exact(d) => d.proportions(),
        }
    }
}

impl From<&DesignApprox> for DesignRecord {
    fn from(d: &DesignApprox) -> Self {
        Self {
            points: d.points().to_vec(),
            weights: Some(d.weights().to_vec()),
            counts: None,
        }
    }
}

impl From<&DesignExact> for DesignRecord {
    fn from(d: &DesignExact) -> Self {
        Self {
            points: d.points().to_vec(),
            weights: None,
            counts: Some(d.counts().to_vec()),
        }
    }
}

impl DesignRecord {
    /// Weights within rounding of one are kept as written; others are rescaled.
    pub fn to_design(&self, d: usize) -> Result<Design, CliError> {
        check_points(&self.points, d)?;
        let bad = |e: optdesign::Error| CliError::parse(format!("design: {e}"));
        match (&self.weights, &self.counts) {
            (Some(w), None) => {
                let total: f64 = w.iter().sum();
                let design = if (total - 1.0).abs() <= WEIGHT_SUM_TOL {
                    DesignApprox::new(self.points.clone(), w.clone())
                } else {
                    DesignApprox::normalized(self.points.clone(), w.clone())
                };
                design.map(Design::Approx).map_err(bad)
            }
            (None, Some(c)) => DesignExact::new(self.points.clone(), c.clone())
                .map(Design::Exact)
                .map_err(bad),
            _ => Err(CliError::parse(
                "design needs exactly one of `weights` or `counts`",
            )),
        }
    }
}

/// A design file: JSON (such as a `--out` sidecar) or TOML, with the design under `design`.
pub fn parse_design_file(path: &Path, d: usize) -> Result<Design, CliError> {
    #[derive(Deserialize)]
    struct Wrapper {
        design: DesignRecord,
    }
    let text = read_text(path)?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let wrapper: Wrapper = if is_json {
        serde_json::from_str(&text)
            .map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(&text).map_err(|e| toml_error(path, e))?
    };
    wrapper.design.to_design(d)
}
