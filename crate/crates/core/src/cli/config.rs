//! TOML experiment configuration.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cell::{BoundaryDatum, CompetitorClass, SolverParams};
use crate::energy::{
    capped_linear, const_surface, linear_surface, power, weighted_power, BulkDensity,
    PeriodicCoefficient, SurfaceDensity,
};
use crate::error::{Error, Result};
use crate::limits::{DensitySequence, Ladder};
use crate::varexp::ExponentField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    #[serde(rename = "norms")]
    Norms,
    #[serde(rename = "truncation")]
    Truncation,
    #[serde(rename = "glue")]
    Glue,
    #[serde(rename = "cell")]
    Cell,
    #[serde(rename = "bulk-density")]
    BulkDensity,
    #[serde(rename = "surface-density")]
    SurfaceDensity,
    #[serde(rename = "separation")]
    Separation,
    #[serde(rename = "perturbation")]
    Perturbation,
    #[serde(rename = "homogenize-1d")]
    Homogenize1d,
    #[serde(rename = "validate")]
    Validate,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Norms => "norms",
            Self::Truncation => "truncation",
            Self::Glue => "glue",
            Self::Cell => "cell",
            Self::BulkDensity => "bulk-density",
            Self::SurfaceDensity => "surface-density",
            Self::Separation => "separation",
            Self::Perturbation => "perturbation",
            Self::Homogenize1d => "homogenize-1d",
            Self::Validate => "validate",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Exponent field, or samples read from a whitespace-separated file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExponentConfig {
    Constant {
        value: f64,
    },
    Affine {
        base: f64,
        slope: Vec<f64>,
    },
    Sinusoidal {
        mean: f64,
        amplitude: f64,
        period: f64,
    },
    Step {
        left: f64,
        right: f64,
        at: f64,
        #[serde(default)]
        axis: usize,
    },
    Sampled {
        lo: f64,
        hi: f64,
        values: Vec<f64>,
    },
    File {
        path: PathBuf,
        lo: f64,
        hi: f64,
    },
}

impl Default for ExponentConfig {
    fn default() -> Self {
        Self::Constant { value: 2.0 }
    }
}

impl ExponentConfig {
    /// Relative file paths resolve against `base`.
    pub fn to_field(&self, base: &Path) -> Result<ExponentField> {
        Ok(match self.clone() {
            Self::Constant { value } => ExponentField::Constant { value },
            Self::Affine { base, slope } => ExponentField::Affine { base, slope },
            Self::Sinusoidal {
                mean,
                amplitude,
                period,
            } => ExponentField::Sinusoidal {
                mean,
                amplitude,
                period,
            },
            Self::Step {
                left,
                right,
                at,
                axis,
            } => ExponentField::Step {
                left,
                right,
                at,
                axis,
            },
            Self::Sampled { lo, hi, values } => ExponentField::Sampled { lo, hi, values },
            Self::File { path, lo, hi } => {
                let path = base.join(path);
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    Error::Config(format!("exponent file {}: {e}", path.display()))
                })?;
                let values = text
                    .split_whitespace()
                    .map(|t| {
                        t.parse::<f64>().map_err(|_| {
                            Error::Config(format!("exponent file {}: bad number {t:?}", path.display()))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                ExponentField::Sampled { lo, hi, values }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum BulkConfig {
    Power {
        #[serde(default)]
        exponent: ExponentConfig,
    },
    WeightedPower {
        #[serde(default)]
        exponent: ExponentConfig,
        coefficient: PeriodicCoefficient,
    },
}

impl Default for BulkConfig {
    fn default() -> Self {
        Self::Power {
            exponent: ExponentConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceConfig {
    ConstSurface { kappa: f64 },
    CappedLinear { alpha: f64, beta: f64 },
    LinearSurface { alpha: f64 },
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self::ConstSurface { kappa: 1.0 }
    }
}

impl SurfaceConfig {
    pub fn build(&self) -> Result<SurfaceDensity> {
        match *self {
            Self::ConstSurface { kappa } => const_surface(kappa),
            Self::CappedLinear { alpha, beta } => capped_linear(alpha, beta),
            Self::LinearSurface { alpha } => linear_surface(alpha),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    /// `f_j = f`, `g_j = g`.
    #[default]
    Constant,
    /// `f_j(x, ξ) = a(j x_1)|ξ|^p`; needs a `weighted_power` bulk density.
    Homogenization,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    #[serde(default)]
    pub sequence: SequenceKind,
    #[serde(default)]
    pub bulk: BulkConfig,
    #[serde(default)]
    pub surface: SurfaceConfig,
}

impl DensityConfig {
    pub fn bulk(&self, base: &Path) -> Result<BulkDensity> {
        match &self.bulk {
            BulkConfig::Power { exponent } => power(exponent.to_field(base)?),
            BulkConfig::WeightedPower {
                exponent,
                coefficient,
            } => weighted_power(coefficient.clone(), exponent.to_field(base)?),
        }
    }

    pub fn sequence(&self, base: &Path) -> Result<DensitySequence> {
        let surface = self.surface.build()?;
        match (self.sequence, &self.bulk) {
            (SequenceKind::Constant, _) => Ok(DensitySequence::constant(self.bulk(base)?, surface)),
            (
                SequenceKind::Homogenization,
                BulkConfig::WeightedPower {
                    exponent,
                    coefficient,
                },
            ) => DensitySequence::homogenization(
                coefficient.clone(),
                exponent.to_field(base)?,
                surface,
            ),
            (SequenceKind::Homogenization, _) => Err(Error::Config(
                "densities.sequence = \"homogenization\" needs densities.bulk.name = \"weighted_power\"".into(),
            )),
        }
    }
}

fn zero() -> Vec<f64> {
    vec![0.0]
}

fn unit() -> Vec<f64> {
    vec![1.0]
}

fn sbv() -> CompetitorClass {
    CompetitorClass::Sbv
}

/// Blow-up point and data of density estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    #[serde(default = "zero")]
    pub x0: Vec<f64>,
    #[serde(default = "unit")]
    pub xi: Vec<f64>,
    #[serde(default = "unit")]
    pub zeta: Vec<f64>,
    #[serde(default = "unit")]
    pub nu: Vec<f64>,
    #[serde(default = "sbv")]
    pub class: CompetitorClass,
}

impl Default for PointConfig {
    fn default() -> Self {
        Self {
            x0: zero(),
            xi: unit(),
            zeta: unit(),
            nu: unit(),
            class: sbv(),
        }
    }
}

fn default_datum() -> BoundaryDatum {
    BoundaryDatum::affine_scalar(&[1.0])
}

fn default_radius() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    #[serde(default = "zero")]
    pub center: Vec<f64>,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "sbv")]
    pub class: CompetitorClass,
    #[serde(default = "default_datum")]
    pub datum: BoundaryDatum,
    #[serde(default)]
    pub solver: SolverParams,
}

impl Default for CellConfig {
    fn default() -> Self {
        Self {
            center: zero(),
            radius: default_radius(),
            class: sbv(),
            datum: default_datum(),
            solver: SolverParams::default(),
        }
    }
}

fn default_samples() -> usize {
    100
}

fn default_nodes() -> usize {
    64
}

fn default_dim() -> usize {
    1
}

fn default_p_range() -> [f64; 2] {
    [1.5, 3.5]
}

fn default_etas() -> Vec<f64> {
    vec![0.5, 0.1, 0.02]
}

fn default_budget() -> usize {
    2000
}

/// Randomized suites (`norms`, `truncation`, `glue`) and validator budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_p_range")]
    pub p_range: [f64; 2],
    #[serde(default = "default_etas")]
    pub etas: Vec<f64>,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_iso: Option<f64>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            samples: default_samples(),
            dim: default_dim(),
            nodes: default_nodes(),
            p_range: default_p_range(),
            etas: default_etas(),
            budget: default_budget(),
            gamma_iso: None,
        }
    }
}

fn default_sigmas() -> Vec<f64> {
    vec![1.0, 0.5, 0.25, 0.125]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    #[serde(default = "default_sigmas")]
    pub sigmas: Vec<f64>,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            sigmas: default_sigmas(),
        }
    }
}

fn default_a() -> Vec<f64> {
    vec![1.0, 4.0]
}

fn two() -> f64 {
    2.0
}

fn one() -> f64 {
    1.0
}

/// `f_j = a(j x)|ξ|^p` with equal pieces of `a` on one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomogenizeConfig {
    #[serde(default = "default_a")]
    pub a: Vec<f64>,
    #[serde(default = "two")]
    pub p: f64,
    #[serde(default = "one")]
    pub xi: f64,
    #[serde(default = "one")]
    pub kappa: f64,
}

impl Default for HomogenizeConfig {
    fn default() -> Self {
        Self {
            a: default_a(),
            p: two(),
            xi: one(),
            kappa: one(),
        }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_tolerance() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Relative tolerance of the verdicts.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Reference value for density experiments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
    #[serde(default)]
    pub densities: DensityConfig,
    #[serde(default)]
    pub point: PointConfig,
    #[serde(default)]
    pub ladder: Ladder,
    #[serde(default)]
    pub cell: CellConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub perturbation: PerturbationConfig,
    #[serde(default)]
    pub homogenize: HomogenizeConfig,
}

impl ExperimentConfig {
    /// Defaults for `kind`; the `homogenize-1d` ladder uses every `j` in `1..=16`.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let mut ladder = Ladder::default();
        if kind == ExperimentKind::Homogenize1d {
            ladder.js = (1..=16).collect();
        }
        Self {
            experiment: kind,
            seed: 0,
            out: default_out(),
            tolerance: default_tolerance(),
            expected: None,
            densities: DensityConfig::default(),
            point: PointConfig::default(),
            ladder,
            cell: CellConfig::default(),
            sampling: SamplingConfig::default(),
            perturbation: PerturbationConfig::default(),
            homogenize: HomogenizeConfig::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Checks every field used by the selected experiment.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Config(format!("{field}: {msg}")));
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return bad("tolerance", format!("must be positive, got {}", self.tolerance));
        }
        if let Err(e) = self.ladder.validate() {
            return bad("ladder", inner(e));
        }
        if let Err(e) = self.densities.surface.build() {
            return bad("densities.surface", inner(e));
        }
        if let BulkConfig::WeightedPower { coefficient, .. } = &self.densities.bulk {
            if let Err(e) = coefficient.validate() {
                return bad("densities.bulk.coefficient", inner(e));
            }
        }
        let d = self.point.x0.len();
        if !(1..=2).contains(&d) {
            return bad("point.x0", format!("dimension must be 1 or 2, got {d}"));
        }
        if self.point.xi.is_empty() || !self.point.xi.len().is_multiple_of(d) {
            return bad("point.xi", "must be an m x d matrix".into());
        }
        if self.point.nu.len() != d {
            return bad("point.nu", format!("needs {d} entries"));
        }
        if !(self.cell.radius > 0.0 && self.cell.radius.is_finite()) {
            return bad("cell.radius", format!("must be positive, got {}", self.cell.radius));
        }
        if let Err(e) = self.cell.datum.validate(self.cell.center.len()) {
            return bad("cell.datum", inner(e));
        }
        let s = &self.sampling;
        if s.samples == 0 {
            return bad("sampling.samples", "must be positive".into());
        }
        if !(1..=2).contains(&s.dim) {
            return bad("sampling.dim", format!("must be 1 or 2, got {}", s.dim));
        }
        if s.nodes < 4 {
            return bad("sampling.nodes", format!("need at least 4, got {}", s.nodes));
        }
        if !(s.p_range[0] > 1.0 && s.p_range[0] <= s.p_range[1]) {
            return bad("sampling.p_range", format!("need 1 < lo <= hi, got {:?}", s.p_range));
        }
        if s.etas.is_empty() || s.etas.iter().any(|e| !(*e > 0.0)) {
            return bad("sampling.etas", "must be nonempty and positive".into());
        }
        let sig = &self.perturbation.sigmas;
        if sig.is_empty() || sig.iter().any(|s| !(*s > 0.0)) || sig.windows(2).any(|w| w[1] >= w[0]) {
            return bad("perturbation.sigmas", "must be positive and strictly decreasing".into());
        }
        let h = &self.homogenize;
        if h.a.is_empty() || h.a.iter().any(|v| !(*v > 0.0)) {
            return bad("homogenize.a", "must be nonempty and positive".into());
        }
        if !(h.p > 1.0) {
            return bad("homogenize.p", format!("must exceed 1, got {}", h.p));
        }
        if self.experiment == ExperimentKind::Homogenize1d && d != 1 {
            return bad("point.x0", "homogenize-1d is one-dimensional".into());
        }
        Ok(())
    }
}

fn inner(e: Error) -> String {
    match e {
        Error::Input(m) | Error::Precondition(m) | Error::Config(m) => m,
        other => other.to_string(),
    }
}
