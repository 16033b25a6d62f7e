//! Built-in densities addressable by name.

use serde::{Deserialize, Serialize};

use super::{norm, BulkDensity, GrowthMode, SurfaceDensity};
use crate::error::{Error, Result};
use crate::varexp::ExponentField;

/// Piecewise-constant 1-periodic coefficient along `x_1`: `values[k]` on
/// `[k/n, (k+1)/n)`, evaluated as `a(frequency · x_1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicCoefficient {
    pub values: Vec<f64>,
    #[serde(default = "one")]
    pub frequency: f64,
}

fn one() -> f64 {
    1.0
}

impl PeriodicCoefficient {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let c = Self {
            values,
            frequency: 1.0,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Input("periodic coefficient needs at least one value".into()));
        }
        if let Some(v) = self.values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Input(format!("coefficient values must be positive, got {v}")));
        }
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return Err(Error::Input(format!("frequency must be positive, got {}", self.frequency)));
        }
        Ok(())
    }

    pub fn with_frequency(&self, j: f64) -> Self {
        Self {
            values: self.values.clone(),
            frequency: self.frequency * j,
        }
    }

    pub fn eval(&self, x1: f64) -> f64 {
        let t = (self.frequency * x1).rem_euclid(1.0);
        let n = self.values.len();
        self.values[((t * n as f64) as usize).min(n - 1)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `f(x, ξ) = |ξ|^{p(x)}`.
pub fn power(exponent: ExponentField) -> Result<BulkDensity> {
    let p_plus = exponent.bounds().1;
    let p = exponent.clone();
    BulkDensity::new(
        "power",
        move |x, xi| norm(xi).powf(p.eval(x)),
        1.0,
        1.0,
        exponent,
    )
    .map(|f| f.with_modulus(move |t| p_plus * t))
}

/// `f(x, ξ) = a(x_1) |ξ|^{p(x)}` with a periodic coefficient.
pub fn weighted_power(a: PeriodicCoefficient, exponent: ExponentField) -> Result<BulkDensity> {
    a.validate()?;
    let (lo, hi) = (a.min(), a.max());
    let p_plus = exponent.bounds().1;
    let p = exponent.clone();
    let lip = p_plus * hi.max(1.0) / lo.min(1.0);
    BulkDensity::new(
        "weighted_power",
        move |x, xi| a.eval(x[0]) * norm(xi).powf(p.eval(x)),
        lo,
        hi,
        exponent,
    )
    .map(|f| f.with_modulus(move |t| lip * t))
}

/// `g ≡ κ`.
pub fn const_surface(kappa: f64) -> Result<SurfaceDensity> {
    SurfaceDensity::new(
        "const_surface",
        move |_, _, _| kappa,
        kappa,
        kappa,
        1.0,
        GrowthMode::Bounded,
    )
    .map(|g| g.with_modulus(|_| 0.0))
}

/// `g = min(β, α + |ζ|)`.
pub fn capped_linear(alpha: f64, beta: f64) -> Result<SurfaceDensity> {
    SurfaceDensity::new(
        "capped_linear",
        move |_, z, _| beta.min(alpha + norm(z)),
        alpha,
        beta,
        1.0,
        GrowthMode::Bounded,
    )
    .map(|g| g.with_modulus(move |t| t / (2.0 * alpha)))
}

/// `g = α + |ζ|` with linear growth.
pub fn linear_surface(alpha: f64) -> Result<SurfaceDensity> {
    SurfaceDensity::new(
        "linear_surface",
        move |_, z, _| alpha + norm(z),
        alpha,
        alpha.max(1.0),
        1.0,
        GrowthMode::Linear,
    )
    .map(|g| g.with_modulus(move |t| t / (2.0 * alpha)))
}
