//! Grids, variable exponents and the `L^{p(·)}` calculus on them.
//!
//! Everything lives on a uniform node grid in one or two dimensions. Nodal
//! integrals use tensor trapezoid weights, so every interior node carries the
//! volume element `h^d` and piecewise-constant data integrate exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform node grid on a box in `R^d`, `d ∈ {1, 2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    extents: [usize; 2],
    h: f64,
    origin: [f64; 2],
}

impl Grid {
    /// `extents` are cell counts per axis; node `i` along an axis sits at
    /// `origin + i*h`.
    pub fn new(dim: usize, extents: &[usize], h: f64, origin: &[f64]) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Input(format!("dimension must be 1 or 2, got {dim}")));
        }
        if extents.len() != dim || origin.len() != dim {
            return Err(Error::Structural(format!(
                "expected {dim} extents and origin coordinates"
            )));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Input(format!("grid spacing must be positive, got {h}")));
        }
        if extents.iter().any(|&e| e < 2) {
            return Err(Error::Input("every axis needs at least 2 cells".into()));
        }
        let mut ext = [0usize; 2];
        let mut org = [0.0f64; 2];
        ext[..dim].copy_from_slice(extents);
        org[..dim].copy_from_slice(origin);
        Ok(Self {
            dim,
            extents: ext,
            h,
            origin: org,
        })
    }

    /// `[0, 1]` split into `cells` cells.
    pub fn unit_interval(cells: usize) -> Result<Self> {
        Self::new(1, &[cells], 1.0 / cells as f64, &[0.0])
    }

    /// `[lo, hi]^d` with `nodes` nodes per axis.
    pub fn cube(dim: usize, nodes: usize, lo: f64, hi: f64) -> Result<Self> {
        if nodes < 3 {
            return Err(Error::Input("need at least 3 nodes per axis".into()));
        }
        let cells = nodes - 1;
        let h = (hi - lo) / cells as f64;
        Self::new(dim, &vec![cells; dim], h, &vec![lo; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents[..self.dim]
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin[..self.dim]
    }

    pub fn nodes_along(&self, axis: usize) -> usize {
        self.extents[axis] + 1
    }

    pub fn node_count(&self) -> usize {
        (0..self.dim).map(|k| self.nodes_along(k)).product()
    }

    /// `h^d`.
    pub fn volume_element(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// `h^{d-1}`, the surface measure of one lattice face.
    pub fn face_element(&self) -> f64 {
        self.h.powi(self.dim as i32 - 1)
    }

    pub fn index(&self, coords: [usize; 2]) -> usize {
        if self.dim == 1 {
            coords[0]
        } else {
            coords[0] + coords[1] * self.nodes_along(0)
        }
    }

    pub fn coords(&self, n: usize) -> [usize; 2] {
        if self.dim == 1 {
            [n, 0]
        } else {
            let nx = self.nodes_along(0);
            [n % nx, n / nx]
        }
    }

    /// Physical position of node `n` (trailing entries unused when `d = 1`).
    pub fn position(&self, n: usize) -> [f64; 2] {
        let c = self.coords(n);
        let mut x = [0.0; 2];
        for k in 0..self.dim {
            x[k] = self.origin[k] + c[k] as f64 * self.h;
        }
        x
    }

    /// Neighbour of `n` one step along `axis`, forward or backward.
    pub fn neighbor(&self, n: usize, axis: usize, forward: bool) -> Option<usize> {
        let mut c = self.coords(n);
        if forward {
            if c[axis] >= self.extents[axis] {
                return None;
            }
            c[axis] += 1;
        } else {
            if c[axis] == 0 {
                return None;
            }
            c[axis] -= 1;
        }
        Some(self.index(c))
    }

    /// Trapezoid quadrature weight of node `n`.
    pub fn weight(&self, n: usize) -> f64 {
        let c = self.coords(n);
        (0..self.dim)
            .map(|k| {
                if c[k] == 0 || c[k] == self.extents[k] {
                    0.5 * self.h
                } else {
                    self.h
                }
            })
            .product()
    }

    /// Lebesgue measure of the box.
    pub fn measure(&self) -> f64 {
        (0..self.dim)
            .map(|k| self.extents[k] as f64 * self.h)
            .product()
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (x, y) = (self.position(a), self.position(b));
        ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt()
    }

    pub fn distance_to_point(&self, n: usize, p: &[f64]) -> f64 {
        let x = self.position(n);
        (0..self.dim)
            .map(|k| (x[k] - p[k]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self == other
    }
}

/// A set of grid nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    mask: Vec<bool>,
}

impl Region {
    pub fn all(grid: &Grid) -> Self {
        Self {
            mask: vec![true; grid.node_count()],
        }
    }

    pub fn empty(grid: &Grid) -> Self {
        Self {
            mask: vec![false; grid.node_count()],
        }
    }

    pub fn from_fn(grid: &Grid, mut pred: impl FnMut(usize, &[f64]) -> bool) -> Self {
        let mask = (0..grid.node_count())
            .map(|n| {
                let x = grid.position(n);
                pred(n, &x[..grid.dim()])
            })
            .collect();
        Self { mask }
    }

    /// Open ball `{x : |x - center| < radius}` intersected with the grid.
    pub fn ball(grid: &Grid, ball: &Ball) -> Self {
        Self::from_fn(grid, |n, _| grid.distance_to_point(n, &ball.center) < ball.radius)
    }

    pub fn from_mask(mask: Vec<bool>) -> Self {
        Self { mask }
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn contains(&self, n: usize) -> bool {
        self.mask[n]
    }

    pub fn insert(&mut self, n: usize) {
        self.mask[n] = true;
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(n, &b)| b.then_some(n))
    }

    pub fn union(&self, other: &Region) -> Region {
        self.zip(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &Region) -> Region {
        self.zip(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &Region) -> Region {
        self.zip(other, |a, b| a && !b)
    }

    pub fn is_disjoint(&self, other: &Region) -> bool {
        self.mask.iter().zip(&other.mask).all(|(&a, &b)| !(a && b))
    }

    pub fn is_subset(&self, other: &Region) -> bool {
        self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }

    fn zip(&self, other: &Region, op: impl Fn(bool, bool) -> bool) -> Region {
        Region {
            mask: self
                .mask
                .iter()
                .zip(&other.mask)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        }
    }

    pub(crate) fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.mask.len() != grid.node_count() {
            return Err(Error::Structural(format!(
                "region has {} nodes, grid has {}",
                self.mask.len(),
                grid.node_count()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: &[f64], radius: f64) -> Self {
        Self {
            center: center.to_vec(),
            radius,
        }
    }
}

/// Continuous description of an exponent `p(x)`; sampled onto grids as a
/// [`VarExponent`] and evaluated pointwise by densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExponentField {
    Constant {
        value: f64,
    },
    /// `base + slope · x`.
    Affine {
        base: f64,
        slope: Vec<f64>,
    },
    /// `mean + amplitude · sin(2π x_1 / period)`.
    Sinusoidal {
        mean: f64,
        amplitude: f64,
        period: f64,
    },
    /// `left` for `x_axis < at`, `right` otherwise.
    Step {
        left: f64,
        right: f64,
        at: f64,
        #[serde(default)]
        axis: usize,
    },
    /// Piecewise-linear interpolation of samples on `[lo, hi]` along `x_1`.
    Sampled {
        lo: f64,
        hi: f64,
        values: Vec<f64>,
    },
}

impl ExponentField {
    pub fn constant(value: f64) -> Self {
        Self::Constant { value }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Affine { base, slope } => {
                base + slope.iter().zip(x).map(|(s, xi)| s * xi).sum::<f64>()
            }
            Self::Sinusoidal {
                mean,
                amplitude,
                period,
            } => mean + amplitude * (2.0 * std::f64::consts::PI * x[0] / period).sin(),
            Self::Step {
                left,
                right,
                at,
                axis,
            } => {
                if x[*axis] < *at {
                    *left
                } else {
                    *right
                }
            }
            Self::Sampled { lo, hi, values } => {
                let n = values.len();
                if n == 1 {
                    return values[0];
                }
                let t = ((x[0] - lo) / (hi - lo)).clamp(0.0, 1.0) * (n - 1) as f64;
                let i = (t.floor() as usize).min(n - 2);
                let s = t - i as f64;
                values[i] * (1.0 - s) + values[i + 1] * s
            }
        }
    }

    /// Global bounds `(p⁻, p⁺)` of the field (sample-wise for `Sampled`).
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Self::Constant { value } => (*value, *value),
            Self::Sinusoidal {
                mean, amplitude, ..
            } => (mean - amplitude.abs(), mean + amplitude.abs()),
            Self::Step { left, right, .. } => (left.min(*right), left.max(*right)),
            Self::Sampled { values, .. } => values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                    (a.min(v), b.max(v))
                }),
            // over the unit box [0, 1]^d
            Self::Affine { base, slope } => (
                base + slope.iter().map(|s| s.min(0.0)).sum::<f64>(),
                base + slope.iter().map(|s| s.max(0.0)).sum::<f64>(),
            ),
        }
    }

    pub fn sample(&self, grid: &Grid) -> Result<VarExponent> {
        let values = (0..grid.node_count())
            .map(|n| {
                let x = grid.position(n);
                self.eval(&x[..grid.dim()])
            })
            .collect();
        VarExponent::new(grid.clone(), values)
    }
}

/// Exponent samples on a grid with `1 < p⁻ ≤ p ≤ p⁺ < ∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarExponent {
    grid: Grid,
    values: Vec<f64>,
    p_minus: f64,
    p_plus: f64,
    log_holder_c: Option<f64>,
}

impl VarExponent {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Structural(format!(
                "{} exponent samples for {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v <= 1.0) {
            return Err(Error::Input(format!(
                "exponent samples must be finite and > 1, found {bad}"
            )));
        }
        let (p_minus, p_plus) = extrema(&values);
        Ok(Self {
            grid,
            values,
            p_minus,
            p_plus,
            log_holder_c: None,
        })
    }

    pub fn constant(grid: &Grid, p: f64) -> Result<Self> {
        Self::new(grid.clone(), vec![p; grid.node_count()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, n: usize) -> f64 {
        self.values[n]
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    pub fn log_holder_c(&self) -> Option<f64> {
        self.log_holder_c
    }

    /// Extrema over the nodes of `region`.
    pub fn extrema_on(&self, region: &Region) -> (f64, f64) {
        let vals: Vec<f64> = region.nodes().map(|n| self.values[n]).collect();
        extrema(&vals)
    }
}

fn extrema(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        })
}

/// Vector-valued nodal samples `u(x) ∈ R^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    components: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, components: usize, values: Vec<f64>) -> Result<Self> {
        if components == 0 {
            return Err(Error::Input("a grid function needs at least one component".into()));
        }
        if values.len() != grid.node_count() * components {
            return Err(Error::Structural(format!(
                "{} values for {} nodes x {} components",
                values.len(),
                grid.node_count(),
                components
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("grid function values must be finite".into()));
        }
        Ok(Self {
            grid,
            components,
            values,
        })
    }

    pub fn scalar(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.node_count())
            .map(|n| {
                let x = grid.position(n);
                f(&x[..grid.dim()])
            })
            .collect();
        Self::new(grid.clone(), 1, values)
    }

    pub fn constant(grid: &Grid, value: &[f64]) -> Result<Self> {
        let values = (0..grid.node_count())
            .flat_map(|_| value.iter().copied())
            .collect();
        Self::new(grid.clone(), value.len(), values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, n: usize) -> &[f64] {
        &self.values[n * self.components..(n + 1) * self.components]
    }

    /// Euclidean length of `u(x_n)`.
    pub fn norm_at(&self, n: usize) -> f64 {
        self.at(n).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        (0..self.grid.node_count())
            .map(|n| self.norm_at(n))
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            components: self.components,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

fn check_pair(u: &GridFunction, p: &VarExponent) -> Result<()> {
    if !u.grid().same_shape(p.grid()) {
        return Err(Error::Structural(
            "function and exponent live on different grids".into(),
        ));
    }
    Ok(())
}

/// `ρ_{p(·)}(u) = Σ_{n ∈ region} w_n |u(x_n)|^{p(x_n)}`.
pub fn modular(u: &GridFunction, p: &VarExponent, region: &Region) -> Result<f64> {
    check_pair(u, p)?;
    region.check_grid(u.grid())?;
    if region.is_empty() {
        return Err(Error::Domain("modular over an empty region".into()));
    }
    Ok(scaled_modular(u, p, region, 1.0))
}

/// `ρ(u/λ)`; may be `+∞` for tiny `λ`.
fn scaled_modular(u: &GridFunction, p: &VarExponent, region: &Region, lambda: f64) -> f64 {
    let grid = u.grid();
    region
        .nodes()
        .map(|n| {
            let a = u.norm_at(n) / lambda;
            if a == 0.0 {
                0.0
            } else {
                grid.weight(n) * a.powf(p.at(n))
            }
        })
        .sum()
}

pub const DEFAULT_BISECTION_TOL: f64 = 1e-10;

/// Luxembourg norm over the whole grid with the default tolerance.
pub fn luxembourg_norm(u: &GridFunction, p: &VarExponent) -> Result<f64> {
    luxembourg_norm_on(u, p, &Region::all(u.grid()), DEFAULT_BISECTION_TOL)
}

/// `inf{λ > 0 : ρ(u/λ) ≤ 1}` by geometric bisection on the decreasing map
/// `λ ↦ ρ(u/λ)`. Stops once `|ρ(u/λ) − 1| ≤ tol`.
pub fn luxembourg_norm_on(
    u: &GridFunction,
    p: &VarExponent,
    region: &Region,
    tol: f64,
) -> Result<f64> {
    check_pair(u, p)?;
    region.check_grid(u.grid())?;
    let sup = region.nodes().map(|n| u.norm_at(n)).fold(0.0, f64::max);
    if sup == 0.0 {
        return Ok(0.0);
    }
    let measure: f64 = region.nodes().map(|n| u.grid().weight(n)).sum();
    let mut lo = f64::EPSILON;
    let mut hi = sup * (1.0 + measure);
    let top = scaled_modular(u, p, region, hi);
    if !top.is_finite() || top > 1.0 {
        return Err(Error::Numeric(format!(
            "bisection bracket failure: rho(u/{hi}) = {top}"
        )));
    }
    let bottom = scaled_modular(u, p, region, lo);
    if bottom.is_finite() && bottom <= 1.0 {
        // norm below machine epsilon; shrink the bracket further
        lo = f64::MIN_POSITIVE;
    }
    for _ in 0..4000 {
        let mid = (lo * hi).sqrt();
        let rho = scaled_modular(u, p, region, mid);
        if (rho - 1.0).abs() <= tol {
            return Ok(mid);
        }
        if rho > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 4.0 * f64::EPSILON {
            return Ok(hi);
        }
    }
    Err(Error::Numeric("Luxembourg bisection did not terminate".into()))
}

/// Classical `(Σ w_n |u|^p)^{1/p}` for a constant exponent.
pub fn classical_lp_norm(u: &GridFunction, p: f64) -> f64 {
    let grid = u.grid();
    (0..grid.node_count())
        .map(|n| grid.weight(n) * u.norm_at(n).powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormModularReport {
    pub modular: f64,
    pub norm: f64,
    pub p_minus: f64,
    pub p_plus: f64,
    /// `ρ^{1/p±} ≤ ‖u‖ ≤ ρ^{1/p∓}` with the exponents picked by `‖u‖ > 1`.
    pub norm_bounds_hold: bool,
    /// Smallest of the two slacks of the norm bounds (negative on failure).
    pub norm_bounds_slack: f64,
    /// `min{λ^{p⁺},λ^{p⁻}}ρ(u) ≤ ρ(λu) ≤ max{λ^{p⁺},λ^{p⁻}}ρ(u)`.
    pub scaling_holds: bool,
    pub scaling_slack: f64,
    pub lambdas_checked: usize,
}

/// Relative tolerance for the norm/modular bounds; covers the bisection
/// tolerance on `ρ(u/‖u‖)` plus rounding.
const INEQ_RTOL: f64 = 1e-9;

pub fn check_norm_modular_inequalities(
    u: &GridFunction,
    p: &VarExponent,
    lambdas: &[f64],
) -> Result<NormModularReport> {
    let all = Region::all(u.grid());
    let rho = modular(u, p, &all)?;
    let norm = luxembourg_norm(u, p)?;
    let (pm, pp) = (p.p_minus(), p.p_plus());
    let (lower, upper) = if norm > 1.0 {
        (rho.powf(1.0 / pp), rho.powf(1.0 / pm))
    } else {
        (rho.powf(1.0 / pm), rho.powf(1.0 / pp))
    };
    let scale = norm.max(1e-300);
    let norm_bounds_slack = ((norm - lower) / scale).min((upper - norm) / scale);
    let norm_bounds_holds = norm_bounds_slack >= -INEQ_RTOL || rho == 0.0;

    let mut scaling_slack = f64::INFINITY;
    for &lam in lambdas {
        if !(lam > 0.0) {
            return Err(Error::Input(format!("scaling factor must be positive, got {lam}")));
        }
        let r = scaled_modular(u, p, &all, 1.0 / lam);
        let (a, b) = (lam.powf(pp), lam.powf(pm));
        let lo = a.min(b) * rho;
        let hi = a.max(b) * rho;
        let s = r.abs().max(1e-300);
        scaling_slack = scaling_slack.min((r - lo) / s).min((hi - r) / s);
    }
    if lambdas.is_empty() || rho == 0.0 {
        scaling_slack = 0.0;
    }
    Ok(NormModularReport {
        modular: rho,
        norm,
        p_minus: pm,
        p_plus: pp,
        norm_bounds_hold: norm_bounds_holds,
        norm_bounds_slack,
        scaling_holds: scaling_slack >= -1e-12,
        scaling_slack,
        lambdas_checked: lambdas.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogHolderReport {
    pub constant: f64,
    /// Grid spacing the estimate was taken at; divergence across
    /// refinements is the detection signal.
    pub h: f64,
    pub threshold: f64,
    pub flagged: bool,
}

/// `max |p(x) − p(y)|·(−log|x − y|)` over node pairs with `0 < |x−y| ≤ ½`.
/// The estimate is stored on `p`.
pub fn log_holder_estimate(p: &mut VarExponent, threshold: f64) -> Result<LogHolderReport> {
    let grid = p.grid().clone();
    if grid.h() >= 0.5 {
        return Err(Error::Precondition(format!(
            "grid spacing {} leaves no node pairs closer than 1/2",
            grid.h()
        )));
    }
    let n = grid.node_count();
    let mut best = 0.0f64;
    for a in 0..n {
        for b in (a + 1)..n {
            let r = grid.distance(a, b);
            if r <= 0.5 {
                best = best.max((p.at(a) - p.at(b)).abs() * (-r.ln()));
            }
        }
    }
    p.log_holder_c = Some(best);
    Ok(LogHolderReport {
        constant: best,
        h: grid.h(),
        threshold,
        flagged: best > threshold,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DieniReport {
    /// `L^d(B)^{p⁻_B − p⁺_B}` per ball, with `L^d(B) = #nodes · h^d`.
    pub values: Vec<f64>,
    pub c1_estimate: f64,
}

pub fn check_dieni_bound(p: &VarExponent, balls: &[Ball]) -> Result<DieniReport> {
    let grid = p.grid();
    let mut values = Vec::with_capacity(balls.len());
    for ball in balls {
        let region = Region::ball(grid, ball);
        let count = region.count();
        if count == 0 {
            return Err(Error::Domain(format!(
                "ball at {:?} with radius {} contains no nodes",
                ball.center, ball.radius
            )));
        }
        let vol = count as f64 * grid.volume_element();
        let (lo, hi) = p.extrema_on(&region);
        values.push(vol.powf(lo - hi));
    }
    let c1_estimate = values.iter().copied().fold(0.0, f64::max);
    Ok(DieniReport {
        values,
        c1_estimate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingReport {
    pub bound: f64,
    /// `‖u‖_{q(·)} / ‖u‖_{p(·)}` per test function (zero functions skipped).
    pub ratios: Vec<f64>,
    pub holds: bool,
}

/// Upper bound on the embedding constant of `L^{p(·)} ↪ L^{q(·)}` for
/// `q ≤ p`, plus an empirical check on `tests`.
pub fn embedding_constant_bound(
    p: &VarExponent,
    q: &VarExponent,
    tests: &[GridFunction],
) -> Result<EmbeddingReport> {
    if !p.grid().same_shape(q.grid()) {
        return Err(Error::Structural("exponents on different grids".into()));
    }
    if let Some(n) = (0..p.values().len()).find(|&n| q.at(n) > p.at(n)) {
        return Err(Error::Precondition(format!(
            "q > p at node {n}: {} > {}",
            q.at(n),
            p.at(n)
        )));
    }
    let measure = p.grid().measure();
    let diffs: Vec<f64> = (0..p.values().len())
        .map(|n| 1.0 / q.at(n) - 1.0 / p.at(n))
        .collect();
    let (dmin, dmax) = extrema(&diffs);
    let bound = (2.0 * (1.0 + measure)).min(2.0 * measure.powf(dmax).max(measure.powf(dmin)));
    let mut ratios = Vec::new();
    for u in tests {
        let np = luxembourg_norm(u, p)?;
        if np == 0.0 {
            continue;
        }
        ratios.push(luxembourg_norm(u, q)? / np);
    }
    let holds = ratios.iter().all(|&r| r <= bound * (1.0 + 1e-9));
    Ok(EmbeddingReport {
        bound,
        ratios,
        holds,
    })
}

/// `ε^{-d} Σ_{B_ε(x0)} h^d |u(y) − u(x0)|^{p(y)}` for each radius.
pub fn lebesgue_defect(
    u: &GridFunction,
    p: &VarExponent,
    x0: usize,
    radii: &[f64],
) -> Result<Vec<f64>> {
    check_pair(u, p)?;
    let grid = u.grid();
    if x0 >= grid.node_count() {
        return Err(Error::Input(format!("node {x0} outside the grid")));
    }
    let centre = grid.position(x0);
    let base = u.at(x0).to_vec();
    let vol = grid.volume_element();
    radii
        .iter()
        .map(|&r| {
            if !(r > 0.0) {
                return Err(Error::Input(format!("radius must be positive, got {r}")));
            }
            let region = Region::ball(grid, &Ball::new(&centre[..grid.dim()], r));
            let sum: f64 = region
                .nodes()
                .map(|n| {
                    let d = u
                        .at(n)
                        .iter()
                        .zip(&base)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    if d == 0.0 {
                        0.0
                    } else {
                        vol * d.powf(p.at(n))
                    }
                })
                .sum();
            Ok(sum / r.powi(grid.dim() as i32))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_level_exponent(grid: &Grid) -> VarExponent {
        ExponentField::Step {
            left: 2.0,
            right: 4.0,
            at: 0.5,
            axis: 0,
        }
        .sample(grid)
        .unwrap()
    }

    #[test]
    fn modular_of_constant_function() {
        let g = Grid::unit_interval(64).unwrap();
        let u = GridFunction::scalar(&g, |_| 2.0).unwrap();
        let p = VarExponent::constant(&g, 3.0).unwrap();
        let rho = modular(&u, &p, &Region::all(&g)).unwrap();
        assert!((rho - 8.0).abs() < 1e-12);
    }

    #[test]
    fn modular_of_zero_and_mixed_exponent() {
        let g = Grid::unit_interval(32).unwrap();
        let p = two_level_exponent(&g);
        let zero = GridFunction::scalar(&g, |_| 0.0).unwrap();
        assert_eq!(modular(&zero, &p, &Region::all(&g)).unwrap(), 0.0);
        let one = GridFunction::scalar(&g, |_| 1.0).unwrap();
        assert!((modular(&one, &p, &Region::all(&g)).unwrap() - 1.0).abs() < 1e-12);
        assert!((luxembourg_norm(&one, &p).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn modular_rejects_mismatched_grid() {
        let g = Grid::unit_interval(8).unwrap();
        let g2 = Grid::unit_interval(9).unwrap();
        let u = GridFunction::scalar(&g, |_| 1.0).unwrap();
        let p = VarExponent::constant(&g2, 2.0).unwrap();
        assert!(matches!(
            modular(&u, &p, &Region::all(&g)),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn exponent_must_exceed_one() {
        let g = Grid::unit_interval(4).unwrap();
        assert!(VarExponent::constant(&g, 1.0).is_err());
        assert!(VarExponent::new(g.clone(), vec![2.0, 2.0, f64::NAN, 2.0, 2.0]).is_err());
    }

    #[test]
    fn norm_of_constant_matches_classical() {
        let g = Grid::unit_interval(50).unwrap();
        let u = GridFunction::scalar(&g, |_| 2.0).unwrap();
        let p = VarExponent::constant(&g, 2.0).unwrap();
        assert!((luxembourg_norm(&u, &p).unwrap() - 2.0).abs() < 1e-9);
        let zero = GridFunction::scalar(&g, |_| 0.0).unwrap();
        assert_eq!(luxembourg_norm(&zero, &p).unwrap(), 0.0);
    }

    #[test]
    fn normalised_function_has_unit_norm() {
        let g = Grid::unit_interval(40).unwrap();
        let p = ExponentField::Affine {
            base: 1.5,
            slope: vec![1.0],
        }
        .sample(&g)
        .unwrap();
        let u = GridFunction::scalar(&g, |x| (3.0 * x[0]).sin() + 0.2).unwrap();
        let rho = modular(&u, &p, &Region::all(&g)).unwrap();
        // find c with ρ(c u) = 1 by bisection on c, then ‖c u‖ must be 1
        let (mut lo, mut hi) = (1e-6_f64, 1e6);
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            let r = modular(&u.scaled(mid), &p, &Region::all(&g)).unwrap();
            if r > 1.0 {
                hi = mid
            } else {
                lo = mid
            }
        }
        assert!(rho > 0.0);
        let n = luxembourg_norm(&u.scaled(lo), &p).unwrap();
        assert!((n - 1.0).abs() < 1e-9, "{n}");
    }

    #[test]
    fn norm_inequalities_equality_case() {
        let g = Grid::unit_interval(16).unwrap();
        let u = GridFunction::scalar(&g, |_| 2.0).unwrap();
        let p = VarExponent::constant(&g, 2.0).unwrap();
        let rep = check_norm_modular_inequalities(&u, &p, &[0.5, 2.0]).unwrap();
        assert!((rep.modular - 4.0).abs() < 1e-12);
        assert!(rep.norm_bounds_hold && rep.scaling_holds);
        assert!(rep.norm_bounds_slack.abs() < 1e-9);
        let zero = GridFunction::scalar(&g, |_| 0.0).unwrap();
        let rep = check_norm_modular_inequalities(&zero, &p, &[0.5]).unwrap();
        assert!(rep.norm_bounds_hold && rep.scaling_holds);
    }

    #[test]
    fn log_holder_constant_and_lipschitz() {
        let g = Grid::unit_interval(200).unwrap();
        let mut p = VarExponent::constant(&g, 2.5).unwrap();
        assert_eq!(log_holder_estimate(&mut p, 1.0).unwrap().constant, 0.0);
        assert_eq!(p.log_holder_c(), Some(0.0));

        let mut p = ExponentField::Affine {
            base: 2.0,
            slope: vec![0.5],
        }
        .sample(&g)
        .unwrap();
        let rep = log_holder_estimate(&mut p, 1.0).unwrap();
        let limit = 0.5 / std::f64::consts::E;
        assert!(rep.constant <= limit + 1e-12 && rep.constant > limit - 1e-3);
        assert!(!rep.flagged);
    }

    #[test]
    fn log_holder_detects_step_divergence() {
        let field = ExponentField::Step {
            left: 2.0,
            right: 3.0,
            at: 0.5 + 1e-9,
            axis: 0,
        };
        let mut estimates = Vec::new();
        for cells in [16usize, 64, 256] {
            let g = Grid::unit_interval(cells).unwrap();
            let mut p = field.sample(&g).unwrap();
            estimates.push(log_holder_estimate(&mut p, 3.0).unwrap());
        }
        // adjacent pair across the step: |Δp| = 1 at distance h
        for rep in &estimates {
            assert!((rep.constant - (-rep.h.ln())).abs() < 1e-12);
        }
        assert!(!estimates[0].flagged && estimates[2].flagged);
    }

    #[test]
    fn dieni_bound_bounded_for_lipschitz_and_divergent_for_step() {
        let g = Grid::unit_interval(4096).unwrap();
        let lip = ExponentField::Affine {
            base: 2.0,
            slope: vec![0.5],
        }
        .sample(&g)
        .unwrap();
        let balls: Vec<Ball> = (1..=8)
            .map(|k| Ball::new(&[0.5], 0.5f64.powi(k)))
            .collect();
        let rep = check_dieni_bound(&lip, &balls).unwrap();
        // (2r)^{-r}-type values stay below e^{1/e}
        assert!(rep.c1_estimate < 1.5, "{:?}", rep.values);

        let step = two_level_exponent(&g);
        let rep = check_dieni_bound(&step, &balls).unwrap();
        assert!(rep.values.windows(2).all(|w| w[1] > w[0]));
        assert!(rep.values[7] > 100.0);

        let flat = VarExponent::constant(&g, 3.0).unwrap();
        let rep = check_dieni_bound(&flat, &balls).unwrap();
        assert!(rep.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn embedding_bound_unit_measure() {
        let g = Grid::unit_interval(32).unwrap();
        let p = VarExponent::constant(&g, 3.0).unwrap();
        let q = VarExponent::constant(&g, 2.0).unwrap();
        let one = GridFunction::scalar(&g, |_| 1.0).unwrap();
        let rep = embedding_constant_bound(&p, &q, std::slice::from_ref(&one)).unwrap();
        assert!((rep.bound - 2.0).abs() < 1e-12);
        assert!((rep.ratios[0] - 1.0).abs() < 1e-8);
        assert!(rep.holds);

        let same = embedding_constant_bound(&p, &p, std::slice::from_ref(&one)).unwrap();
        assert!(same.bound >= 1.0 && (same.ratios[0] - 1.0).abs() < 1e-12);

        assert!(matches!(
            embedding_constant_bound(&q, &p, &[one]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn lebesgue_defect_profiles() {
        let g = Grid::unit_interval(4096).unwrap();
        let p = VarExponent::constant(&g, 2.0).unwrap();
        let mid = 2048;
        let radii = [0.1, 0.05, 0.025];

        let c = GridFunction::scalar(&g, |_| 3.0).unwrap();
        assert!(lebesgue_defect(&c, &p, mid, &radii)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));

        // ε^{-1}∫_{-ε}^{ε} t² dt = 2ε²/3
        let lin = GridFunction::scalar(&g, |x| x[0]).unwrap();
        let d = lebesgue_defect(&lin, &p, mid, &radii).unwrap();
        for (v, r) in d.iter().zip(radii) {
            assert!((v - 2.0 * r * r / 3.0).abs() < 1e-2 * r * r, "{v} {r}");
        }

        // half the ball sees a unit jump: defect → 1
        let step = GridFunction::scalar(&g, |x| if x[0] < 0.5 { 0.0 } else { 1.0 }).unwrap();
        let d = lebesgue_defect(&step, &p, mid, &radii).unwrap();
        assert!(d.iter().all(|&v| (v - 1.0).abs() < 0.01));
    }
}
