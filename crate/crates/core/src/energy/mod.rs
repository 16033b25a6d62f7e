//! Bulk and surface densities and the discrete free-discontinuity energy.
//!
//! Node `n` owns the edges leaving it in the positive axis directions. Its
//! bulk term is `h^d f(x_n^*, ξ_n)` where `ξ_n` collects the difference
//! quotients along those edges and `x_n^*` is shifted by `h/2` along every
//! axis that has an edge; cracked edges contribute their surface term
//! `h^{d−1} g(x_e, [u]_e, e_axis)` instead. A region counts exactly the
//! terms owned by its nodes, which makes the energy additive over disjoint
//! regions.

mod catalog;
mod validate;

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

pub use catalog::{
    capped_linear, const_surface, linear_surface, power, weighted_power, PeriodicCoefficient,
};
pub use validate::{validate_hypotheses, HypothesisCheck, HypothesisReport};

use crate::error::{Error, Result};
use crate::sbv::{Edge, EdgeId, SbvGridFunction};
use crate::varexp::{ExponentField, Grid, Region};

/// Largest supported `m·d` for gradient matrices.
pub const MAX_GRADIENT_ENTRIES: usize = 8;

pub type BulkFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;
pub type SurfaceFn = dyn Fn(&[f64], &[f64], &[f64]) -> f64 + Send + Sync;
pub type Modulus = dyn Fn(f64) -> f64 + Send + Sync;

/// An exponent field seen through the affine change of variables
/// `y ↦ shift + scale·y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentMap {
    field: ExponentField,
    shift: [f64; 2],
    scale: f64,
}

impl ExponentMap {
    pub fn identity(field: ExponentField) -> Self {
        Self {
            field,
            shift: [0.0; 2],
            scale: 1.0,
        }
    }

    pub fn field(&self) -> &ExponentField {
        &self.field
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        let mut x = self.shift;
        for (k, v) in y.iter().take(2).enumerate() {
            x[k] += self.scale * v;
        }
        self.field.eval(&x)
    }

    /// Composition with `y ↦ center + scale·y`.
    pub fn rescaled(&self, center: &[f64], scale: f64) -> Self {
        let mut shift = self.shift;
        for (k, c) in center.iter().take(2).enumerate() {
            shift[k] += self.scale * c;
        }
        Self {
            field: self.field.clone(),
            shift,
            scale: self.scale * scale,
        }
    }

    /// Global bounds `(p⁻, p⁺)` of the underlying field.
    pub fn bounds(&self) -> (f64, f64) {
        self.field.bounds()
    }
}

/// Bulk integrand `f(x, ξ)` with growth constants for
/// `α|ξ|^{p(x)} ≤ f(x, ξ) ≤ β(1 + |ξ|^{p(x)})`.
#[derive(Clone)]
pub struct BulkDensity {
    name: String,
    f: Arc<BulkFn>,
    alpha: f64,
    beta: f64,
    exponent: ExponentMap,
    omega: Option<Arc<Modulus>>,
}

impl fmt::Debug for BulkDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BulkDensity")
            .field("name", &self.name)
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("exponent", &self.exponent)
            .field("omega", &self.omega.is_some())
            .finish()
    }
}

fn check_constants(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= beta && beta.is_finite()) {
        return Err(Error::Input(format!(
            "growth constants need 0 < alpha <= beta < inf, got ({alpha}, {beta})"
        )));
    }
    Ok(())
}

impl BulkDensity {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
        alpha: f64,
        beta: f64,
        exponent: ExponentField,
    ) -> Result<Self> {
        Self::from_parts(name, Arc::new(f), alpha, beta, ExponentMap::identity(exponent))
    }

    pub fn from_parts(
        name: impl Into<String>,
        f: Arc<BulkFn>,
        alpha: f64,
        beta: f64,
        exponent: ExponentMap,
    ) -> Result<Self> {
        check_constants(alpha, beta)?;
        Ok(Self {
            name: name.into(),
            f,
            alpha,
            beta,
            exponent,
            omega: None,
        })
    }

    pub fn with_modulus(mut self, omega: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.omega = Some(Arc::new(omega));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn exponent(&self) -> &ExponentMap {
        &self.exponent
    }

    pub fn modulus(&self) -> Option<&Arc<Modulus>> {
        self.omega.as_ref()
    }

    pub fn func(&self) -> &Arc<BulkFn> {
        &self.f
    }

    #[inline]
    pub fn eval(&self, x: &[f64], xi: &[f64]) -> f64 {
        (self.f)(x, xi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthMode {
    /// `α ≤ g ≤ β`.
    Bounded,
    /// `α ≤ g ≤ β(1 + |ζ|)`.
    Linear,
}

/// Surface integrand `g(x, ζ, ν)`.
#[derive(Clone)]
pub struct SurfaceDensity {
    name: String,
    g: Arc<SurfaceFn>,
    alpha: f64,
    beta: f64,
    c: f64,
    mode: GrowthMode,
    omega: Option<Arc<Modulus>>,
}

impl fmt::Debug for SurfaceDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SurfaceDensity")
            .field("name", &self.name)
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("c", &self.c)
            .field("mode", &self.mode)
            .field("omega", &self.omega.is_some())
            .finish()
    }
}

impl SurfaceDensity {
    pub fn new(
        name: impl Into<String>,
        g: impl Fn(&[f64], &[f64], &[f64]) -> f64 + Send + Sync + 'static,
        alpha: f64,
        beta: f64,
        c: f64,
        mode: GrowthMode,
    ) -> Result<Self> {
        Self::from_parts(name, Arc::new(g), alpha, beta, c, mode)
    }

    pub fn from_parts(
        name: impl Into<String>,
        g: Arc<SurfaceFn>,
        alpha: f64,
        beta: f64,
        c: f64,
        mode: GrowthMode,
    ) -> Result<Self> {
        check_constants(alpha, beta)?;
        if !(c >= 1.0 && c.is_finite()) {
            return Err(Error::Input(format!("monotonicity constant c must be >= 1, got {c}")));
        }
        Ok(Self {
            name: name.into(),
            g,
            alpha,
            beta,
            c,
            mode,
            omega: None,
        })
    }

    pub fn with_modulus(mut self, omega: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.omega = Some(Arc::new(omega));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn mode(&self) -> GrowthMode {
        self.mode
    }

    pub fn modulus(&self) -> Option<&Arc<Modulus>> {
        self.omega.as_ref()
    }

    pub fn func(&self) -> &Arc<SurfaceFn> {
        &self.g
    }

    #[inline]
    pub fn eval(&self, x: &[f64], zeta: &[f64], nu: &[f64]) -> f64 {
        (self.g)(x, zeta, nu)
    }
}

/// `g^σ = g + σ|ζ|`, which has linear growth with constants `(α, β + σ)`.
pub fn perturb_surface(g: &SurfaceDensity, sigma: f64) -> Result<SurfaceDensity> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Precondition(format!(
            "perturbation requires sigma > 0, got {sigma}"
        )));
    }
    let inner = g.g.clone();
    let f = move |x: &[f64], z: &[f64], nu: &[f64]| inner(x, z, nu) + sigma * norm(z);
    let mut out = SurfaceDensity::new(
        format!("{}+{}|zeta|", g.name, sigma),
        f,
        g.alpha,
        g.beta + sigma,
        g.c,
        GrowthMode::Linear,
    )?;
    if let Some(w) = g.omega.clone() {
        let alpha = g.alpha;
        out = out.with_modulus(move |t| w(t) + sigma * t / (2.0 * alpha));
    }
    Ok(out)
}

#[inline]
pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Densities together with the grid they are evaluated on.
#[derive(Debug, Clone)]
pub struct EnergyContext {
    pub bulk: BulkDensity,
    pub surface: SurfaceDensity,
    pub grid: Grid,
    pub components: usize,
    /// Assert the two-sided bound `(H4)` on every evaluation.
    pub check_growth: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts {
    pub total: f64,
    pub bulk: f64,
    pub surface: f64,
}

impl EnergyContext {
    pub fn new(bulk: BulkDensity, surface: SurfaceDensity, grid: Grid) -> Self {
        Self {
            bulk,
            surface,
            grid,
            components: 1,
            check_growth: true,
        }
    }

    pub fn with_components(mut self, m: usize) -> Self {
        self.components = m;
        self
    }

    pub fn without_growth_check(mut self) -> Self {
        self.check_growth = false;
        self
    }

    fn check(&self, u: &SbvGridFunction) -> Result<()> {
        if !u.grid().same_shape(&self.grid) {
            return Err(Error::Structural("function and energy live on different grids".into()));
        }
        if u.components() != self.components {
            return Err(Error::Structural(format!(
                "energy expects {} components, function has {}",
                self.components,
                u.components()
            )));
        }
        if u.components() * self.grid.dim() > MAX_GRADIENT_ENTRIES {
            return Err(Error::Structural("too many gradient entries".into()));
        }
        Ok(())
    }

    /// Whether `e` counts as a discontinuity: cracked and actually jumping.
    #[inline]
    pub(crate) fn effective_crack(u: &SbvGridFunction, e: &Edge) -> bool {
        u.is_cracked(e.id) && u.at(e.head) != u.at(e.base)
    }

    /// Gradient matrix and evaluation point of the bulk term owned by `n`.
    /// `toggle` overrides the crack state of one edge. Returns `None` when
    /// the node owns no uncracked edge.
    fn node_gradient(
        &self,
        u: &SbvGridFunction,
        n: usize,
        toggle: Option<(EdgeId, bool)>,
        xi: &mut [f64; MAX_GRADIENT_ENTRIES],
    ) -> Option<[f64; 2]> {
        let grid = &self.grid;
        let d = grid.dim();
        let m = u.components();
        let h = grid.h();
        let mut x = grid.position(n);
        let mut any = false;
        xi[..m * d].fill(0.0);
        for k in 0..d {
            let Some(e) = grid.edge_from(n, k) else {
                continue;
            };
            x[k] += 0.5 * h;
            let cracked = match toggle {
                Some((id, state)) if id == e.id => state && u.at(e.head) != u.at(e.base),
                _ => Self::effective_crack(u, &e),
            };
            if cracked {
                continue;
            }
            any = true;
            let (a, b) = (u.at(e.base), u.at(e.head));
            for c in 0..m {
                xi[c * d + k] = (b[c] - a[c]) / h;
            }
        }
        any.then_some(x)
    }

    fn bulk_term(
        &self,
        u: &SbvGridFunction,
        n: usize,
        toggle: Option<(EdgeId, bool)>,
    ) -> Result<f64> {
        let mut xi = [0.0; MAX_GRADIENT_ENTRIES];
        let len = u.components() * self.grid.dim();
        match self.node_gradient(u, n, toggle, &mut xi) {
            None => Ok(0.0),
            Some(x) => {
                let v = self.bulk.eval(&x[..self.grid.dim()], &xi[..len]);
                if !v.is_finite() {
                    return Err(Error::Density(format!(
                        "bulk density {} gave {v} at x = {:?}, xi = {:?}",
                        self.bulk.name,
                        &x[..self.grid.dim()],
                        &xi[..len]
                    )));
                }
                Ok(self.grid.volume_element() * v)
            }
        }
    }

    fn surface_term(&self, u: &SbvGridFunction, e: &Edge) -> Result<f64> {
        let d = self.grid.dim();
        let m = u.components();
        let mut zeta = [0.0; 4];
        let (a, b) = (u.at(e.base), u.at(e.head));
        for c in 0..m {
            zeta[c] = b[c] - a[c];
        }
        let mut nu = [0.0; 2];
        nu[e.axis] = 1.0;
        let x = self.grid.edge_midpoint(e);
        let v = self.surface.eval(&x[..d], &zeta[..m], &nu[..d]);
        if !v.is_finite() {
            return Err(Error::Density(format!(
                "surface density {} gave {v} at x = {:?}, zeta = {:?}",
                self.surface.name,
                &x[..d],
                &zeta[..m]
            )));
        }
        Ok(self.grid.face_element() * v)
    }

    /// Bulk plus surface terms owned by node `n`.
    fn node_parts(&self, u: &SbvGridFunction, n: usize) -> Result<(f64, f64)> {
        let bulk = self.bulk_term(u, n, None)?;
        let mut surface = 0.0;
        for k in 0..self.grid.dim() {
            if let Some(e) = self.grid.edge_from(n, k) {
                if Self::effective_crack(u, &e) {
                    surface += self.surface_term(u, &e)?;
                }
            }
        }
        Ok((bulk, surface))
    }

    /// Energy of the terms that depend on the value at `n`: the terms owned
    /// by `n` and by its backward neighbours, restricted to owners in
    /// `region`.
    pub(crate) fn local_energy(
        &self,
        u: &SbvGridFunction,
        n: usize,
        region: &Region,
    ) -> Result<f64> {
        let mut total = 0.0;
        if region.contains(n) {
            let (b, s) = self.node_parts(u, n)?;
            total += b + s;
        }
        for k in 0..self.grid.dim() {
            if let Some(prev) = self.grid.neighbor(n, k, false) {
                if !region.contains(prev) {
                    continue;
                }
                total += self.bulk_term(u, prev, None)?;
                let e = self.grid.edge_from(prev, k).expect("edge to existing neighbour");
                if Self::effective_crack(u, &e) {
                    total += self.surface_term(u, &e)?;
                }
            }
        }
        Ok(total)
    }

    /// Sum of the terms owned by `owners`.
    pub(crate) fn owner_energy(&self, u: &SbvGridFunction, owners: &[usize]) -> Result<f64> {
        let mut total = 0.0;
        for &n in owners {
            let (b, s) = self.node_parts(u, n)?;
            total += b + s;
        }
        Ok(total)
    }

    /// Energy change from cracking `e` (negative means cracking helps).
    pub(crate) fn crack_delta(&self, u: &SbvGridFunction, e: &Edge) -> Result<f64> {
        if u.at(e.head) == u.at(e.base) {
            return Ok(0.0);
        }
        let open = self.bulk_term(u, e.base, Some((e.id, false)))?;
        let shut = self.bulk_term(u, e.base, Some((e.id, true)))?;
        Ok(shut + self.surface_term(u, e)? - open)
    }

    /// `(Σ h^d |ξ|^{p}, Σ h^d)` over the bulk terms owned by `region`, for
    /// the growth check.
    fn power_integral(&self, u: &SbvGridFunction, region: &Region) -> (f64, f64) {
        let d = self.grid.dim();
        let len = u.components() * d;
        let mut xi = [0.0; MAX_GRADIENT_ENTRIES];
        let mut power = 0.0;
        let mut volume = 0.0;
        for n in region.nodes() {
            if let Some(x) = self.node_gradient(u, n, None, &mut xi) {
                let p = self.bulk.exponent.eval(&x[..d]);
                power += norm(&xi[..len]).powf(p);
                volume += 1.0;
            }
        }
        let w = self.grid.volume_element();
        (w * power, w * volume)
    }
}

const PARALLEL_THRESHOLD: usize = 16_384;

/// `F(u, A)` split into bulk and surface parts.
pub fn eval_energy(
    ctx: &EnergyContext,
    u: &SbvGridFunction,
    region: &Region,
) -> Result<EnergyParts> {
    ctx.check(u)?;
    region.check_grid(u.grid())?;
    let nodes: Vec<usize> = region.nodes().collect();
    let parts: Vec<(f64, f64)> = if nodes.len() >= PARALLEL_THRESHOLD {
        nodes
            .par_iter()
            .map(|&n| ctx.node_parts(u, n))
            .collect::<Result<_>>()?
    } else {
        nodes
            .iter()
            .map(|&n| ctx.node_parts(u, n))
            .collect::<Result<_>>()?
    };
    let (mut bulk, mut surface) = (0.0, 0.0);
    for (b, s) in parts {
        bulk += b;
        surface += s;
    }
    let out = EnergyParts {
        total: bulk + surface,
        bulk,
        surface,
    };
    if ctx.check_growth {
        check_growth(ctx, u, region, &out)?;
    }
    Ok(out)
}

fn check_growth(
    ctx: &EnergyContext,
    u: &SbvGridFunction,
    region: &Region,
    e: &EnergyParts,
) -> Result<()> {
    let (power, volume) = ctx.power_integral(u, region);
    let face = ctx.grid.face_element();
    let mut jump_measure = 0.0;
    let mut jump_mass = 0.0;
    for n in region.nodes() {
        for k in 0..ctx.grid.dim() {
            if let Some(edge) = ctx.grid.edge_from(n, k) {
                if EnergyContext::effective_crack(u, &edge) {
                    jump_measure += face;
                    jump_mass += face * norm(&u.jump(&edge));
                }
            }
        }
    }
    let lower = ctx.bulk.alpha.min(ctx.surface.alpha) * (power + jump_measure);
    let upper = match ctx.surface.mode {
        GrowthMode::Bounded => ctx.bulk.beta.max(ctx.surface.beta) * (volume + power + jump_measure),
        GrowthMode::Linear => {
            ctx.bulk.beta * (volume + power)
                + ctx.surface.beta * (jump_measure + jump_mass)
        }
    };
    let slack = 1e-12 * (1.0 + e.total.abs());
    if e.total < lower - slack || e.total > upper + slack {
        return Err(Error::Growth(format!(
            "energy {} outside [{lower}, {upper}]",
            e.total
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::varexp::GridFunction;

    fn quadratic_ctx(grid: &Grid) -> EnergyContext {
        EnergyContext::new(
            power(ExponentField::constant(2.0)).unwrap(),
            const_surface(1.0).unwrap(),
            grid.clone(),
        )
    }

    #[test]
    fn constant_function_has_no_energy() {
        let g = Grid::cube(2, 9, 0.0, 1.0).unwrap();
        let u = SbvGridFunction::uncracked(GridFunction::scalar(&g, |_| 3.0).unwrap());
        let e = eval_energy(&quadratic_ctx(&g), &u, &Region::all(&g)).unwrap();
        assert_eq!(e.total, 0.0);
    }

    #[test]
    fn linear_function_in_one_dimension() {
        let g = Grid::unit_interval(40).unwrap();
        let u = SbvGridFunction::uncracked(GridFunction::scalar(&g, |x| x[0]).unwrap());
        let e = eval_energy(&quadratic_ctx(&g), &u, &Region::all(&g)).unwrap();
        assert!((e.total - 1.0).abs() < 1e-12, "{}", e.total);
    }

    #[test]
    fn unit_step_costs_one() {
        let g = Grid::unit_interval(10).unwrap();
        let u = GridFunction::scalar(&g, |x| if x[0] > 0.5 { 1.0 } else { 0.0 }).unwrap();
        let u = SbvGridFunction::new(u, &[g.edge_from(5, 0).unwrap().id]).unwrap();
        let e = eval_energy(&quadratic_ctx(&g), &u, &Region::all(&g)).unwrap();
        assert_eq!(e.surface, 1.0);
        assert_eq!(e.bulk, 0.0);
    }

    #[test]
    fn zero_jump_crack_is_ignored() {
        let g = Grid::unit_interval(10).unwrap();
        let u = GridFunction::scalar(&g, |_| 1.0).unwrap();
        let u = SbvGridFunction::new(u, &[g.edge_from(3, 0).unwrap().id]).unwrap();
        let e = eval_energy(&quadratic_ctx(&g), &u, &Region::all(&g)).unwrap();
        assert_eq!(e.total, 0.0);
    }

    #[test]
    fn two_dimensional_affine_gradient() {
        let g = Grid::cube(2, 11, 0.0, 1.0).unwrap();
        let u = SbvGridFunction::uncracked(
            GridFunction::scalar(&g, |x| 2.0 * x[0] - x[1]).unwrap(),
        );
        let ctx = quadratic_ctx(&g);
        let e = eval_energy(&ctx, &u, &Region::all(&g)).unwrap();
        // interior terms see |(2,−1)|² = 5; the last row/column see one
        // direction only, the top-right corner owns nothing
        let inner = 10.0 * 10.0 * 5.0;
        let right = 10.0 * 1.0;
        let top = 10.0 * 4.0;
        assert!((e.total - (inner + right + top) * 0.01).abs() < 1e-10);
    }

    #[test]
    fn energy_is_additive() {
        let g = Grid::cube(2, 8, 0.0, 1.0).unwrap();
        let u = GridFunction::scalar(&g, |x| (3.0 * x[0]).sin() + x[1] * x[1]).unwrap();
        let mut u = SbvGridFunction::uncracked(u);
        for e in g.edges().step_by(7) {
            u.set_crack(e.id, true);
        }
        let ctx = quadratic_ctx(&g);
        let a = Region::from_fn(&g, |_, x| x[0] < 0.4);
        let b = Region::all(&g).difference(&a);
        let whole = eval_energy(&ctx, &u, &Region::all(&g)).unwrap().total;
        let split = eval_energy(&ctx, &u, &a).unwrap().total + eval_energy(&ctx, &u, &b).unwrap().total;
        assert!((whole - split).abs() < 1e-12);
    }

    #[test]
    fn nan_density_is_reported() {
        let g = Grid::unit_interval(4).unwrap();
        let f = BulkDensity::new("nan", |_, _| f64::NAN, 1.0, 1.0, ExponentField::constant(2.0))
            .unwrap();
        let ctx = EnergyContext::new(f, const_surface(1.0).unwrap(), g.clone());
        let u = SbvGridFunction::uncracked(GridFunction::scalar(&g, |x| x[0]).unwrap());
        assert!(matches!(
            eval_energy(&ctx, &u, &Region::all(&g)),
            Err(Error::Density(_))
        ));
    }

    #[test]
    fn growth_violation_is_reported() {
        let g = Grid::unit_interval(4).unwrap();
        let f = BulkDensity::new(
            "half",
            |_, xi: &[f64]| 0.5 * norm(xi).powi(2),
            1.0,
            1.0,
            ExponentField::constant(2.0),
        )
        .unwrap();
        let ctx = EnergyContext::new(f, const_surface(1.0).unwrap(), g.clone());
        let u = SbvGridFunction::uncracked(GridFunction::scalar(&g, |x| x[0]).unwrap());
        assert!(matches!(
            eval_energy(&ctx, &u, &Region::all(&g)),
            Err(Error::Growth(_))
        ));
    }

    #[test]
    fn crack_delta_matches_energy_difference() {
        let g = Grid::cube(2, 6, 0.0, 1.0).unwrap();
        let u = GridFunction::scalar(&g, |x| 4.0 * x[0] * x[1]).unwrap();
        let u = SbvGridFunction::uncracked(u);
        let ctx = quadratic_ctx(&g);
        let all = Region::all(&g);
        let e = g.edge_from(14, 1).unwrap();
        let before = eval_energy(&ctx, &u, &all).unwrap().total;
        let mut v = u.clone();
        v.set_crack(e.id, true);
        let after = eval_energy(&ctx, &v, &all).unwrap().total;
        let delta = ctx.crack_delta(&u, &e).unwrap();
        assert!((after - before - delta).abs() < 1e-12);
    }

    #[test]
    fn local_energy_captures_node_dependence() {
        let g = Grid::cube(2, 6, 0.0, 1.0).unwrap();
        let u = GridFunction::scalar(&g, |x| x[0] - x[1] * x[1]).unwrap();
        let mut u = SbvGridFunction::uncracked(u);
        u.set_crack(g.edge_from(13, 0).unwrap().id, true);
        let ctx = quadratic_ctx(&g);
        let all = Region::all(&g);
        let n = 14;
        let mut v = u.clone();
        v.values_mut()[n] += 0.3;
        let full = eval_energy(&ctx, &v, &all).unwrap().total - eval_energy(&ctx, &u, &all).unwrap().total;
        let local = ctx.local_energy(&v, n, &all).unwrap() - ctx.local_energy(&u, n, &all).unwrap();
        assert!((full - local).abs() < 1e-12);
    }

    #[test]
    fn perturbation_adds_linear_term() {
        let g = const_surface(1.0).unwrap();
        assert!(perturb_surface(&g, 0.0).is_err());
        let gs = perturb_surface(&g, 0.5).unwrap();
        assert_eq!(gs.eval(&[0.0], &[2.0, 0.0], &[1.0]), 2.0);
        assert_eq!(gs.mode(), GrowthMode::Linear);
        assert_eq!(gs.beta(), 1.5);
    }
}
