//! Blow-up estimates of limit densities.
//!
//! A ladder of radii `ε` and sequence indices `j` is solved cell by cell;
//! the iterated `limsup` (j inner, ε outer) is approximated by the maximum
//! over a tail window at each level, and the spread over the outer window
//! is reported as the convergence diagnostic.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{solve_cell, BoundaryDatum, CellProblem, CompetitorClass, SolverParams};
use crate::energy::{
    perturb_surface, weighted_power, BulkDensity, PeriodicCoefficient, SurfaceDensity,
};
use crate::error::{Error, Result};
use crate::varexp::ExponentField;

type BulkGen = dyn Fn(u32) -> Result<BulkDensity> + Send + Sync;
type SurfaceGen = dyn Fn(u32) -> Result<SurfaceDensity> + Send + Sync;

/// A sequence `(f_j, g_j)` of densities.
#[derive(Clone)]
pub struct DensitySequence {
    name: String,
    bulk: Arc<BulkGen>,
    surface: Arc<SurfaceGen>,
    j_dependent: bool,
}

impl fmt::Debug for DensitySequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensitySequence")
            .field("name", &self.name)
            .field("j_dependent", &self.j_dependent)
            .finish()
    }
}

impl DensitySequence {
    pub fn new(
        name: impl Into<String>,
        bulk: impl Fn(u32) -> Result<BulkDensity> + Send + Sync + 'static,
        surface: impl Fn(u32) -> Result<SurfaceDensity> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            bulk: Arc::new(bulk),
            surface: Arc::new(surface),
            j_dependent: true,
        }
    }

    /// `f_j = f`, `g_j = g` for every `j`.
    pub fn constant(bulk: BulkDensity, surface: SurfaceDensity) -> Self {
        let name = format!("{}+{}", bulk.name(), surface.name());
        Self {
            name,
            bulk: Arc::new(move |_| Ok(bulk.clone())),
            surface: Arc::new(move |_| Ok(surface.clone())),
            j_dependent: false,
        }
    }

    /// `f_j(x, ξ) = a(j x_1)|ξ|^{p(x)}` with a fixed surface density.
    pub fn homogenization(
        a: PeriodicCoefficient,
        exponent: ExponentField,
        surface: SurfaceDensity,
    ) -> Result<Self> {
        a.validate()?;
        Ok(Self {
            name: "homogenization".into(),
            bulk: Arc::new(move |j| weighted_power(a.with_frequency(j as f64), exponent.clone())),
            surface: Arc::new(move |_| Ok(surface.clone())),
            j_dependent: true,
        })
    }

    /// Applies `op` to every surface density of the sequence.
    pub fn map_surface(
        &self,
        op: impl Fn(&SurfaceDensity) -> Result<SurfaceDensity> + Send + Sync + 'static,
    ) -> Self {
        let inner = self.surface.clone();
        Self {
            name: self.name.clone(),
            bulk: self.bulk.clone(),
            surface: Arc::new(move |j| op(&inner(j)?)),
            j_dependent: self.j_dependent,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bulk(&self, j: u32) -> Result<BulkDensity> {
        (self.bulk)(j)
    }

    pub fn surface(&self, j: u32) -> Result<SurfaceDensity> {
        (self.surface)(j)
    }

    pub fn is_j_dependent(&self) -> bool {
        self.j_dependent
    }
}

fn default_epsilons() -> Vec<f64> {
    (2..=6).map(|k| 2f64.powi(-k)).collect()
}

fn default_js() -> Vec<u32> {
    vec![1, 2, 4, 8, 16]
}

fn default_tail() -> usize {
    3
}

fn default_spread_warning() -> f64 {
    0.05
}

/// Radii, sequence indices and discretisation of a density estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ladder {
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_js")]
    pub js: Vec<u32>,
    #[serde(default = "default_tail")]
    pub j_tail: usize,
    #[serde(default = "default_tail")]
    pub eps_tail: usize,
    #[serde(default)]
    pub solver: SolverParams,
    /// Also solve the smallest radius on a grid with twice the nodes.
    #[serde(default)]
    pub refine_h: bool,
    /// Relative tail spread above which the estimate is flagged.
    #[serde(default = "default_spread_warning")]
    pub spread_warning: f64,
}

impl Default for Ladder {
    fn default() -> Self {
        Self {
            epsilons: default_epsilons(),
            js: default_js(),
            j_tail: default_tail(),
            eps_tail: default_tail(),
            solver: SolverParams::default(),
            refine_h: false,
            spread_warning: default_spread_warning(),
        }
    }
}

impl Ladder {
    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() || self.js.is_empty() {
            return Err(Error::Input("ladders must be nonempty".into()));
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::Input("radii must be positive".into()));
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Input("radii must be strictly decreasing".into()));
        }
        if self.js.contains(&0) {
            return Err(Error::Input("sequence indices start at 1".into()));
        }
        if self.j_tail == 0 || self.eps_tail == 0 {
            return Err(Error::Input("tail windows must be nonempty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderPoint {
    pub eps: f64,
    pub j: u32,
    pub nodes: usize,
    pub h: f64,
    pub class: CompetitorClass,
    pub raw_m: f64,
    pub normalized: f64,
    pub iterations: usize,
    pub multistart_spread: f64,
    /// Normalized warm-start class minima (class sbv only).
    pub sobolev_normalized: Option<f64>,
    pub pc_normalized: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub datum: BoundaryDatum,
    pub class: CompetitorClass,
    pub epsilons: Vec<f64>,
    /// Max over the `j` tail at each radius.
    pub per_epsilon: Vec<f64>,
    pub limit: f64,
    pub tail_spread: f64,
    pub h_ladder: Vec<usize>,
    pub points: Vec<LadderPoint>,
    /// Normalized value at the smallest radius on the refined grid.
    pub refined: Option<f64>,
    /// Tail spread exceeded the configured threshold.
    pub warning: bool,
}

fn problem(
    seq: &DensitySequence,
    x0: &[f64],
    datum: &BoundaryDatum,
    class: CompetitorClass,
    eps: f64,
    j: u32,
    solver: &SolverParams,
) -> Result<CellProblem> {
    Ok(CellProblem {
        bulk: seq.bulk(j)?,
        surface: seq.surface(j)?,
        dim: x0.len(),
        datum: datum.clone(),
        center: x0.to_vec(),
        radius: eps,
        class,
        params: solver.clone(),
    })
}

fn solve_point(
    seq: &DensitySequence,
    x0: &[f64],
    datum: &BoundaryDatum,
    class: CompetitorClass,
    eps: f64,
    j: u32,
    solver: &SolverParams,
) -> Result<LadderPoint> {
    let p = problem(seq, x0, datum, class, eps, j, solver)?;
    let s = solve_cell(&p)?;
    // same division as `normalized`, so equal energies compare equal
    let scale = |e: f64| e / s.normalizer;
    Ok(LadderPoint {
        eps,
        j,
        nodes: solver.nodes,
        h: s.h,
        class,
        raw_m: s.value,
        normalized: s.normalized,
        iterations: s.iterations,
        multistart_spread: s.multistart_spread / s.normalizer,
        sobolev_normalized: s.sobolev_energy.map(scale),
        pc_normalized: s.pc_energy.map(scale),
    })
}

fn run_ladder(
    seq: &DensitySequence,
    x0: &[f64],
    datum: BoundaryDatum,
    class: CompetitorClass,
    ladder: &Ladder,
) -> Result<DensityEstimate> {
    ladder.validate()?;
    let js: Vec<u32> = if seq.is_j_dependent() {
        ladder.js.clone()
    } else {
        vec![*ladder.js.last().expect("validated")]
    };
    let tasks: Vec<(f64, u32)> = ladder
        .epsilons
        .iter()
        .flat_map(|&e| js.iter().map(move |&j| (e, j)))
        .collect();
    let points: Vec<LadderPoint> = tasks
        .par_iter()
        .map(|&(eps, j)| solve_point(seq, x0, &datum, class, eps, j, &ladder.solver))
        .collect::<Result<_>>()?;

    let j_tail = &js[js.len().saturating_sub(ladder.j_tail)..];
    let per_epsilon: Vec<f64> = ladder
        .epsilons
        .iter()
        .map(|&e| {
            points
                .iter()
                .filter(|p| p.eps == e && j_tail.contains(&p.j))
                .map(|p| p.normalized)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let window = &per_epsilon[per_epsilon.len().saturating_sub(ladder.eps_tail)..];
    let limit = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let low = window.iter().copied().fold(f64::INFINITY, f64::min);
    let tail_spread = limit - low;

    let mut h_ladder = vec![ladder.solver.nodes];
    let refined = if ladder.refine_h {
        let mut fine = ladder.solver.clone();
        fine.nodes *= 2;
        h_ladder.push(fine.nodes);
        let eps = *ladder.epsilons.last().expect("validated");
        let j = *js.last().expect("nonempty");
        Some(solve_point(seq, x0, &datum, class, eps, j, &fine)?.normalized)
    } else {
        None
    };

    Ok(DensityEstimate {
        datum,
        class,
        epsilons: ladder.epsilons.clone(),
        per_epsilon,
        limit,
        tail_spread,
        h_ladder,
        points,
        refined,
        warning: tail_spread > ladder.spread_warning * limit.abs().max(1.0),
    })
}

/// Bulk density at `x₀` for the gradient `ξ` (an `m × d` matrix, row-major).
pub fn estimate_bulk_density(
    seq: &DensitySequence,
    x0: &[f64],
    xi: &[f64],
    class: CompetitorClass,
    ladder: &Ladder,
) -> Result<DensityEstimate> {
    if class == CompetitorClass::Pc {
        return Err(Error::Precondition("bulk densities use sbv or sobolev competitors".into()));
    }
    let d = x0.len();
    if d == 0 || !xi.len().is_multiple_of(d) {
        return Err(Error::Input("xi must be an m x d matrix".into()));
    }
    let datum = BoundaryDatum::Affine {
        u0: vec![0.0; xi.len() / d],
        xi: xi.to_vec(),
    };
    run_ladder(seq, x0, datum, class, ladder)
}

/// Surface density at `x₀` for the jump `ζ` across the axis normal `ν`.
pub fn estimate_surface_density(
    seq: &DensitySequence,
    x0: &[f64],
    zeta: &[f64],
    nu: &[f64],
    class: CompetitorClass,
    ladder: &Ladder,
) -> Result<DensityEstimate> {
    if class == CompetitorClass::Sobolev {
        return Err(Error::Precondition("surface densities use sbv or pc competitors".into()));
    }
    if zeta.iter().all(|z| *z == 0.0) {
        return Err(Error::Precondition("surface densities need zeta != 0".into()));
    }
    let datum = BoundaryDatum::Jump {
        a: zeta.to_vec(),
        b: vec![0.0; zeta.len()],
        nu: nu.to_vec(),
    };
    run_ladder(seq, x0, datum, class, ladder)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationReport {
    pub bulk_sbv: DensityEstimate,
    pub bulk_sobolev: DensityEstimate,
    pub surface_sbv: DensityEstimate,
    pub surface_pc: DensityEstimate,
    pub bulk_gap: f64,
    pub surface_gap: f64,
    /// `gap / |reference|` with the Sobolev or pc estimate as reference.
    pub bulk_gap_rel: f64,
    pub surface_gap_rel: f64,
    pub tolerance: f64,
    pub bulk_pass: bool,
    pub surface_pass: bool,
}

impl SeparationReport {
    pub fn passed(&self) -> bool {
        self.bulk_pass && self.surface_pass
    }
}

fn relative(gap: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        gap / reference.abs()
    }
}

/// Compares `f_∞` with `f_sob` and `g_∞` with `g_pc`. A gap passes when it
/// is within `tolerance` relative to the reference plus the larger
/// relative tail spread of the two ladders.
pub fn separation_check(
    seq: &DensitySequence,
    x0: &[f64],
    xi: &[f64],
    zeta: &[f64],
    nu: &[f64],
    ladder: &Ladder,
    tolerance: f64,
) -> Result<SeparationReport> {
    let bulk_sbv = estimate_bulk_density(seq, x0, xi, CompetitorClass::Sbv, ladder)?;
    let bulk_sobolev = estimate_bulk_density(seq, x0, xi, CompetitorClass::Sobolev, ladder)?;
    let surface_sbv = estimate_surface_density(seq, x0, zeta, nu, CompetitorClass::Sbv, ladder)?;
    let surface_pc = estimate_surface_density(seq, x0, zeta, nu, CompetitorClass::Pc, ladder)?;
    let bulk_gap = (bulk_sbv.limit - bulk_sobolev.limit).abs();
    let surface_gap = (surface_sbv.limit - surface_pc.limit).abs();
    let bulk_gap_rel = relative(bulk_gap, bulk_sobolev.limit);
    let surface_gap_rel = relative(surface_gap, surface_pc.limit);
    let spread = |a: &DensityEstimate, b: &DensityEstimate| {
        relative(a.tail_spread, a.limit).max(relative(b.tail_spread, b.limit))
    };
    let bulk_pass = bulk_gap_rel <= tolerance + spread(&bulk_sbv, &bulk_sobolev);
    let surface_pass = surface_gap_rel <= tolerance + spread(&surface_sbv, &surface_pc);
    Ok(SeparationReport {
        bulk_sbv,
        bulk_sobolev,
        surface_sbv,
        surface_pc,
        bulk_gap,
        surface_gap,
        bulk_gap_rel,
        surface_gap_rel,
        tolerance,
        bulk_pass,
        surface_pass,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationReport {
    pub sigmas: Vec<f64>,
    pub estimates: Vec<DensityEstimate>,
    pub values: Vec<f64>,
    pub unperturbed: DensityEstimate,
    /// Intercept of the least-squares line through `(σ, value)`.
    pub extrapolated: f64,
    /// Values do not increase as `σ` decreases (within tolerance).
    pub monotone: bool,
    /// Every value stays above the unperturbed estimate minus tolerance.
    pub bounded_below: bool,
    pub tolerance: f64,
}

/// Surface estimates for `g_j + σ|ζ|` along decreasing `σ`.
#[allow(clippy::too_many_arguments)]
pub fn perturbation_ladder(
    seq: &DensitySequence,
    x0: &[f64],
    zeta: &[f64],
    nu: &[f64],
    sigmas: &[f64],
    class: CompetitorClass,
    ladder: &Ladder,
    tolerance: f64,
) -> Result<PerturbationReport> {
    if sigmas.is_empty() {
        return Err(Error::Precondition("perturbation ladder needs at least one sigma".into()));
    }
    if sigmas.iter().any(|s| !(*s > 0.0)) || sigmas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Precondition("sigmas must be positive and strictly decreasing".into()));
    }
    let mut estimates = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let perturbed = seq.map_surface(move |g| perturb_surface(g, sigma));
        estimates.push(estimate_surface_density(&perturbed, x0, zeta, nu, class, ladder)?);
    }
    let unperturbed = estimate_surface_density(seq, x0, zeta, nu, class, ladder)?;
    let values: Vec<f64> = estimates.iter().map(|e| e.limit).collect();
    let monotone = values
        .windows(2)
        .all(|w| w[1] <= w[0] + tolerance * w[0].abs().max(1.0));
    let bounded_below = values
        .iter()
        .all(|v| *v >= unperturbed.limit - tolerance * unperturbed.limit.abs().max(1.0));
    Ok(PerturbationReport {
        sigmas: sigmas.to_vec(),
        extrapolated: intercept(sigmas, &values),
        estimates,
        values,
        unperturbed,
        monotone,
        bounded_below,
        tolerance,
    })
}

fn intercept(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() == 1 {
        return y[0];
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    my - sxy / sxx * mx
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogenizationOracle {
    pub a_hom: f64,
    /// `a_hom |ξ|^p`.
    pub value: f64,
    /// Energy of the exact minimizer of `∫₀¹ a(jx)|u′|^p` with `u(0) = 0`,
    /// `u(1) = ξ`, from flux constancy.
    pub flux_value: f64,
    pub periods: u32,
}

/// `a_hom = (mean a^{−1/(p−1)})^{−(p−1)}` for equal pieces of one period,
/// cross-checked by the exact one-dimensional Dirichlet solve.
pub fn homogenize_oracle_1d(a: &[f64], p: f64, xi: f64) -> Result<HomogenizationOracle> {
    if a.is_empty() {
        return Err(Error::Input("coefficient needs samples".into()));
    }
    if let Some(v) = a.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::Input(format!("coefficient samples must be positive, got {v}")));
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Input(format!("exponent must exceed 1, got {p}")));
    }
    let q = 1.0 / (p - 1.0);
    let mean = a.iter().map(|v| v.powf(-q)).sum::<f64>() / a.len() as f64;
    let a_hom = mean.powf(-(p - 1.0));

    // a_k p |s_k|^{p−2} s_k = λ on every piece, Σ |piece| s_k = ξ
    let periods = 7u32;
    let pieces: Vec<f64> = (0..periods).flat_map(|_| a.iter().copied()).collect();
    let len = 1.0 / pieces.len() as f64;
    let slope = |lambda: f64, ak: f64| lambda.signum() * (lambda.abs() / (p * ak)).powf(q);
    let total = |lambda: f64| pieces.iter().map(|&ak| len * slope(lambda, ak)).sum::<f64>();
    let mut hi = 1.0;
    while total(hi) < xi.abs() {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < xi.abs() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let flux_value = pieces
        .iter()
        .map(|&ak| len * ak * slope(lambda, ak).abs().powf(p))
        .sum();
    Ok(HomogenizationOracle {
        a_hom,
        value: a_hom * xi.abs().powf(p),
        flux_value,
        periods,
    })
}
