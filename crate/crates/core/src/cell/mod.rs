//! Dirichlet cell problems on small balls.
//!
//! Problems are posed in blow-up coordinates `y = (x − x₀)/ε` on a fixed
//! grid over `[−1, 1]^d`, so the resolution per ball does not depend on
//! `ε`. The ball is the node set `{|y| < 1}`; its outer layers form the
//! pinned ring, and every node outside the ring's interior keeps the datum.

mod alternate;
mod mincut;
mod relax;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energy::{
    eval_energy, BulkDensity, EnergyContext, EnergyParts, SurfaceDensity,
};
use crate::error::{Error, Result};
use crate::sbv::SbvGridFunction;
use crate::varexp::{Ball, Grid, GridFunction, Region};

use relax::{sor_factor, Relaxation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryDatum {
    /// `u₀ + ξ(x − x₀)`, with `ξ` stored row-major as an `m × d` matrix.
    Affine { u0: Vec<f64>, xi: Vec<f64> },
    /// `a` where `(x − x₀)·ν > 0`, `b` elsewhere.
    Jump { a: Vec<f64>, b: Vec<f64>, nu: Vec<f64> },
}

impl BoundaryDatum {
    pub fn affine_scalar(xi: &[f64]) -> Self {
        Self::Affine {
            u0: vec![0.0],
            xi: xi.to_vec(),
        }
    }

    /// Scalar jump of height `zeta` across the hyperplane normal to `+e_axis`.
    pub fn jump_scalar(zeta: f64, dim: usize, axis: usize) -> Self {
        let mut nu = vec![0.0; dim];
        nu[axis] = 1.0;
        Self::Jump {
            a: vec![zeta],
            b: vec![0.0],
            nu,
        }
    }

    pub fn components(&self) -> usize {
        match self {
            Self::Affine { u0, .. } => u0.len(),
            Self::Jump { a, .. } => a.len(),
        }
    }

    pub fn is_jump(&self) -> bool {
        matches!(self, Self::Jump { .. })
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Self::Affine { u0, xi } => {
                if u0.is_empty() || xi.len() != u0.len() * dim {
                    return Err(Error::Input(format!(
                        "affine datum needs u0 of length m and xi of length m*d = {}",
                        u0.len() * dim
                    )));
                }
                if u0.iter().chain(xi).any(|v| !v.is_finite()) {
                    return Err(Error::Input("affine datum must be finite".into()));
                }
            }
            Self::Jump { a, b, nu } => {
                if a.is_empty() || a.len() != b.len() || nu.len() != dim {
                    return Err(Error::Input("jump datum needs |a| = |b| = m and |nu| = d".into()));
                }
                if a.iter().chain(b).any(|v| !v.is_finite()) {
                    return Err(Error::Input("jump datum must be finite".into()));
                }
                if a == b {
                    return Err(Error::Precondition("jump datum needs a != b".into()));
                }
                let axis_aligned = nu.iter().filter(|v| v.abs() == 1.0).count() == 1
                    && nu.iter().filter(|v| **v == 0.0).count() == dim - 1;
                if !axis_aligned {
                    return Err(Error::Precondition(format!(
                        "jump normal must be a signed coordinate vector, got {nu:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Blow-up profile at `y`.
    fn value(&self, y: &[f64], out: &mut [f64]) {
        match self {
            Self::Affine { u0, xi } => {
                let d = y.len();
                for (c, o) in out.iter_mut().enumerate() {
                    *o = u0[c] + (0..d).map(|k| xi[c * d + k] * y[k]).sum::<f64>();
                }
            }
            Self::Jump { a, b, nu } => {
                let s: f64 = y.iter().zip(nu).map(|(p, q)| p * q).sum();
                out.copy_from_slice(if s > 0.0 { a } else { b });
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompetitorClass {
    Sobolev,
    Pc,
    Sbv,
}

impl std::fmt::Display for CompetitorClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sobolev => "sobolev",
            Self::Pc => "pc",
            Self::Sbv => "sbv",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    /// Grid intervals per axis of `[−1, 1]^d`; the grid has `nodes + 1`
    /// points per axis, so `h = 2 / nodes` and dyadic positions are nodes.
    pub nodes: usize,
    pub ring_width: usize,
    /// Outer alternating iterations per start (class sbv).
    pub max_iter: usize,
    /// Relaxation sweeps per Sobolev solve.
    pub max_sweeps: usize,
    /// Stop when the largest nodal update falls below this.
    pub inner_tol: f64,
    /// Total number of starts for class sbv, canonical ones included.
    pub multistarts: usize,
    pub seed: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            nodes: 64,
            ring_width: 1,
            max_iter: 200,
            max_sweeps: 50_000,
            inner_tol: 1e-10,
            multistarts: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellProblem {
    pub bulk: BulkDensity,
    pub surface: SurfaceDensity,
    pub dim: usize,
    pub datum: BoundaryDatum,
    pub center: Vec<f64>,
    pub radius: f64,
    pub class: CompetitorClass,
    pub params: SolverParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSolution {
    pub class: CompetitorClass,
    /// Minimizer in blow-up coordinates.
    pub minimizer: SbvGridFunction,
    /// Blow-up energy `E`; the physical value is `m = ε^d E` (affine) or
    /// `ε^{d−1} E` (jump).
    pub energy: f64,
    pub value: f64,
    /// `E` divided by the discrete ball volume (affine) or by the discrete
    /// measure of the datum's interface (jump).
    pub normalized: f64,
    /// `energy / normalized`.
    pub normalizer: f64,
    pub h: f64,
    pub iterations: usize,
    /// Energy after each sweep or outer step of the winning start.
    pub energy_trace: Vec<f64>,
    /// Final energy of every start (class sbv).
    pub start_energies: Vec<f64>,
    pub multistart_spread: f64,
    /// Class minima computed as warm starts (class sbv).
    pub sobolev_energy: Option<f64>,
    pub pc_energy: Option<f64>,
}

/// The problem in blow-up coordinates.
pub(crate) struct Setup {
    pub ctx: EnergyContext,
    pub region: Region,
    pub free: Vec<usize>,
    pub fixed: Vec<bool>,
    pub datum: SbvGridFunction,
    /// Physical value per unit blow-up energy.
    pub scale: f64,
    pub normalizer: f64,
    pub omega: f64,
}

impl CellProblem {
    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::Input(format!("dimension must be 1 or 2, got {}", self.dim)));
        }
        if self.center.len() != self.dim {
            return Err(Error::Input("center must have d coordinates".into()));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Input(format!("radius must be positive, got {}", self.radius)));
        }
        if self.params.ring_width < 1 {
            return Err(Error::Input("ring width must be at least 1".into()));
        }
        if self.params.nodes < 5 {
            return Err(Error::Input("need at least 5 nodes per axis".into()));
        }
        self.datum.validate(self.dim)?;
        if self.class == CompetitorClass::Pc && !self.datum.is_jump() {
            return Err(Error::Precondition(
                "piecewise-constant competitors need a jump datum".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn setup(&self) -> Result<Setup> {
        self.validate()?;
        let d = self.dim;
        let m = self.datum.components();
        let grid = Grid::cube(d, self.params.nodes + 1, -1.0, 1.0)?;
        let eps = self.radius;
        let x0: [f64; 2] = {
            let mut c = [0.0; 2];
            c[..d].copy_from_slice(&self.center);
            c
        };
        let phys = move |y: &[f64]| -> [f64; 2] {
            let mut x = x0;
            for k in 0..y.len() {
                x[k] += eps * y[k];
            }
            x
        };
        let exponent = self.bulk.exponent().rescaled(&self.center, eps);
        let f = self.bulk.func().clone();
        let g = self.surface.func().clone();
        let (bulk, surface, scale) = match &self.datum {
            BoundaryDatum::Affine { .. } => {
                let fb: Arc<crate::energy::BulkFn> =
                    Arc::new(move |y, xi| f(&phys(y)[..y.len()], xi));
                let gb: Arc<crate::energy::SurfaceFn> = Arc::new(move |y, z, nu| {
                    let scaled: Vec<f64> = z.iter().map(|v| eps * v).collect();
                    g(&phys(y)[..y.len()], &scaled, nu) / eps
                });
                (
                    BulkDensity::from_parts(
                        self.bulk.name(),
                        fb,
                        self.bulk.alpha(),
                        self.bulk.beta(),
                        exponent,
                    )?,
                    SurfaceDensity::from_parts(
                        self.surface.name(),
                        gb,
                        self.surface.alpha() / eps,
                        self.surface.beta() / eps,
                        self.surface.c(),
                        self.surface.mode(),
                    )?,
                    eps.powi(d as i32),
                )
            }
            BoundaryDatum::Jump { .. } => {
                let fb: Arc<crate::energy::BulkFn> = Arc::new(move |y, xi| {
                    let scaled: Vec<f64> = xi.iter().map(|v| v / eps).collect();
                    eps * f(&phys(y)[..y.len()], &scaled)
                });
                let gb: Arc<crate::energy::SurfaceFn> =
                    Arc::new(move |y, z, nu| g(&phys(y)[..y.len()], z, nu));
                (
                    BulkDensity::from_parts(
                        self.bulk.name(),
                        fb,
                        self.bulk.alpha(),
                        self.bulk.beta(),
                        exponent,
                    )?,
                    SurfaceDensity::from_parts(
                        self.surface.name(),
                        gb,
                        self.surface.alpha(),
                        self.surface.beta(),
                        self.surface.c(),
                        self.surface.mode(),
                    )?,
                    eps.powi(d as i32 - 1),
                )
            }
        };
        let ctx = EnergyContext::new(bulk, surface, grid.clone())
            .with_components(m)
            .without_growth_check();

        let region = Region::ball(&grid, &Ball::new(&vec![0.0; d], 1.0));
        if region.is_empty() {
            return Err(Error::Domain("blow-up ball contains no nodes".into()));
        }
        let mut ring = Region::empty(&grid);
        for n in region.nodes() {
            let boundary = (0..d).any(|k| {
                [true, false].iter().any(|&fwd| {
                    grid.neighbor(n, k, fwd)
                        .is_none_or(|nb| !region.contains(nb))
                })
            });
            if boundary {
                ring.insert(n);
            }
        }
        for _ in 1..self.params.ring_width {
            let mut grown = ring.clone();
            for n in region.nodes() {
                if (0..d).any(|k| {
                    [true, false].iter().any(|&fwd| {
                        grid.neighbor(n, k, fwd).is_some_and(|nb| ring.contains(nb))
                    })
                }) {
                    grown.insert(n);
                }
            }
            ring = grown;
        }
        let free_region = region.difference(&ring);
        let ball = region;
        // terms whose edges all lie in the ball
        let mut region = Region::empty(&grid);
        for n in ball.nodes() {
            if (0..d).all(|k| grid.neighbor(n, k, true).is_some_and(|nb| ball.contains(nb))) {
                region.insert(n);
            }
        }
        let free: Vec<usize> = free_region.nodes().collect();
        let fixed: Vec<bool> = (0..grid.node_count()).map(|n| !free_region.contains(n)).collect();

        let mut values = vec![0.0; grid.node_count() * m];
        for n in 0..grid.node_count() {
            let y = grid.position(n);
            self.datum.value(&y[..d], &mut values[n * m..(n + 1) * m]);
        }
        let mut datum = SbvGridFunction::uncracked(GridFunction::new(grid.clone(), m, values)?);
        if let BoundaryDatum::Jump { .. } = self.datum {
            for e in grid.edges() {
                if datum.at(e.base) != datum.at(e.head) {
                    datum.set_crack(e.id, true);
                }
            }
        }

        let normalizer = match &self.datum {
            BoundaryDatum::Affine { .. } => region.count() as f64 * grid.volume_element(),
            BoundaryDatum::Jump { nu, .. } => {
                let side = |n: usize| {
                    let y = grid.position(n);
                    (0..d).map(|k| y[k] * nu[k]).sum::<f64>() > 0.0
                };
                let crossings = grid
                    .edges()
                    .filter(|e| region.contains(e.base) && side(e.base) != side(e.head))
                    .count();
                crossings as f64 * grid.face_element()
            }
        };
        if !(normalizer > 0.0) {
            return Err(Error::Domain("datum interface misses the ball".into()));
        }

        Ok(Setup {
            ctx,
            region,
            free,
            fixed,
            datum,
            scale,
            normalizer,
            // tuned for pieces pinned on one side only, which behave like
            // Dirichlet problems of twice the length
            omega: sor_factor(2 * self.params.nodes),
        })
    }

    /// The blow-up grid, energy and datum used by the solver.
    pub fn blow_up(&self) -> Result<(EnergyContext, Region, SbvGridFunction)> {
        let s = self.setup()?;
        Ok((s.ctx, s.region, s.datum))
    }
}

impl Setup {
    pub fn energy(&self, u: &SbvGridFunction) -> Result<EnergyParts> {
        eval_energy(&self.ctx, u, &self.region)
    }

    pub fn relaxation(&self, params: &SolverParams) -> Relaxation<'_> {
        Relaxation {
            ctx: &self.ctx,
            region: &self.region,
            free: &self.free,
            omega: self.omega,
            tol: params.inner_tol,
            max_sweeps: params.max_sweeps,
        }
    }

    pub fn solution(
        &self,
        class: CompetitorClass,
        minimizer: SbvGridFunction,
        energy: f64,
        iterations: usize,
        energy_trace: Vec<f64>,
    ) -> CellSolution {
        CellSolution {
            class,
            h: minimizer.grid().h(),
            minimizer,
            energy,
            value: self.scale * energy,
            normalized: energy / self.normalizer,
            normalizer: self.normalizer,
            iterations,
            energy_trace,
            start_energies: vec![energy],
            multistart_spread: 0.0,
            sobolev_energy: None,
            pc_energy: None,
        }
    }

    /// Sobolev minimizer starting from `start` (cracks removed).
    pub fn solve_sobolev(
        &self,
        start: &SbvGridFunction,
        params: &SolverParams,
    ) -> Result<CellSolution> {
        let mut u = start.clone();
        for e in u.grid().clone().edges() {
            u.set_crack(e.id, false);
        }
        let out = self.relaxation(params).run(&mut u)?;
        let energy = self.energy(&u)?.total;
        let sol = self.solution(CompetitorClass::Sobolev, u, energy, out.sweeps, out.trace);
        if !out.converged {
            return Err(Error::NonConvergence {
                iterations: out.sweeps,
                best: Box::new(sol),
            });
        }
        Ok(sol)
    }

    /// Exact two-label minimizer over `{a, b}` by a minimum cut.
    pub fn solve_pc(&self, a: &[f64], b: &[f64]) -> Result<CellSolution> {
        let grid = self.datum.grid().clone();
        let m = a.len();
        let nodes = grid.node_count();
        let mut id = vec![usize::MAX; nodes];
        for (k, &n) in self.free.iter().enumerate() {
            id[n] = k;
        }
        let (s, t) = (self.free.len(), self.free.len() + 1);
        let mut graph = mincut::FlowGraph::new(self.free.len() + 2);
        let d = grid.dim();
        let face = grid.face_element();
        let mut constant = 0.0;
        let g = &self.ctx.surface;
        let label_a = |n: usize| self.datum.at(n) == a;
        for e in grid.edges() {
            if !self.region.contains(e.base) {
                continue;
            }
            let x = grid.edge_midpoint(&e);
            let mut nu = [0.0; 2];
            nu[e.axis] = 1.0;
            let ab: Vec<f64> = (0..m).map(|c| b[c] - a[c]).collect();
            let ba: Vec<f64> = ab.iter().map(|v| -v).collect();
            // base labelled a, head labelled b, and the reverse
            let c_ab = face * g.eval(&x[..d], &ab, &nu[..d]);
            let c_ba = face * g.eval(&x[..d], &ba, &nu[..d]);
            if !(c_ab.is_finite() && c_ba.is_finite()) {
                return Err(Error::Density(format!("surface density not finite at {x:?}")));
            }
            match (self.fixed[e.base], self.fixed[e.head]) {
                (false, false) => {
                    graph.add_arc(id[e.base], id[e.head], c_ab);
                    graph.add_arc(id[e.head], id[e.base], c_ba);
                }
                (false, true) => {
                    if label_a(e.head) {
                        graph.add_arc(s, id[e.base], c_ba);
                    } else {
                        graph.add_arc(id[e.base], t, c_ab);
                    }
                }
                (true, false) => {
                    if label_a(e.base) {
                        graph.add_arc(s, id[e.head], c_ab);
                    } else {
                        graph.add_arc(id[e.head], t, c_ba);
                    }
                }
                (true, true) => match (label_a(e.base), label_a(e.head)) {
                    (true, false) => constant += c_ab,
                    (false, true) => constant += c_ba,
                    _ => {}
                },
            }
        }
        let cut = graph.max_flow(s, t) + constant;
        let side = graph.source_side(s);
        let mut values = self.datum.values().to_vec();
        for (k, &n) in self.free.iter().enumerate() {
            values[n * m..(n + 1) * m].copy_from_slice(if side[k] { a } else { b });
        }
        let mut u = SbvGridFunction::uncracked(GridFunction::new(grid.clone(), m, values)?);
        for e in grid.edges() {
            if u.at(e.base) != u.at(e.head) {
                u.set_crack(e.id, true);
            }
        }
        let surface = self.energy(&u)?.surface;
        if (surface - cut).abs() > 1e-9 * (1.0 + cut.abs()) {
            return Err(Error::Numeric(format!(
                "cut value {cut} disagrees with the labelling energy {surface}"
            )));
        }
        Ok(self.solution(CompetitorClass::Pc, u, surface, 1, vec![surface]))
    }
}

/// `m_F(datum, B_ε)` over the requested competitor class.
pub fn solve_cell(problem: &CellProblem) -> Result<CellSolution> {
    let setup = problem.setup()?;
    match problem.class {
        CompetitorClass::Sobolev => setup.solve_sobolev(&setup.datum, &problem.params),
        CompetitorClass::Pc => match &problem.datum {
            BoundaryDatum::Jump { a, b, .. } => setup.solve_pc(a, b),
            BoundaryDatum::Affine { .. } => unreachable!("rejected by validate"),
        },
        CompetitorClass::Sbv => alternate::solve_sbv(&setup, problem),
    }
}

/// Whether `v` agrees with the datum off the free interior and respects the
/// class: no effective cracks (sobolev) or no gradients in the ball (pc).
pub fn admissible_check(problem: &CellProblem, v: &SbvGridFunction) -> bool {
    let Ok(setup) = problem.setup() else {
        return false;
    };
    if !v.grid().same_shape(setup.datum.grid()) || v.components() != setup.datum.components() {
        return false;
    }
    let grid = v.grid();
    if (0..grid.node_count()).any(|n| setup.fixed[n] && v.at(n) != setup.datum.at(n)) {
        return false;
    }
    match problem.class {
        CompetitorClass::Sbv => true,
        CompetitorClass::Sobolev => !grid
            .edges()
            .any(|e| EnergyContext::effective_crack(v, &e)),
        CompetitorClass::Pc => !grid.edges().any(|e| {
            setup.region.contains(e.base)
                && !v.is_cracked(e.id)
                && v.at(e.base) != v.at(e.head)
        }),
    }
}
