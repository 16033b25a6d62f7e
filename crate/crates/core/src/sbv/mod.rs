//! Grid functions of bounded variation with an explicit crack set.
//!
//! Every grid edge is either cracked (it carries a jump `[u]_e`) or
//! uncracked (it carries a difference quotient `D_e u`). Edges are
//! identified by their base node and axis; the normal of an edge is the
//! positive axis direction, so `u⁺` is the value at the far end.

mod glue;
mod pc;

pub use glue::{glue_with_cutoff, required_strip_count, GlueOutcome, GlueParams};
pub use pc::{pc_project, PcProjection};

use crate::error::{Error, Result};
use crate::varexp::{Ball, Grid, GridFunction, Region};

/// Identifier of the edge leaving node `base` in direction `+e_axis`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub id: EdgeId,
    pub base: usize,
    pub head: usize,
    pub axis: usize,
}

impl Grid {
    pub fn edge(&self, id: EdgeId) -> Option<Edge> {
        let d = self.dim();
        let (base, axis) = (id.0 / d, id.0 % d);
        if base >= self.node_count() {
            return None;
        }
        self.neighbor(base, axis, true).map(|head| Edge {
            id,
            base,
            head,
            axis,
        })
    }

    pub fn edge_from(&self, base: usize, axis: usize) -> Option<Edge> {
        self.edge(EdgeId(base * self.dim() + axis))
    }

    pub fn edge_slots(&self) -> usize {
        self.node_count() * self.dim()
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        (0..self.edge_slots()).filter_map(move |i| self.edge(EdgeId(i)))
    }

    /// Midpoint of an edge.
    pub fn edge_midpoint(&self, e: &Edge) -> [f64; 2] {
        let mut x = self.position(e.base);
        x[e.axis] += 0.5 * self.h();
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbvGridFunction {
    base: GridFunction,
    cracks: Vec<bool>,
}

impl SbvGridFunction {
    pub fn new(base: GridFunction, cracked: &[EdgeId]) -> Result<Self> {
        let slots = base.grid().edge_slots();
        let mut cracks = vec![false; slots];
        for id in cracked {
            if base.grid().edge(*id).is_none() {
                return Err(Error::Input(format!("{id:?} is not an edge of the grid")));
            }
            cracks[id.0] = true;
        }
        Ok(Self { base, cracks })
    }

    pub fn uncracked(base: GridFunction) -> Self {
        let slots = base.grid().edge_slots();
        Self {
            base,
            cracks: vec![false; slots],
        }
    }

    pub fn grid(&self) -> &Grid {
        self.base.grid()
    }

    pub fn base(&self) -> &GridFunction {
        &self.base
    }

    pub fn components(&self) -> usize {
        self.base.components()
    }

    pub fn values(&self) -> &[f64] {
        self.base.values()
    }

    pub fn at(&self, n: usize) -> &[f64] {
        self.base.at(n)
    }

    /// Solvers keep values finite.
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        self.base.values_mut()
    }

    pub fn is_cracked(&self, id: EdgeId) -> bool {
        self.cracks[id.0]
    }

    pub fn set_crack(&mut self, id: EdgeId, cracked: bool) {
        debug_assert!(self.grid().edge(id).is_some());
        self.cracks[id.0] = cracked;
    }

    pub fn cracked_edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.grid().edges().filter(|e| self.cracks[e.id.0])
    }

    pub fn crack_count(&self) -> usize {
        self.cracked_edges().count()
    }

    pub fn crack_mask(&self) -> &[bool] {
        &self.cracks
    }

    /// `[u]_e = u(head) − u(base)`.
    pub fn jump(&self, e: &Edge) -> Vec<f64> {
        self.at(e.head)
            .iter()
            .zip(self.at(e.base))
            .map(|(b, a)| b - a)
            .collect()
    }

    /// `D_e u`, or `None` on a cracked edge.
    pub fn gradient(&self, e: &Edge) -> Option<Vec<f64>> {
        if self.cracks[e.id.0] {
            return None;
        }
        let h = self.grid().h();
        Some(self.jump(e).into_iter().map(|v| v / h).collect())
    }

    /// Unit normal of an edge: `+e_axis`.
    pub fn normal(&self, e: &Edge) -> Vec<f64> {
        let mut nu = vec![0.0; self.grid().dim()];
        nu[e.axis] = 1.0;
        nu
    }

    /// `H^{d−1}(J_u)` as `(#cracked edges)·h^{d−1}`.
    pub fn jump_measure(&self) -> f64 {
        self.crack_count() as f64 * self.grid().face_element()
    }

    /// Jump measure of cracked edges with both endpoints in `region`.
    pub fn jump_measure_in(&self, region: &Region) -> f64 {
        self.cracked_edges()
            .filter(|e| region.contains(e.base) && region.contains(e.head))
            .count() as f64
            * self.grid().face_element()
    }

    /// Drops cracks across which the function does not jump.
    pub fn prune_cracks(&mut self) {
        let grid = self.grid().clone();
        for e in grid.edges() {
            if self.cracks[e.id.0] && self.jump(&e).iter().all(|v| *v == 0.0) {
                self.cracks[e.id.0] = false;
            }
        }
    }
}

pub fn default_gamma_iso(dim: usize) -> f64 {
    if dim == 2 {
        2.0
    } else {
        1.0
    }
}

fn ball_region(u: &SbvGridFunction, ball: &Ball) -> Result<Region> {
    let region = Region::ball(u.grid(), ball);
    if region.is_empty() {
        return Err(Error::Domain(format!(
            "ball at {:?} with radius {} contains no grid nodes",
            ball.center, ball.radius
        )));
    }
    Ok(region)
}

/// Componentwise `inf{t : |{u_i < t} ∩ B| ≥ s}` with `|·|` counting `h^d`
/// per node. `s = 0` returns the minimum over `B`.
pub fn quantile(u: &SbvGridFunction, s: f64, ball: &Ball) -> Result<Vec<f64>> {
    let region = ball_region(u, ball)?;
    quantile_on(u.base(), s, &region)
}

pub(crate) fn quantile_on(u: &GridFunction, s: f64, region: &Region) -> Result<Vec<f64>> {
    let count = region.count();
    if count == 0 {
        return Err(Error::Domain("quantile over an empty set".into()));
    }
    let w = u.grid().volume_element();
    let total = count as f64 * w;
    if !(s >= 0.0) || s > total * (1.0 + 1e-12) {
        return Err(Error::Input(format!("quantile level {s} outside [0, {total}]")));
    }
    // smallest k with k·w ≥ s, ties resolved toward the infimum
    let k = ((s / w) - 1e-9).ceil().max(1.0) as usize;
    let k = k.min(count);
    let m = u.components();
    let mut out = Vec::with_capacity(m);
    let mut buf: Vec<f64> = Vec::with_capacity(count);
    for c in 0..m {
        buf.clear();
        buf.extend(region.nodes().map(|n| u.at(n)[c]));
        buf.sort_by(f64::total_cmp);
        out.push(buf[k - 1]);
    }
    Ok(out)
}

/// Quantile levels and bounds of the truncation operator on a ball.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationData {
    pub gamma_iso: f64,
    pub ball_measure: f64,
    pub jump_measure: f64,
    /// `(2γ_iso H^{d−1}(J_u ∩ B))^{d/(d−1)}`.
    pub s0: f64,
    pub lower: Vec<f64>,
    pub median: Vec<f64>,
    pub upper: Vec<f64>,
    /// `L^d({T_B u ≠ u} ∩ B)`.
    pub changed_measure: f64,
    /// `2 s0`.
    pub changed_bound: f64,
}

impl TruncationData {
    pub fn changed_within_bound(&self) -> bool {
        self.changed_measure <= self.changed_bound * (1.0 + 1e-12)
    }
}

fn small_jump_threshold(dim: usize, gamma_iso: f64, jump: f64) -> f64 {
    let base = 2.0 * gamma_iso * jump;
    if dim == 1 {
        // exponent d/(d−1) = ∞
        if base < 1.0 {
            0.0
        } else if base == 1.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        base.powf(dim as f64 / (dim as f64 - 1.0))
    }
}

/// `T_B u = (u ∧ τ″) ∨ τ′`, applied at every node. Cracks whose jump
/// vanishes after clamping are removed.
pub fn truncate(
    u: &SbvGridFunction,
    ball: &Ball,
    gamma_iso: f64,
) -> Result<(SbvGridFunction, TruncationData)> {
    if !(gamma_iso > 0.0) {
        return Err(Error::Input(format!("gamma_iso must be positive, got {gamma_iso}")));
    }
    let region = ball_region(u, ball)?;
    let grid = u.grid();
    let ball_measure = region.count() as f64 * grid.volume_element();
    let jump_measure = u.jump_measure_in(&region);
    let s0 = small_jump_threshold(grid.dim(), gamma_iso, jump_measure);
    if s0 > 0.5 * ball_measure {
        return Err(Error::JumpSetTooLarge {
            lhs: s0,
            rhs: 0.5 * ball_measure,
            gamma_iso,
        });
    }
    let lower = quantile_on(u.base(), s0, &region)?;
    let median = quantile_on(u.base(), 0.5 * ball_measure, &region)?;
    let upper = quantile_on(u.base(), ball_measure - s0, &region)?;

    let m = u.components();
    let values: Vec<f64> = u
        .values()
        .chunks(m)
        .flat_map(|v| {
            v.iter()
                .enumerate()
                .map(|(c, &x)| x.min(upper[c]).max(lower[c]))
                .collect::<Vec<_>>()
        })
        .collect();
    let clamped = GridFunction::new(grid.clone(), m, values)?;
    let changed = region
        .nodes()
        .filter(|&n| clamped.at(n) != u.at(n))
        .count();
    let mut out = SbvGridFunction {
        base: clamped,
        cracks: u.cracks.clone(),
    };
    out.prune_cracks();
    let data = TruncationData {
        gamma_iso,
        ball_measure,
        jump_measure,
        s0,
        lower,
        median,
        upper,
        changed_measure: changed as f64 * grid.volume_element(),
        changed_bound: 2.0 * s0,
    };
    Ok((out, data))
}
