//! Nodewise nonlinear over-relaxation for a fixed crack set.

use crate::energy::{eval_energy, EnergyContext};
use crate::error::Result;
use crate::sbv::SbvGridFunction;
use crate::varexp::{Grid, Region};

pub(crate) struct Relaxation<'a> {
    pub ctx: &'a EnergyContext,
    /// Owners of the energy terms.
    pub region: &'a Region,
    pub free: &'a [usize],
    pub omega: f64,
    pub tol: f64,
    pub max_sweeps: usize,
}

/// Free nodes of an aligned cube that move together, with the owners of
/// the terms they share with the outside.
struct Block {
    nodes: Vec<usize>,
    owners: Vec<usize>,
    halo: Vec<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct RelaxOutcome {
    pub sweeps: usize,
    pub converged: bool,
    /// Energy after every sweep.
    pub trace: Vec<f64>,
}

/// Sweeps between coarse corrections. Every sweep slows smooth 2D solves
/// about fourfold; every 8th still unsticks `p < 2` chains.
const COARSE_EVERY: usize = 8;

/// `2 / (1 + sin(π/N))`, optimal for the Dirichlet Laplacian on `N` cells.
pub(crate) fn sor_factor(cells: usize) -> f64 {
    2.0 / (1.0 + (std::f64::consts::PI / cells.max(2) as f64).sin())
}

impl Relaxation<'_> {
    pub fn run(&self, u: &mut SbvGridFunction) -> Result<RelaxOutcome> {
        let grid = u.grid().clone();
        let m = u.components();
        let d = grid.dim();
        let mut trace = Vec::new();
        let floating = self.floating_nodes(u);
        let blocks = self.blocks(&grid, &floating);
        for sweep in 1..=self.max_sweeps {
            let mut max_update: f64 = 0.0;
            if sweep % COARSE_EVERY == 0 {
                self.shift_blocks(u, &blocks)?;
                let clusters = self.clusters(u, &floating);
                self.shift_blocks(u, &clusters)?;
            }
            for &n in self.free {
                for c in 0..m {
                    let i = n * m + c;
                    let t0 = u.values()[i];
                    let (mut lo, mut hi) = (t0, t0);
                    for k in 0..d {
                        for fwd in [true, false] {
                            if let Some(nb) = grid.neighbor(n, k, fwd) {
                                let v = u.at(nb)[c];
                                lo = lo.min(v);
                                hi = hi.max(v);
                            }
                        }
                    }
                    if hi - lo <= 0.0 {
                        continue;
                    }
                    let mut phi = |t: f64| -> Result<f64> {
                        u.values_mut()[i] = t;
                        self.ctx.local_energy(u, n, self.region)
                    };
                    // translations of a floating piece are free, so
                    // over-relaxing there only drifts
                    let omega = if floating[n] { 1.0 } else { self.omega };
                    let e0 = phi(t0)?;
                    let chosen = match newton_step(&mut phi, t0, e0, lo, hi, omega)? {
                        Some(t) => t,
                        None => {
                            let star = minimize_1d(&mut phi, t0, lo, hi, self.tol * 1e-2)?;
                            let e_star = phi(star)?;
                            // flat directions (floating pieces) never move
                            let t1 = if e_star < e0 { star } else { t0 };
                            let over = t0 + omega * (t1 - t0);
                            // over-relax while the local energy still decreases
                            if over != t1 && phi(over)? < e0 {
                                over
                            } else {
                                t1
                            }
                        }
                    };
                    u.values_mut()[i] = chosen;
                    max_update = max_update.max((chosen - t0).abs());
                }
            }
            trace.push(eval_energy(self.ctx, u, self.region)?.total);
            if max_update < self.tol {
                return Ok(RelaxOutcome {
                    sweeps: sweep,
                    converged: true,
                    trace,
                });
            }
        }
        Ok(RelaxOutcome {
            sweeps: self.max_sweeps,
            converged: false,
            trace,
        })
    }

    /// Coarse corrections: each block moves by the common shift that
    /// minimizes the energy. Shifts are not counted as updates; the nodewise
    /// sweep decides convergence.
    fn shift_blocks(&self, u: &mut SbvGridFunction, blocks: &[Block]) -> Result<()> {
        let m = u.components();
        for blk in blocks {
            for c in 0..m {
                let base: Vec<f64> = blk.nodes.iter().map(|&n| u.at(n)[c]).collect();
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for &n in blk.nodes.iter().chain(&blk.halo) {
                    lo = lo.min(u.at(n)[c]);
                    hi = hi.max(u.at(n)[c]);
                }
                let r = hi - lo;
                if !(r > 0.0) {
                    continue;
                }
                let mut phi = |t: f64| -> Result<f64> {
                    for (&n, &b) in blk.nodes.iter().zip(&base) {
                        u.values_mut()[n * m + c] = b + t;
                    }
                    self.ctx.owner_energy(u, &blk.owners)
                };
                let e0 = phi(0.0)?;
                let star = minimize_1d(&mut phi, 0.0, -r, r, self.tol * 1e-2)?;
                if !(phi(star)? < e0) {
                    phi(0.0)?;
                }
            }
        }
        Ok(())
    }

    /// Aligned cubes of side 2, 4, 8, ... over the free nodes that are not
    /// floating, coarsest last.
    fn blocks(&self, grid: &Grid, floating: &[bool]) -> Vec<Block> {
        let d = grid.dim();
        let ext: Vec<usize> = (0..d).map(|k| grid.nodes_along(k)).collect();
        let longest = ext.iter().copied().max().unwrap_or(1);
        let movable: Vec<usize> = self.free.iter().copied().filter(|&n| !floating[n]).collect();
        let mut builder = BlockBuilder::new(grid);
        let mut out = Vec::new();
        let mut b = 2;
        while b < 2 * longest {
            let per = |k: usize| ext[k].div_ceil(b);
            let mut cubes: Vec<Vec<usize>> = vec![Vec::new(); (0..d).map(per).product()];
            for &n in &movable {
                let x = grid.coords(n);
                let id = if d == 1 { x[0] / b } else { x[0] / b + per(0) * (x[1] / b) };
                cubes[id].push(n);
            }
            out.extend(cubes.into_iter().filter_map(|c| builder.build(c, self.region)));
            b *= 2;
        }
        out
    }

    /// Pieces of movable nodes joined by uncracked edges whose difference
    /// is at most `δ`, for `δ` from `R/10` down to `R·1e-12` (`R` the value
    /// range). For `p < 2` nearly equal neighbours are stiff and nodewise
    /// moves crawl; moving them together does not.
    fn clusters(&self, u: &SbvGridFunction, floating: &[bool]) -> Vec<Block> {
        let grid = u.grid();
        let m = u.components();
        let nn = grid.node_count();
        let mut movable = vec![false; nn];
        for &n in self.free {
            movable[n] = !floating[n];
        }
        let (lo, hi) = u
            .values()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        let range = hi - lo;
        if !(range > 0.0) {
            return Vec::new();
        }
        let mut links = Vec::new();
        for e in grid.edges() {
            if movable[e.base] && movable[e.head] && !u.is_cracked(e.id) {
                let diff = (0..m).map(|c| (u.at(e.head)[c] - u.at(e.base)[c]).abs()).fold(0.0, f64::max);
                links.push((diff, e.base, e.head));
            }
        }
        let mut builder = BlockBuilder::new(grid);
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        for k in 1..=12 {
            let delta = range * 10f64.powi(-k);
            let mut parent: Vec<usize> = (0..nn).collect();
            for &(diff, a, b) in &links {
                if diff <= delta {
                    let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
                    parent[ra] = rb;
                }
            }
            let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
            for n in (0..nn).filter(|&n| movable[n]) {
                groups.entry(root(&mut parent, n)).or_default().push(n);
            }
            for g in groups.into_values() {
                if g.len() > 1 && seen.insert(g.clone()) {
                    out.extend(builder.build(g, self.region));
                }
            }
        }
        out
    }

    /// Free nodes not joined to any pinned node by uncracked edges.
    fn floating_nodes(&self, u: &SbvGridFunction) -> Vec<bool> {
        let grid = u.grid();
        let n = grid.node_count();
        let mut free = vec![false; n];
        for &i in self.free {
            free[i] = true;
        }
        let mut anchored: Vec<bool> = free.iter().map(|f| !f).collect();
        let mut stack: Vec<usize> = (0..n).filter(|&i| anchored[i]).collect();
        while let Some(i) = stack.pop() {
            for k in 0..grid.dim() {
                for fwd in [true, false] {
                    let Some(nb) = grid.neighbor(i, k, fwd) else {
                        continue;
                    };
                    let e = grid.edge_from(if fwd { i } else { nb }, k).expect("edge to neighbor");
                    if !anchored[nb] && !u.is_cracked(e.id) {
                        anchored[nb] = true;
                        stack.push(nb);
                    }
                }
            }
        }
        (0..n).map(|i| free[i] && !anchored[i]).collect()
    }
}

fn root(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

struct BlockBuilder<'g> {
    grid: &'g Grid,
    mark: Vec<usize>,
    seen: Vec<usize>,
    tag: usize,
}

impl<'g> BlockBuilder<'g> {
    fn new(grid: &'g Grid) -> Self {
        let n = grid.node_count();
        Self { grid, mark: vec![usize::MAX; n], seen: vec![usize::MAX; n], tag: 0 }
    }

    /// `None` for singletons and blocks that share no term with the outside.
    fn build(&mut self, nodes: Vec<usize>, region: &Region) -> Option<Block> {
        if nodes.len() < 2 {
            return None;
        }
        let (grid, d) = (self.grid, self.grid.dim());
        self.tag += 1;
        let tag = self.tag;
        for &n in &nodes {
            self.mark[n] = tag;
        }
        let mut owners = Vec::new();
        let mut halo = Vec::new();
        for &n in &nodes {
            let back = (0..d).filter_map(|k| grid.neighbor(n, k, false));
            for o in std::iter::once(n).chain(back) {
                if self.seen[o] == tag || !region.contains(o) {
                    continue;
                }
                self.seen[o] = tag;
                let involved: Vec<usize> = std::iter::once(o)
                    .chain((0..d).filter_map(|k| grid.neighbor(o, k, true)))
                    .collect();
                let inside = involved.iter().filter(|&&i| self.mark[i] == tag).count();
                if inside > 0 && inside < involved.len() {
                    owners.push(o);
                    halo.extend(involved.into_iter().filter(|&i| self.mark[i] != tag));
                }
            }
        }
        (!owners.is_empty()).then_some(Block { nodes, owners, halo })
    }
}

fn fd_step(t: f64, lo: f64, hi: f64) -> f64 {
    // cube root of machine epsilon times the scale of t
    6e-6 * (hi - lo).max(lo.abs()).max(hi.abs()).max(t.abs()).max(1e-300)
}

/// One over-relaxed Newton step (SOR-Newton). `None` unless it gives a
/// sufficient (Armijo) decrease; for `|t|^p` with `p < 2` the plain step
/// lands on the mirror point, which a bare `< e0` test may accept forever.
fn newton_step(
    phi: &mut impl FnMut(f64) -> Result<f64>,
    t0: f64,
    e0: f64,
    lo: f64,
    hi: f64,
    omega: f64,
) -> Result<Option<f64>> {
    let s = fd_step(t0, lo, hi);
    let (fm, fp) = (phi(t0 - s)?, phi(t0 + s)?);
    let d1 = (fp - fm) / (2.0 * s);
    let d2 = (fp - 2.0 * e0 + fm) / (s * s);
    if !(d2 > 0.0) || d1 == 0.0 {
        return Ok(None);
    }
    let step = -d1 / d2;
    if step.abs() > 2.0 * (hi - lo) {
        return Ok(None);
    }
    for t in [t0 + omega * step, t0 + step] {
        let e = phi(t)?;
        if e < e0 && e <= e0 + 1e-4 * d1 * (t - t0) {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

/// Stationary point of `phi` by safeguarded Newton from `t0`, with central
/// differences at a step scaled to `[lo, hi]`. Once the derivative has
/// changed sign the iterate stays inside the bracket (bisection fallback);
/// before that, steps are capped and the cap doubles.
fn minimize_1d(
    phi: &mut impl FnMut(f64) -> Result<f64>,
    t0: f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64> {
    let width = (hi - lo).max(tol);
    let s = fd_step(t0, lo, hi);
    let (mut a, mut b) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut cap = width;
    let mut t = t0;
    for _ in 0..200 {
        let (fm, f0, fp) = (phi(t - s)?, phi(t)?, phi(t + s)?);
        let d1 = (fp - fm) / (2.0 * s);
        let d2 = (fp - 2.0 * f0 + fm) / (s * s);
        if d1 == 0.0 {
            return Ok(t);
        }
        if d1 < 0.0 {
            a = a.max(t);
        } else {
            b = b.min(t);
        }
        let mut next = if d2 > 0.0 { t - d1 / d2 } else { t - d1.signum() * cap };
        if a.is_finite() && b.is_finite() {
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
        } else {
            next = t + (next - t).clamp(-cap, cap);
            cap *= 2.0;
        }
        if (next - t).abs() <= tol || b - a <= tol {
            return Ok(next);
        }
        t = next;
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_minimum_in_one_step() {
        let mut calls = 0;
        let mut phi = |t: f64| -> Result<f64> {
            calls += 1;
            Ok((t - 0.3).powi(2))
        };
        let t = minimize_1d(&mut phi, 0.0, 0.0, 1.0, 1e-12).unwrap();
        assert!((t - 0.3).abs() < 1e-10);
        assert!(calls < 20);
    }

    #[test]
    fn minimum_outside_bracket() {
        let mut phi = |t: f64| -> Result<f64> { Ok((t + 2.0).abs().powf(3.0)) };
        let t = minimize_1d(&mut phi, 0.5, 0.0, 1.0, 1e-12).unwrap();
        assert!((t + 2.0).abs() < 1e-4, "{t}");
    }
}
