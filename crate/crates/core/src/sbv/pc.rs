//! Piecewise-constant projection by level-set rounding.

use crate::error::{Error, Result};
use crate::varexp::{GridFunction, Region};

use super::{Edge, SbvGridFunction};

#[derive(Debug, Clone, PartialEq)]
pub struct PcProjection {
    /// Partition cell of each node of `D` (`None` outside `D`).
    pub labels: Vec<Option<usize>>,
    pub cell_count: usize,
    pub projected: SbvGridFunction,
    /// `Σ_l H^{d−1}(∂P_l ∖ J_z)` inside `D`.
    pub added_boundary: f64,
    /// `‖z − z_pc‖_∞` on `D`.
    pub sup_error: f64,
    /// `c_proj θ⁻¹ ‖∇z‖_{L¹(D)}`; also the rounding step.
    pub sup_bound: f64,
    pub gradient_l1: f64,
}

fn inside(region: &Region, e: &Edge) -> bool {
    region.contains(e.base) && region.contains(e.head)
}

/// Rounds each component of `z` on `D` to a shifted lattice of step
/// `c_proj θ⁻¹ ‖∇z‖₁`, choosing the shift that creates the fewest new
/// level boundaries, and clamps back into the component's range.
pub fn pc_project(
    z: &SbvGridFunction,
    region: &Region,
    theta: f64,
    c_proj: f64,
) -> Result<PcProjection> {
    if !(theta > 0.0) {
        return Err(Error::Input(format!("theta must be positive, got {theta}")));
    }
    if !(c_proj >= 1.0) {
        return Err(Error::Input(format!("c_proj must be at least 1, got {c_proj}")));
    }
    region.check_grid(z.grid())?;
    if region.is_empty() {
        return Err(Error::Domain("projection region is empty".into()));
    }
    let grid = z.grid().clone();
    let m = z.components();
    let face = grid.face_element();
    let inner: Vec<Edge> = grid.edges().filter(|e| inside(region, e)).collect();
    let smooth: Vec<Edge> = inner
        .iter()
        .copied()
        .filter(|e| !z.is_cracked(e.id))
        .collect();

    // ‖∇z‖_{L¹(D)} = Σ_e h^d |D_e z| = Σ_e h^{d−1} |Δ_e z|
    let mut per_component = vec![0.0; m];
    for e in &smooth {
        for (c, j) in z.jump(e).iter().enumerate() {
            per_component[c] += face * j.abs();
        }
    }
    let gradient_l1: f64 = per_component.iter().sum();
    let step = c_proj * gradient_l1 / theta;

    let mut values = z.values().to_vec();
    for c in 0..m {
        let samples: Vec<f64> = region.nodes().map(|n| z.at(n)[c]).collect();
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if step == 0.0 || hi == lo {
            continue;
        }
        if step >= hi - lo {
            for n in region.nodes() {
                values[n * m + c] = lo;
            }
            continue;
        }
        let offset = best_offset(z, &smooth, c, step);
        for n in region.nodes() {
            let v = z.at(n)[c];
            let level = offset + ((v - offset) / step).floor() * step;
            values[n * m + c] = level.clamp(lo, hi);
        }
    }

    let base = GridFunction::new(grid.clone(), m, values)?;
    let mut projected = SbvGridFunction::uncracked(base);
    for e in grid.edges() {
        let differs = projected.jump(&e).iter().any(|v| *v != 0.0);
        let cracked = if inside(region, &e) {
            differs
        } else {
            z.is_cracked(e.id)
        };
        projected.set_crack(e.id, cracked);
    }

    let added = smooth
        .iter()
        .filter(|e| projected.is_cracked(e.id))
        .count();
    let sup_error = region
        .nodes()
        .flat_map(|n| {
            z.at(n)
                .iter()
                .zip(projected.at(n))
                .map(|(a, b)| (a - b).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max);

    let (labels, cell_count) = components(&projected, region, &inner);
    Ok(PcProjection {
        labels,
        cell_count,
        projected,
        added_boundary: added as f64 * face,
        sup_error,
        sup_bound: step,
        gradient_l1,
    })
}

/// Shift in `[0, step)` minimising the number of smooth edges whose
/// endpoints fall on different lattice levels. The count is piecewise
/// constant in the shift, so probing one point per interval between
/// consecutive breakpoints is exhaustive.
fn best_offset(z: &SbvGridFunction, smooth: &[Edge], c: usize, step: f64) -> f64 {
    let mut breaks: Vec<f64> = smooth
        .iter()
        .flat_map(|e| [z.at(e.base)[c], z.at(e.head)[c]])
        .map(|v| v.rem_euclid(step))
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    if breaks.is_empty() {
        return 0.0;
    }
    let mut probes: Vec<f64> = breaks
        .windows(2)
        .map(|w| 0.5 * (w[0] + w[1]))
        .collect();
    // wrap-around interval
    let last = breaks[breaks.len() - 1];
    probes.push((0.5 * (last + breaks[0] + step)).rem_euclid(step));

    let crossings = |t: f64| {
        smooth
            .iter()
            .filter(|e| {
                let a = ((z.at(e.base)[c] - t) / step).floor();
                let b = ((z.at(e.head)[c] - t) / step).floor();
                a != b
            })
            .count()
    };
    let mut best = (usize::MAX, 0.0);
    for t in probes {
        let k = crossings(t);
        if k < best.0 {
            best = (k, t);
        }
    }
    best.1
}

fn components(
    f: &SbvGridFunction,
    region: &Region,
    inner: &[Edge],
) -> (Vec<Option<usize>>, usize) {
    let grid = f.grid();
    let n = grid.node_count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for e in inner {
        if f.at(e.base) == f.at(e.head) {
            let (a, b) = (find(&mut parent, e.base), find(&mut parent, e.head));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut ids = vec![usize::MAX; n];
    let mut labels = vec![None; n];
    let mut next = 0;
    for node in region.nodes() {
        let r = find(&mut parent, node);
        if ids[r] == usize::MAX {
            ids[r] = next;
            next += 1;
        }
        labels[node] = Some(ids[r]);
    }
    (labels, next)
}
