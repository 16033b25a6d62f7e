//! Cut-off gluing of two competitors with a certified energy overhead.

use rayon::prelude::*;

use crate::energy::{eval_energy, EnergyContext, GrowthMode};
use crate::error::{Error, Result};
use crate::varexp::{GridFunction, Region};

use super::SbvGridFunction;

/// Largest strip count accepted before reporting an overflow.
pub const MAX_STRIPS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlueParams {
    pub eta: f64,
    pub k: u64,
    /// Width of the transition layer.
    pub delta: f64,
    /// `(2k)^{p⁺} 3^{p⁺−1} β / k`.
    pub m_const: f64,
    pub p_plus: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone)]
pub struct GlueOutcome {
    pub w: SbvGridFunction,
    pub params: GlueParams,
    /// Index `i₀ ∈ 1..=k` of the chosen strip.
    pub strip: usize,
    /// `F(w_i, I_i)` for every strip.
    pub strip_energies: Vec<f64>,
    /// `F(w, D′ ∪ E)`.
    pub energy: f64,
    pub certified_bound: f64,
    /// `Σ_{F} h^d (|u − v|/δ)^{p}` over `F = (D″ ∖ D′) ∩ E`.
    pub remainder: f64,
    /// Largest discrete cut-off gradient over all strips.
    pub max_cutoff_gradient: f64,
}

/// `k = ⌈max{3^{p⁺−1} β/(η α), β/η}⌉`.
pub fn required_strip_count(alpha: f64, beta: f64, p_plus: f64, eta: f64) -> Result<u64> {
    if !(eta > 0.0) {
        return Err(Error::Input(format!("eta must be positive, got {eta}")));
    }
    let k = (3f64.powf(p_plus - 1.0) * beta / (eta * alpha))
        .max(beta / eta)
        .ceil();
    if !(k <= MAX_STRIPS as f64) {
        return Err(Error::StripCount {
            required: if k.is_finite() { k as u64 } else { u64::MAX },
            max: MAX_STRIPS,
        });
    }
    Ok((k as u64).max(1))
}

/// Glues `u` (kept on `D′`) to `v` (kept on `E ∖ D″`) through the cheapest
/// of `k` nested cut-off strips in `D″ ∖ D′`.
///
/// The strips sit at distance `h + δ(i−1)/k ..= h + δi/k` from `D′`, with
/// `δ = ½(dist(D′, grid ∖ D″) − 2h)`; starting one grid step away from `D′`
/// keeps every term touching the transition inside `D″ ∖ D′`.
pub fn glue_with_cutoff(
    u: &SbvGridFunction,
    v: &SbvGridFunction,
    d_inner: &Region,
    d_outer: &Region,
    e: &Region,
    eta: f64,
    ctx: &EnergyContext,
) -> Result<GlueOutcome> {
    let grid = u.grid().clone();
    if !v.grid().same_shape(&grid) || u.components() != v.components() {
        return Err(Error::Structural("u and v must share grid and components".into()));
    }
    for r in [d_inner, d_outer, e] {
        r.check_grid(&grid)?;
    }
    if d_inner.is_empty() {
        return Err(Error::Domain("D' is empty".into()));
    }
    if !d_inner.is_subset(d_outer) {
        return Err(Error::Precondition("D' must be contained in D''".into()));
    }
    if ctx.surface.mode() != GrowthMode::Bounded {
        return Err(Error::Precondition(
            "gluing needs a bounded surface density".into(),
        ));
    }
    let h = grid.h();
    let inner: Vec<usize> = d_inner.nodes().collect();
    let dist: Vec<f64> = (0..grid.node_count())
        .map(|n| {
            inner
                .iter()
                .map(|&a| grid.distance(a, n))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let gap = (0..grid.node_count())
        .filter(|n| !d_outer.contains(*n))
        .map(|n| dist[n])
        .fold(f64::INFINITY, f64::min);
    let gap = if gap.is_finite() {
        gap
    } else {
        dist.iter().copied().fold(0.0, f64::max) + 3.0 * h
    };
    let delta = 0.5 * (gap - 2.0 * h);
    if !(delta > 0.0) {
        return Err(Error::Precondition(format!(
            "D' must sit more than two grid steps inside D'' (gap {gap}, h {h})"
        )));
    }

    let alpha = ctx.bulk.alpha().min(ctx.surface.alpha());
    let beta = ctx.bulk.beta().max(ctx.surface.beta());
    let d = grid.dim();
    let p_plus = (0..grid.node_count())
        .flat_map(|n| {
            let x = grid.position(n);
            let mut y = x;
            for c in y.iter_mut().take(d) {
                *c += 0.5 * h;
            }
            [
                ctx.bulk.exponent().eval(&x[..d]),
                ctx.bulk.exponent().eval(&y[..d]),
            ]
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let k = required_strip_count(alpha, beta, p_plus, eta)?;
    let kf = k as f64;
    let m_const = (2.0 * kf).powf(p_plus) * 3f64.powf(p_plus - 1.0) * beta / kf;
    let params = GlueParams {
        eta,
        k,
        delta,
        m_const,
        p_plus,
        alpha,
        beta,
    };

    let cutoff = |i: usize, n: usize| -> f64 {
        let start = h + delta * (i as f64 - 1.0) / kf;
        (1.0 - (dist[n] - start) / (delta / kf)).clamp(0.0, 1.0)
    };

    let phi_of = |i: usize| -> Vec<f64> { (0..grid.node_count()).map(|n| cutoff(i, n)).collect() };
    let candidates: Vec<(f64, f64)> = (1..=k as usize)
        .into_par_iter()
        .map(|i| {
            let phi = phi_of(i);
            let mut g: f64 = 0.0;
            for edge in grid.edges() {
                g = g.max((phi[edge.head] - phi[edge.base]).abs() / h);
            }
            let w = blend(u, v, &phi)?;
            let mixed = Region::from_fn(&grid, |n, _| {
                let mut lo = phi[n];
                let mut hi = phi[n];
                for a in 0..d {
                    if let Some(m) = grid.neighbor(n, a, true) {
                        lo = lo.min(phi[m]);
                        hi = hi.max(phi[m]);
                    }
                }
                lo < hi || (lo > 0.0 && lo < 1.0)
            });
            Ok((eval_energy(ctx, &w, &mixed)?.total, g))
        })
        .collect::<Result<_>>()?;

    let mut best = 0;
    let mut max_grad: f64 = 0.0;
    for (i, c) in candidates.iter().enumerate() {
        max_grad = max_grad.max(c.1);
        if c.0 < candidates[best].0 {
            best = i;
        }
    }
    if max_grad > 2.0 * kf / delta * (1.0 + 1e-12) {
        return Err(Error::Numeric(format!(
            "cut-off gradient {max_grad} exceeds 2k/delta = {}",
            2.0 * kf / delta
        )));
    }
    let strip_energies: Vec<f64> = candidates.iter().map(|c| c.0).collect();
    let w = blend(u, v, &phi_of(best + 1))?;

    for n in d_inner.nodes() {
        if w.at(n) != u.at(n) {
            return Err(Error::Numeric(format!("glued function differs from u at node {n}")));
        }
    }
    for n in e.difference(d_outer).nodes() {
        if w.at(n) != v.at(n) {
            return Err(Error::Numeric(format!("glued function differs from v at node {n}")));
        }
    }

    let f_region = d_outer.difference(d_inner).intersection(e);
    let remainder: f64 = f_region
        .nodes()
        .map(|n| {
            let x = grid.position(n);
            let p = ctx.bulk.exponent().eval(&x[..d]);
            let diff = crate::energy::norm(
                &u.at(n).iter().zip(v.at(n)).map(|(a, b)| a - b).collect::<Vec<_>>(),
            );
            grid.volume_element() * (diff / delta).powf(p)
        })
        .sum();
    let target = d_inner.union(e);
    let energy = eval_energy(ctx, &w, &target)?.total;
    let fu = eval_energy(ctx, u, d_outer)?.total;
    let fv = eval_energy(ctx, v, e)?.total;
    let volume = target.count() as f64 * grid.volume_element();
    let certified_bound =
        (1.0 + eta) * (fu + fv) + m_const * remainder + eta * volume;
    if !(energy <= certified_bound) {
        return Err(Error::Numeric(format!(
            "glued energy {energy} exceeds the certified bound {certified_bound}"
        )));
    }
    Ok(GlueOutcome {
        w,
        params,
        strip: best + 1,
        strip_energies,
        energy,
        certified_bound,
        remainder,
        max_cutoff_gradient: max_grad,
    })
}

/// `φu + (1−φ)v` with the crack set of `u` where `φ = 1` on both ends, of
/// `v` where `φ = 0` on both ends, and the union in between.
fn blend(
    u: &SbvGridFunction,
    v: &SbvGridFunction,
    phi: &[f64],
) -> Result<SbvGridFunction> {
    let grid = u.grid();
    let m = u.components();
    let values: Vec<f64> = (0..grid.node_count())
        .flat_map(|n| {
            let t = phi[n];
            let (a, b) = (u.at(n), v.at(n));
            (0..m)
                .map(move |c| {
                    if t == 1.0 {
                        a[c]
                    } else if t == 0.0 {
                        b[c]
                    } else {
                        t * a[c] + (1.0 - t) * b[c]
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let mut w = SbvGridFunction::uncracked(GridFunction::new(grid.clone(), m, values)?);
    for e in grid.edges() {
        let (pa, pb) = (phi[e.base], phi[e.head]);
        let cu = EnergyContext::effective_crack(u, &e);
        let cv = EnergyContext::effective_crack(v, &e);
        let cracked = if pa == 1.0 && pb == 1.0 {
            cu
        } else if pa == 0.0 && pb == 0.0 {
            cv
        } else {
            cu || cv
        };
        w.set_crack(e.id, cracked);
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{const_surface, power};
    use crate::varexp::{ExponentField, Grid};

    fn ctx(grid: &Grid) -> EnergyContext {
        EnergyContext::new(
            power(ExponentField::constant(2.0)).unwrap(),
            const_surface(1.0).unwrap(),
            grid.clone(),
        )
    }

    #[test]
    fn strip_count_formula() {
        assert_eq!(required_strip_count(1.0, 1.0, 2.0, 0.5).unwrap(), 6);
        assert!(matches!(
            required_strip_count(1.0, 1.0, 3.0, 1e-6),
            Err(Error::StripCount { .. })
        ));
    }

    #[test]
    fn identical_inputs_glue_to_themselves() {
        let g = Grid::unit_interval(60).unwrap();
        let u = SbvGridFunction::uncracked(GridFunction::scalar(&g, |x| x[0] * x[0]).unwrap());
        let d1 = Region::from_fn(&g, |_, x| x[0] < 0.3);
        let d2 = Region::from_fn(&g, |_, x| x[0] < 0.6);
        let e = Region::from_fn(&g, |_, x| x[0] > 0.2);
        let out = glue_with_cutoff(&u, &u, &d1, &d2, &e, 0.5, &ctx(&g)).unwrap();
        assert_eq!(out.w.values(), u.values());
        assert_eq!(out.remainder, 0.0);
        assert!(out.energy <= out.certified_bound);
    }

    #[test]
    fn constants_in_two_dimensions() {
        let g = Grid::cube(2, 16, 0.0, 1.0).unwrap();
        let u = SbvGridFunction::uncracked(GridFunction::scalar(&g, |_| 1.0).unwrap());
        let v = SbvGridFunction::uncracked(GridFunction::scalar(&g, |_| -1.0).unwrap());
        let d1 = Region::from_fn(&g, |_, x| x[0] < 0.25);
        let d2 = Region::from_fn(&g, |_, x| x[0] < 0.75);
        let e = Region::from_fn(&g, |_, x| x[0] > 0.1);
        let out = glue_with_cutoff(&u, &v, &d1, &d2, &e, 0.1, &ctx(&g)).unwrap();
        assert!(out.max_cutoff_gradient <= 2.0 * out.params.k as f64 / out.params.delta);
        assert!(out.energy <= out.certified_bound);
        for n in d1.nodes() {
            assert_eq!(out.w.at(n), u.at(n));
        }
    }

    #[test]
    fn tight_gap_is_rejected() {
        let g = Grid::unit_interval(20).unwrap();
        let u = SbvGridFunction::uncracked(GridFunction::scalar(&g, |_| 0.0).unwrap());
        let d1 = Region::from_fn(&g, |_, x| x[0] < 0.3);
        let d2 = Region::from_fn(&g, |_, x| x[0] < 0.26);
        let e = Region::all(&g);
        assert!(matches!(
            glue_with_cutoff(&u, &u, &d1, &d2, &e, 0.5, &ctx(&g)),
            Err(Error::Precondition(_))
        ));
    }
}
