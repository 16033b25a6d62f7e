//! Randomized suites behind the `norms`, `truncation` and `glue` experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::SamplingConfig;
use super::{Tally, Verdict};
use crate::energy::{const_surface, eval_energy, power, EnergyContext};
use crate::error::{Error, Result};
use crate::sbv::{default_gamma_iso, glue_with_cutoff, truncate, EdgeId, SbvGridFunction};
use crate::varexp::{
    check_norm_modular_inequalities, classical_lp_norm, luxembourg_norm, Ball, ExponentField,
    Grid, GridFunction, Region, VarExponent,
};

fn grid(s: &SamplingConfig) -> Result<Grid> {
    Grid::cube(s.dim, s.nodes, 0.0, 1.0)
}

fn center(dim: usize) -> Vec<f64> {
    vec![0.5; dim]
}

pub(crate) fn norms(s: &SamplingConfig, seed: u64) -> Result<(Vec<Verdict>, Vec<Tally>)> {
    let g = grid(s)?;
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let [lo, hi] = s.p_range;
    let mut violations = Tally::new("norm and scaling inequalities");
    let mut worst_lp: f64 = 0.0;
    for i in 0..s.samples {
        let vals: Vec<f64> = if i % 4 == 0 {
            vec![r.gen_range(lo..=hi); g.node_count()]
        } else {
            (0..g.node_count()).map(|_| r.gen_range(lo..=hi)).collect()
        };
        let p = VarExponent::new(g.clone(), vals)?;
        let scale = 10f64.powf(r.gen_range(-2.0..2.0));
        let u: Vec<f64> = (0..g.node_count()).map(|_| scale * r.gen_range(-1.0..1.0)).collect();
        let u = GridFunction::new(g.clone(), 1, u)?;
        let rep = check_norm_modular_inequalities(&u, &p, &[0.1, 0.5, 2.0, 10.0])?;
        violations.record(rep.norm_bounds_hold && rep.scaling_holds);
        if i % 4 == 0 {
            let lux = luxembourg_norm(&u, &p)?;
            let lp = classical_lp_norm(&u, p.at(0));
            worst_lp = worst_lp.max((lux - lp).abs() / lp);
        }
    }
    let verdicts = vec![
        Verdict::new(
            "norm-modular inequalities",
            violations.violations == 0,
            format!("{} of {} pairs violate", violations.violations, violations.checked),
            "relative slack 1e-9",
        ),
        Verdict::new(
            "constant exponent matches L^p",
            worst_lp <= 1e-8,
            format!("max |lux - Lp|/Lp = {worst_lp:.3e}"),
            "1e-8",
        ),
    ];
    Ok((verdicts, vec![violations]))
}

pub(crate) fn truncation(s: &SamplingConfig, seed: u64) -> Result<(Vec<Verdict>, Vec<Tally>)> {
    let g = grid(s)?;
    let gamma = s.gamma_iso.unwrap_or_else(|| default_gamma_iso(s.dim));
    let c = center(s.dim);
    let ball = Ball::new(&c, 0.45);
    let inside: Vec<EdgeId> = g
        .edges()
        .filter(|e| {
            let m = g.edge_midpoint(e);
            (0..s.dim).map(|k| (m[k] - 0.5).powi(2)).sum::<f64>().sqrt() < 0.4
        })
        .map(|e| e.id)
        .collect();
    if inside.is_empty() {
        return Err(Error::Input("sampling grid too coarse for the truncation ball".into()));
    }
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut invariants = Tally::new("idempotent, gradient-nonincreasing, within 2 s0");
    let mut rejections = Tally::new("rejections with s0 above half the ball");
    for i in 0..s.samples {
        let (a, b, w) = (r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0), r.gen_range(0.0..6.0));
        let vals: Vec<f64> = (0..g.node_count())
            .map(|n| {
                let x = g.position(n);
                a * x[0] + b * x[1] * x[1] + (w * x[0]).sin() + r.gen_range(-0.5..0.5)
            })
            .collect();
        let base = GridFunction::new(g.clone(), 1, vals)?;
        // every tenth instance carries a long crack
        let cracks: Vec<EdgeId> = if i % 10 == 9 {
            inside.iter().copied().step_by(7).collect()
        } else {
            (0..r.gen_range(0..=3)).map(|_| inside[r.gen_range(0..inside.len())]).collect()
        };
        let u = SbvGridFunction::new(base, &cracks)?;
        match truncate(&u, &ball, gamma) {
            Ok((t, data)) => {
                let (tt, _) = truncate(&t, &ball, gamma)?;
                let grad = g.edges().all(|e| t.jump(&e)[0].abs() <= u.jump(&e)[0].abs());
                invariants.record(
                    tt == t && grad && t.crack_count() <= u.crack_count() && data.changed_within_bound(),
                );
            }
            Err(Error::JumpSetTooLarge { lhs, rhs, .. }) => rejections.record(lhs > rhs),
            Err(e) => return Err(e),
        }
    }
    let verdicts = vec![
        Verdict::new(
            "truncation invariants",
            invariants.violations == 0,
            format!(
                "{} of {} truncated instances violate (gamma_iso {gamma})",
                invariants.violations, invariants.checked
            ),
            "exact",
        ),
        Verdict::new(
            "rejections are genuine",
            rejections.violations == 0,
            format!("{} rejected instances", rejections.checked),
            "exact",
        ),
    ];
    Ok((verdicts, vec![invariants, rejections]))
}

fn glue_regions(g: &Grid) -> (Region, Region, Region) {
    let d = g.dim();
    let dist = move |x: &[f64]| (0..d).map(|k| (x[k] - 0.5).powi(2)).sum::<f64>().sqrt();
    (
        Region::from_fn(g, |_, x| dist(x) < 0.2),
        Region::from_fn(g, |_, x| dist(x) < 0.42),
        Region::from_fn(g, |_, x| dist(x) > 0.3),
    )
}

pub(crate) fn glue(s: &SamplingConfig, seed: u64) -> Result<(Vec<Verdict>, Vec<Tally>)> {
    let g = grid(s)?;
    let (d1, d2, e) = glue_regions(&g);
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut bound = Tally::new("glue bound and agreement");
    for i in 0..s.samples {
        let eta = s.etas[i % s.etas.len()];
        let p = r.gen_range(s.p_range[0]..=s.p_range[1]);
        let ctx = EnergyContext::new(
            power(ExponentField::constant(p))?,
            const_surface(r.gen_range(0.5..2.0))?,
            g.clone(),
        );
        let mut random_fn = |amp: f64| -> Result<SbvGridFunction> {
            let vals: Vec<f64> = (0..g.node_count()).map(|_| r.gen_range(-amp..amp)).collect();
            let cracks: Vec<EdgeId> = g.edges().filter(|_| r.gen_bool(0.1)).map(|e| e.id).collect();
            SbvGridFunction::new(GridFunction::new(g.clone(), 1, vals)?, &cracks)
        };
        let u = random_fn(1.0)?;
        let v = random_fn(2.0)?;
        let out = glue_with_cutoff(&u, &v, &d1, &d2, &e, eta, &ctx)?;
        let lhs = eval_energy(&ctx, &out.w, &d1.union(&e))?.total;
        let agrees = d1.nodes().all(|n| out.w.at(n) == u.at(n))
            && e.difference(&d2).nodes().all(|n| out.w.at(n) == v.at(n));
        bound.record(lhs <= out.certified_bound && agrees);
    }
    let verdicts = vec![Verdict::new(
        "fundamental estimate",
        bound.violations == 0,
        format!("{} of {} instances violate", bound.violations, bound.checked),
        "exact",
    )];
    Ok((verdicts, vec![bound]))
}
