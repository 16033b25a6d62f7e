//! Acceptance gate: one line per criterion, nonzero exit on any failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use varfd::cell::{solve_cell, BoundaryDatum, CellProblem, CompetitorClass, SolverParams};
use varfd::energy::{
    capped_linear, const_surface, eval_energy, linear_surface, power, validate_hypotheses,
    weighted_power, BulkDensity, EnergyContext, GrowthMode, PeriodicCoefficient, SurfaceDensity,
};
use varfd::limits::{
    estimate_bulk_density, estimate_surface_density, homogenize_oracle_1d, perturbation_ladder,
    separation_check, DensityEstimate, DensitySequence, Ladder,
};
use varfd::sbv::{default_gamma_iso, glue_with_cutoff, truncate, EdgeId, SbvGridFunction};
use varfd::varexp::{
    check_norm_modular_inequalities, classical_lp_norm, luxembourg_norm, Ball, ExponentField,
    Grid, GridFunction, Region, VarExponent,
};
use varfd::Error;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn run(id: usize, title: &str, budget: Option<Duration>, f: impl FnOnce() -> Verdict) -> bool {
    let t = Instant::now();
    let v = f();
    let took = t.elapsed();
    let in_time = budget.is_none_or(|b| took <= b);
    let pass = v.pass && in_time;
    let limit = budget.map_or(String::new(), |b| format!(" (budget {:.0}s)", b.as_secs_f64()));
    println!(
        "criterion {id} {}: {title}: {} [{:.2}s{limit}]",
        if pass { "PASS" } else { "FAIL" },
        v.detail,
        took.as_secs_f64(),
    );
    pass
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn criterion_1() -> Verdict {
    let g = Grid::unit_interval(63).unwrap();
    let mut r = rng(1);
    let mut violations = 0;
    let mut worst_lp: f64 = 0.0;
    for i in 0..200 {
        let p_vals: Vec<f64> = if i % 4 == 0 {
            vec![r.gen_range(1.5..=3.5); g.node_count()]
        } else {
            (0..g.node_count()).map(|_| r.gen_range(1.5..=3.5)).collect()
        };
        let p = VarExponent::new(g.clone(), p_vals).unwrap();
        let scale = 10f64.powf(r.gen_range(-2.0..2.0));
        let vals: Vec<f64> = (0..g.node_count())
            .map(|_| scale * r.gen_range(-1.0..1.0))
            .collect();
        let u = GridFunction::new(g.clone(), 1, vals).unwrap();
        let rep = check_norm_modular_inequalities(&u, &p, &[0.1, 0.5, 2.0, 10.0]).unwrap();
        if !rep.norm_bounds_hold || !rep.scaling_holds {
            violations += 1;
        }
        if i % 4 == 0 {
            let lux = luxembourg_norm(&u, &p).unwrap();
            let lp = classical_lp_norm(&u, p.at(0));
            worst_lp = worst_lp.max((lux - lp).abs() / lp);
        }
    }
    Verdict::new(
        violations == 0 && worst_lp <= 1e-8,
        format!("200 pairs, {violations} violations, max |lux-Lp|/Lp = {worst_lp:.2e} (tol 1e-8)"),
    )
}

fn criterion_2() -> Verdict {
    let g = Grid::cube(2, 24, 0.0, 1.0).unwrap();
    let gamma = default_gamma_iso(2);
    let ball = Ball::new(&[0.5, 0.5], 0.45);
    let inside: Vec<EdgeId> = g
        .edges()
        .filter(|e| {
            let [x, y] = g.edge_midpoint(e);
            (x - 0.5).hypot(y - 0.5) < 0.4
        })
        .map(|e| e.id)
        .collect();
    let mut r = rng(2);
    let (mut ok, mut failures, mut rejected, mut wrong_rejects) = (0, 0, 0, 0);
    for i in 0..100 {
        let (a, b, c) = (r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0), r.gen_range(0.0..6.0));
        let noise: Vec<f64> = (0..g.node_count()).map(|_| r.gen_range(-0.5..0.5)).collect();
        let vals: Vec<f64> = (0..g.node_count())
            .map(|n| {
                let [x, y] = g.position(n);
                a * x + b * y * y + (c * x).sin() + noise[n]
            })
            .collect();
        let base = GridFunction::new(g.clone(), 1, vals).unwrap();
        // every tenth instance violates (10) with a long crack
        let cracks: Vec<EdgeId> = if i % 10 == 9 {
            inside.iter().copied().step_by(7).collect()
        } else {
            (0..r.gen_range(0..=3))
                .map(|_| inside[r.gen_range(0..inside.len())])
                .collect()
        };
        let u = SbvGridFunction::new(base, &cracks).unwrap();
        match truncate(&u, &ball, gamma) {
            Ok((t, data)) => {
                let (tt, _) = truncate(&t, &ball, gamma).unwrap();
                let grad_ok = g.edges().all(|e| t.jump(&e)[0].abs() <= u.jump(&e)[0].abs());
                let good = tt == t
                    && grad_ok
                    && t.crack_count() <= u.crack_count()
                    && data.changed_within_bound();
                if i % 10 == 9 {
                    wrong_rejects += 1;
                } else if good {
                    ok += 1;
                } else {
                    failures += 1;
                }
            }
            Err(Error::JumpSetTooLarge { lhs, rhs, .. }) if lhs > rhs => {
                if i % 10 == 9 {
                    rejected += 1;
                } else {
                    failures += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    Verdict::new(
        failures == 0 && wrong_rejects == 0 && ok == 90 && rejected == 10,
        format!(
            "{ok}/90 admissible instances idempotent, gradient-nonincreasing and within 2*s0; \
             {rejected}/10 violating instances rejected (gamma_iso {gamma})"
        ),
    )
}

fn glue_instance(
    g: &Grid,
    r: &mut ChaCha8Rng,
    regions: &(Region, Region, Region),
    eta: f64,
) -> Result<bool, String> {
    let p = r.gen_range(1.5..3.0);
    let kappa = r.gen_range(0.5..2.0);
    let ctx = EnergyContext::new(
        power(ExponentField::constant(p)).unwrap(),
        const_surface(kappa).unwrap(),
        g.clone(),
    );
    let mut random_fn = |amp: f64| {
        let vals: Vec<f64> = (0..g.node_count()).map(|_| r.gen_range(-amp..amp)).collect();
        let cracks: Vec<EdgeId> = g.edges().filter(|_| r.gen_bool(0.1)).map(|e| e.id).collect();
        SbvGridFunction::new(GridFunction::new(g.clone(), 1, vals).unwrap(), &cracks).unwrap()
    };
    let u = random_fn(1.0);
    let v = random_fn(2.0);
    let (d1, d2, e) = regions;
    let out = glue_with_cutoff(&u, &v, d1, d2, e, eta, &ctx).map_err(|e| e.to_string())?;
    let lhs = eval_energy(&ctx, &out.w, &d1.union(e)).unwrap().total;
    let agrees_u = d1.nodes().all(|n| out.w.at(n) == u.at(n));
    let agrees_v = e.difference(d2).nodes().all(|n| out.w.at(n) == v.at(n));
    Ok(lhs <= out.certified_bound && agrees_u && agrees_v)
}

fn criterion_3() -> Verdict {
    let g1 = Grid::unit_interval(63).unwrap();
    let r1 = (
        Region::from_fn(&g1, |_, x| x[0] < 0.3),
        Region::from_fn(&g1, |_, x| x[0] < 0.6),
        Region::from_fn(&g1, |_, x| x[0] > 0.4),
    );
    let g2 = Grid::cube(2, 16, 0.0, 1.0).unwrap();
    let c = [0.5, 0.5];
    let r2 = (
        Region::ball(&g2, &Ball::new(&c, 0.2)),
        Region::ball(&g2, &Ball::new(&c, 0.42)),
        Region::from_fn(&g2, |_, x| (x[0] - 0.5).hypot(x[1] - 0.5) > 0.3),
    );
    let mut r = rng(3);
    let (mut held, mut failed, mut errors) = (0, 0, Vec::new());
    for i in 0..100 {
        let eta = [0.5, 0.1, 0.02][i % 3];
        let res = if i % 2 == 0 {
            glue_instance(&g1, &mut r, &r1, eta)
        } else {
            glue_instance(&g2, &mut r, &r2, eta)
        };
        match res {
            Ok(true) => held += 1,
            Ok(false) => failed += 1,
            Err(e) => errors.push(e),
        }
    }
    let mut detail = format!("{held}/100 instances satisfy the glue bound exactly");
    if let Some(e) = errors.first() {
        detail.push_str(&format!("; {} errors, first: {e}", errors.len()));
    }
    Verdict::new(held == 100 && failed == 0, detail)
}

fn homogenization_case(a: [f64; 2], p: f64) -> (DensityEstimate, f64, f64) {
    let coeff = PeriodicCoefficient::new(a.to_vec()).unwrap();
    let seq = DensitySequence::homogenization(
        coeff,
        ExponentField::constant(p),
        const_surface(1.0).unwrap(),
    )
    .unwrap();
    let ladder = Ladder {
        js: (1..=16).collect(),
        solver: SolverParams {
            nodes: 64,
            ..SolverParams::default()
        },
        ..Ladder::default()
    };
    let est = estimate_bulk_density(&seq, &[0.0], &[1.0], CompetitorClass::Sbv, &ladder).unwrap();
    let oracle = homogenize_oracle_1d(&a, p, 1.0).unwrap();
    (est, oracle.value, oracle.flux_value)
}

fn criterion_4(store: &mut Vec<DensityEstimate>) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (a, p, quoted) in [([1.0, 4.0], 2.0, 1.6), ([1.0, 8.0], 3.0, 2.1851)] {
        let (est, oracle, flux) = homogenization_case(a, p);
        let rel = (est.limit - oracle).abs() / oracle;
        let rel_quoted = (est.limit - quoted).abs() / quoted;
        pass &= rel <= 0.05 && rel_quoted <= 0.05 && (oracle - flux).abs() <= 1e-8 * oracle;
        parts.push(format!(
            "a={a:?} p={p}: estimate {:.5} vs oracle {oracle:.5} (flux {flux:.5}, quoted {quoted}) \
             rel {rel:.2e} (tol 5e-2), spread {:.1e}",
            est.limit, est.tail_spread
        ));
        store.push(est);
    }
    Verdict::new(pass, parts.join("; "))
}

fn constant_seq() -> DensitySequence {
    DensitySequence::constant(
        power(ExponentField::constant(2.0)).unwrap(),
        const_surface(1.0).unwrap(),
    )
}

fn criterion_5(store: &mut Vec<DensityEstimate>) -> Verdict {
    let seq = constant_seq();
    let mut pass = true;
    let mut parts = Vec::new();
    for d in [1usize, 2] {
        // 64 intervals per axis in 1D, 32 in 2D to fit the budget on one core
        let ladder = Ladder {
            solver: SolverParams {
                nodes: if d == 1 { 64 } else { 32 },
                ..SolverParams::default()
            },
            ..Ladder::default()
        };
        let x0 = vec![0.0; d];
        let mut nu = vec![0.0; d];
        nu[0] = 1.0;
        let s = estimate_surface_density(&seq, &x0, &[1.0], &nu, CompetitorClass::Sbv, &ladder)
            .unwrap();
        let rel = (s.limit - 1.0).abs();
        let ok = if d == 1 { rel <= 1e-12 } else { rel <= 0.03 };
        pass &= ok;
        parts.push(format!(
            "d={d} nodes {} g_inf {:.5} (tol {})",
            ladder.solver.nodes,
            s.limit,
            if d == 1 { "exact" } else { "3e-2" }
        ));
        store.push(s);

        let xi: Vec<f64> = if d == 1 { vec![2.0] } else { vec![1.0, 0.5] };
        let sep = separation_check(&seq, &x0, &xi, &[1.0], &nu, &ladder, 0.02).unwrap();
        pass &= sep.bulk_gap_rel <= 0.02 && sep.surface_gap_rel <= 0.02;
        parts.push(format!(
            "d={d} separation bulk gap {:.2e} surface gap {:.2e} (tol 2e-2)",
            sep.bulk_gap_rel, sep.surface_gap_rel
        ));
        store.extend([sep.bulk_sbv, sep.bulk_sobolev, sep.surface_sbv, sep.surface_pc]);
    }
    Verdict::new(pass, parts.join("; "))
}

fn criterion_6(store: &[DensityEstimate]) -> Verdict {
    let mut checked = 0;
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for est in store.iter().filter(|e| e.class == CompetitorClass::Sbv) {
        for pt in &est.points {
            // pc competitors do not exist for affine data
            for reference in [pt.sobolev_normalized, pt.pc_normalized].into_iter().flatten() {
                checked += 1;
                if pt.normalized > reference {
                    violations += 1;
                    worst = worst.max((pt.normalized - reference) / reference);
                }
            }
        }
    }
    Verdict::new(
        checked > 0 && violations == 0,
        format!("{checked} comparisons, {violations} violations, worst excess {worst:.2e} (tol 0)"),
    )
}

fn criterion_7() -> Verdict {
    let seq = constant_seq();
    let ladder = Ladder {
        solver: SolverParams {
            nodes: 64,
            ..SolverParams::default()
        },
        ..Ladder::default()
    };
    let sigmas = [1.0, 0.5, 0.25, 0.125];
    let rep = perturbation_ladder(
        &seq,
        &[0.0],
        &[1.0],
        &[1.0],
        &sigmas,
        CompetitorClass::Sbv,
        &ladder,
        0.03,
    )
    .unwrap();
    let each = sigmas
        .iter()
        .zip(&rep.values)
        .all(|(s, v)| (v - (1.0 + s)).abs() <= 0.03 * (1.0 + s));
    let extrap = (rep.extrapolated - 1.0).abs();
    Verdict::new(
        each && rep.monotone && rep.bounded_below && extrap <= 0.03,
        format!(
            "values {:?}, monotone {}, extrapolated {:.5} (tol 3e-2)",
            rep.values.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
            rep.monotone,
            rep.extrapolated
        ),
    )
}

/// Minimizer of `Σ h a_e |s_e|^p` subject to `Σ h s_e = total`.
fn flux_slopes(a: &[f64], p: f64, h: f64, total: f64) -> Vec<f64> {
    let q = 1.0 / (p - 1.0);
    let slope = |lam: f64, ae: f64| lam.signum() * (lam.abs() / (p * ae)).powf(q);
    let sum = |lam: f64| a.iter().map(|&ae| h * slope(lam, ae)).sum::<f64>();
    let (mut lo, mut hi) = (-1.0, 1.0);
    while sum(lo) > total {
        lo *= 2.0;
    }
    while sum(hi) < total {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sum(mid) < total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lam = 0.5 * (lo + hi);
    a.iter().map(|&ae| slope(lam, ae)).collect()
}

/// Exhaustive minimum over crack subsets of the owned edges; every
/// Dirichlet chain is solved exactly by flux constancy.
fn brute_force_1d(problem: &CellProblem, a: &[f64], p: f64) -> f64 {
    let (ctx, region, datum) = problem.blow_up().unwrap();
    let g = datum.grid().clone();
    let n = g.node_count();
    let h = g.h();
    // free iff both incident edges are owned
    let free: Vec<bool> = (0..n)
        .map(|i| i > 0 && region.contains(i - 1) && region.contains(i))
        .collect();
    let owned: Vec<usize> = (0..n - 1).filter(|&i| region.contains(i)).collect();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << owned.len()) {
        let mut cut = vec![false; n - 1];
        let mut cracks = Vec::new();
        for (b, &e) in owned.iter().enumerate() {
            if mask >> b & 1 == 1 {
                cut[e] = true;
                cracks.push(g.edge_from(e, 0).unwrap().id);
            }
        }
        let mut vals = datum.values().to_vec();
        let mut start = 0;
        while start < n {
            let mut end = start;
            while end + 1 < n && !cut[end] {
                end += 1;
            }
            let fixed: Vec<usize> = (start..=end).filter(|&i| !free[i]).collect();
            if let (Some(&first), Some(&last)) = (fixed.first(), fixed.last()) {
                for i in start..first {
                    vals[i] = vals[first];
                }
                for i in last + 1..=end {
                    vals[i] = vals[last];
                }
                for w in fixed.windows(2) {
                    let (l, r) = (w[0], w[1]);
                    let s = flux_slopes(&a[l..r], p, h, vals[r] - vals[l]);
                    for i in l + 1..r {
                        vals[i] = vals[i - 1] + h * s[i - 1 - l];
                    }
                }
            }
            start = end + 1;
        }
        let base = GridFunction::new(g.clone(), 1, vals).unwrap();
        let cand = SbvGridFunction::new(base, &cracks).unwrap();
        best = best.min(eval_energy(&ctx, &cand, &region).unwrap().total);
    }
    best
}

fn criterion_8() -> Verdict {
    let mut r = rng(8);
    let levels: Vec<f64> = (1..=8).map(|k| 0.25 * k as f64).collect();
    let mut within = 0;
    let mut worst: f64 = 0.0;
    for inst in 0..50 {
        let nodes = r.gen_range(6..=12);
        let h = 2.0 / nodes as f64;
        let p = [1.5, 2.0, 3.0][r.gen_range(0..3)];
        let a: Vec<f64> = (0..nodes).map(|_| 4.0 * levels[r.gen_range(0..8)]).collect();
        let kappa = levels[r.gen_range(0..8)];
        let (amin, amax) = a.iter().fold((f64::MAX, 0.0f64), |(l, u), &v| (l.min(v), u.max(v)));
        let coeff = a.clone();
        let bulk = BulkDensity::new(
            "edgewise",
            move |x, xi| {
                let e = (((x[0] + 1.0) / h) - 0.5).round() as usize;
                coeff[e.min(coeff.len() - 1)] * xi[0].abs().powf(p)
            },
            amin,
            amax,
            ExponentField::constant(p),
        )
        .unwrap();
        let datum = if inst % 2 == 0 {
            BoundaryDatum::Affine {
                u0: vec![levels[r.gen_range(0..8)] - 1.0],
                xi: vec![2.0 * levels[r.gen_range(0..8)] - 2.25],
            }
        } else {
            let ia = r.gen_range(0..8);
            let ib = (ia + r.gen_range(1..8)) % 8;
            BoundaryDatum::Jump {
                a: vec![2.0 * levels[ia]],
                b: vec![2.0 * levels[ib]],
                nu: vec![1.0],
            }
        };
        let problem = CellProblem {
            bulk,
            surface: const_surface(kappa).unwrap(),
            dim: 1,
            datum,
            center: vec![0.0],
            radius: 1.0,
            class: CompetitorClass::Sbv,
            params: SolverParams {
                nodes,
                seed: inst as u64,
                ..SolverParams::default()
            },
        };
        let oracle = brute_force_1d(&problem, &a, p);
        let got = solve_cell(&problem).unwrap().energy;
        let rel = (got - oracle).abs() / oracle.max(1e-12);
        worst = worst.max(rel);
        if rel <= 0.02 {
            within += 1;
        }
    }
    Verdict::new(
        within == 50,
        format!("{within}/50 instances within 2% of exhaustive enumeration, worst rel {worst:.2e}"),
    )
}

fn criterion_9() -> Verdict {
    let g = Grid::cube(2, 9, -1.0, 1.0).unwrap();
    let budget = 2000;
    let exp = ExponentField::Affine {
        base: 2.0,
        slope: vec![0.3, -0.2],
    };
    let catalog: Vec<(&str, EnergyContext)> = vec![
        (
            "power+const_surface",
            EnergyContext::new(power(exp.clone()).unwrap(), const_surface(1.0).unwrap(), g.clone()),
        ),
        (
            "weighted_power+capped_linear",
            EnergyContext::new(
                weighted_power(PeriodicCoefficient::new(vec![1.0, 4.0]).unwrap(), exp.clone())
                    .unwrap(),
                capped_linear(1.0, 3.0).unwrap(),
                g.clone(),
            ),
        ),
        (
            "power+linear_surface",
            EnergyContext::new(power(exp.clone()).unwrap(), linear_surface(1.0).unwrap(), g.clone()),
        ),
    ];
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, ctx) in &catalog {
        let rep = validate_hypotheses(ctx, budget, 9);
        pass &= rep.passed();
        if !rep.passed() {
            let failed: Vec<_> = rep.failures().map(|c| c.name).collect();
            parts.push(format!("{name} failed {failed:?}"));
        }
    }
    parts.push(format!("{} catalog entries pass", catalog.len()));

    let unbounded = SurfaceDensity::new(
        "unbounded",
        |_, z, _| 1.0 + z.iter().map(|v| v * v).sum::<f64>().sqrt(),
        1.0,
        2.0,
        1.0,
        GrowthMode::Bounded,
    )
    .unwrap();
    let asymmetric = SurfaceDensity::new(
        "asymmetric",
        // odd in ζ alone, so g(x, −ζ, −ν) ≠ g(x, ζ, ν)
        |_, z, _| 1.5 + 0.5 * z[0].tanh(),
        1.0,
        2.0,
        1.0,
        GrowthMode::Bounded,
    )
    .unwrap();
    let low = BulkDensity::new(
        "below_alpha",
        |_, xi| 0.5 * xi.iter().map(|v| v * v).sum::<f64>(),
        1.0,
        1.0,
        ExponentField::constant(2.0),
    )
    .unwrap();
    let seeded = [
        (
            "g3",
            EnergyContext::new(power(exp.clone()).unwrap(), unbounded, g.clone()),
        ),
        (
            "g7",
            EnergyContext::new(power(exp.clone()).unwrap(), asymmetric, g.clone()),
        ),
        (
            "f2_lower",
            EnergyContext::new(low, const_surface(1.0).unwrap(), g.clone()),
        ),
    ];
    for (check, ctx) in &seeded {
        let rep = validate_hypotheses(ctx, budget, 9);
        let c = rep.check(check).unwrap();
        let detected = c.violations > 0 && c.witness.is_some();
        pass &= detected;
        parts.push(format!(
            "{check} counterexample {}",
            if detected { "detected" } else { "missed" }
        ));
    }
    Verdict::new(pass, parts.join("; "))
}

fn main() -> ExitCode {
    let mut estimates = Vec::new();
    let secs = Duration::from_secs;
    let results = [
        run(1, "norm-modular suite", Some(secs(5)), criterion_1),
        run(2, "truncation suite", Some(secs(5)), criterion_2),
        run(3, "fundamental estimate", Some(secs(30)), criterion_3),
        run(4, "1D homogenization", Some(secs(120)), || criterion_4(&mut estimates)),
        run(5, "surface identification and separation", Some(secs(180)), || {
            criterion_5(&mut estimates)
        }),
        run(6, "class monotonicity", None, || criterion_6(&estimates)),
        run(7, "perturbation ladder", Some(secs(60)), criterion_7),
        run(8, "1D brute-force equivalence", Some(secs(60)), criterion_8),
        run(9, "hypothesis validators", None, criterion_9),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
