//! Alternating minimization over values and cracks, with multistarts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BoundaryDatum, CellProblem, CellSolution, CompetitorClass, Setup, SolverParams};
use crate::error::{Error, Result};
use crate::sbv::SbvGridFunction;

/// Probability of cracking an edge in a random start.
const SPRINKLE: f64 = 0.15;

struct Run {
    u: SbvGridFunction,
    energy: f64,
    iterations: usize,
    trace: Vec<f64>,
}

pub(crate) fn solve_sbv(setup: &Setup, problem: &CellProblem) -> Result<CellSolution> {
    let params = &problem.params;
    let grid = setup.datum.grid().clone();
    let mut starts: Vec<SbvGridFunction> = Vec::new();

    // the datum's first relaxation is the Sobolev minimizer
    let sobolev = setup.solve_sobolev(&setup.datum, params)?;
    starts.push(sobolev.minimizer.clone());

    let mut interface = setup.datum.clone();
    let normal_axis = match &problem.datum {
        BoundaryDatum::Jump { nu, .. } => nu.iter().position(|v| *v != 0.0).unwrap_or(0),
        BoundaryDatum::Affine { .. } => 0,
    };
    for e in grid.edges() {
        if e.axis != normal_axis {
            continue;
        }
        let (yb, yh) = (grid.position(e.base)[e.axis], grid.position(e.head)[e.axis]);
        if (yb > 0.0) != (yh > 0.0) {
            interface.set_crack(e.id, true);
        }
    }
    starts.push(interface);

    let pc = match &problem.datum {
        BoundaryDatum::Jump { a, b, .. } => {
            let s = setup.solve_pc(a, b)?;
            starts.push(s.minimizer.clone());
            Some(s.energy)
        }
        BoundaryDatum::Affine { .. } => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    for _ in starts.len()..params.multistarts.max(starts.len()) {
        let mut u = setup.datum.clone();
        for e in grid.edges() {
            if setup.region.contains(e.base) && rng.gen_bool(SPRINKLE) {
                u.set_crack(e.id, true);
            }
        }
        starts.push(u);
    }

    let mut runs: Vec<Run> = Vec::with_capacity(starts.len());
    for start in starts {
        match alternate(setup, params, start) {
            Ok(run) => runs.push(run),
            Err(Error::NonConvergence { iterations, best }) => {
                let mut best = *best;
                if let Some(r) = runs.iter().min_by(|a, b| a.energy.total_cmp(&b.energy)) {
                    if r.energy < best.energy {
                        best = setup.solution(
                            CompetitorClass::Sbv,
                            r.u.clone(),
                            r.energy,
                            r.iterations,
                            r.trace.clone(),
                        );
                    }
                }
                best.class = CompetitorClass::Sbv;
                return Err(Error::NonConvergence {
                    iterations,
                    best: Box::new(best),
                });
            }
            Err(e) => return Err(e),
        }
    }

    let energies: Vec<f64> = runs.iter().map(|r| r.energy).collect();
    let (lo, hi) = energies
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.energy < a.energy { b } else { a })
        .expect("at least two starts");
    let mut sol = setup.solution(
        CompetitorClass::Sbv,
        best.u,
        best.energy,
        best.iterations,
        best.trace,
    );
    sol.start_energies = energies;
    sol.multistart_spread = hi - lo;
    sol.sobolev_energy = Some(sobolev.energy);
    sol.pc_energy = pc;
    Ok(sol)
}

fn alternate(setup: &Setup, params: &SolverParams, mut u: SbvGridFunction) -> Result<Run> {
    let mut trace = vec![setup.energy(&u)?.total];
    let mut iterations = 0;
    for it in 1..=params.max_iter {
        iterations = it;
        let out = setup.relaxation(params).run(&mut u)?;
        trace.extend(&out.trace);
        if !out.converged {
            let energy = setup.energy(&u)?.total;
            return Err(Error::NonConvergence {
                iterations: it,
                best: Box::new(setup.solution(CompetitorClass::Sbv, u, energy, it, trace)),
            });
        }
        let changed = toggle_cracks(setup, &mut u)?;
        trace.push(setup.energy(&u)?.total);
        if changed == 0 {
            let energy = *trace.last().expect("nonempty trace");
            return Ok(Run {
                u,
                energy,
                iterations,
                trace,
            });
        }
    }
    let energy = setup.energy(&u)?.total;
    Err(Error::NonConvergence {
        iterations,
        best: Box::new(setup.solution(CompetitorClass::Sbv, u, energy, iterations, trace)),
    })
}

/// Sets every edge owned by the ball to its cheaper state given the
/// values; ties keep the edge uncracked. Returns the number of flips.
fn toggle_cracks(setup: &Setup, u: &mut SbvGridFunction) -> Result<usize> {
    let grid = u.grid().clone();
    let mut flips = 0;
    for e in grid.edges() {
        if !setup.region.contains(e.base) {
            continue;
        }
        let want = setup.ctx.crack_delta(u, &e)? < 0.0;
        if want != u.is_cracked(e.id) {
            u.set_crack(e.id, want);
            flips += 1;
        }
    }
    Ok(flips)
}
