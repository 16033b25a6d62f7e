//! Monte-Carlo checks of the structural hypotheses on densities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{norm, EnergyContext, GrowthMode};

const RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub samples: usize,
    pub violations: usize,
    /// First violating sample.
    pub witness: Option<String>,
    /// No modulus was declared, so the check did not run.
    pub skipped: bool,
}

impl HypothesisCheck {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            samples: 0,
            violations: 0,
            witness: None,
            skipped: false,
        }
    }

    fn record(&mut self, ok: bool, witness: impl FnOnce() -> String) {
        self.samples += 1;
        if !ok {
            self.violations += 1;
            if self.witness.is_none() {
                self.witness = Some(witness());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub seed: u64,
    pub checks: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(HypothesisCheck::passed)
    }

    pub fn check(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &HypothesisCheck> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

struct Sampler {
    rng: ChaCha8Rng,
    lo: [f64; 2],
    hi: [f64; 2],
    d: usize,
}

impl Sampler {
    fn point(&mut self) -> Vec<f64> {
        (0..self.d)
            .map(|k| self.rng.gen_range(self.lo[k]..=self.hi[k]))
            .collect()
    }

    fn direction(&mut self, len: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..len).map(|_| self.rng.gen_range(-1.0..1.0)).collect();
            let r = norm(&v);
            if r > 1e-3 && r <= 1.0 {
                return v.into_iter().map(|a| a / r).collect();
            }
        }
    }

    /// Magnitude spread log-uniformly over `[10^lo, 10^hi]`.
    fn magnitude(&mut self, lo: f64, hi: f64) -> f64 {
        10f64.powf(self.rng.gen_range(lo..hi))
    }

    fn vector(&mut self, len: usize) -> Vec<f64> {
        let r = self.magnitude(-2.0, 2.0);
        self.direction(len).into_iter().map(|a| a * r).collect()
    }

    fn with_norm(&mut self, len: usize, r: f64) -> Vec<f64> {
        self.direction(len).into_iter().map(|a| a * r).collect()
    }
}

fn le(a: f64, b: f64) -> bool {
    a <= b + RTOL * (1.0 + b.abs())
}

/// Samples `budget` points per hypothesis; deterministic for a fixed seed.
pub fn validate_hypotheses(ctx: &EnergyContext, budget: usize, seed: u64) -> HypothesisReport {
    let grid = &ctx.grid;
    let d = grid.dim();
    let m = ctx.components;
    let mut lo = [0.0; 2];
    let mut hi = [0.0; 2];
    for k in 0..d {
        lo[k] = grid.origin()[k];
        hi[k] = lo[k] + grid.extents()[k] as f64 * grid.h();
    }
    let mut s = Sampler {
        rng: ChaCha8Rng::seed_from_u64(seed),
        lo,
        hi,
        d,
    };
    let f = &ctx.bulk;
    let g = &ctx.surface;
    let (alpha, beta) = (f.alpha(), f.beta());

    let mut f2_lower = HypothesisCheck::new("f2_lower");
    let mut f2_upper = HypothesisCheck::new("f2_upper");
    for _ in 0..budget {
        let x = s.point();
        let xi = s.vector(m * d);
        let v = f.eval(&x, &xi);
        let r = norm(&xi).powf(f.exponent().eval(&x));
        f2_lower.record(v.is_finite() && le(alpha * r, v), || {
            format!("x={x:?} xi={xi:?} f={v} < alpha|xi|^p={}", alpha * r)
        });
        f2_upper.record(v.is_finite() && le(v, beta * (1.0 + r)), || {
            format!("x={x:?} xi={xi:?} f={v} > beta(1+|xi|^p)={}", beta * (1.0 + r))
        });
    }

    let mut f3 = HypothesisCheck::new("f3");
    match f.modulus() {
        None => f3.skipped = true,
        Some(w) => {
            for _ in 0..budget {
                let x = s.point();
                let xi1 = s.vector(m * d);
                let t = s.magnitude(-4.0, 0.0) * (1.0 + norm(&xi1));
                let dxi = s.with_norm(m * d, t);
                let xi2: Vec<f64> = xi1.iter().zip(&dxi).map(|(a, b)| a + b).collect();
                let (a, b) = (f.eval(&x, &xi1), f.eval(&x, &xi2));
                let bound = w(norm(&dxi)) * (1.0 + a + b);
                f3.record(le((a - b).abs(), bound), || {
                    format!("x={x:?} xi1={xi1:?} xi2={xi2:?} |df|={} > {bound}", (a - b).abs())
                });
            }
        }
    }

    let c = g.c();
    let mut g2 = HypothesisCheck::new("g2");
    let mut g3 = HypothesisCheck::new(match g.mode() {
        GrowthMode::Bounded => "g3",
        GrowthMode::Linear => "g3_linear",
    });
    let mut g5 = HypothesisCheck::new("g5");
    let mut g6 = HypothesisCheck::new("g6");
    let mut g7 = HypothesisCheck::new("g7");
    g6.skipped = g.modulus().is_none();
    for _ in 0..budget {
        let x = s.point();
        let nu = s.direction(d);
        let z1 = s.vector(m);
        let r1 = norm(&z1);

        let v = g.eval(&x, &z1, &nu);
        let upper = match g.mode() {
            GrowthMode::Bounded => g.beta(),
            GrowthMode::Linear => g.beta() * (1.0 + r1),
        };
        g3.record(v.is_finite() && le(g.alpha(), v) && le(v, upper), || {
            format!("x={x:?} zeta={z1:?} nu={nu:?} g={v} outside [{}, {upper}]", g.alpha())
        });

        let factor = 1.0 + s.rng.gen_range(0.0..2.0);
        let z2 = s.with_norm(m, c * r1 * factor);
        let v2 = g.eval(&x, &z2, &nu);
        g2.record(le(v, v2), || {
            format!("x={x:?} zeta1={z1:?} zeta2={z2:?} nu={nu:?} g1={v} > g2={v2}")
        });

        let z3 = s.with_norm(m, r1 * factor);
        let v3 = g.eval(&x, &z3, &nu);
        g5.record(le(v, c * v3), || {
            format!("x={x:?} zeta1={z1:?} zeta2={z3:?} nu={nu:?} g1={v} > c*g2={}", c * v3)
        });

        if let Some(w) = g.modulus() {
            let t = s.magnitude(-4.0, 0.0) * (1.0 + r1);
            let dz = s.with_norm(m, t);
            let z4: Vec<f64> = z1.iter().zip(&dz).map(|(a, b)| a + b).collect();
            if norm(&z4) > 0.0 {
                let v4 = g.eval(&x, &z4, &nu);
                let bound = w(norm(&dz)) * (v + v4);
                g6.record(le((v - v4).abs(), bound), || {
                    format!("x={x:?} zeta1={z1:?} zeta2={z4:?} |dg|={} > {bound}", (v - v4).abs())
                });
            }
        }

        let mz: Vec<f64> = z1.iter().map(|a| -a).collect();
        let mnu: Vec<f64> = nu.iter().map(|a| -a).collect();
        let vm = g.eval(&x, &mz, &mnu);
        g7.record((v - vm).abs() <= RTOL * (1.0 + v.abs()), || {
            format!("x={x:?} zeta={z1:?} nu={nu:?} g={v} but g(-zeta,-nu)={vm}")
        });
    }

    HypothesisReport {
        seed,
        checks: vec![f2_lower, f2_upper, f3, g2, g3, g5, g6, g7],
    }
}
