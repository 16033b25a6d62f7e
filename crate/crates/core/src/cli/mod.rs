//! Command-line experiments: configuration, orchestration and artifacts.
//!
//! Every run writes `report.txt` (verdicts, tallies, wall clock and the
//! effective configuration), `config.toml` (the same configuration alone)
//! and `checks.csv`; density experiments also write `ladder.csv`. Both CSV
//! files start with a `format_version,1` line.

mod config;
mod suites;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

pub use config::{
    BulkConfig, CellConfig, DensityConfig, ExperimentConfig, ExperimentKind, ExponentConfig,
    HomogenizeConfig, PerturbationConfig, PointConfig, SamplingConfig, SequenceKind,
    SurfaceConfig,
};

use crate::cell::{admissible_check, solve_cell, CellProblem, CompetitorClass};
use crate::energy::{const_surface, validate_hypotheses, EnergyContext, PeriodicCoefficient};
use crate::error::{Error, Result};
use crate::limits::{
    estimate_bulk_density, estimate_surface_density, homogenize_oracle_1d, perturbation_ladder,
    separation_check, DensityEstimate, DensitySequence, LadderPoint,
};
use crate::varexp::{ExponentField, Grid};

pub const FORMAT_VERSION: u32 = 1;

/// Exit status of the command-line tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass = 0,
    Fail = 1,
    ConfigError = 2,
    NonConvergence = 3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub tolerance: String,
}

impl Verdict {
    pub fn new(
        name: impl Into<String>,
        passed: bool,
        detail: impl Into<String>,
        tolerance: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
            tolerance: tolerance.into(),
        }
    }

    fn relative(name: &str, value: f64, reference: f64, tol: f64) -> Self {
        let rel = (value - reference).abs() / reference.abs().max(f64::MIN_POSITIVE);
        Self::new(
            name,
            rel <= tol,
            format!("{value:.6} vs {reference:.6}, relative error {rel:.3e}"),
            format!("{tol:e} relative"),
        )
    }
}

/// Count of asserted invariants and their violations.
#[derive(Debug, Clone, PartialEq)]
pub struct Tally {
    pub name: String,
    pub checked: usize,
    pub violations: usize,
}

impl Tally {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            checked: 0,
            violations: 0,
        }
    }

    pub fn record(&mut self, ok: bool) {
        self.checked += 1;
        if !ok {
            self.violations += 1;
        }
    }
}

/// A ladder point with the estimate it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderRow {
    pub label: String,
    pub point: LadderPoint,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    /// Effective configuration, overrides applied.
    pub config: ExperimentConfig,
    pub verdicts: Vec<Verdict>,
    pub tallies: Vec<Tally>,
    pub rows: Vec<LadderRow>,
    pub wall_clock: Duration,
    /// Set when a solver gave up; verdicts are then incomplete.
    pub error: Option<String>,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.verdicts.iter().all(|v| v.passed)
    }

    pub fn status(&self) -> Status {
        if self.error.is_some() {
            Status::NonConvergence
        } else if self.passed() {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let c = &self.config;
        let _ = writeln!(s, "experiment: {}", c.experiment);
        let _ = writeln!(s, "seed: {}", c.seed);
        let _ = writeln!(s, "wall clock: {:.3} s", self.wall_clock.as_secs_f64());
        if let Some(e) = &self.error {
            let _ = writeln!(s, "aborted: {e}");
        }
        let _ = writeln!(s, "\nverdicts:");
        for v in &self.verdicts {
            let _ = writeln!(
                s,
                "  {} {}: {} (tolerance {})",
                if v.passed { "PASS" } else { "FAIL" },
                v.name,
                v.detail,
                v.tolerance
            );
        }
        if !self.tallies.is_empty() {
            let _ = writeln!(s, "\ninvariant tallies:");
            for t in &self.tallies {
                let _ = writeln!(s, "  {}: {} checked, {} violations", t.name, t.checked, t.violations);
            }
        }
        let passed = self.verdicts.iter().filter(|v| v.passed).count();
        let _ = writeln!(
            s,
            "\nresult: {} ({passed}/{} verdicts passed)",
            match self.status() {
                Status::Pass => "PASS",
                Status::NonConvergence => "NON-CONVERGENCE",
                _ => "FAIL",
            },
            self.verdicts.len()
        );
        let _ = writeln!(s, "\n# configuration\n{}", c.to_toml());
        s
    }

    pub fn ladder_csv(&self) -> String {
        let mut s = format!("format_version,{FORMAT_VERSION}\n");
        s.push_str("estimate,eps,j,nodes,h,class,raw_m,normalized,iterations,multistart_spread\n");
        for r in &self.rows {
            let p = &r.point;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.label,
                p.eps,
                p.j,
                p.nodes,
                p.h,
                class_name(p.class),
                p.raw_m,
                p.normalized,
                p.iterations,
                p.multistart_spread
            );
        }
        s
    }

    pub fn checks_csv(&self) -> String {
        let mut s = format!("format_version,{FORMAT_VERSION}\n");
        s.push_str("check,passed,checked,violations\n");
        for v in &self.verdicts {
            let _ = writeln!(s, "{},{},,", csv_field(&v.name), v.passed);
        }
        for t in &self.tallies {
            let _ = writeln!(s, "{},,{},{}", csv_field(&t.name), t.checked, t.violations);
        }
        s
    }

    /// Writes the report and CSV files into `config.out`.
    pub fn write(&self) -> Result<()> {
        let out = &self.config.out;
        fs::create_dir_all(out)?;
        fs::write(out.join("report.txt"), self.to_text())?;
        fs::write(out.join("config.toml"), self.config.to_toml())?;
        fs::write(out.join("checks.csv"), self.checks_csv())?;
        if !self.rows.is_empty() {
            fs::write(out.join("ladder.csv"), self.ladder_csv())?;
        }
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn class_name(c: CompetitorClass) -> &'static str {
    match c {
        CompetitorClass::Sbv => "sbv",
        CompetitorClass::Sobolev => "sobolev",
        CompetitorClass::Pc => "pc",
    }
}

/// Overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<std::path::PathBuf>,
    pub grid_nodes: Option<usize>,
    pub tolerance: Option<f64>,
}

impl ExperimentConfig {
    /// Applies `o` and makes the top-level seed drive every solver.
    pub fn effective(mut self, o: &Overrides) -> Result<Self> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(n) = o.grid_nodes {
            self.ladder.solver.nodes = n;
            self.cell.solver.nodes = n;
            self.sampling.nodes = n;
        }
        if let Some(t) = o.tolerance {
            self.tolerance = t;
        }
        self.ladder.solver.seed = self.seed;
        self.cell.solver.seed = self.seed;
        self.validate()?;
        Ok(self)
    }
}

#[derive(Default)]
struct Collected {
    verdicts: Vec<Verdict>,
    tallies: Vec<Tally>,
    rows: Vec<LadderRow>,
}

impl Collected {
    fn estimate(&mut self, label: &str, est: &DensityEstimate) {
        self.rows.extend(est.points.iter().map(|p| LadderRow {
            label: label.to_string(),
            point: p.clone(),
        }));
        if est.warning {
            self.verdicts.push(Verdict::new(
                format!("{label} tail spread"),
                true,
                format!("warning: spread {:.3e} above threshold", est.tail_spread),
                "informational",
            ));
        }
    }

    /// sbv ≤ min(sobolev, pc) at every ladder point.
    fn monotonicity(&mut self, estimates: &[&DensityEstimate]) {
        let mut t = Tally::new("class monotonicity");
        for est in estimates.iter().filter(|e| e.class == CompetitorClass::Sbv) {
            for p in &est.points {
                for r in [p.sobolev_normalized, p.pc_normalized].into_iter().flatten() {
                    t.record(p.normalized <= r);
                }
            }
        }
        if t.checked > 0 {
            self.verdicts.push(Verdict::new(
                "class monotonicity",
                t.violations == 0,
                format!("{} of {} comparisons violate", t.violations, t.checked),
                "exact",
            ));
            self.tallies.push(t);
        }
    }

    fn expected(&mut self, cfg: &ExperimentConfig, name: &str, value: f64) {
        if let Some(e) = cfg.expected {
            self.verdicts.push(Verdict::relative(name, value, e, cfg.tolerance));
        }
    }
}

/// Runs the experiment. Solver non-convergence yields a report with the
/// error recorded; other failures are returned.
pub fn run(config: &ExperimentConfig, base: &Path) -> Result<ExperimentReport> {
    config.validate()?;
    let t = Instant::now();
    let mut c = Collected::default();
    let error = match execute(config, base, &mut c) {
        Ok(()) => None,
        Err(e @ Error::NonConvergence { .. }) => Some(e.to_string()),
        Err(e) => return Err(e),
    };
    Ok(ExperimentReport {
        config: config.clone(),
        verdicts: c.verdicts,
        tallies: c.tallies,
        rows: c.rows,
        wall_clock: t.elapsed(),
        error,
    })
}

fn execute(cfg: &ExperimentConfig, base: &Path, c: &mut Collected) -> Result<()> {
    let pt = &cfg.point;
    let tol = cfg.tolerance;
    match cfg.experiment {
        ExperimentKind::Norms | ExperimentKind::Truncation | ExperimentKind::Glue => {
            let (v, t) = match cfg.experiment {
                ExperimentKind::Norms => suites::norms(&cfg.sampling, cfg.seed)?,
                ExperimentKind::Truncation => suites::truncation(&cfg.sampling, cfg.seed)?,
                _ => suites::glue(&cfg.sampling, cfg.seed)?,
            };
            c.verdicts.extend(v);
            c.tallies.extend(t);
        }
        ExperimentKind::Cell => {
            let cc = &cfg.cell;
            let problem = CellProblem {
                bulk: cfg.densities.bulk(base)?,
                surface: cfg.densities.surface.build()?,
                dim: cc.center.len(),
                datum: cc.datum.clone(),
                center: cc.center.clone(),
                radius: cc.radius,
                class: cc.class,
                params: cc.solver.clone(),
            };
            let s = solve_cell(&problem)?;
            c.verdicts.push(Verdict::new(
                "minimizer admissible",
                admissible_check(&problem, &s.minimizer),
                format!("energy {:.6}, normalized {:.6}", s.energy, s.normalized),
                "exact",
            ));
            let mut mono = Tally::new("class monotonicity");
            for r in [s.sobolev_energy, s.pc_energy].into_iter().flatten() {
                mono.record(s.energy <= r);
            }
            if mono.checked > 0 {
                c.verdicts.push(Verdict::new(
                    "class monotonicity",
                    mono.violations == 0,
                    format!("{} of {} comparisons violate", mono.violations, mono.checked),
                    "exact",
                ));
                c.tallies.push(mono);
            }
            c.expected(cfg, "normalized value vs expected", s.normalized);
            c.rows.push(LadderRow {
                label: "cell".into(),
                point: LadderPoint {
                    eps: cc.radius,
                    j: 1,
                    nodes: cc.solver.nodes,
                    h: s.h,
                    class: s.class,
                    raw_m: s.value,
                    normalized: s.normalized,
                    iterations: s.iterations,
                    multistart_spread: s.multistart_spread / s.normalizer,
                    sobolev_normalized: s.sobolev_energy.map(|e| e / s.normalizer),
                    pc_normalized: s.pc_energy.map(|e| e / s.normalizer),
                },
            });
        }
        ExperimentKind::BulkDensity => {
            let seq = cfg.densities.sequence(base)?;
            let est = estimate_bulk_density(&seq, &pt.x0, &pt.xi, pt.class, &cfg.ladder)?;
            c.estimate("bulk", &est);
            c.monotonicity(&[&est]);
            c.expected(cfg, "bulk density vs expected", est.limit);
        }
        ExperimentKind::SurfaceDensity => {
            let seq = cfg.densities.sequence(base)?;
            let est = estimate_surface_density(&seq, &pt.x0, &pt.zeta, &pt.nu, pt.class, &cfg.ladder)?;
            c.estimate("surface", &est);
            c.monotonicity(&[&est]);
            c.expected(cfg, "surface density vs expected", est.limit);
        }
        ExperimentKind::Separation => {
            let seq = cfg.densities.sequence(base)?;
            let r = separation_check(&seq, &pt.x0, &pt.xi, &pt.zeta, &pt.nu, &cfg.ladder, tol)?;
            for (label, est) in [
                ("bulk_sbv", &r.bulk_sbv),
                ("bulk_sobolev", &r.bulk_sobolev),
                ("surface_sbv", &r.surface_sbv),
                ("surface_pc", &r.surface_pc),
            ] {
                c.estimate(label, est);
            }
            c.verdicts.push(Verdict::new(
                "bulk: sbv vs sobolev",
                r.bulk_pass,
                format!(
                    "{:.6} vs {:.6}, relative gap {:.3e}",
                    r.bulk_sbv.limit, r.bulk_sobolev.limit, r.bulk_gap_rel
                ),
                format!("{tol:e} plus relative tail spread"),
            ));
            c.verdicts.push(Verdict::new(
                "surface: sbv vs pc",
                r.surface_pass,
                format!(
                    "{:.6} vs {:.6}, relative gap {:.3e}",
                    r.surface_sbv.limit, r.surface_pc.limit, r.surface_gap_rel
                ),
                format!("{tol:e} plus relative tail spread"),
            ));
            c.monotonicity(&[&r.bulk_sbv, &r.surface_sbv]);
        }
        ExperimentKind::Perturbation => {
            let seq = cfg.densities.sequence(base)?;
            let sigmas = &cfg.perturbation.sigmas;
            let r = perturbation_ladder(&seq, &pt.x0, &pt.zeta, &pt.nu, sigmas, pt.class, &cfg.ladder, tol)?;
            for (s, est) in sigmas.iter().zip(&r.estimates) {
                c.estimate(&format!("sigma={s}"), est);
            }
            c.estimate("unperturbed", &r.unperturbed);
            let values: Vec<String> = r.values.iter().map(|v| format!("{v:.6}")).collect();
            c.verdicts.push(Verdict::new(
                "monotone in sigma",
                r.monotone,
                format!("values {}", values.join(" ")),
                format!("{tol:e} relative"),
            ));
            c.verdicts.push(Verdict::new(
                "bounded below by the unperturbed estimate",
                r.bounded_below,
                format!("unperturbed {:.6}", r.unperturbed.limit),
                format!("{tol:e} relative"),
            ));
            c.verdicts.push(Verdict::relative(
                "extrapolation to sigma = 0",
                r.extrapolated,
                r.unperturbed.limit,
                tol,
            ));
            let all: Vec<&DensityEstimate> = r.estimates.iter().chain([&r.unperturbed]).collect();
            c.monotonicity(&all);
        }
        ExperimentKind::Homogenize1d => {
            let h = &cfg.homogenize;
            let coeff = PeriodicCoefficient::new(h.a.clone())?;
            let seq = DensitySequence::homogenization(
                coeff,
                ExponentField::constant(h.p),
                const_surface(h.kappa)?,
            )?;
            let est = estimate_bulk_density(&seq, &pt.x0, &[h.xi], CompetitorClass::Sbv, &cfg.ladder)?;
            let oracle = homogenize_oracle_1d(&h.a, h.p, h.xi)?;
            c.estimate("homogenized", &est);
            c.verdicts.push(Verdict::relative("estimate vs oracle", est.limit, oracle.value, tol));
            let flux = (oracle.value - oracle.flux_value).abs() / oracle.value.abs().max(f64::MIN_POSITIVE);
            c.verdicts.push(Verdict::new(
                "oracle vs flux-constancy solve",
                flux <= 1e-8,
                format!("{:.10} vs {:.10}", oracle.value, oracle.flux_value),
                "1e-8 relative",
            ));
            c.monotonicity(&[&est]);
            c.expected(cfg, "estimate vs expected", est.limit);
        }
        ExperimentKind::Validate => {
            let s = &cfg.sampling;
            let grid = Grid::cube(s.dim, s.nodes, -1.0, 1.0)?;
            let bulk = cfg.densities.bulk(base)?;
            let ctx = EnergyContext::new(bulk, cfg.densities.surface.build()?, grid);
            let rep = validate_hypotheses(&ctx, s.budget, cfg.seed);
            for chk in &rep.checks {
                let detail = match (&chk.witness, chk.skipped) {
                    (_, true) => "skipped: no modulus declared".to_string(),
                    (Some(w), _) => format!("{} of {} samples violate; first {w}", chk.violations, chk.samples),
                    (None, _) => format!("{} samples", chk.samples),
                };
                c.verdicts.push(Verdict::new(chk.name, chk.passed(), detail, "1e-12 relative"));
                c.tallies.push(Tally {
                    name: chk.name.to_string(),
                    checked: chk.samples,
                    violations: chk.violations,
                });
            }
        }
    }
    Ok(())
}
