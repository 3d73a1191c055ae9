//! Experiment configuration and the end-to-end run: data, grid, transport
//! plan, potentials, contours and the selected property checks, written as
//! one directory of artifacts.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{invalid, Error, Result};
use crate::generators::{Generator, GeneratorSpec};
use crate::io::{self, Format};
use crate::monge_ampere::{boundary_avoidance_check, ma_backward_density, transport_equation_check, Region};
use crate::ot::{solve_assignment, solve_sinkhorn, Dataset, PlanFile, SinkhornOptions, TransportPlan};
use crate::points::{norm, Points};
use crate::potential::{build_potentials, Potentials};
use crate::quantiles::{
    asymptotic_invariance_test, contour, contour_directions, homeomorphism_audit, rank_sign_independence_test, ranks_signs, ray_escape_test,
    support_recovery_test, QuantileContour,
};
use crate::reference::{GridShape, SphericalGrid};
use crate::rng::derive_seed;

/// Directions per contour.
pub const CONTOUR_DIRECTIONS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub generator: Option<GeneratorSpec>,
    #[serde(default)]
    pub input: Option<PathBuf>,
    /// Sample size; required with a generator, checked against the input.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default)]
    pub n_radii: Option<usize>,
    #[serde(default)]
    pub n_directions: Option<usize>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    #[serde(default)]
    pub tests: Vec<TestKind>,
    pub seed: u64,
    pub output: PathBuf,
}

fn default_levels() -> Vec<f64> {
    vec![0.25, 0.5, 0.75]
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SolverConfig {
    #[default]
    Exact,
    Sinkhorn {
        epsilon: f64,
        tol: f64,
        max_iter: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    Inverse,
    Boundary,
    Ma,
    Hausdorff,
    Ray,
    Invariance,
    Independence,
}

impl TestKind {
    /// Name of the property the test checks.
    pub fn property(self) -> &'static str {
        match self {
            TestKind::Inverse => "maps-are-mutual-inverses",
            TestKind::Boundary => "distribution-function-avoids-the-sphere",
            TestKind::Ma => "discrete-transport-equation",
            TestKind::Hausdorff => "contours-recover-the-support",
            TestKind::Ray => "outward-rays-escape-quantile-regions",
            TestKind::Invariance => "distribution-function-tends-to-the-direction",
            TestKind::Independence => "ranks-independent-of-signs",
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        match (&self.generator, &self.input) {
            (Some(_), Some(_)) => return Err(invalid("give either a generator or an input path, not both")),
            (None, None) => return Err(invalid("a generator or an input path is required")),
            (Some(g), None) => {
                let g = Generator::new(g.clone())?;
                if self.n.is_none() {
                    return Err(invalid("n is required with a generator"));
                }
                if self.d.is_some_and(|d| d != g.dim()) {
                    return Err(invalid(format!("d = {} does not match the generator dimension {}", self.d.unwrap(), g.dim())));
                }
            }
            (None, Some(_)) => {}
        }
        if self.n == Some(0) {
            return Err(invalid("n must be positive"));
        }
        if let Some(&r) = self.levels.iter().find(|&&r| !(r > 0.0 && r < 1.0)) {
            return Err(invalid(format!("level {r} outside (0, 1)")));
        }
        if self.n_radii.is_some() != self.n_directions.is_some() {
            return Err(invalid("give both n_radii and n_directions or neither"));
        }
        if let SolverConfig::Sinkhorn { epsilon, tol, max_iter } = self.solver {
            if !(epsilon > 0.0 && tol > 0.0 && max_iter > 0) {
                return Err(invalid("sinkhorn needs positive epsilon, tol and max_iter"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub test: TestKind,
    pub property: String,
    /// Whether the result counts towards the exit status.
    pub contracted: bool,
    /// `None` when the test did not apply.
    pub pass: Option<bool>,
    pub details: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub d: usize,
    pub n_radii: usize,
    pub n_directions: usize,
    pub origin_copies: usize,
    pub plan_kind: String,
    pub plan_cost: f64,
    pub duplicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub summary: Summary,
    pub entries: Vec<ReportEntry>,
    pub all_pass: bool,
}

impl Report {
    /// 0 when every contracted check passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.all_pass {
            0
        } else {
            1
        }
    }
}

/// Everything an experiment produces.
pub struct RunOutcome {
    pub report: Report,
    pub data: Dataset,
    pub grid: SphericalGrid,
    pub plan: TransportPlan,
    pub potentials: Potentials,
    pub contours: Vec<QuantileContour>,
}

/// Fits the maps for the configured data and runs the selected checks.
/// Nothing is written to disk.
pub fn execute(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.validate()?;
    let generator = config.generator.clone().map(Generator::new).transpose()?;
    let (data, duplicates) = match (&generator, &config.input) {
        (Some(g), _) => (g.sample(config.n.unwrap(), derive_seed(config.seed, "data"))?, 0),
        (None, Some(path)) => {
            let (data, summary) = io::ingest(path, None)?;
            (data, summary.duplicates)
        }
        (None, None) => unreachable!("validated"),
    };
    if config.n.is_some_and(|n| n != data.len()) || config.d.is_some_and(|d| d != data.dim()) {
        return Err(invalid(format!("input has n = {}, d = {}, which does not match the config", data.len(), data.dim())));
    }
    let (n, d) = (data.len(), data.dim());
    let shape = match (config.n_radii, config.n_directions) {
        (Some(n_radii), Some(n_directions)) => GridShape { n_radii, n_directions },
        _ => GridShape::auto(n, d),
    };
    let grid = SphericalGrid::with_shape(n, d, shape, derive_seed(config.seed, "grid"))?;
    let plan = match config.solver {
        SolverConfig::Exact => solve_assignment(&data, &grid)?,
        SolverConfig::Sinkhorn { epsilon, tol, max_iter } => solve_sinkhorn(&data, &grid, SinkhornOptions { epsilon, tol, max_iter })?,
    };
    let potentials = build_potentials(&plan, &data, &grid)?;
    let contours = config.levels.iter().map(|&r| contour(&potentials, r, CONTOUR_DIRECTIONS)).collect::<Result<Vec<_>>>()?;

    let mut tests = config.tests.clone();
    tests.sort_unstable();
    tests.dedup();
    let ctx = Context { config, generator: generator.as_ref(), data: &data, grid: &grid, plan: &plan, pot: &potentials };
    let entries = tests.into_iter().map(|t| ctx.run(t)).collect::<Result<Vec<_>>>()?;
    let all_pass = entries.iter().filter(|e| e.contracted).all(|e| e.pass != Some(false));
    let summary = Summary {
        n,
        d,
        n_radii: grid.n_radii(),
        n_directions: grid.n_directions(),
        origin_copies: grid.origin_copies(),
        plan_kind: if plan.sigma().is_some() { "exact".into() } else { "dense-coupling".into() },
        plan_cost: plan.cost(),
        duplicates,
    };
    let report = Report { config: config.clone(), summary, entries, all_pass };
    Ok(RunOutcome { report, data, grid, plan, potentials, contours })
}

/// Runs the experiment and writes its artifacts to `config.output`:
/// `dataset.csv`, `grid.json`, `plan.json`, `potentials.json`,
/// `contours.csv`, `report.json` and the timing sidecar `run_info.json`.
pub fn run(config: &ExperimentConfig) -> Result<Report> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let out = execute(config)?;
    write_artifacts(&config.output, &out)?;
    let info = json!({
        "started_unix_seconds": started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
        "elapsed_seconds": clock.elapsed().as_secs_f64(),
        "version": env!("CARGO_PKG_VERSION"),
    });
    io::write_json(&config.output.join("run_info.json"), &info)?;
    Ok(out.report)
}

pub fn write_artifacts(dir: &Path, out: &RunOutcome) -> Result<()> {
    io::write_points(&dir.join("dataset.csv"), out.data.points(), Format::Csv)?;
    io::write_json(&dir.join("grid.json"), &out.grid)?;
    io::write_json(&dir.join("plan.json"), &PlanFile::from(out.plan.clone()))?;
    io::write_json(&dir.join("potentials.json"), &out.potentials.to_file())?;
    io::write_atomic(&dir.join("contours.csv"), &io::contours_to_csv(&out.contours)?)?;
    io::write_json(&dir.join("report.json"), &out.report)
}

struct Context<'a> {
    config: &'a ExperimentConfig,
    generator: Option<&'a Generator>,
    data: &'a Dataset,
    grid: &'a SphericalGrid,
    plan: &'a TransportPlan,
    pot: &'a Potentials,
}

impl Context<'_> {
    fn run(&self, test: TestKind) -> Result<ReportEntry> {
        let exact = self.plan.sigma().is_some();
        let entry = |contracted: bool, pass: Option<bool>, details: Value| ReportEntry { test, property: test.property().into(), contracted, pass, details };
        let seed = derive_seed(self.config.seed, test.property());
        Ok(match test {
            TestKind::Inverse => {
                let audit = homeomorphism_audit(self.pot, self.data, 2000, seed)?;
                entry(exact, Some(audit.pass), serde_json::to_value(&audit)?)
            }
            TestKind::Boundary => {
                let interior = match self.data.support_hint() {
                    Some(h) => {
                        let idx: Vec<usize> = (0..self.data.len()).filter(|&i| h.depth(self.data.point(i)) > 0.0).collect();
                        self.data.points().subset(&idx)
                    }
                    None => self.data.points().clone(),
                };
                let rep = boundary_avoidance_check(self.pot, &interior);
                entry(exact, Some(rep.pass), serde_json::to_value(&rep)?)
            }
            TestKind::Ma => {
                let center = mean(self.data.points());
                let radius = median_distance(self.data.points(), &center);
                let region = Region::Ball { center, radius };
                let transport = transport_equation_check(self.pot, self.data, &region);
                let backward = match self.generator {
                    Some(g) => {
                        let b = Region::Annulus { center: vec![0.0; self.grid.dim()], inner: 0.25, outer: 0.5 };
                        let est = ma_backward_density(&b, &|x| g.density(x), self.pot, 20_000, seed, false)?;
                        serde_json::to_value(&est)?
                    }
                    None => Value::Null,
                };
                entry(exact, Some(transport.exact), json!({ "transport_equation": transport, "region": region, "backward_measure": backward }))
            }
            TestKind::Hausdorff => match self.generator.filter(|g| g.support().is_some_and(|h| h.is_bounded())) {
                Some(g) => {
                    let n = self.data.len();
                    let sizes = [n / 4, n / 2, n];
                    let level = self.config.levels.iter().cloned().fold(0.0, f64::max);
                    let rep = support_recovery_test(g.spec(), &sizes, &[level], CONTOUR_DIRECTIONS, 1000, seed)?;
                    entry(true, Some(rep.decreasing_in_n), serde_json::to_value(&rep)?)
                }
                None => entry(false, None, json!({ "skipped": "needs a generator with a compact convex support" })),
            },
            TestKind::Ray => {
                let convex = self.generator.is_none() || self.generator.is_some_and(|g| g.support().is_some());
                let mut reports = Vec::new();
                for &r in &self.config.levels {
                    reports.push(ray_escape_test(self.pot, r, 200, None)?);
                }
                let pass = reports.iter().all(|r| r.pass_fraction == 1.0);
                entry(convex, Some(pass), serde_json::to_value(&reports)?)
            }
            TestKind::Invariance => {
                let scale = self.data.points().iter().map(norm).fold(1.0, f64::max);
                let scales: Vec<f64> = (1..=7).map(|k| scale * f64::from(1u32 << k)).collect();
                let dirs = contour_directions(self.grid.dim(), 8)?;
                let rep = asymptotic_invariance_test(self.pot, &dirs, &scales)?;
                entry(exact, Some(rep.pass), serde_json::to_value(&rep)?)
            }
            TestKind::Independence => {
                if !exact || self.grid.n_radii() == 0 {
                    entry(false, None, json!({ "skipped": "needs an exact plan and at least one shell" }))
                } else {
                    let table = ranks_signs(self.pot, self.data)?;
                    let rep = rank_sign_independence_test(&table, self.grid.n_radii(), self.grid.n_directions())?;
                    entry(true, Some(rep.statistic == 0.0), serde_json::to_value(&rep)?)
                }
            }
        })
    }
}

fn mean(points: &Points) -> Vec<f64> {
    let mut m = vec![0.0; points.dim()];
    for p in points.iter() {
        m.iter_mut().zip(p).for_each(|(a, v)| *a += v);
    }
    m.iter_mut().for_each(|a| *a /= points.len() as f64);
    m
}

fn median_distance(points: &Points, center: &[f64]) -> f64 {
    let mut d: Vec<f64> = points.iter().map(|p| crate::points::dist(p, center)).collect();
    d.sort_by(f64::total_cmp);
    d[d.len() / 2].max(f64::MIN_POSITIVE)
}

/// Exit status for an error: 2 for configuration and input problems, 3 for
/// numeric failures.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Numeric(_) | Error::ConvergenceFailure { .. } => 3,
        _ => 2,
    }
}

/// Machine-readable form of an error.
pub fn error_json(e: &Error) -> Value {
    let kind = match e {
        Error::InvalidArgument(_) => "invalid-argument",
        Error::Numeric(_) => "numeric",
        Error::ConvergenceFailure { .. } => "convergence-failure",
        Error::UnsupportedPlanKind(_) => "unsupported-plan-kind",
        Error::OutOfDomain { .. } => "out-of-domain",
        Error::Parse { .. } => "parse",
        Error::Unsupported(_) => "unsupported",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    };
    json!({ "error": { "kind": kind, "message": e.to_string() }, "exit_code": error_exit_code(e) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(dir: &Path, tests: Vec<TestKind>) -> ExperimentConfig {
        ExperimentConfig {
            generator: Some(GeneratorSpec::unit_square()),
            input: None,
            n: Some(120),
            d: Some(2),
            n_radii: Some(10),
            n_directions: Some(12),
            solver: SolverConfig::Exact,
            levels: vec![0.3, 0.6, 0.9],
            tests,
            seed: 5,
            output: dir.to_path_buf(),
        }
    }

    #[test]
    fn uniform_box_inverse_and_boundary_pass() {
        let dir = tempfile::tempdir().unwrap();
        let report = run(&config(dir.path(), vec![TestKind::Inverse, TestKind::Boundary])).unwrap();
        assert!(report.all_pass, "{report:?}");
        assert_eq!(report.exit_code(), 0);
        for f in ["dataset.csv", "grid.json", "plan.json", "potentials.json", "contours.csv", "report.json", "run_info.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }

    #[test]
    fn oversized_grid_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(dir.path(), vec![]);
        c.n_radii = Some(11);
        let err = run(&c).err().unwrap();
        assert_eq!(error_exit_code(&err), 2);
    }

    #[test]
    fn repeated_runs_give_identical_reports() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let all = vec![TestKind::Inverse, TestKind::Boundary, TestKind::Ma, TestKind::Ray, TestKind::Invariance, TestKind::Independence];
        let mut ca = config(a.path(), all.clone());
        let mut cb = config(b.path(), all);
        // The output path is echoed in the report.
        ca.output = PathBuf::from("out");
        cb.output = PathBuf::from("out");
        let (ra, rb) = (execute(&ca).unwrap(), execute(&cb).unwrap());
        write_artifacts(a.path(), &ra).unwrap();
        write_artifacts(b.path(), &rb).unwrap();
        for f in ["report.json", "plan.json", "potentials.json", "contours.csv", "dataset.csv"] {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
        }
        assert!(ra.report.all_pass, "{:?}", ra.report.entries);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let good = r#"{"generator": {"kind": "spherical-uniform", "dim": 2}, "n": 10, "seed": 1, "output": "o"}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(good).is_ok());
        let bad = r#"{"generator": {"kind": "spherical-uniform", "dim": 2}, "n": 10, "seed": 1, "output": "o", "extra": 0}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(bad).is_err());
    }
}
