//! Coverage experiments: grid sweeps of initial states, parameter sweeps on
//! the benchmark and the random-system suite.
//!
//! Coverage is the fraction of in-region grid points at which a method's
//! robust OCP is feasible. Grids span the region's bounding box; points
//! outside the region are reported but never solved or counted.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{paper_benchmark, random_system, FilterMode, OcpSpec, SpecFile};
use crate::polytope::{max_rci, HPolytope, RciOptions};
use crate::qp::SolveStatus;
use crate::sls::{solve_sls, SynthesisOptions};
use crate::tolerances::MEMBERSHIP;
use crate::tube::{build_tube_controller, tube_feasible, TubeController, TubeScaling};

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "RMPC_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    TerminalSet,
    StateSet,
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "terminal" => Ok(Region::TerminalSet),
            "state" => Ok(Region::StateSet),
            _ => Err(Error::Validation(format!("unknown region {s:?} (terminal|state)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CoverageMethod {
    #[serde(rename = "sls")]
    Sls,
    #[serde(rename = "tube")]
    Tube,
    /// SLS with the filter restricted to its diagonal blocks.
    #[serde(rename = "sls-diag")]
    SlsDiag,
}

impl CoverageMethod {
    pub fn name(self) -> &'static str {
        match self {
            CoverageMethod::Sls => "sls",
            CoverageMethod::Tube => "tube",
            CoverageMethod::SlsDiag => "sls-diag",
        }
    }

    /// `sls,tube,sls-diag` style list.
    pub fn parse_list(s: &str) -> Result<Vec<CoverageMethod>> {
        let mut out: Vec<CoverageMethod> = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let m = part.parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err(Error::Validation("no methods given".into()));
        }
        Ok(out)
    }
}

impl FromStr for CoverageMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sls" => Ok(CoverageMethod::Sls),
            "tube" => Ok(CoverageMethod::Tube),
            "sls-diag" => Ok(CoverageMethod::SlsDiag),
            _ => Err(Error::Validation(format!("unknown method {s:?} (sls|tube|sls-diag)"))),
        }
    }
}

/// One method's outcome at one grid point.
#[derive(Debug, Clone, Serialize)]
pub struct PointResult {
    /// Solver status, `outside` for skipped points or `error: …` when the
    /// method could not be run.
    pub status: String,
    pub feasible: bool,
    pub objective: Option<f64>,
    pub solve_ms: f64,
}

impl PointResult {
    fn skipped(status: impl Into<String>) -> Self {
        Self {
            status: status.into(),
            feasible: false,
            objective: None,
            solve_ms: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridPoint {
    /// Row-major grid index, last coordinate fastest.
    pub index: usize,
    pub x: Vec<f64>,
    pub in_region: bool,
    /// Parallel to [`CoverageReport::methods`].
    pub results: Vec<PointResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub method: CoverageMethod,
    pub feasible: usize,
    pub coverage: f64,
    pub mean_solve_ms: f64,
    /// Why the method could not run at all, if it could not.
    pub setup_error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageReport {
    pub fingerprint: String,
    pub spec: Option<SpecFile>,
    pub region: Region,
    pub grid: usize,
    pub methods: Vec<CoverageMethod>,
    pub in_region: usize,
    pub summaries: Vec<MethodSummary>,
    pub points: Vec<GridPoint>,
    pub seeds: Vec<u64>,
}

impl CoverageReport {
    pub fn coverage(&self, m: CoverageMethod) -> Option<f64> {
        self.summaries.iter().find(|s| s.method == m).map(|s| s.coverage)
    }

    pub fn summary(&self, m: CoverageMethod) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == m)
    }

    /// Per-point flags for `m`, in grid order.
    pub fn feasible_flags(&self, m: CoverageMethod) -> Option<Vec<bool>> {
        let k = self.methods.iter().position(|x| *x == m)?;
        Some(self.points.iter().map(|p| p.results[k].feasible).collect())
    }

    /// `index,x1,..,in_region` then `<m>_status,<m>_feasible,<m>_objective,<m>_solve_ms`
    /// per method.
    pub fn to_csv(&self) -> String {
        let n = self.points.first().map_or(0, |p| p.x.len());
        let mut s = String::from("index");
        for i in 1..=n {
            let _ = write!(s, ",x{i}");
        }
        s.push_str(",in_region");
        for m in &self.methods {
            let m = m.name();
            let _ = write!(s, ",{m}_status,{m}_feasible,{m}_objective,{m}_solve_ms");
        }
        s.push('\n');
        for p in &self.points {
            let _ = write!(s, "{}", p.index);
            for v in &p.x {
                let _ = write!(s, ",{v}");
            }
            let _ = write!(s, ",{}", p.in_region as u8);
            for r in &p.results {
                let obj = r.objective.map(|v| v.to_string()).unwrap_or_default();
                let _ = write!(s, ",{},{},{obj},{}", r.status, r.feasible as u8, r.solve_ms);
            }
            s.push('\n');
        }
        s
    }
}

/// Runs `f` on a rayon pool capped by `RMPC_THREADS` when set.
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| Error::Validation(format!("{THREADS_ENV} must be a positive integer")))?;
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| Error::Validation(e.to_string()))?;
    Ok(pool.install(f))
}

/// `n` points per axis over the bounding box of `region`, last coordinate
/// fastest. A single point per axis sits at the box center.
pub fn grid_points(region: &HPolytope, n: usize) -> Result<Vec<DVector<f64>>> {
    if n == 0 {
        return Err(Error::Validation("grid must have at least one point per axis".into()));
    }
    if region.is_empty() {
        return Err(Error::Validation("coverage region is empty".into()));
    }
    let (lo, hi) = region.bounding_box()?;
    let dim = region.dim();
    let axis = |i: usize, k: usize| {
        if n == 1 {
            0.5 * (lo[i] + hi[i])
        } else {
            lo[i] + (hi[i] - lo[i]) * k as f64 / (n - 1) as f64
        }
    };
    let total = n.pow(dim as u32);
    Ok((0..total)
        .map(|idx| {
            let mut rem = idx;
            let mut x = DVector::zeros(dim);
            for i in (0..dim).rev() {
                x[i] = axis(i, rem % n);
                rem /= n;
            }
            x
        })
        .collect())
}

/// `spec` with its terminal set replaced by the maximal RCI set.
pub fn with_rci_terminal(spec: &OcpSpec) -> Result<(OcpSpec, HPolytope)> {
    let rci = max_rci(spec, RciOptions::default())?;
    Ok((spec.with_terminal_set(rci.clone())?, rci))
}

/// Prepared per-method solver.
enum Runner {
    Sls(OcpSpec),
    Tube(Box<TubeController>),
    Unavailable(String),
}

impl Runner {
    fn new(spec: &OcpSpec, m: CoverageMethod) -> Runner {
        match m {
            CoverageMethod::Sls => Runner::Sls(spec.with_filter_mode(FilterMode::FullBlockLowerTriangular)),
            CoverageMethod::SlsDiag => Runner::Sls(spec.with_filter_mode(FilterMode::DiagonalOnly)),
            CoverageMethod::Tube => match build_tube_controller(spec, TubeScaling::Homothetic) {
                Ok(tc) => Runner::Tube(Box::new(tc)),
                Err(e) => Runner::Unavailable(e.to_string()),
            },
        }
    }

    fn setup_error(&self) -> Option<String> {
        match self {
            Runner::Unavailable(e) => Some(e.clone()),
            _ => None,
        }
    }

    fn run(&self, spec: &OcpSpec, x0: &DVector<f64>, opts: &SynthesisOptions) -> PointResult {
        let start = Instant::now();
        let out = match self {
            Runner::Sls(s) => solve_sls(s, x0, opts).map(|o| (o.status, o.solution.map(|s| s.objective))),
            Runner::Tube(tc) => {
                tube_feasible(tc, spec, x0, &opts.solver).map(|o| (o.status, o.plan.map(|p| p.objective)))
            }
            Runner::Unavailable(e) => return PointResult::skipped(format!("error: {e}")),
        };
        let solve_ms = start.elapsed().as_secs_f64() * 1e3;
        match out {
            Ok((status, objective)) => PointResult {
                status: status.as_str().to_string(),
                feasible: status == SolveStatus::Optimal,
                objective,
                solve_ms,
            },
            Err(e) => PointResult {
                status: format!("error: {e}"),
                feasible: false,
                objective: None,
                solve_ms,
            },
        }
    }
}

/// Coverage of each method over an `n × n` grid of `region`
/// (`TerminalSet` uses the spec's own terminal set).
pub fn coverage(
    spec: &OcpSpec,
    region: Region,
    grid: usize,
    methods: &[CoverageMethod],
) -> Result<CoverageReport> {
    let region_set = match region {
        Region::TerminalSet => spec.terminal_set().clone(),
        Region::StateSet => spec.x_set().clone(),
    };
    let points = grid_points(&region_set, grid)?;
    let inside: Vec<bool> = points.iter().map(|x| region_set.contains(x, MEMBERSHIP)).collect();
    let in_region = inside.iter().filter(|b| **b).count();
    if in_region == 0 {
        return Err(Error::Validation("no grid point lies inside the coverage region".into()));
    }
    let runners: Vec<Runner> = methods.iter().map(|m| Runner::new(spec, *m)).collect();
    let opts = SynthesisOptions::default();
    let results: Vec<Vec<PointResult>> = with_pool(|| {
        points
            .par_iter()
            .zip(inside.par_iter())
            .map(|(x, inside)| {
                runners
                    .iter()
                    .map(|r| if *inside { r.run(spec, x, &opts) } else { PointResult::skipped("outside") })
                    .collect()
            })
            .collect()
    })?;

    let summaries = methods
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let solved: Vec<&PointResult> = results
                .iter()
                .zip(&inside)
                .filter(|(_, i)| **i)
                .map(|(r, _)| &r[k])
                .collect();
            let feasible = solved.iter().filter(|r| r.feasible).count();
            let timed: Vec<f64> = solved.iter().filter(|r| r.solve_ms > 0.0).map(|r| r.solve_ms).collect();
            MethodSummary {
                method: *m,
                feasible,
                coverage: feasible as f64 / in_region as f64,
                mean_solve_ms: if timed.is_empty() { 0.0 } else { timed.iter().sum::<f64>() / timed.len() as f64 },
                setup_error: runners[k].setup_error(),
            }
        })
        .collect();
    let points = points
        .into_iter()
        .zip(inside)
        .zip(results)
        .enumerate()
        .map(|(index, ((x, in_region), results))| GridPoint {
            index,
            x: x.as_slice().to_vec(),
            in_region,
            results,
        })
        .collect();
    Ok(CoverageReport {
        fingerprint: spec.fingerprint(),
        spec: spec.to_file().ok(),
        region,
        grid,
        methods: methods.to_vec(),
        in_region,
        summaries,
        points,
        seeds: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    EpsilonA,
    SigmaW,
}

/// One setting of a benchmark parameter sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub parameter: SweepParameter,
    pub value: f64,
    /// `None` when the RCI terminal set could not be computed.
    pub report: Option<CoverageReport>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn coverage(&self, m: CoverageMethod) -> Option<f64> {
        self.report.as_ref().and_then(|r| r.coverage(m))
    }
}

/// ε_A grid `{0.05, 0.10, …, 0.40}`.
pub fn epsilon_a_values() -> Vec<f64> {
    (1..=8).map(|k| k as f64 * 5.0 / 100.0).collect()
}

/// σ_w grid `{0.1, 0.2, …, 0.7}`.
pub fn sigma_w_values() -> Vec<f64> {
    (1..=7).map(|k| k as f64 / 10.0).collect()
}

/// Terminal-set coverage on the benchmark while one parameter varies; the
/// others stay at 0.1.
pub fn benchmark_sweep(
    parameter: SweepParameter,
    values: &[f64],
    grid: usize,
    methods: &[CoverageMethod],
) -> Result<Vec<SweepRow>> {
    values
        .iter()
        .map(|&value| {
            let spec = match parameter {
                SweepParameter::EpsilonA => paper_benchmark(value, 0.1, 0.1)?,
                SweepParameter::SigmaW => paper_benchmark(0.1, 0.1, value)?,
            };
            let row = match with_rci_terminal(&spec) {
                Ok((spec, _)) => SweepRow {
                    parameter,
                    value,
                    report: Some(coverage(&spec, Region::TerminalSet, grid, methods)?),
                    error: None,
                },
                Err(e) => SweepRow {
                    parameter,
                    value,
                    report: None,
                    error: Some(e.to_string()),
                },
            };
            Ok(row)
        })
        .collect()
}

/// `parameter,value,in_region,<m>_coverage…,error`.
pub fn sweep_csv(rows: &[SweepRow], methods: &[CoverageMethod]) -> String {
    let mut s = String::from("parameter,value,in_region");
    for m in methods {
        let _ = write!(s, ",{}_coverage", m.name());
    }
    s.push_str(",error\n");
    for r in rows {
        let p = match r.parameter {
            SweepParameter::EpsilonA => "epsilon_a",
            SweepParameter::SigmaW => "sigma_w",
        };
        let _ = write!(s, "{p},{},{}", r.value, r.report.as_ref().map_or(0, |x| x.in_region));
        for m in methods {
            let c = r.coverage(*m).map(|v| v.to_string()).unwrap_or_default();
            let _ = write!(s, ",{c}");
        }
        let _ = writeln!(s, ",{}", csv_text(r.error.as_deref().unwrap_or("")));
    }
    s
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One random system of the suite.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteRow {
    pub seed: u64,
    pub spectral_radius: f64,
    pub sls_coverage: f64,
    pub tube_coverage: f64,
    pub in_region: usize,
    pub mean_sls_ms: f64,
    pub mean_tube_ms: f64,
    /// Set when the system could not be evaluated at all.
    pub error: Option<String>,
    /// Why the tube baseline is unavailable for this system, if it is.
    pub tube_error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    /// Ascending in `sls_coverage`, ties broken by seed.
    pub rows: Vec<SuiteRow>,
    pub reports: Vec<(u64, Option<CoverageReport>)>,
}

impl SuiteResult {
    /// Deterministic summary (timings are in [`SuiteResult::timing_csv`]).
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("rank,seed,spectral_radius,sls_coverage,tube_coverage,in_region,tube_error,error\n");
        for (rank, r) in self.rows.iter().enumerate() {
            let _ = writeln!(
                s,
                "{rank},{},{},{},{},{},{},{}",
                r.seed,
                r.spectral_radius,
                r.sls_coverage,
                r.tube_coverage,
                r.in_region,
                csv_text(r.tube_error.as_deref().unwrap_or("")),
                csv_text(r.error.as_deref().unwrap_or("")),
            );
        }
        s
    }

    pub fn timing_csv(&self) -> String {
        let mut s = String::from("seed,mean_sls_ms,mean_tube_ms\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{}", r.seed, r.mean_sls_ms, r.mean_tube_ms);
        }
        s
    }

    pub fn dominated_count(&self) -> usize {
        self.rows.iter().filter(|r| r.sls_coverage >= r.tube_coverage).count()
    }
}

/// Coverage of SLS and tube MPC on `count` random systems with seeds
/// `base_seed, base_seed + 1, …`, over a `grid × grid` state-set grid.
pub fn random_suite(count: usize, base_seed: u64, grid: usize) -> Result<SuiteResult> {
    let methods = [CoverageMethod::Sls, CoverageMethod::Tube];
    let mut rows = Vec::with_capacity(count);
    let mut reports = Vec::with_capacity(count);
    for seed in (0..count as u64).map(|k| base_seed.wrapping_add(k)) {
        let evaluated = random_system(seed).and_then(|sys| {
            let mut rep = coverage(&sys.spec, Region::StateSet, grid, &methods)?;
            rep.seeds = vec![seed];
            Ok((sys.spectral_radius, rep))
        });
        match evaluated {
            Ok((rho, rep)) => {
                let sls = rep.summary(CoverageMethod::Sls).expect("sls summary");
                let tube = rep.summary(CoverageMethod::Tube).expect("tube summary");
                rows.push(SuiteRow {
                    seed,
                    spectral_radius: rho,
                    sls_coverage: sls.coverage,
                    tube_coverage: tube.coverage,
                    in_region: rep.in_region,
                    mean_sls_ms: sls.mean_solve_ms,
                    mean_tube_ms: tube.mean_solve_ms,
                    error: None,
                    tube_error: tube.setup_error.clone(),
                });
                reports.push((seed, Some(rep)));
            }
            Err(e) => {
                rows.push(SuiteRow {
                    seed,
                    spectral_radius: f64::NAN,
                    sls_coverage: 0.0,
                    tube_coverage: 0.0,
                    in_region: 0,
                    mean_sls_ms: 0.0,
                    mean_tube_ms: 0.0,
                    error: Some(e.to_string()),
                    tube_error: None,
                });
                reports.push((seed, None));
            }
        }
    }
    rows.sort_by(|a, b| a.sls_coverage.total_cmp(&b.sls_coverage).then(a.seed.cmp(&b.seed)));
    Ok(SuiteResult { rows, reports })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_layout() {
        let b = HPolytope::from_box(&[-1.0, -2.0], &[1.0, 2.0]).unwrap();
        let g = grid_points(&b, 3).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g[0].as_slice(), &[-1.0, -2.0]);
        assert_eq!(g[1].as_slice(), &[-1.0, 0.0]);
        assert_eq!(g[8].as_slice(), &[1.0, 2.0]);
        assert_eq!(grid_points(&b, 1).unwrap()[0].as_slice(), &[0.0, 0.0]);
        assert!(grid_points(&b, 0).is_err());
        assert!(grid_points(&HPolytope::empty(2), 3).is_err());
    }

    #[test]
    fn method_lists() {
        assert_eq!(
            CoverageMethod::parse_list("sls, tube,sls-diag,sls").unwrap(),
            vec![CoverageMethod::Sls, CoverageMethod::Tube, CoverageMethod::SlsDiag]
        );
        assert!(CoverageMethod::parse_list("lqr").is_err());
        assert!(CoverageMethod::parse_list("").is_err());
        assert_eq!("terminal".parse::<Region>().unwrap(), Region::TerminalSet);
    }

    #[test]
    fn single_point_grid_at_origin() {
        let spec = paper_benchmark(0.05, 0.05, 0.1).unwrap();
        let rep = coverage(&spec, Region::StateSet, 1, &[CoverageMethod::Sls, CoverageMethod::Tube]).unwrap();
        assert_eq!(rep.in_region, 1);
        assert_eq!(rep.points[0].x, vec![0.0, 0.0]);
        assert_eq!(rep.coverage(CoverageMethod::Sls), Some(1.0));
        assert_eq!(rep.coverage(CoverageMethod::Tube), Some(1.0));
        let csv = rep.to_csv();
        assert!(csv.starts_with("index,x1,x2,in_region,sls_status,sls_feasible,sls_objective,sls_solve_ms,tube_status"));
    }

    #[test]
    fn outside_points_are_not_counted() {
        // a triangle covers half of its bounding box
        let spec = paper_benchmark(0.05, 0.05, 0.1).unwrap();
        let tri = HPolytope::new(
            nalgebra::DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, -1.0, 1.0, 1.0]),
            DVector::from_column_slice(&[1.0, 1.0, 1.0]),
        )
        .unwrap();
        let spec = spec.with_terminal_set(tri).unwrap();
        let rep = coverage(&spec, Region::TerminalSet, 5, &[CoverageMethod::Sls]).unwrap();
        assert_eq!(rep.in_region, 15);
        let outside = rep.points.iter().filter(|p| !p.in_region).count();
        assert_eq!(outside, 10);
        assert!(rep.points.iter().filter(|p| !p.in_region).all(|p| p.results[0].status == "outside"));
        let c = rep.coverage(CoverageMethod::Sls).unwrap();
        assert!((0.0..=1.0).contains(&c));
    }

    #[test]
    fn tube_setup_failure_is_recorded() {
        let spec = paper_benchmark(0.1, 0.1, 10.0).unwrap();
        let rep = coverage(&spec, Region::StateSet, 1, &[CoverageMethod::Tube]).unwrap();
        let s = rep.summary(CoverageMethod::Tube).unwrap();
        assert_eq!(s.coverage, 0.0);
        assert!(s.setup_error.as_deref().unwrap().contains("tightened input"));
        assert!(rep.points[0].results[0].status.starts_with("error"));
    }

    #[test]
    fn suite_rows_are_sorted() {
        let r = random_suite(3, 100, 3).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert!(r.rows.windows(2).all(|w| w[0].sls_coverage <= w[1].sls_coverage));
        assert_eq!(r.summary_csv(), random_suite(3, 100, 3).unwrap().summary_csv());
    }
}
