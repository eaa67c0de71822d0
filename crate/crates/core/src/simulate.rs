//! Seeded uncertainty sampling and closed-loop receding-horizon rollouts.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{OcpSpec, PolytopicUncertainty};
use crate::qp::SolveStatus;
use crate::sls::{solve_sls, SynthesisOptions};
use crate::tube::{build_tube_controller, tube_feasible, TubeController, TubeScaling};

/// How model errors are drawn from the uncertainty polytope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMode {
    /// A uniformly chosen vertex, held for the whole rollout.
    VertexOnly,
    /// Dirichlet(1, …, 1) weights over the vertices, held for the rollout.
    UniformConvex,
    /// Fresh Dirichlet weights at every step.
    TimeVaryingUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WMode {
    UniformBox,
    CornersOnly,
}

/// Reproducible source of independent rollouts.
#[derive(Debug, Clone, Copy)]
pub struct ScenarioSampler {
    pub seed: u64,
    pub delta_mode: DeltaMode,
    pub w_mode: WMode,
}

impl ScenarioSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            delta_mode: DeltaMode::UniformConvex,
            w_mode: WMode::UniformBox,
        }
    }

    pub fn with_delta_mode(mut self, mode: DeltaMode) -> Self {
        self.delta_mode = mode;
        self
    }

    pub fn with_w_mode(mut self, mode: WMode) -> Self {
        self.w_mode = mode;
        self
    }

    /// Rollout `index` draws from its own ChaCha stream.
    pub fn rollout(&self, index: u64) -> Rollout {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        Rollout {
            rng,
            delta_mode: self.delta_mode,
            w_mode: self.w_mode,
            held: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Rollout {
    rng: ChaCha8Rng,
    delta_mode: DeltaMode,
    w_mode: WMode,
    held: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

impl Rollout {
    /// Model error `(ΔA, ΔB)` for the next step.
    pub fn plant(&mut self, unc: &PolytopicUncertainty) -> (DMatrix<f64>, DMatrix<f64>) {
        if self.delta_mode != DeltaMode::TimeVaryingUniform {
            if let Some(h) = &self.held {
                return h.clone();
            }
        }
        let verts = unc.vertices();
        let weights: Vec<f64> = match self.delta_mode {
            DeltaMode::VertexOnly => {
                let pick = self.rng.gen_range(0..verts.len());
                (0..verts.len()).map(|i| if i == pick { 1.0 } else { 0.0 }).collect()
            }
            _ => {
                let e: Vec<f64> = (0..verts.len()).map(|_| self.rng.sample::<f64, _>(Exp1)).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|x| x / s).collect()
            }
        };
        let mut da = DMatrix::zeros(verts[0].delta_a.nrows(), verts[0].delta_a.ncols());
        let mut db = DMatrix::zeros(verts[0].delta_b.nrows(), verts[0].delta_b.ncols());
        for (v, w) in verts.iter().zip(&weights) {
            da += &v.delta_a * *w;
            db += &v.delta_b * *w;
        }
        self.held = Some((da.clone(), db.clone()));
        (da, db)
    }

    /// Disturbance in the `σ_w` ∞-ball.
    pub fn disturbance(&mut self, n: usize, sigma: f64) -> DVector<f64> {
        DVector::from_fn(n, |_, _| match self.w_mode {
            WMode::UniformBox => sigma * self.rng.gen_range(-1.0..=1.0),
            WMode::CornersOnly => {
                if self.rng.gen::<bool>() {
                    sigma
                } else {
                    -sigma
                }
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sls,
    Tube,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sls" => Ok(Method::Sls),
            "tube" => Ok(Method::Tube),
            _ => Err(Error::Validation(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunOutcome {
    Completed,
    /// The OCP at `step` had no optimal solution; the run stopped there.
    MidRunInfeasible { step: usize },
}

/// One receding-horizon run. `states` has one more entry than every
/// per-step vector.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRecord {
    pub method: Method,
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    pub delta_a: Vec<Vec<Vec<f64>>>,
    pub delta_b: Vec<Vec<Vec<f64>>>,
    pub disturbances: Vec<Vec<f64>>,
    /// Slack of `x_t` in 𝒳 and `u_t` in 𝒰 (original sets).
    pub slack_x: Vec<f64>,
    pub slack_u: Vec<f64>,
    pub solve_ms: Vec<f64>,
    pub statuses: Vec<SolveStatus>,
    pub outcome: RunOutcome,
}

impl TrajectoryRecord {
    pub fn steps(&self) -> usize {
        self.inputs.len()
    }

    /// Worst state slack over every visited state, including the last.
    pub fn min_state_slack(&self, spec: &OcpSpec) -> f64 {
        self.states
            .iter()
            .map(|x| spec.x_set().slack(&DVector::from_column_slice(x)))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn min_input_slack(&self) -> f64 {
        self.slack_u.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `step,x1,..,u1,..,slack_x,slack_u,solve_ms,status`; the final row
    /// carries the last state with empty input fields, and a failed step
    /// carries its status with no input.
    pub fn to_csv(&self, spec: &OcpSpec) -> String {
        let (n, m) = (spec.n_x(), spec.n_u());
        let mut s = String::from("step");
        for i in 1..=n {
            let _ = write!(s, ",x{i}");
        }
        if m == 1 {
            s.push_str(",u");
        } else {
            for i in 1..=m {
                let _ = write!(s, ",u{i}");
            }
        }
        s.push_str(",slack_x,slack_u,solve_ms,status\n");
        for (t, x) in self.states.iter().enumerate() {
            let _ = write!(s, "{t}");
            for v in x {
                let _ = write!(s, ",{v}");
            }
            let slack_x = spec.x_set().slack(&DVector::from_column_slice(x));
            match self.inputs.get(t) {
                Some(u) => {
                    for v in u {
                        let _ = write!(s, ",{v}");
                    }
                    let _ = write!(s, ",{slack_x},{}", self.slack_u[t]);
                }
                None => {
                    s.push_str(&",".repeat(m));
                    let _ = write!(s, ",{slack_x},");
                }
            }
            match self.statuses.get(t) {
                Some(st) => {
                    let _ = writeln!(s, ",{},{}", self.solve_ms[t], st.as_str());
                }
                None => s.push_str(",,\n"),
            }
        }
        s
    }
}

/// Controller state shared across the steps of a run.
enum Policy {
    Sls(SynthesisOptions),
    Tube(TubeController),
}

/// Solves the chosen OCP at every step, applies its first input and
/// advances the true plant with sampled `(Δ, w)` from rollout 0 of
/// `sampler`.
pub fn run_receding_horizon(
    spec: &OcpSpec,
    x0: &DVector<f64>,
    steps: usize,
    method: Method,
    sampler: &ScenarioSampler,
) -> Result<TrajectoryRecord> {
    run_receding_horizon_with(spec, x0, steps, method, sampler, &SynthesisOptions::default())
}

/// As [`run_receding_horizon`] with explicit synthesis options; the
/// solver settings also apply to the tube program.
pub fn run_receding_horizon_with(
    spec: &OcpSpec,
    x0: &DVector<f64>,
    steps: usize,
    method: Method,
    sampler: &ScenarioSampler,
    opts: &SynthesisOptions,
) -> Result<TrajectoryRecord> {
    if x0.len() != spec.n_x() || !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::Validation("x0 must be finite with n_x entries".into()));
    }
    let policy = match method {
        Method::Sls => Policy::Sls(*opts),
        Method::Tube => Policy::Tube(build_tube_controller(spec, TubeScaling::Homothetic)?),
    };
    let settings = opts.solver;
    let mut rollout = sampler.rollout(0);
    let mut rec = TrajectoryRecord {
        method,
        states: vec![x0.as_slice().to_vec()],
        inputs: Vec::new(),
        delta_a: Vec::new(),
        delta_b: Vec::new(),
        disturbances: Vec::new(),
        slack_x: vec![spec.x_set().slack(x0)],
        slack_u: Vec::new(),
        solve_ms: Vec::new(),
        statuses: Vec::new(),
        outcome: RunOutcome::Completed,
    };
    let mut x = x0.clone();
    for step in 0..steps {
        let (status, secs, u) = match &policy {
            Policy::Sls(opts) => {
                let out = solve_sls(spec, &x, opts)?;
                (out.status, out.solve_time, out.solution.map(|s| s.first_input()))
            }
            Policy::Tube(tc) => {
                let out = tube_feasible(tc, spec, &x, &settings)?;
                (out.status, out.solve_time, out.plan.map(|p| p.input(tc, 0, &x)))
            }
        };
        rec.statuses.push(status);
        rec.solve_ms.push(secs * 1e3);
        let Some(u) = u else {
            rec.outcome = RunOutcome::MidRunInfeasible { step };
            break;
        };
        let (da, db) = rollout.plant(spec.uncertainty());
        let w = rollout.disturbance(spec.n_x(), spec.sigma_w());
        let next = (spec.a_hat() + &da) * &x + (spec.b_hat() + &db) * &u + &w;
        rec.slack_u.push(spec.u_set().slack(&u));
        rec.inputs.push(u.as_slice().to_vec());
        rec.delta_a.push(crate::linalg::matrix_to_rows(&da));
        rec.delta_b.push(crate::linalg::matrix_to_rows(&db));
        rec.disturbances.push(w.as_slice().to_vec());
        rec.slack_x.push(spec.x_set().slack(&next));
        rec.states.push(next.as_slice().to_vec());
        x = next;
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::paper_benchmark;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let spec = paper_benchmark(0.1, 0.1, 0.1).unwrap();
        let s = ScenarioSampler::new(7);
        let draw = |i| {
            let mut r = s.rollout(i);
            let (a, _) = r.plant(spec.uncertainty());
            (a, r.disturbance(2, 0.1))
        };
        assert_eq!(draw(3), draw(3));
        assert_ne!(draw(3).1, draw(4).1);
    }

    #[test]
    fn plant_held_unless_time_varying() {
        let spec = paper_benchmark(0.1, 0.1, 0.1).unwrap();
        let mut r = ScenarioSampler::new(1).rollout(0);
        let first = r.plant(spec.uncertainty());
        assert_eq!(first, r.plant(spec.uncertainty()));
        let mut tv = ScenarioSampler::new(1)
            .with_delta_mode(DeltaMode::TimeVaryingUniform)
            .rollout(0);
        assert_ne!(tv.plant(spec.uncertainty()), tv.plant(spec.uncertainty()));
    }

    #[test]
    fn draws_stay_in_the_hull() {
        let spec = paper_benchmark(0.2, 0.1, 0.3).unwrap();
        for mode in [DeltaMode::VertexOnly, DeltaMode::UniformConvex] {
            for i in 0..50 {
                let mut r = ScenarioSampler::new(2).with_delta_mode(mode).rollout(i);
                let (da, db) = r.plant(spec.uncertainty());
                assert!(da[(0, 0)].abs() <= 0.2 + 1e-12 && db[(1, 0)].abs() <= 0.1 + 1e-12);
                assert!(r.disturbance(2, 0.3).amax() <= 0.3);
            }
        }
        let mut c = ScenarioSampler::new(2).with_w_mode(WMode::CornersOnly).rollout(0);
        assert!(c.disturbance(2, 0.3).iter().all(|v| v.abs() == 0.3));
    }

    #[test]
    fn origin_is_an_equilibrium() {
        let spec = paper_benchmark(0.0, 0.0, 0.0).unwrap();
        for method in [Method::Sls, Method::Tube] {
            let rec = run_receding_horizon(&spec, &DVector::zeros(2), 3, method, &ScenarioSampler::new(0)).unwrap();
            assert_eq!(rec.outcome, RunOutcome::Completed);
            assert!(rec.states.iter().flatten().all(|v| v.abs() < 1e-6));
            assert!(rec.inputs.iter().flatten().all(|v| v.abs() < 1e-6));
        }
    }

    #[test]
    fn infeasible_start_is_recorded() {
        let spec = paper_benchmark(0.1, 0.1, 0.1).unwrap();
        let x0 = DVector::from_column_slice(&[20.0, 0.0]);
        let rec = run_receding_horizon(&spec, &x0, 5, Method::Sls, &ScenarioSampler::new(0)).unwrap();
        assert_eq!(rec.outcome, RunOutcome::MidRunInfeasible { step: 0 });
        assert_eq!(rec.steps(), 0);
        let csv = rec.to_csv(&spec);
        assert!(csv.starts_with("step,x1,x2,u,slack_x,slack_u,solve_ms,status\n"));
        assert!(csv.lines().nth(1).unwrap().ends_with("infeasible"));
    }

    #[test]
    fn benchmark_run_is_deterministic_and_safe() {
        let spec = paper_benchmark(0.1, 0.1, 0.1).unwrap();
        let x0 = DVector::from_column_slice(&[2.0, -1.0]);
        let s = ScenarioSampler::new(11);
        let a = run_receding_horizon(&spec, &x0, 6, Method::Sls, &s).unwrap();
        let b = run_receding_horizon(&spec, &x0, 6, Method::Sls, &s).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.outcome, RunOutcome::Completed);
        assert!(a.min_state_slack(&spec) >= -1e-6);
        assert!(a.min_input_slack() >= -1e-6);
        assert_eq!(a.to_csv(&spec).lines().count(), 1 + 7);
    }
}
