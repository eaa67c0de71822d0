//! Robust OCP synthesis by jointly optimizing the system responses
//! `(Φ̃x, Φ̃u)` and the uncertainty over-approximation filter `Σ`.
//!
//! The controller `K = Φ̃u Φ̃x⁻¹` returned for a feasible `x0` keeps the
//! closed loop inside the state, input and terminal sets for every model
//! error in the uncertainty polytope and every bounded disturbance.

mod assemble;
mod certificate;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::blockops::BlockLtOperator;
use crate::error::{Error, Result};
use crate::linalg::matrix_to_rows;
use crate::model::OcpSpec;
use crate::qp::{SolveResult, SolveStatus, SolverSettings};
use crate::tolerances::{AFFINE_RESIDUAL, FILTER_FLOOR, STRUCTURAL};

pub use assemble::{assemble_qp, ExprBlock, SlsVariables, VariableCounts};
pub use certificate::{
    certificate_rollout, validate_certificate, CertificateOptions, CertificateReport, CertificateTrace,
};

#[derive(Debug, Clone, Copy)]
pub struct SynthesisOptions {
    /// Linear penalty on `Σ d`; zero keeps the nominal cost alone.
    pub filter_weight: f64,
    pub solver: SolverSettings,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            filter_weight: 0.0,
            solver: SolverSettings::default(),
        }
    }
}

/// A feasible `(Φ̃x, Φ̃u, Σ)` with its filter diagonals.
#[derive(Debug, Clone)]
pub struct SlsSolution {
    pub phi_x: BlockLtOperator,
    /// Block row `T` is identically zero.
    pub phi_u: BlockLtOperator,
    pub sigma: BlockLtOperator,
    /// `d[t]`, `t = 0..T-1`, with `Σ^{t+1,0} = diag(d[t])`.
    pub d: Vec<DVector<f64>>,
    /// Nominal cost (the filter penalty, if any, is excluded).
    pub objective: f64,
    pub x0: DVector<f64>,
    pub solve_time: f64,
    pub iterations: u32,
}

/// Solver outcome for one initial state.
#[derive(Debug, Clone)]
pub struct SlsOutcome {
    pub status: SolveStatus,
    pub solve_time: f64,
    pub solution: Option<SlsSolution>,
}

/// Assembles and solves the robust OCP at `x0`. Infeasibility is a status,
/// not an error.
pub fn solve_sls(spec: &OcpSpec, x0: &DVector<f64>, opts: &SynthesisOptions) -> Result<SlsOutcome> {
    let (qp, vars) = assemble_qp(spec, x0, opts.filter_weight)?;
    let res = qp.solve(&opts.solver)?;
    if res.status != SolveStatus::Optimal {
        return Ok(SlsOutcome {
            status: res.status,
            solve_time: res.solve_time,
            solution: None,
        });
    }
    let sol = extract(spec, x0, &vars, &res, opts.filter_weight)?;
    sol.check_invariants(spec)?;
    Ok(SlsOutcome {
        status: SolveStatus::Optimal,
        solve_time: res.solve_time,
        solution: Some(sol),
    })
}

/// Like [`solve_sls`] but maps non-optimal statuses to errors.
pub fn synthesize(spec: &OcpSpec, x0: &DVector<f64>, opts: &SynthesisOptions) -> Result<SlsSolution> {
    let out = solve_sls(spec, x0, opts)?;
    match (out.status, out.solution) {
        (SolveStatus::Optimal, Some(sol)) => Ok(sol),
        (SolveStatus::Infeasible, _) => Err(Error::Infeasible),
        (s, _) => Err(Error::Solver(format!("SLS program ended with {}", s.as_str()))),
    }
}

fn extract(
    spec: &OcpSpec,
    x0: &DVector<f64>,
    vars: &SlsVariables,
    res: &SolveResult,
    filter_weight: f64,
) -> Result<SlsSolution> {
    let (t_h, n, m) = (spec.horizon(), spec.n_x(), spec.n_u());
    let z = &res.z;
    let floor = spec.sigma_w().max(FILTER_FLOOR);
    // interior-point iterates may sit a hair below the floor
    let d: Vec<DVector<f64>> = (0..t_h)
        .map(|t| DVector::from_fn(n, |r, _| z[vars.d_index(t, r)].max(floor)))
        .collect();
    let mut zc = z.clone();
    for t in 0..t_h {
        for r in 0..n {
            zc[vars.d_index(t, r)] = d[t][r];
        }
    }
    let mut phi_x = BlockLtOperator::zeros(t_h, n, n);
    let mut phi_u = BlockLtOperator::zeros(t_h, m, n);
    let mut sigma = BlockLtOperator::zeros(t_h, n, n);
    for t in 0..=t_h {
        for c in 0..=t {
            phi_x.set_block(t, t - c, vars.phi_x(t, c).eval(&zc))?;
            sigma.set_block(t, t - c, vars.sigma(t, c).eval(&zc))?;
            if let Some(b) = vars.phi_u(t, c) {
                phi_u.set_block(t, t - c, b.eval(&zc))?;
            }
        }
    }
    let penalty: f64 = filter_weight
        * (0..t_h)
            .flat_map(|t| (0..n).map(move |r| (t, r)))
            .map(|(t, r)| z[vars.d_index(t, r)])
            .sum::<f64>();
    Ok(SlsSolution {
        phi_x,
        phi_u,
        sigma,
        d,
        objective: res.objective - penalty,
        x0: x0.clone(),
        solve_time: res.solve_time,
        iterations: res.iterations,
    })
}

impl SlsSolution {
    pub fn horizon(&self) -> usize {
        self.phi_x.horizon()
    }

    /// Max-abs entry of `(I - ZÂ)Φ̃x - ZB̂Φ̃u - Σ`, computed densely.
    pub fn affine_residual(&self, spec: &OcpSpec) -> f64 {
        let t_h = self.horizon();
        let n = spec.n_x();
        let za = BlockLtOperator::shift_stack(spec.a_hat(), t_h).to_dense();
        let zb = BlockLtOperator::shift_stack(spec.b_hat(), t_h).to_dense();
        let eye = DMatrix::identity((t_h + 1) * n, (t_h + 1) * n);
        let r = (eye - za) * self.phi_x.to_dense() - zb * self.phi_u.to_dense() - self.sigma.to_dense();
        r.amax()
    }

    /// Max deviation of the diagonal blocks from `I` and `diag(d_{t-1})`.
    pub fn structural_error(&self) -> f64 {
        let n = self.phi_x.row_block_dim();
        let mut err = (self.phi_x.block_or_zero(0, 0) - DMatrix::<f64>::identity(n, n)).amax();
        for t in 1..=self.horizon() {
            let expect = DMatrix::from_diagonal(&self.d[t - 1]);
            err = err.max((self.phi_x.block_or_zero(t, 0) - &expect).amax());
            err = err.max((self.sigma.block_or_zero(t, 0) - &expect).amax());
        }
        err
    }

    pub fn check_invariants(&self, spec: &OcpSpec) -> Result<()> {
        let res = self.affine_residual(spec);
        if !(res <= AFFINE_RESIDUAL) {
            return Err(Error::InvariantViolated {
                what: "affine SLS residual",
                value: res,
            });
        }
        let s = self.structural_error();
        if !(s <= STRUCTURAL) {
            return Err(Error::InvariantViolated {
                what: "diagonal block structure",
                value: s,
            });
        }
        let d_min = self.d.iter().flat_map(|v| v.iter().copied()).fold(f64::INFINITY, f64::min);
        if d_min < spec.sigma_w() - 1e-9 {
            return Err(Error::InvariantViolated {
                what: "filter diagonal below sigma_w",
                value: d_min,
            });
        }
        Ok(())
    }

    /// `Σ_{t<T} x̂ₜᵀQx̂ₜ + x̂_TᵀQ_T x̂_T + Σ_{t<T} ûₜᵀRûₜ` on the nominal
    /// trajectory `x̂ = Φ̃x(:,0) x0`, `û = Φ̃u(:,0) x0`.
    pub fn nominal_cost(&self, spec: &OcpSpec) -> f64 {
        let w = spec.weights();
        let t_h = self.horizon();
        let xs = self.nominal_states();
        let us = self.nominal_inputs();
        let mut cost = 0.0;
        for (t, x) in xs.iter().enumerate() {
            let q = if t < t_h { w.q() } else { w.q_t() };
            cost += (x.transpose() * q * x)[(0, 0)];
        }
        for u in &us {
            cost += (u.transpose() * w.r() * u)[(0, 0)];
        }
        cost
    }

    /// `x̂ₜ = Φ̃x^{t,t} x0`, `t = 0..T`.
    pub fn nominal_states(&self) -> Vec<DVector<f64>> {
        self.phi_x.first_block_column().iter().map(|b| b * &self.x0).collect()
    }

    /// `ûₜ = Φ̃u^{t,t} x0`, `t = 0..T-1`.
    pub fn nominal_inputs(&self) -> Vec<DVector<f64>> {
        let mut u: Vec<DVector<f64>> =
            self.phi_u.first_block_column().iter().map(|b| b * &self.x0).collect();
        u.pop();
        u
    }

    /// Time-varying feedback `K = Φ̃u Φ̃x⁻¹`.
    pub fn controller_gain(&self) -> Result<BlockLtOperator> {
        self.phi_u.multiply(&self.phi_x.inverse()?)
    }

    /// `u₀ = Φ̃u^{0,0} x0`.
    pub fn first_input(&self) -> DVector<f64> {
        self.phi_u.block_or_zero(0, 0) * &self.x0
    }

    pub fn to_dump(&self) -> SolutionDump {
        let blocks = |op: &BlockLtOperator| {
            op.blocks()
                .map(|(&(t, k), m)| (format!("{t},{k}"), matrix_to_rows(m)))
                .collect::<BTreeMap<_, _>>()
        };
        SolutionDump {
            status: SolveStatus::Optimal.as_str(),
            objective: self.objective,
            solve_time: self.solve_time,
            x0: self.x0.iter().copied().collect(),
            d: self.d.iter().map(|v| v.iter().copied().collect()).collect(),
            phi_x_tilde: blocks(&self.phi_x),
            phi_u_tilde: blocks(&self.phi_u),
            sigma: blocks(&self.sigma),
        }
    }
}

pub fn first_input(sol: &SlsSolution) -> DVector<f64> {
    sol.first_input()
}

pub fn controller_gain(sol: &SlsSolution) -> Result<BlockLtOperator> {
    sol.controller_gain()
}

/// JSON shape of a solution: blocks keyed `"t,k"` (row, delay).
#[derive(Debug, Clone, Serialize)]
pub struct SolutionDump {
    pub status: &'static str,
    pub objective: f64,
    pub solve_time: f64,
    pub x0: Vec<f64>,
    pub d: Vec<Vec<f64>>,
    pub phi_x_tilde: BTreeMap<String, Vec<Vec<f64>>>,
    pub phi_u_tilde: BTreeMap<String, Vec<Vec<f64>>>,
    pub sigma: BTreeMap<String, Vec<Vec<f64>>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{paper_benchmark, FilterMode};
    use approx::assert_relative_eq;

    fn v2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_column_slice(&[a, b])
    }

    #[test]
    fn over_approx_group_count() {
        let spec = paper_benchmark(0.1, 0.1, 0.1).unwrap();
        let (_, vars) = assemble_qp(&spec, &v2(1.0, 1.0), 0.0).unwrap();
        assert_eq!(vars.over_approx_groups(), 10 * 2 * 4);
        let c = vars.counts();
        assert_eq!(c.d, 20);
        assert_eq!(c.phi_x, 55 * 4);
        assert_eq!(c.phi_u, 55 * 2);
        assert_eq!(c.sigma, 55 * 4);
        let diag = spec.with_filter_mode(FilterMode::DiagonalOnly);
        let (_, vd) = assemble_qp(&diag, &v2(1.0, 1.0), 0.0).unwrap();
        assert_eq!(vd.counts().sigma, 0);
    }

    #[test]
    fn origin_is_feasible() {
        let spec = paper_benchmark(0.1, 0.1, 0.1).unwrap();
        let sol = synthesize(&spec, &v2(0.0, 0.0), &SynthesisOptions::default()).unwrap();
        assert!(sol.objective >= -1e-9);
        assert!(sol.first_input().amax() < 1e-9);
    }

    #[test]
    fn outside_state_set_is_infeasible() {
        let spec = paper_benchmark(0.1, 0.1, 0.1).unwrap();
        let r = synthesize(&spec, &v2(20.0, 0.0), &SynthesisOptions::default());
        assert!(matches!(r, Err(Error::Infeasible)));
    }

    #[test]
    fn solution_invariants_and_objective() {
        let spec = paper_benchmark(0.1, 0.1, 0.1).unwrap();
        let sol = synthesize(&spec, &v2(2.0, -1.0), &SynthesisOptions::default()).unwrap();
        assert!(sol.affine_residual(&spec) <= 1e-6);
        assert!(sol.structural_error() <= 1e-7);
        assert_relative_eq!(sol.objective, sol.nominal_cost(&spec), max_relative = 1e-6);
        let k = sol.controller_gain().unwrap();
        let back = k.multiply(&sol.phi_x).unwrap();
        assert!(back.max_abs_diff(&sol.phi_u) <= 1e-8);
        let u0 = k.block_or_zero(0, 0) * &sol.x0;
        assert!((u0 - sol.first_input()).amax() <= 1e-12);
    }

    #[test]
    fn full_filter_is_no_worse_than_diagonal() {
        let spec = paper_benchmark(0.1, 0.1, 0.1).unwrap();
        let x0 = v2(1.0, 1.0);
        let full = synthesize(&spec, &x0, &SynthesisOptions::default()).unwrap();
        let diag = synthesize(
            &spec.with_filter_mode(FilterMode::DiagonalOnly),
            &x0,
            &SynthesisOptions::default(),
        )
        .unwrap();
        assert!(full.objective <= diag.objective + 1e-6);
    }

    #[test]
    fn dump_keys_are_row_and_delay() {
        let spec = paper_benchmark(0.1, 0.1, 0.1).unwrap().with_horizon(2).unwrap();
        let sol = synthesize(&spec, &v2(0.5, 0.5), &SynthesisOptions::default()).unwrap();
        let dump = sol.to_dump();
        assert!(dump.phi_x_tilde.contains_key("2,1"));
        assert_eq!(dump.d.len(), 2);
        let json = serde_json::to_string(&dump).unwrap();
        assert!(json.contains("\"sigma\""));
    }
}
