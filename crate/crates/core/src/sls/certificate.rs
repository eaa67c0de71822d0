//! Sampling check of the over-approximation certificate: simulate the true
//! plant under `u = Kx`, recover the virtual disturbance `w̃ = Σ⁻¹[x0; η]`
//! and confirm it stays in the unit ∞-ball while constraints hold.

use nalgebra::DVector;
use serde::Serialize;

use super::SlsSolution;
use crate::blockops::BlockLtOperator;
use crate::error::Result;
use crate::model::OcpSpec;
use crate::simulate::{DeltaMode, Rollout, ScenarioSampler, WMode};
use crate::tolerances::CERTIFICATE;

#[derive(Debug, Clone, Copy)]
pub struct CertificateOptions {
    pub samples: usize,
    pub seed: u64,
    pub delta_mode: DeltaMode,
    pub w_mode: WMode,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        Self {
            samples: 1000,
            seed: 0,
            delta_mode: DeltaMode::UniformConvex,
            w_mode: WMode::UniformBox,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub samples: usize,
    /// `max_t ‖w̃_t‖∞` over `t >= 1` and all samples.
    pub max_w_tilde: f64,
    pub min_state_slack: f64,
    pub min_input_slack: f64,
    pub min_terminal_slack: f64,
    pub passed: bool,
}

impl CertificateReport {
    pub fn min_slack(&self) -> f64 {
        self.min_state_slack.min(self.min_input_slack).min(self.min_terminal_slack)
    }
}

/// One closed-loop horizon under `u = Kx`.
#[derive(Debug, Clone)]
pub struct CertificateTrace {
    pub states: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    pub disturbances: Vec<DVector<f64>>,
    /// `η_t = ΔA x_t + ΔB u_t + w_t`.
    pub lumped: Vec<DVector<f64>>,
    /// `Σ⁻¹ [x0; η]`; entry 0 equals `x0`.
    pub w_tilde: Vec<DVector<f64>>,
}

/// Simulates one horizon with plant perturbations and disturbances drawn
/// from `rollout`.
pub fn certificate_rollout(
    sol: &SlsSolution,
    spec: &OcpSpec,
    rollout: &mut Rollout,
) -> Result<CertificateTrace> {
    rollout_with_gain(sol, &sol.controller_gain()?, spec, rollout)
}

fn rollout_with_gain(
    sol: &SlsSolution,
    k: &BlockLtOperator,
    spec: &OcpSpec,
    rollout: &mut Rollout,
) -> Result<CertificateTrace> {
    let t_h = sol.horizon();
    let (n, m) = (spec.n_x(), spec.n_u());
    let mut states = vec![sol.x0.clone()];
    let mut inputs = Vec::with_capacity(t_h);
    let mut disturbances = Vec::with_capacity(t_h);
    let mut lumped = Vec::with_capacity(t_h);
    for t in 0..t_h {
        let mut u = DVector::zeros(m);
        for (c, x) in states.iter().enumerate() {
            if let Some(b) = k.at(t, c) {
                u += b * x;
            }
        }
        let (da, db) = rollout.plant(spec.uncertainty());
        let w = rollout.disturbance(n, spec.sigma_w());
        let x = &states[t];
        let eta = &da * x + &db * &u + &w;
        let next = spec.a_hat() * x + spec.b_hat() * &u + &eta;
        inputs.push(u);
        disturbances.push(w);
        lumped.push(eta);
        states.push(next);
    }
    let mut rhs = vec![sol.x0.clone()];
    rhs.extend(lumped.iter().cloned());
    let w_tilde = sol.sigma.solve_lower(&rhs)?;
    Ok(CertificateTrace {
        states,
        inputs,
        disturbances,
        lumped,
        w_tilde,
    })
}

/// Runs `samples` independent rollouts. Passes iff every `‖w̃_t‖∞ <= 1 + 1e-6`
/// and every state, input and terminal slack is `>= -1e-6`.
pub fn validate_certificate(
    sol: &SlsSolution,
    spec: &OcpSpec,
    opts: &CertificateOptions,
) -> Result<CertificateReport> {
    let sampler = ScenarioSampler::new(opts.seed)
        .with_delta_mode(opts.delta_mode)
        .with_w_mode(opts.w_mode);
    let t_h = sol.horizon();
    let k = sol.controller_gain()?;
    let mut report = CertificateReport {
        samples: opts.samples,
        max_w_tilde: 0.0,
        min_state_slack: f64::INFINITY,
        min_input_slack: f64::INFINITY,
        min_terminal_slack: f64::INFINITY,
        passed: false,
    };
    for s in 0..opts.samples {
        let mut rollout = sampler.rollout(s as u64);
        let tr = rollout_with_gain(sol, &k, spec, &mut rollout)?;
        for w in tr.w_tilde.iter().skip(1) {
            report.max_w_tilde = report.max_w_tilde.max(w.amax());
        }
        for x in &tr.states[..t_h] {
            report.min_state_slack = report.min_state_slack.min(spec.x_set().slack(x));
        }
        report.min_terminal_slack = report
            .min_terminal_slack
            .min(spec.terminal_set().slack(&tr.states[t_h]));
        for u in &tr.inputs {
            report.min_input_slack = report.min_input_slack.min(spec.u_set().slack(u));
        }
    }
    report.passed = report.max_w_tilde <= 1.0 + CERTIFICATE && report.min_slack() >= -CERTIFICATE;
    Ok(report)
}
