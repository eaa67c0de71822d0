//! Tube MPC baseline: an LQR ancillary gain, an outer mRPI cross-section
//! and a tube program enforced at the uncertainty vertices.
//!
//! Cross-sections are `z_t ⊕ α_t Ω`. [`TubeScaling::Rigid`] pins `α_t = 1`;
//! [`TubeScaling::Homothetic`] makes the scales decision variables so the
//! tube can grow with the model error the nominal-only `Ω` does not cover.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::OcpSpec;
use crate::polytope::{mrpi_approx, pontryagin_diff, HPolytope, SupportFunction, VPolytope};
use crate::qp::{LinExpr, QuadraticProgram, SolveStatus, SolverSettings};
use crate::tolerances::{MRPI_EPS, RICCATI, RICCATI_MAX_ITER};

/// Infinite-horizon discrete LQR gain `K` for `u = -K x`, by Riccati
/// fixed-point iteration from `P = Q`. Converged when successive iterates
/// differ by at most `1e-10 · max(1, |P|)` entrywise.
pub fn dlqr(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gain = |p: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        let s = r + b.transpose() * p * b;
        let rhs = b.transpose() * p * a;
        s.cholesky()
            .map(|c| c.solve(&rhs))
            .ok_or_else(|| Error::Validation("R + BᵀPB is not positive definite".into()))
    };
    let mut p = q.clone();
    for _ in 0..RICCATI_MAX_ITER {
        let k = gain(&p)?;
        let next = q + a.transpose() * &p * a - a.transpose() * &p * b * &k;
        let next = (&next + next.transpose()) * 0.5;
        if !next.iter().all(|v| v.is_finite()) {
            break;
        }
        let diff = (&next - &p).amax();
        p = next;
        if diff <= RICCATI * p.amax().max(1.0) {
            return gain(&p);
        }
    }
    Err(Error::NoConvergence {
        iterations: RICCATI_MAX_ITER,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TubeScaling {
    Rigid,
    Homothetic,
}

/// Offline tube data for one spec.
#[derive(Debug, Clone)]
pub struct TubeController {
    /// Ancillary gain in `u = v + K (x - z)`.
    pub k_gain: DMatrix<f64>,
    pub omega: VPolytope,
    pub omega_h: HPolytope,
    /// `𝒳 ⊖ Ω`, `𝒰 ⊖ KΩ`, `𝒳_T ⊖ Ω`.
    pub x_tight: HPolytope,
    pub u_tight: HPolytope,
    pub terminal_tight: HPolytope,
    pub scaling: TubeScaling,
    h_x: Vec<f64>,
    h_t: Vec<f64>,
    h_u: Vec<f64>,
    /// `h_Ω(M_jᵀ f)` per distinct vertex `j` and facet `f` of Ω.
    h_dyn: Vec<Vec<f64>>,
    vertices: Vec<(DMatrix<f64>, DMatrix<f64>)>,
}

fn supports(set: &HPolytope, body: &dyn SupportFunction) -> Result<Vec<f64>> {
    set.rows().map(|(f, _)| body.support(&f)).collect()
}

/// `K = -dlqr(Â, B̂, Q, R)`, `Ω = mrpi_approx(Â + B̂K, 𝒲, 1e-2)` and the
/// Ω-tightened sets.
pub fn build_tube_controller(spec: &OcpSpec, scaling: TubeScaling) -> Result<TubeController> {
    let (a, b) = (spec.a_hat(), spec.b_hat());
    let w = spec.weights();
    let k_gain = -dlqr(a, b, w.q(), w.r())?;
    let a_cl = a + b * &k_gain;
    let w_set = spec.disturbance().as_polytope(spec.n_x());
    let omega = mrpi_approx(&a_cl, &w_set, MRPI_EPS)?;
    let k_omega = omega.linear_map(&k_gain)?;

    let u_tight = pontryagin_diff(spec.u_set(), &k_omega)?;
    if u_tight.is_empty() {
        return Err(Error::EmptyTightenedSet("input"));
    }
    let x_tight = pontryagin_diff(spec.x_set(), &omega)?;
    if x_tight.is_empty() {
        return Err(Error::EmptyTightenedSet("state"));
    }
    let terminal_tight = pontryagin_diff(spec.terminal_set(), &omega)?;
    if terminal_tight.is_empty() {
        return Err(Error::EmptyTightenedSet("terminal"));
    }

    let omega_h = if omega.vertices().len() >= 3 {
        omega.to_hrep()?
    } else {
        // degenerate Ω (σ_w = 0): unit box for the scaled-tube algebra
        HPolytope::inf_ball(spec.n_x(), 1.0)
    };
    let mut vertices: Vec<(DMatrix<f64>, DMatrix<f64>)> = Vec::new();
    for v in spec.uncertainty().vertices() {
        let pair = (a + &v.delta_a, b + &v.delta_b);
        if !vertices.contains(&pair) {
            vertices.push(pair);
        }
    }
    let mut h_dyn = Vec::with_capacity(vertices.len());
    for (aj, bj) in &vertices {
        let m = aj + bj * &k_gain;
        let row: Result<Vec<f64>> = omega_h
            .rows()
            .map(|(f, _)| omega.support(&(m.transpose() * f)))
            .collect();
        h_dyn.push(row?);
    }
    Ok(TubeController {
        h_x: supports(spec.x_set(), &omega)?,
        h_t: supports(spec.terminal_set(), &omega)?,
        h_u: supports(spec.u_set(), &k_omega)?,
        k_gain,
        omega,
        omega_h,
        x_tight,
        u_tight,
        terminal_tight,
        scaling,
        h_dyn,
        vertices,
    })
}

impl TubeController {
    /// `min_f b_f - h_Ω(A_clᵀ f) - h_𝒲(f)` for the nominal closed loop.
    pub fn rpi_slack(&self, spec: &OcpSpec) -> Result<f64> {
        let a_cl = spec.a_hat() + spec.b_hat() * &self.k_gain;
        let w = crate::polytope::InfBall {
            dim: spec.n_x(),
            radius: spec.sigma_w(),
        };
        crate::polytope::rpi_slack(&a_cl, &self.omega, &w)
    }
}

/// Tube centers, nominal inputs and scales of a feasible tube program.
#[derive(Debug, Clone, Serialize)]
pub struct TubePlan {
    pub z: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub objective: f64,
}

impl TubePlan {
    /// `u = v_t + K (x - z_t)`.
    pub fn input(&self, tc: &TubeController, t: usize, x: &DVector<f64>) -> DVector<f64> {
        let z = DVector::from_column_slice(&self.z[t]);
        DVector::from_column_slice(&self.v[t]) + &tc.k_gain * (x - z)
    }
}

#[derive(Debug, Clone)]
pub struct TubeOutcome {
    pub status: SolveStatus,
    pub solve_time: f64,
    pub plan: Option<TubePlan>,
}

/// Solves the tube program at `x0`.
pub fn tube_feasible(
    tc: &TubeController,
    spec: &OcpSpec,
    x0: &DVector<f64>,
    settings: &SolverSettings,
) -> Result<TubeOutcome> {
    let start = Instant::now();
    let (t_h, n, m) = (spec.horizon(), spec.n_x(), spec.n_u());
    if x0.len() != n {
        return Err(Error::DimensionMismatch("x0".into()));
    }
    let mut qp = QuadraticProgram::new();
    let z: Vec<Vec<usize>> = (0..=t_h)
        .map(|t| (0..n).map(|i| qp.add_variable(format!("z[{t}]({i})"))).collect())
        .collect();
    let v: Vec<Vec<usize>> = (0..t_h)
        .map(|t| (0..m).map(|i| qp.add_variable(format!("v[{t}]({i})"))).collect())
        .collect();
    let alpha: Vec<LinExpr> = (0..=t_h)
        .map(|t| match tc.scaling {
            TubeScaling::Rigid => LinExpr::constant(1.0),
            TubeScaling::Homothetic => {
                let a = qp.add_variable(format!("alpha[{t}]"));
                qp.add_le(&LinExpr::var(a).scaled(-1.0), 0.0);
                LinExpr::var(a)
            }
        })
        .collect();
    let dot = |f: &DVector<f64>, idx: &[usize]| {
        let mut e = LinExpr::zero();
        for (k, &i) in idx.iter().enumerate() {
            e.add_term(i, f[k]);
        }
        e
    };

    // x0 ∈ z_0 ⊕ α_0 Ω
    for (h, g) in tc.omega_h.rows() {
        let mut e = dot(&h, &z[0]).scaled(-1.0);
        e.add_scaled(&alpha[0], -g);
        qp.add_le(&e, -h.dot(x0));
    }
    // z_t ⊕ α_t Ω ⊆ 𝒳 (𝒳_T at t = T), v_t ⊕ α_t KΩ ⊆ 𝒰
    for t in 0..=t_h {
        let (set, h) = if t < t_h { (spec.x_set(), &tc.h_x) } else { (spec.terminal_set(), &tc.h_t) };
        for (k, (f, b)) in set.rows().enumerate() {
            let mut e = dot(&f, &z[t]);
            e.add_scaled(&alpha[t], h[k]);
            qp.add_le(&e, b);
        }
    }
    for t in 0..t_h {
        for (k, (f, b)) in spec.u_set().rows().enumerate() {
            let mut e = dot(&f, &v[t]);
            e.add_scaled(&alpha[t], tc.h_u[k]);
            qp.add_le(&e, b);
        }
    }
    // successor of every point of the cross-section stays in the next one
    let sigma = spec.sigma_w();
    for t in 0..t_h {
        for (j, (aj, bj)) in tc.vertices.iter().enumerate() {
            for (k, (h, g)) in tc.omega_h.rows().enumerate() {
                let ha = aj.transpose() * &h;
                let hb = bj.transpose() * &h;
                let mut e = dot(&ha, &z[t]);
                e.add_scaled(&dot(&hb, &v[t]), 1.0);
                e.add_scaled(&dot(&h, &z[t + 1]), -1.0);
                e.add_scaled(&alpha[t], tc.h_dyn[j][k]);
                e.add_scaled(&alpha[t + 1], -g);
                qp.add_le(&e, -sigma * h.iter().map(|x| x.abs()).sum::<f64>());
            }
        }
    }
    let w = spec.weights();
    for t in 0..=t_h {
        let ez: Vec<LinExpr> = z[t].iter().map(|&i| LinExpr::var(i)).collect();
        qp.add_quadratic_form(&ez, if t < t_h { w.q() } else { w.q_t() });
    }
    for vt in &v {
        let ev: Vec<LinExpr> = vt.iter().map(|&i| LinExpr::var(i)).collect();
        qp.add_quadratic_form(&ev, w.r());
    }

    let res = qp.solve(settings)?;
    let solve_time = start.elapsed().as_secs_f64();
    let plan = (res.status == SolveStatus::Optimal).then(|| TubePlan {
        z: z.iter().map(|zt| zt.iter().map(|&i| res.z[i]).collect()).collect(),
        v: v.iter().map(|vt| vt.iter().map(|&i| res.z[i]).collect()).collect(),
        alpha: alpha.iter().map(|a| a.eval(&res.z)).collect(),
        objective: res.objective,
    });
    Ok(TubeOutcome {
        status: res.status,
        solve_time,
        plan,
    })
}
