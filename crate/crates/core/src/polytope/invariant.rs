//! Robust pre-sets, the maximal robust control invariant set and an outer
//! approximation of the minimal robust positively invariant set.

use nalgebra::{DMatrix, DVector};

use super::hrep::HPolytope;
use super::ops::{minkowski_sum, project_state};
use super::vrep::VPolytope;
use super::SupportFunction;
use crate::error::{Error, Result};
use crate::linalg::spectral_radius;
use crate::model::OcpSpec;
use crate::qp::{LinExpr, QuadraticProgram, SolveStatus, SolverSettings};
use crate::tolerances::{MRPI_MAX_TERMS, RCI_HAUSDORFF, RCI_MAX_ITER};

/// Rows of `{(x, u) | u ∈ 𝒰, (Â+ΔA_j)x + (B̂+ΔB_j)u + w ∈ target ∀j, ∀w}`.
fn lifted_pre(target: &HPolytope, spec: &OcpSpec) -> Result<HPolytope> {
    let (n_x, n_u) = (spec.n_x(), spec.n_u());
    if target.dim() != n_x {
        return Err(Error::DimensionMismatch("robust pre target".into()));
    }
    let sigma = spec.sigma_w();
    let verts = spec.uncertainty().vertices();
    let n_rows = target.num_rows() * verts.len() + spec.u_set().num_rows();
    let mut f = DMatrix::zeros(n_rows, n_x + n_u);
    let mut b = DVector::zeros(n_rows);
    let mut r = 0;
    for v in verts {
        let a = spec.a_hat() + &v.delta_a;
        let bm = spec.b_hat() + &v.delta_b;
        for (h, g) in target.rows() {
            let ht = h.transpose();
            f.view_mut((r, 0), (1, n_x)).copy_from(&(&ht * &a));
            f.view_mut((r, n_x), (1, n_u)).copy_from(&(&ht * &bm));
            b[r] = g - sigma * h.iter().map(|x| x.abs()).sum::<f64>();
            r += 1;
        }
    }
    for (h, g) in spec.u_set().rows() {
        f.view_mut((r, n_x), (1, n_u)).copy_from(&h.transpose());
        b[r] = g;
        r += 1;
    }
    HPolytope::new(f, b)
}

/// One-step robust controllable set to `target` (not intersected with 𝒳).
/// The disturbance enters through the closed-form erosion `σ_w ‖h‖₁`.
pub fn robust_pre(target: &HPolytope, spec: &OcpSpec) -> Result<HPolytope> {
    if target.is_empty() {
        return Ok(HPolytope::empty(spec.n_x()));
    }
    project_state(&lifted_pre(target, spec)?, spec.n_x())
}

/// Stopping rule and iteration cap for [`max_rci`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RciOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RciOptions {
    fn default() -> Self {
        Self {
            tol: RCI_HAUSDORFF,
            max_iter: RCI_MAX_ITER,
        }
    }
}

/// `C₀ = 𝒳`, `C_{k+1} = Pre(C_k) ∩ 𝒳` until `C_k ⊆ C_{k+1}` within `tol`.
/// Returns the last iterate `C_{k+1}`.
pub fn max_rci(spec: &OcpSpec, opts: RciOptions) -> Result<HPolytope> {
    let x_set = spec.x_set().remove_redundant();
    let mut cur = x_set.clone();
    for _ in 0..opts.max_iter {
        let next = robust_pre(&cur, spec)?.intersect(&x_set)?.remove_redundant();
        if next.is_empty() {
            return Err(Error::EmptyInvariantSet);
        }
        let cur_v = cur.vertices();
        let converged = match &cur_v {
            Ok(v) => next.contains_set(v, opts.tol)?,
            Err(_) => next.contains_set(&cur, opts.tol)?,
        };
        if converged {
            return Ok(next);
        }
        cur = next;
    }
    Err(Error::NotConverged { k: opts.max_iter })
}

/// Worst-case vertex slack of the robust invariance LP.
#[derive(Debug, Clone)]
pub struct RciCertificate {
    /// Per vertex: the largest `s` such that some admissible `u` keeps every
    /// successor at least `s` inside the set.
    pub vertex_slacks: Vec<f64>,
    pub min_slack: f64,
}

impl RciCertificate {
    pub fn passes(&self, tol: f64) -> bool {
        self.min_slack >= -tol
    }
}

/// For every vertex `v` of `set`, maximizes `s` over `u ∈ 𝒰` subject to
/// `h·((Â+ΔA_j)v + (B̂+ΔB_j)u) + σ_w‖h‖₁ + s <= g` for all facets and vertices.
pub fn rci_certificate(set: &HPolytope, spec: &OcpSpec) -> Result<RciCertificate> {
    let verts = set.vertices()?;
    let mut slacks = Vec::with_capacity(verts.vertices().len());
    for v in verts.vertices() {
        slacks.push(vertex_slack(set, spec, v)?);
    }
    let min_slack = slacks.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(RciCertificate {
        vertex_slacks: slacks,
        min_slack,
    })
}

/// Constraints `a_i·u + s <= c_i` of the vertex LP.
fn vertex_lines(set: &HPolytope, spec: &OcpSpec, v: &DVector<f64>) -> Vec<(DVector<f64>, f64)> {
    let sigma = spec.sigma_w();
    let mut lines = Vec::new();
    for d in spec.uncertainty().vertices() {
        let drift = (spec.a_hat() + &d.delta_a) * v;
        let bm = spec.b_hat() + &d.delta_b;
        for (h, g) in set.rows() {
            let c = g - h.dot(&drift) - sigma * h.iter().map(|x| x.abs()).sum::<f64>();
            lines.push((bm.transpose() * &h, c));
        }
    }
    lines
}

fn vertex_slack(set: &HPolytope, spec: &OcpSpec, v: &DVector<f64>) -> Result<f64> {
    let lines = vertex_lines(set, spec, v);
    if spec.n_u() == 1 {
        return Ok(scalar_input_slack(&lines, spec.u_set()));
    }
    let mut qp = QuadraticProgram::new();
    let u: Vec<usize> = (0..spec.n_u()).map(|i| qp.add_variable(format!("u{i}"))).collect();
    let s = qp.add_variable("s");
    for (a, c) in &lines {
        let mut e = LinExpr::var(s);
        for (i, ui) in u.iter().enumerate() {
            e.add_term(*ui, a[i]);
        }
        qp.add_le(&e, *c);
    }
    for (h, g) in spec.u_set().rows() {
        let mut e = LinExpr::zero();
        for (i, ui) in u.iter().enumerate() {
            e.add_term(*ui, h[i]);
        }
        qp.add_le(&e, g);
    }
    qp.add_linear_objective(&LinExpr::var(s), -1.0);
    let r = qp.solve(&SolverSettings::default())?;
    match r.status {
        SolveStatus::Optimal => Ok(r.z[s]),
        SolveStatus::Infeasible => Ok(f64::NEG_INFINITY),
        st => Err(Error::Solver(format!("RCI vertex LP ended with {}", st.as_str()))),
    }
}

/// Exact solution of `max_{u ∈ [lo, hi]} min_i (c_i - a_i u)`: the maximum of
/// a concave piecewise-linear function sits at an interval end or a crossing.
fn scalar_input_slack(lines: &[(DVector<f64>, f64)], u_set: &HPolytope) -> f64 {
    let (lo, hi) = match u_set.bounding_box() {
        Ok((lo, hi)) => (lo[0], hi[0]),
        Err(_) => return f64::NEG_INFINITY,
    };
    let value = |u: f64| {
        lines
            .iter()
            .map(|(a, c)| c - a[0] * u)
            .fold(f64::INFINITY, f64::min)
    };
    let mut best = value(lo).max(value(hi));
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            let da = lines[i].0[0] - lines[j].0[0];
            if da.abs() > 1e-14 {
                let u = (lines[i].1 - lines[j].1) / da;
                if u > lo && u < hi {
                    best = best.max(value(u));
                }
            }
        }
    }
    best
}

/// Outer approximation of the minimal RPI set of `x⁺ = a_cl x + w`, `w ∈ w_set`.
///
/// Builds `F_k = ⊕_{i<k} a_clⁱ W` until `a_clᵏ W ⊆ α W` with
/// `α <= eps/(1+eps)` and returns `F_k / (1-α)`, so the result lies within a
/// factor `1 + eps` of `F_k`.
pub fn mrpi_approx(a_cl: &DMatrix<f64>, w_set: &HPolytope, eps: f64) -> Result<VPolytope> {
    let n = a_cl.nrows();
    if !a_cl.is_square() || w_set.dim() != n {
        return Err(Error::DimensionMismatch("closed loop and disturbance set".into()));
    }
    let rho = spectral_radius(a_cl);
    if rho >= 1.0 {
        return Err(Error::NotContractive { rho });
    }
    let w = w_set.vertices()?;
    if w.vertices().len() == 1 {
        // singleton disturbance: the invariant set is the fixed point
        let fixed = (DMatrix::identity(n, n) - a_cl)
            .lu()
            .solve(&w.vertices()[0])
            .ok_or(Error::NotContractive { rho })?;
        return Ok(VPolytope::point(fixed));
    }
    if !w_set.contains_origin_strictly() {
        return Err(Error::Validation("disturbance set must contain the origin in its interior".into()));
    }
    let target = eps / (1.0 + eps);
    let mut power = DMatrix::identity(n, n);
    let mut sum = w.clone();
    for _ in 1..=MRPI_MAX_TERMS {
        power = a_cl * &power;
        let image = w.linear_map(&power)?;
        let mut alpha: f64 = 0.0;
        for (f, b) in w_set.rows() {
            alpha = alpha.max(image.support(&f)? / b);
        }
        if alpha <= target {
            return Ok(sum.scaled(1.0 / (1.0 - alpha)));
        }
        sum = minkowski_sum(&sum, &image)?;
    }
    Err(Error::NoConvergence {
        iterations: MRPI_MAX_TERMS,
    })
}

/// Minimum facet slack of `a_cl Ω ⊕ W ⊆ Ω`, with Ω given in vertex form.
pub fn rpi_slack(a_cl: &DMatrix<f64>, omega: &VPolytope, w: &dyn SupportFunction) -> Result<f64> {
    if omega.vertices().len() <= 1 {
        // singleton Ω: check every axis direction
        let n = omega.dim();
        let mut worst = f64::INFINITY;
        for i in 0..n {
            for s in [1.0, -1.0] {
                let mut f = DVector::zeros(n);
                f[i] = s;
                let lhs = omega.support(&(a_cl.transpose() * &f))? + w.support(&f)?;
                worst = worst.min(omega.support(&f)? - lhs);
            }
        }
        return Ok(worst);
    }
    let h = omega.to_hrep()?;
    let mut worst = f64::INFINITY;
    for (f, b) in h.rows() {
        let lhs = omega.support(&(a_cl.transpose() * &f))? + w.support(&f)?;
        worst = worst.min(b - lhs);
    }
    Ok(worst)
}
