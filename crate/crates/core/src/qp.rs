//! Solver-agnostic convex QP standard form.
//!
//! ```text
//! minimize    ½ zᵀ P z + qᵀ z + c
//! subject to  A_eq z  = b_eq
//!             G z    <= h
//! ```
//!
//! Problems are assembled row by row from [`LinExpr`]s and handed to an
//! interior-point backend (Clarabel). Residuals are recomputed here from the
//! original data, so `Optimal` always means the returned point satisfies the
//! constraints to the configured tolerance.

use std::fmt::Write as _;
use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tolerances::{QP_ABS, QP_INFEASIBLE, QP_REL};

/// Affine expression `Σ coef·z[idx] + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(idx: usize) -> Self {
        Self {
            terms: vec![(idx, 1.0)],
            constant: 0.0,
        }
    }

    /// `self += coef * other`
    pub fn add_scaled(&mut self, other: &LinExpr, coef: f64) {
        if coef == 0.0 {
            return;
        }
        self.terms
            .extend(other.terms.iter().map(|&(i, v)| (i, v * coef)));
        self.constant += coef * other.constant;
    }

    pub fn add_term(&mut self, idx: usize, coef: f64) {
        if coef != 0.0 {
            self.terms.push((idx, coef));
        }
    }

    pub fn scaled(&self, coef: f64) -> LinExpr {
        let mut out = LinExpr::zero();
        out.add_scaled(self, coef);
        out
    }

    /// Sorts terms, merges duplicate indices and drops exact zeros.
    pub fn compact(mut self) -> Self {
        self.terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for (i, v) in self.terms {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => merged.push((i, v)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        self.terms = merged;
        self
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.1 == 0.0)
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, v)| v * z[i]).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    /// Only reported for problems whose objective is unbounded below
    /// (support-function LPs in unbounded directions).
    Unbounded,
    MaxIterations,
    NumericalError,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::MaxIterations => "max_iterations",
            SolveStatus::NumericalError => "numerical_error",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub infeasibility_tol: f64,
    pub max_iter: u32,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            abs_tol: QP_ABS,
            rel_tol: QP_REL,
            infeasibility_tol: QP_INFEASIBLE,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Primal point; meaningful only when `status == Optimal`.
    pub z: Vec<f64>,
    pub objective: f64,
    /// Wall-clock seconds.
    pub solve_time: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: u32,
}

impl SolveResult {
    fn without_solution(status: SolveStatus, n: usize, solve_time: f64) -> Self {
        Self {
            status,
            z: vec![0.0; n],
            objective: f64::NAN,
            solve_time,
            primal_residual: f64::NAN,
            dual_residual: f64::NAN,
            iterations: 0,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

const STATIC_REGULARIZATION: [f64; 3] = [1e-8, 1e-7, 1e-6];

/// Sparse QP in standard form. `P` is stored as its upper triangle.
#[derive(Debug, Clone, Default)]
pub struct QuadraticProgram {
    names: Vec<String>,
    p_upper: Vec<(usize, usize, f64)>,
    q: Vec<f64>,
    offset: f64,
    eq_rows: Vec<Vec<(usize, f64)>>,
    b_eq: Vec<f64>,
    ineq_rows: Vec<Vec<(usize, f64)>>,
    h: Vec<f64>,
}

impl QuadraticProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, name: impl Into<String>) -> usize {
        self.names.push(name.into());
        self.q.push(0.0);
        self.names.len() - 1
    }

    pub fn num_variables(&self) -> usize {
        self.names.len()
    }

    pub fn num_equalities(&self) -> usize {
        self.eq_rows.len()
    }

    pub fn num_inequalities(&self) -> usize {
        self.ineq_rows.len()
    }

    pub fn variable_name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn objective_offset(&self) -> f64 {
        self.offset
    }

    /// `expr == rhs`
    pub fn add_eq(&mut self, expr: &LinExpr, rhs: f64) {
        let e = expr.clone().compact();
        self.b_eq.push(rhs - e.constant);
        self.eq_rows.push(e.terms);
    }

    /// `expr <= rhs`
    pub fn add_le(&mut self, expr: &LinExpr, rhs: f64) {
        let e = expr.clone().compact();
        self.h.push(rhs - e.constant);
        self.ineq_rows.push(e.terms);
    }

    /// Adds `coef * expr` to the linear part of the objective.
    pub fn add_linear_objective(&mut self, expr: &LinExpr, coef: f64) {
        for &(i, v) in &expr.terms {
            self.q[i] += coef * v;
        }
        self.offset += coef * expr.constant;
    }

    /// Adds `eᵀ W e` to the objective for a vector of affine expressions `e`.
    pub fn add_quadratic_form(&mut self, exprs: &[LinExpr], w: &DMatrix<f64>) {
        assert_eq!(w.nrows(), exprs.len());
        assert_eq!(w.ncols(), exprs.len());
        for (a, ea) in exprs.iter().enumerate() {
            for (b, eb) in exprs.iter().enumerate() {
                let wab = w[(a, b)];
                if wab == 0.0 {
                    continue;
                }
                // eᵀWe = zᵀCᵀWCz + 2 kᵀWCz + kᵀWk with the ½ zᵀPz convention.
                for &(i, ci) in &ea.terms {
                    for &(j, cj) in &eb.terms {
                        if i <= j {
                            let v = if i == j { 2.0 } else { 1.0 } * wab * ci * cj;
                            self.p_upper.push((i, j, v));
                        } else {
                            self.p_upper.push((j, i, wab * ci * cj));
                        }
                    }
                }
                for &(j, cj) in &eb.terms {
                    self.q[j] += 2.0 * wab * ea.constant * cj;
                }
                self.offset += wab * ea.constant * eb.constant;
            }
        }
    }

    pub fn objective_value(&self, z: &[f64]) -> f64 {
        let quad: f64 = self
            .p_upper
            .iter()
            .map(|&(i, j, v)| {
                if i == j {
                    0.5 * v * z[i] * z[i]
                } else {
                    v * z[i] * z[j]
                }
            })
            .sum();
        quad + self.q.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() + self.offset
    }

    /// Largest equality violation and largest positive inequality violation.
    pub fn primal_residual(&self, z: &[f64]) -> f64 {
        let dot = |row: &[(usize, f64)]| row.iter().map(|&(i, v)| v * z[i]).sum::<f64>();
        let eq = self
            .eq_rows
            .iter()
            .zip(&self.b_eq)
            .map(|(r, b)| (dot(r) - b).abs())
            .fold(0.0, f64::max);
        let ineq = self
            .ineq_rows
            .iter()
            .zip(&self.h)
            .map(|(r, h)| (dot(r) - h).max(0.0))
            .fold(0.0, f64::max);
        eq.max(ineq)
    }

    fn data_scale(&self) -> f64 {
        self.b_eq
            .iter()
            .chain(&self.h)
            .fold(1.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn solve(&self, settings: &SolverSettings) -> Result<SolveResult> {
        let start = Instant::now();
        let n = self.num_variables();

        // Presolve: rows without coefficients are decided here.
        let mut eq_keep = Vec::new();
        for (k, row) in self.eq_rows.iter().enumerate() {
            if row.is_empty() {
                if self.b_eq[k].abs() > settings.infeasibility_tol {
                    return Ok(SolveResult::without_solution(
                        SolveStatus::Infeasible,
                        n,
                        start.elapsed().as_secs_f64(),
                    ));
                }
            } else {
                eq_keep.push(k);
            }
        }
        let mut in_keep = Vec::new();
        for (k, row) in self.ineq_rows.iter().enumerate() {
            if row.is_empty() {
                if self.h[k] < -settings.infeasibility_tol {
                    return Ok(SolveResult::without_solution(
                        SolveStatus::Infeasible,
                        n,
                        start.elapsed().as_secs_f64(),
                    ));
                }
            } else {
                in_keep.push(k);
            }
        }

        if n == 0 {
            return Ok(SolveResult {
                status: SolveStatus::Optimal,
                z: Vec::new(),
                objective: self.offset,
                solve_time: start.elapsed().as_secs_f64(),
                primal_residual: 0.0,
                dual_residual: 0.0,
                iterations: 0,
            });
        }

        let m = eq_keep.len() + in_keep.len();
        let mut ai = Vec::new();
        let mut aj = Vec::new();
        let mut av = Vec::new();
        let mut b = Vec::with_capacity(m);
        for (r, &k) in eq_keep.iter().chain(in_keep.iter()).enumerate() {
            let (row, rhs) = if r < eq_keep.len() {
                (&self.eq_rows[k], self.b_eq[k])
            } else {
                (&self.ineq_rows[k], self.h[k])
            };
            for &(j, v) in row {
                ai.push(r);
                aj.push(j);
                av.push(v);
            }
            b.push(rhs);
        }
        let a = CscMatrix::new_from_triplets(m, n, ai, aj, av);
        let (pi, pj, pv): (Vec<_>, Vec<_>, Vec<_>) = self
            .p_upper
            .iter()
            .map(|&(i, j, v)| (i, j, v))
            .fold((vec![], vec![], vec![]), |mut acc, (i, j, v)| {
                acc.0.push(i);
                acc.1.push(j);
                acc.2.push(v);
                acc
            });
        let p = CscMatrix::new_from_triplets(n, n, pi, pj, pv);

        let mut cones = Vec::new();
        if !eq_keep.is_empty() {
            cones.push(SupportedConeT::ZeroConeT(eq_keep.len()));
        }
        if !in_keep.is_empty() {
            cones.push(SupportedConeT::NonnegativeConeT(in_keep.len()));
        }

        let tol = settings.abs_tol.min(settings.rel_tol) * 0.1;
        // Degenerate optimal faces can break the first KKT factorization;
        // retry with a stronger static regularization before giving up.
        let mut solver = None;
        for reg in STATIC_REGULARIZATION {
            let clarabel_settings = DefaultSettingsBuilder::default()
                .verbose(false)
                .max_iter(settings.max_iter)
                .tol_feas(tol)
                .tol_gap_abs(tol)
                .tol_gap_rel(tol)
                .tol_infeas_abs(settings.infeasibility_tol)
                .tol_infeas_rel(settings.infeasibility_tol)
                .static_regularization_constant(reg)
                .max_threads(1)
                .build()
                .map_err(|e| Error::Solver(format!("settings: {e:?}")))?;
            let mut s = DefaultSolver::new(&p, &self.q, &a, &b, &cones, clarabel_settings)
                .map_err(|e| Error::Solver(e.to_string()))?;
            s.solve();
            let retry = matches!(
                s.solution.status,
                SolverStatus::NumericalError | SolverStatus::InsufficientProgress
            );
            solver = Some(s);
            if !retry {
                break;
            }
        }
        let solver = solver.expect("at least one regularization level");
        let sol = &solver.solution;
        let elapsed = start.elapsed().as_secs_f64();

        let z = sol.x.clone();
        let primal_residual = self.primal_residual(&z);

        // Dual residual ‖P z + q + Aᵀ y‖∞ on the data actually handed over.
        let mut grad = self.q.clone();
        for &(i, j, v) in &self.p_upper {
            if i == j {
                grad[i] += v * z[i];
            } else {
                grad[i] += v * z[j];
                grad[j] += v * z[i];
            }
        }
        for (r, &k) in eq_keep.iter().chain(in_keep.iter()).enumerate() {
            let row = if r < eq_keep.len() {
                &self.eq_rows[k]
            } else {
                &self.ineq_rows[k]
            };
            for &(j, v) in row {
                grad[j] += v * sol.z[r];
            }
        }
        let dual_residual = grad.iter().fold(0.0_f64, |acc, g| acc.max(g.abs()));

        let primal_ok =
            primal_residual <= settings.abs_tol + settings.rel_tol * self.data_scale();
        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved if primal_ok => {
                SolveStatus::Optimal
            }
            SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::MaxIterations,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                SolveStatus::Infeasible
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                SolveStatus::Unbounded
            }
            SolverStatus::MaxIterations
            | SolverStatus::MaxTime
            | SolverStatus::InsufficientProgress
            | SolverStatus::CallbackTerminated
            | SolverStatus::Unsolved => SolveStatus::MaxIterations,
            SolverStatus::NumericalError => SolveStatus::NumericalError,
        };

        let objective = if status == SolveStatus::Optimal {
            self.objective_value(&z)
        } else {
            f64::NAN
        };
        Ok(SolveResult {
            status,
            z,
            objective,
            solve_time: elapsed,
            primal_residual,
            dual_residual,
            iterations: sol.iterations,
        })
    }

    /// Text dump with one `triplet i j v` section per matrix, for
    /// cross-checking against external solvers.
    pub fn dump(&self) -> String {
        let n = self.num_variables();
        let mut s = String::new();
        let _ = writeln!(s, "# ½ zᵀPz + qᵀz + c, A_eq z = b_eq, G z <= h");
        let _ = writeln!(s, "variables {n}");
        let _ = writeln!(s, "offset {:e}", self.offset);
        let _ = writeln!(s, "section P {n} {n}");
        for &(i, j, v) in &self.p_upper {
            let _ = writeln!(s, "triplet {i} {j} {v:e}");
        }
        let _ = writeln!(s, "section q {n}");
        for (i, v) in self.q.iter().enumerate().filter(|(_, v)| **v != 0.0) {
            let _ = writeln!(s, "triplet {i} 0 {v:e}");
        }
        for (name, rows, rhs) in [
            ("A_eq", &self.eq_rows, &self.b_eq),
            ("G", &self.ineq_rows, &self.h),
        ] {
            let _ = writeln!(s, "section {name} {} {n}", rows.len());
            for (r, row) in rows.iter().enumerate() {
                for &(j, v) in row {
                    let _ = writeln!(s, "triplet {r} {j} {v:e}");
                }
            }
            let rhs_name = if name == "G" { "h" } else { "b_eq" };
            let _ = writeln!(s, "section {rhs_name} {}", rhs.len());
            for (r, v) in rhs.iter().enumerate() {
                let _ = writeln!(s, "triplet {r} 0 {v:e}");
            }
        }
        s
    }
}

/// Solves `minimize cᵀz` subject to `G z <= h` (dense rows).
pub fn solve_lp(c: &[f64], g: &DMatrix<f64>, h: &[f64]) -> Result<SolveResult> {
    assert_eq!(g.ncols(), c.len());
    assert_eq!(g.nrows(), h.len());
    let mut qp = QuadraticProgram::new();
    for j in 0..c.len() {
        qp.add_variable(format!("z{j}"));
    }
    for (i, hi) in h.iter().enumerate() {
        let mut e = LinExpr::zero();
        for j in 0..c.len() {
            e.add_term(j, g[(i, j)]);
        }
        qp.add_le(&e, *hi);
    }
    let mut obj = LinExpr::zero();
    for (j, cj) in c.iter().enumerate() {
        obj.add_term(j, *cj);
    }
    qp.add_linear_objective(&obj, 1.0);
    qp.solve(&SolverSettings::default())
}
