//! Variable layout and constraint assembly for the SLS robust OCP.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{FilterMode, OcpSpec, UncertaintyVertex};
use crate::qp::{LinExpr, QuadraticProgram};
use crate::tolerances::FILTER_FLOOR;

/// Dense matrix of affine expressions in the QP variables.
#[derive(Debug, Clone)]
pub struct ExprBlock {
    rows: usize,
    cols: usize,
    entries: Vec<LinExpr>,
}

impl ExprBlock {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![LinExpr::zero(); rows * cols],
        }
    }

    fn identity(n: usize) -> Self {
        let mut b = Self::zeros(n, n);
        for i in 0..n {
            b.entries[i * n + i] = LinExpr::constant(1.0);
        }
        b
    }

    fn fresh(qp: &mut QuadraticProgram, rows: usize, cols: usize, name: &str) -> Self {
        let entries = (0..rows * cols)
            .map(|k| LinExpr::var(qp.add_variable(format!("{name}({},{})", k / cols, k % cols))))
            .collect();
        Self { rows, cols, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &LinExpr {
        &self.entries[i * self.cols + j]
    }

    pub fn eval(&self, z: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).eval(z))
    }

    /// `Σ_k m[r,k] · self[k, q]`
    fn left_row(&self, m: &DMatrix<f64>, r: usize, q: usize) -> LinExpr {
        let mut e = LinExpr::zero();
        for k in 0..self.rows {
            e.add_scaled(self.get(k, q), m[(r, k)]);
        }
        e
    }

    /// `Σ_k f[k] · self[k, q]`
    fn left_vec(&self, f: &DVector<f64>, q: usize) -> LinExpr {
        let mut e = LinExpr::zero();
        for k in 0..self.rows {
            e.add_scaled(self.get(k, q), f[k]);
        }
        e
    }
}

/// Index map of the SLS decision variables. Blocks are addressed by
/// `(row t, column c)`; the delay is `t - c`.
#[derive(Debug, Clone)]
pub struct SlsVariables {
    horizon: usize,
    n_x: usize,
    n_u: usize,
    filter_mode: FilterMode,
    /// `phi_x[t][c]` for `c <= t <= T`; diagonal blocks are `diag(d_{t-1})`.
    phi_x: Vec<Vec<ExprBlock>>,
    /// `phi_u[t][c]` for `c <= t <= T-1`; block row `T` is fixed to zero.
    phi_u: Vec<Vec<ExprBlock>>,
    /// `sigma[t][c]` for `c <= t <= T`.
    sigma: Vec<Vec<ExprBlock>>,
    /// `d[t][r]`: variable index of the `r`-th entry of `d_t`, `t < T`.
    d: Vec<Vec<usize>>,
    over_approx_groups: usize,
    num_slacks: usize,
}

impl SlsVariables {
    fn layout(qp: &mut QuadraticProgram, spec: &OcpSpec) -> Self {
        let (t_h, n, m) = (spec.horizon(), spec.n_x(), spec.n_u());
        let d: Vec<Vec<usize>> = (0..t_h)
            .map(|t| (0..n).map(|r| qp.add_variable(format!("d[{t}]({r})"))).collect())
            .collect();
        let diag_d = |t: usize| {
            let mut b = ExprBlock::zeros(n, n);
            for r in 0..n {
                b.entries[r * n + r] = LinExpr::var(d[t - 1][r]);
            }
            b
        };
        let mut phi_x = Vec::with_capacity(t_h + 1);
        let mut sigma = Vec::with_capacity(t_h + 1);
        for t in 0..=t_h {
            let mut px = Vec::with_capacity(t + 1);
            let mut sg = Vec::with_capacity(t + 1);
            for c in 0..=t {
                if c == t {
                    let blk = if t == 0 { ExprBlock::identity(n) } else { diag_d(t) };
                    px.push(blk.clone());
                    sg.push(blk);
                } else {
                    px.push(ExprBlock::fresh(qp, n, n, &format!("phix[{t},{c}]")));
                    sg.push(match spec.filter_mode() {
                        FilterMode::FullBlockLowerTriangular => {
                            ExprBlock::fresh(qp, n, n, &format!("sigma[{t},{c}]"))
                        }
                        FilterMode::DiagonalOnly => ExprBlock::zeros(n, n),
                    });
                }
            }
            phi_x.push(px);
            sigma.push(sg);
        }
        let phi_u = (0..t_h)
            .map(|t| {
                (0..=t)
                    .map(|c| ExprBlock::fresh(qp, m, n, &format!("phiu[{t},{c}]")))
                    .collect()
            })
            .collect();
        Self {
            horizon: t_h,
            n_x: n,
            n_u: m,
            filter_mode: spec.filter_mode(),
            phi_x,
            phi_u,
            sigma,
            d,
            over_approx_groups: 0,
            num_slacks: 0,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn filter_mode(&self) -> FilterMode {
        self.filter_mode
    }

    pub fn phi_x(&self, t: usize, c: usize) -> &ExprBlock {
        &self.phi_x[t][c]
    }

    /// `None` for the excluded block row `T`.
    pub fn phi_u(&self, t: usize, c: usize) -> Option<&ExprBlock> {
        self.phi_u.get(t).map(|row| &row[c])
    }

    pub fn sigma(&self, t: usize, c: usize) -> &ExprBlock {
        &self.sigma[t][c]
    }

    pub fn d_index(&self, t: usize, r: usize) -> usize {
        self.d[t][r]
    }

    /// Number of (t, row, vertex) over-approximation constraints.
    pub fn over_approx_groups(&self) -> usize {
        self.over_approx_groups
    }

    pub fn num_slacks(&self) -> usize {
        self.num_slacks
    }

    /// Scalar variable count per role, for diagnostics.
    pub fn counts(&self) -> VariableCounts {
        let free = |blocks: &[Vec<ExprBlock>]| {
            blocks
                .iter()
                .flatten()
                .flat_map(|b| b.entries.iter())
                .filter(|e| e.terms.len() == 1 && e.constant == 0.0)
                .count()
        };
        let d = self.horizon * self.n_x;
        VariableCounts {
            phi_x: free(&self.phi_x) - d,
            phi_u: free(&self.phi_u),
            sigma: free(&self.sigma) - d,
            d,
            slacks: self.num_slacks,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableCounts {
    pub phi_x: usize,
    pub phi_u: usize,
    pub sigma: usize,
    pub d: usize,
    pub slacks: usize,
}

/// `|e|` as a term for an upper bound: constant expressions fold to their
/// magnitude, others get an epigraph slack with two sign inequalities.
fn abs_term(qp: &mut QuadraticProgram, slacks: &mut usize, e: LinExpr, name: &str) -> LinExpr {
    let e = e.compact();
    if e.is_constant() {
        return LinExpr::constant(e.constant.abs());
    }
    let s = qp.add_variable(name.to_string());
    *slacks += 1;
    let mut up = e.clone();
    up.add_term(s, -1.0);
    qp.add_le(&up, 0.0);
    let mut down = e.scaled(-1.0);
    down.add_term(s, -1.0);
    qp.add_le(&down, 0.0);
    LinExpr::var(s)
}

fn distinct_vertices(spec: &OcpSpec) -> Vec<&UncertaintyVertex> {
    let mut out: Vec<&UncertaintyVertex> = Vec::new();
    for v in spec.uncertainty().vertices() {
        if !out.iter().any(|u| *u == v) {
            out.push(v);
        }
    }
    out
}

/// Builds the robust OCP as a QP. `filter_weight` adds `filter_weight · Σ d`
/// to the objective (zero reproduces the nominal cost alone).
pub fn assemble_qp(
    spec: &OcpSpec,
    x0: &DVector<f64>,
    filter_weight: f64,
) -> Result<(QuadraticProgram, SlsVariables)> {
    let (t_h, n, m) = (spec.horizon(), spec.n_x(), spec.n_u());
    if x0.len() != n {
        return Err(Error::DimensionMismatch(format!("x0 has length {}, expected {n}", x0.len())));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("x0 must be finite".into()));
    }
    if !(filter_weight >= 0.0) {
        return Err(Error::Validation("filter weight must be nonnegative".into()));
    }
    let mut qp = QuadraticProgram::new();
    let mut vars = SlsVariables::layout(&mut qp, spec);
    let (a_hat, b_hat) = (spec.a_hat(), spec.b_hat());
    let sigma_w = spec.sigma_w();
    let mut slacks = 0usize;

    // Affine SLS constraint, column aligned:
    // Φ̃x[t,c] - Â Φ̃x[t-1,c] - B̂ Φ̃u[t-1,c] = Σ[t,c] for c < t.
    for t in 1..=t_h {
        for c in 0..t {
            for i in 0..n {
                for q in 0..n {
                    let mut e = vars.phi_x[t][c].get(i, q).clone();
                    e.add_scaled(&vars.phi_x[t - 1][c].left_row(a_hat, i, q), -1.0);
                    e.add_scaled(&vars.phi_u[t - 1][c].left_row(b_hat, i, q), -1.0);
                    e.add_scaled(vars.sigma[t][c].get(i, q), -1.0);
                    qp.add_eq(&e, 0.0);
                }
            }
        }
    }

    // d floors
    let floor = sigma_w.max(FILTER_FLOOR);
    for t in 0..t_h {
        for r in 0..n {
            qp.add_le(&LinExpr::var(vars.d[t][r]).scaled(-1.0), -floor);
        }
    }

    // Over-approximation of the lumped uncertainty by Σ.
    let verts = distinct_vertices(spec);
    for t in 0..t_h {
        for (j, v) in verts.iter().enumerate() {
            for r in 0..n {
                // entry (r, q) of ΔA Φ̃x[t,c] + ΔB Φ̃u[t,c] - Σ[t+1,c]
                let entry = |vars: &SlsVariables, c: usize, q: usize| {
                    let mut e = vars.phi_x[t][c].left_row(&v.delta_a, r, q);
                    e.add_scaled(&vars.phi_u[t][c].left_row(&v.delta_b, r, q), 1.0);
                    e.add_scaled(vars.sigma[t + 1][c].get(r, q), -1.0);
                    e
                };
                let mut lhs = LinExpr::constant(sigma_w);
                let mut col0 = LinExpr::zero();
                for q in 0..n {
                    col0.add_scaled(&entry(&vars, 0, q), x0[q]);
                }
                let s = abs_term(&mut qp, &mut slacks, col0, &format!("oa[{t},{j},{r}]x0"));
                lhs.add_scaled(&s, 1.0);
                for c in 1..=t {
                    for q in 0..n {
                        let e = entry(&vars, c, q);
                        let s = abs_term(&mut qp, &mut slacks, e, &format!("oa[{t},{j},{r}]({c},{q})"));
                        lhs.add_scaled(&s, 1.0);
                    }
                }
                lhs.add_term(vars.d[t][r], -1.0);
                qp.add_le(&lhs, 0.0);
                vars.over_approx_groups += 1;
            }
        }
    }

    // Tightened state, terminal and input constraints.
    for t in 0..=t_h {
        let set = if t < t_h { spec.x_set() } else { spec.terminal_set() };
        for (k, (f, b)) in set.rows().enumerate() {
            let lhs = tightened_lhs(&mut qp, &mut slacks, &vars.phi_x[t], &f, x0, &format!("tx[{t},{k}]"));
            qp.add_le(&lhs, b);
        }
    }
    for t in 0..t_h {
        for (k, (f, b)) in spec.u_set().rows().enumerate() {
            let lhs = tightened_lhs(&mut qp, &mut slacks, &vars.phi_u[t], &f, x0, &format!("tu[{t},{k}]"));
            qp.add_le(&lhs, b);
        }
    }

    // Nominal objective on the first block columns.
    let w = spec.weights();
    for t in 0..=t_h {
        let nominal: Vec<LinExpr> = (0..n)
            .map(|i| {
                let mut e = LinExpr::zero();
                for q in 0..n {
                    e.add_scaled(vars.phi_x[t][0].get(i, q), x0[q]);
                }
                e.compact()
            })
            .collect();
        qp.add_quadratic_form(&nominal, if t < t_h { w.q() } else { w.q_t() });
    }
    for t in 0..t_h {
        let nominal: Vec<LinExpr> = (0..m)
            .map(|i| {
                let mut e = LinExpr::zero();
                for q in 0..n {
                    e.add_scaled(vars.phi_u[t][0].get(i, q), x0[q]);
                }
                e.compact()
            })
            .collect();
        qp.add_quadratic_form(&nominal, w.r());
    }
    if filter_weight > 0.0 {
        for t in 0..t_h {
            for r in 0..n {
                qp.add_linear_objective(&LinExpr::var(vars.d[t][r]), filter_weight);
            }
        }
    }
    vars.num_slacks = slacks;
    Ok((qp, vars))
}

/// `f·B[0]·x0 + Σ_{c>=1} ‖f·B[c]‖₁` for one block row `B`.
fn tightened_lhs(
    qp: &mut QuadraticProgram,
    slacks: &mut usize,
    row: &[ExprBlock],
    f: &DVector<f64>,
    x0: &DVector<f64>,
    name: &str,
) -> LinExpr {
    let n = x0.len();
    let mut lhs = LinExpr::zero();
    for q in 0..n {
        lhs.add_scaled(&row[0].left_vec(f, q), x0[q]);
    }
    for (c, blk) in row.iter().enumerate().skip(1) {
        for q in 0..n {
            let s = abs_term(qp, slacks, blk.left_vec(f, q), &format!("{name}({c},{q})"));
            lhs.add_scaled(&s, 1.0);
        }
    }
    lhs
}
