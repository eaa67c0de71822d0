//! Finite-horizon block-lower-triangular (causal) operators.
//!
//! An operator over horizon `T` has `(T+1) x (T+1)` blocks of size `p x q`.
//! Blocks are addressed by `(t, k)` with `0 <= k <= t <= T`: row `t`, delay
//! `k`. Block `(t, k)` sits at block-row `t` and block-column `t - k`, so
//! `(t, 0)` is the diagonal and `(t, t)` is column 0 (the block that
//! multiplies the initial condition).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tolerances::MAX_CONDITION;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockLtOperator {
    horizon: usize,
    rows: usize,
    cols: usize,
    blocks: BTreeMap<(usize, usize), DMatrix<f64>>,
}

impl BlockLtOperator {
    /// The zero operator.
    pub fn zeros(horizon: usize, rows: usize, cols: usize) -> Self {
        Self {
            horizon,
            rows,
            cols,
            blocks: BTreeMap::new(),
        }
    }

    pub fn identity(horizon: usize, n: usize) -> Self {
        let mut op = Self::zeros(horizon, n, n);
        for t in 0..=horizon {
            op.blocks.insert((t, 0), DMatrix::identity(n, n));
        }
        op
    }

    /// `Z · blkdiag(m, …, m)`: block `(t, 1) = m` for `1 <= t <= T`.
    pub fn shift_stack(m: &DMatrix<f64>, horizon: usize) -> Self {
        let mut op = Self::zeros(horizon, m.nrows(), m.ncols());
        for t in 1..=horizon {
            op.blocks.insert((t, 1), m.clone());
        }
        op
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn row_block_dim(&self) -> usize {
        self.rows
    }

    pub fn col_block_dim(&self) -> usize {
        self.cols
    }

    /// Stored block, `None` when the block is structurally zero.
    pub fn block(&self, t: usize, k: usize) -> Option<&DMatrix<f64>> {
        self.blocks.get(&(t, k))
    }

    pub fn block_or_zero(&self, t: usize, k: usize) -> DMatrix<f64> {
        self.blocks
            .get(&(t, k))
            .cloned()
            .unwrap_or_else(|| DMatrix::zeros(self.rows, self.cols))
    }

    /// Block at block-row `t`, block-column `c` (`c <= t`).
    pub fn at(&self, t: usize, c: usize) -> Option<&DMatrix<f64>> {
        debug_assert!(c <= t);
        self.blocks.get(&(t, t - c))
    }

    pub fn set_block(&mut self, t: usize, k: usize, m: DMatrix<f64>) -> Result<()> {
        if k > t || t > self.horizon {
            return Err(Error::DimensionMismatch(format!(
                "block ({t},{k}) outside a horizon-{} lower triangle",
                self.horizon
            )));
        }
        if m.shape() != (self.rows, self.cols) {
            return Err(Error::DimensionMismatch(format!(
                "block ({t},{k}) has shape {:?}, expected {:?}",
                m.shape(),
                (self.rows, self.cols)
            )));
        }
        self.blocks.insert((t, k), m);
        Ok(())
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&(usize, usize), &DMatrix<f64>)> {
        self.blocks.iter()
    }

    /// `[R^{0,0}, R^{1,1}, …, R^{T,T}]`, the block column multiplying `x0`.
    pub fn first_block_column(&self) -> Vec<DMatrix<f64>> {
        (0..=self.horizon).map(|t| self.block_or_zero(t, t)).collect()
    }

    pub fn multiply(&self, other: &BlockLtOperator) -> Result<BlockLtOperator> {
        if self.cols != other.rows || self.horizon != other.horizon {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply horizon-{} {}x{} blocks by horizon-{} {}x{} blocks",
                self.horizon, self.rows, self.cols, other.horizon, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.horizon, self.rows, other.cols);
        for t in 0..=self.horizon {
            for c in 0..=t {
                let mut acc: Option<DMatrix<f64>> = None;
                for m in c..=t {
                    if let (Some(a), Some(b)) = (self.at(t, m), other.at(m, c)) {
                        let prod = a * b;
                        acc = Some(match acc {
                            Some(s) => s + prod,
                            None => prod,
                        });
                    }
                }
                if let Some(s) = acc {
                    out.blocks.insert((t, t - c), s);
                }
            }
        }
        Ok(out)
    }

    /// Inverse by block forward substitution.
    pub fn inverse(&self) -> Result<BlockLtOperator> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch(
                "only square blocks can be inverted".into(),
            ));
        }
        let n = self.rows;
        let mut diag_inv = Vec::with_capacity(self.horizon + 1);
        for t in 0..=self.horizon {
            let d = self.at(t, t).ok_or(Error::SingularDiagonal { t })?;
            let sv = d.singular_values();
            let (smax, smin) = (sv.max(), sv.min());
            if !(smin > 0.0) || smax / smin > MAX_CONDITION {
                return Err(Error::SingularDiagonal { t });
            }
            diag_inv.push(d.clone().try_inverse().ok_or(Error::SingularDiagonal { t })?);
        }

        let mut out = Self::zeros(self.horizon, n, n);
        for c in 0..=self.horizon {
            out.blocks.insert((c, 0), diag_inv[c].clone());
            for t in c + 1..=self.horizon {
                let mut acc = DMatrix::zeros(n, n);
                let mut any = false;
                for m in c..t {
                    if let (Some(a), Some(x)) = (self.at(t, m), out.at(m, c)) {
                        acc += a * x;
                        any = true;
                    }
                }
                if any {
                    out.blocks.insert((t, t - c), -(&diag_inv[t] * acc));
                }
            }
        }
        Ok(out)
    }

    /// Solves `self · y = rhs` for a stacked signal by forward substitution.
    pub fn solve_lower(&self, rhs: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        if rhs.len() != self.horizon + 1 || rhs.iter().any(|r| r.len() != self.rows) {
            return Err(Error::DimensionMismatch(
                "right-hand side does not match the operator layout".into(),
            ));
        }
        let mut y: Vec<DVector<f64>> = Vec::with_capacity(rhs.len());
        for t in 0..=self.horizon {
            let mut r = rhs[t].clone();
            for (c, yc) in y.iter().enumerate() {
                if let Some(blk) = self.at(t, c) {
                    r -= blk * yc;
                }
            }
            let d = self.at(t, t).ok_or(Error::SingularDiagonal { t })?;
            let yt = d
                .clone()
                .lu()
                .solve(&r)
                .ok_or(Error::SingularDiagonal { t })?;
            y.push(yt);
        }
        Ok(y)
    }

    /// Applies the operator to a stacked signal.
    pub fn apply(&self, x: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        if x.len() != self.horizon + 1 || x.iter().any(|v| v.len() != self.cols) {
            return Err(Error::DimensionMismatch(
                "signal does not match the operator layout".into(),
            ));
        }
        Ok((0..=self.horizon)
            .map(|t| {
                let mut acc = DVector::zeros(self.rows);
                for (c, xc) in x.iter().enumerate().take(t + 1) {
                    if let Some(blk) = self.at(t, c) {
                        acc += blk * xc;
                    }
                }
                acc
            })
            .collect())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let (p, q) = (self.rows, self.cols);
        let mut m = DMatrix::zeros((self.horizon + 1) * p, (self.horizon + 1) * q);
        for (&(t, k), blk) in &self.blocks {
            let c = t - k;
            m.view_mut((t * p, c * q), (p, q)).copy_from(blk);
        }
        m
    }

    /// Reads the lower block triangle of a dense matrix (upper part ignored).
    pub fn from_dense(m: &DMatrix<f64>, horizon: usize, rows: usize, cols: usize) -> Result<Self> {
        if m.shape() != ((horizon + 1) * rows, (horizon + 1) * cols) {
            return Err(Error::DimensionMismatch("dense matrix shape".into()));
        }
        let mut op = Self::zeros(horizon, rows, cols);
        for t in 0..=horizon {
            for c in 0..=t {
                let blk = m.view((t * rows, c * cols), (rows, cols)).into_owned();
                if blk.iter().any(|v| *v != 0.0) {
                    op.blocks.insert((t, t - c), blk);
                }
            }
        }
        Ok(op)
    }

    /// Dense form as CSV: a `rows,cols` header line, then one line per row.
    pub fn to_csv(&self) -> String {
        let d = self.to_dense();
        let mut s = String::new();
        let _ = writeln!(s, "{},{}", d.nrows(), d.ncols());
        for i in 0..d.nrows() {
            let line: Vec<String> = (0..d.ncols()).map(|j| format!("{}", d[(i, j)])).collect();
            let _ = writeln!(s, "{}", line.join(","));
        }
        s
    }

    pub fn max_abs_diff(&self, other: &BlockLtOperator) -> f64 {
        (self.to_dense() - other.to_dense()).amax()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(horizon: usize, entries: &[(usize, usize, f64)]) -> BlockLtOperator {
        let mut op = BlockLtOperator::zeros(horizon, 1, 1);
        for &(t, k, v) in entries {
            op.set_block(t, k, DMatrix::from_element(1, 1, v)).unwrap();
        }
        op
    }

    #[test]
    fn identity_is_neutral() {
        for t in 0..4 {
            let i = BlockLtOperator::identity(t, 3);
            let p = i.multiply(&i).unwrap();
            assert_eq!(p.to_dense(), DMatrix::identity(3 * (t + 1), 3 * (t + 1)));
        }
    }

    #[test]
    fn two_by_two_product() {
        // a = [[1],[2,3]], b = [[4],[5,6]] in dense lower-triangular layout.
        let a = scalar(1, &[(0, 0, 1.0), (1, 1, 2.0), (1, 0, 3.0)]);
        let b = scalar(1, &[(0, 0, 4.0), (1, 1, 5.0), (1, 0, 6.0)]);
        let p = a.multiply(&b).unwrap();
        assert_eq!(p.block_or_zero(0, 0)[(0, 0)], 4.0);
        assert_eq!(p.block_or_zero(1, 1)[(0, 0)], 23.0);
        assert_eq!(p.block_or_zero(1, 0)[(0, 0)], 18.0);
    }

    #[test]
    fn analytic_triangular_inverse() {
        let a = scalar(1, &[(0, 0, 1.0), (1, 1, 0.7), (1, 0, 1.0)]);
        let inv = a.inverse().unwrap();
        assert!((inv.block_or_zero(1, 1)[(0, 0)] + 0.7).abs() < 1e-15);
        assert_eq!(inv.block_or_zero(1, 0)[(0, 0)], 1.0);
        assert_eq!(BlockLtOperator::identity(3, 2).inverse().unwrap(), BlockLtOperator::identity(3, 2));
    }

    #[test]
    fn singular_diagonal_reported() {
        let a = scalar(2, &[(0, 0, 1.0), (1, 0, 0.0), (2, 0, 1.0)]);
        assert!(matches!(a.inverse(), Err(Error::SingularDiagonal { t: 1 })));
    }

    #[test]
    fn shift_stack_layout() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.15, 0.1, 1.0]);
        let z = BlockLtOperator::shift_stack(&m, 10);
        assert_eq!(z.block_or_zero(3, 1), m);
        assert!(z.block(3, 0).is_none());
        let fc = z.first_block_column();
        assert_eq!(fc[1], m);
        assert!(fc.iter().enumerate().all(|(t, b)| t == 1 || b.amax() == 0.0));

        let i2 = BlockLtOperator::shift_stack(&DMatrix::identity(2, 2), 2);
        let d = i2.to_dense();
        for r in 0..6 {
            for c in 0..6 {
                let expected = if r >= 2 && c == r - 2 { 1.0 } else { 0.0 };
                assert_eq!(d[(r, c)], expected);
            }
        }
    }

    #[test]
    fn first_block_column_of_scaled_diagonal() {
        let mut op = BlockLtOperator::zeros(3, 2, 2);
        for t in 0..=3 {
            op.set_block(t, t, DMatrix::identity(2, 2) * t as f64).unwrap();
        }
        let fc = op.first_block_column();
        for (t, b) in fc.iter().enumerate() {
            assert_eq!(*b, DMatrix::identity(2, 2) * t as f64);
        }
    }

    #[test]
    fn rejects_upper_blocks_and_bad_shapes() {
        let mut op = BlockLtOperator::zeros(2, 1, 1);
        assert!(op.set_block(0, 1, DMatrix::zeros(1, 1)).is_err());
        assert!(op.set_block(1, 0, DMatrix::zeros(2, 1)).is_err());
        let a = BlockLtOperator::zeros(2, 1, 2);
        assert!(a.multiply(&a).is_err());
    }

    #[test]
    fn csv_dump_header() {
        let csv = BlockLtOperator::identity(1, 1).to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("2,2"));
        assert_eq!(lines.next(), Some("1,0"));
        assert_eq!(lines.next(), Some("0,1"));
    }

    #[test]
    fn solve_lower_matches_inverse() {
        let a = scalar(2, &[(0, 0, 2.0), (1, 1, 1.0), (1, 0, 4.0), (2, 2, -1.0), (2, 1, 0.5), (2, 0, 1.0)]);
        let rhs: Vec<_> = [1.0, 2.0, 3.0].iter().map(|v| DVector::from_element(1, *v)).collect();
        let y = a.solve_lower(&rhs).unwrap();
        let y2 = a.inverse().unwrap().apply(&rhs).unwrap();
        for (u, v) in y.iter().zip(&y2) {
            assert!((u - v).amax() < 1e-14);
        }
    }
}
