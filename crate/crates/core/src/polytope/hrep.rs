use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::planar::LabeledPolygon;
use super::vrep::VPolytope;
use super::SupportFunction;
use crate::error::{Error, Result};
use crate::linalg::{matrix_from_rows, matrix_to_rows};
use crate::qp::{solve_lp, SolveStatus};
use crate::tolerances::{DUPLICATE_ROW, MEMBERSHIP, REDUNDANCY, ZERO_ROW};

/// Halfspace polytope `{x | F x <= b}` with unit-norm rows.
#[derive(Debug, Clone, PartialEq)]
pub struct HPolytope {
    f: DMatrix<f64>,
    b: DVector<f64>,
}

/// JSON shape `{"F": [[..]], "b": [..]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolytopeJson {
    #[serde(rename = "F")]
    pub f: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl HPolytope {
    /// Normalizes each row to unit Euclidean norm. Zero rows are dropped when
    /// satisfiable; an unsatisfiable zero row makes the set empty.
    pub fn new(f: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if f.nrows() != b.len() {
            return Err(Error::DimensionMismatch(format!(
                "F has {} rows but b has {} entries",
                f.nrows(),
                b.len()
            )));
        }
        if f.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Validation("polytope data must be finite".into()));
        }
        let dim = f.ncols();
        let mut rows: Vec<(DVector<f64>, f64)> = Vec::with_capacity(f.nrows());
        for i in 0..f.nrows() {
            let row = f.row(i).transpose();
            let norm = row.norm();
            if norm <= ZERO_ROW {
                if b[i] < -ZERO_ROW {
                    return Ok(Self::empty(dim));
                }
                continue;
            }
            rows.push((row / norm, b[i] / norm));
        }
        Ok(Self::from_unit_rows(dim, rows))
    }

    fn from_unit_rows(dim: usize, rows: Vec<(DVector<f64>, f64)>) -> Self {
        let f = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i].0[j]);
        let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
        Self { f, b }
    }

    /// Canonical empty set `{x | x_0 <= -1, -x_0 <= -1}`.
    pub fn empty(dim: usize) -> Self {
        assert!(dim > 0);
        let mut f = DMatrix::zeros(2, dim);
        f[(0, 0)] = 1.0;
        f[(1, 0)] = -1.0;
        Self {
            f,
            b: DVector::from_element(2, -1.0),
        }
    }

    /// The whole space (no constraints).
    pub fn universe(dim: usize) -> Self {
        Self {
            f: DMatrix::zeros(0, dim),
            b: DVector::zeros(0),
        }
    }

    /// Axis-aligned box `lo <= x <= hi`.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch("box bounds".into()));
        }
        let n = lo.len();
        let mut f = DMatrix::zeros(2 * n, n);
        let mut b = DVector::zeros(2 * n);
        for i in 0..n {
            f[(2 * i, i)] = 1.0;
            b[2 * i] = hi[i];
            f[(2 * i + 1, i)] = -1.0;
            b[2 * i + 1] = -lo[i];
        }
        Self::new(f, b)
    }

    /// `{x | ‖x‖∞ <= r}`.
    pub fn inf_ball(dim: usize, r: f64) -> Self {
        Self::from_box(&vec![-r; dim], &vec![r; dim]).expect("finite box")
    }

    pub fn dim(&self) -> usize {
        self.f.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.f.nrows()
    }

    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn row(&self, i: usize) -> (DVector<f64>, f64) {
        (self.f.row(i).transpose(), self.b[i])
    }

    pub fn rows(&self) -> impl Iterator<Item = (DVector<f64>, f64)> + '_ {
        (0..self.num_rows()).map(|i| self.row(i))
    }

    /// Smallest slack `b - F x` (negative when `x` is outside).
    pub fn slack(&self, x: &DVector<f64>) -> f64 {
        (&self.b - &self.f * x).iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.num_rows() == 0 || self.slack(x) >= -tol
    }

    pub fn intersect(&self, other: &HPolytope) -> Result<HPolytope> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch("intersection of different dimensions".into()));
        }
        let rows: Vec<_> = self.rows().chain(other.rows()).collect();
        Ok(Self::from_unit_rows(self.dim(), rows))
    }

    /// Removes rows that are parallel duplicates of another row (keeps the
    /// tightest offset).
    pub fn dedup(&self) -> HPolytope {
        let mut kept: Vec<(DVector<f64>, f64)> = Vec::with_capacity(self.num_rows());
        'outer: for (f, b) in self.rows() {
            for k in kept.iter_mut() {
                if (&k.0 - &f).amax() <= DUPLICATE_ROW {
                    k.1 = k.1.min(b);
                    continue 'outer;
                }
            }
            kept.push((f, b));
        }
        Self::from_unit_rows(self.dim(), kept)
    }

    fn planar_clip(&self) -> LabeledPolygon {
        self.planar_clip_in(1e6)
    }

    /// Clips a box of half-width `box_factor · max|b|` by every row.
    fn planar_clip_in(&self, box_factor: f64) -> LabeledPolygon {
        let scale = self.b.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
        let mut poly = LabeledPolygon::bounding_box(box_factor * scale);
        let tol = 1e-12 * scale;
        for (i, (f, b)) in self.rows().enumerate() {
            poly.clip([f[0], f[1]], b, i, tol);
            if poly.is_empty() {
                break;
            }
        }
        // snap each vertex to the intersection of its two facet lines
        let n = poly.vertices.len();
        if n >= 3 {
            for i in 0..n {
                let (Some(a), Some(c)) = (poly.labels[(i + n - 1) % n], poly.labels[i]) else {
                    continue;
                };
                let (fa, ba) = (self.f.row(a), self.b[a]);
                let (fc, bc) = (self.f.row(c), self.b[c]);
                let det = fa[0] * fc[1] - fa[1] * fc[0];
                if det.abs() > 1e-9 {
                    poly.vertices[i] = [
                        (ba * fc[1] - bc * fa[1]) / det,
                        (fa[0] * bc - fc[0] * ba) / det,
                    ];
                }
            }
        }
        poly
    }

    pub fn is_empty(&self) -> bool {
        match self.dim() {
            2 => self.planar_clip().is_empty(),
            _ => {
                let c = vec![0.0; self.dim()];
                match solve_lp(&c, &self.f, self.b.as_slice()) {
                    Ok(r) => r.status == SolveStatus::Infeasible,
                    Err(_) => false,
                }
            }
        }
    }

    /// Drops implied rows. Planar sets use exact halfplane clipping; other
    /// dimensions solve one LP per row.
    pub fn remove_redundant(&self) -> HPolytope {
        let p = self.dedup();
        if p.num_rows() == 0 {
            return p;
        }
        if p.dim() == 1 {
            return p.interval_form();
        }
        if p.dim() == 2 {
            let poly = p.planar_clip();
            if poly.is_empty() {
                return Self::empty(2);
            }
            let area = super::planar::polygon_area(&poly.vertices);
            let scale = p.b.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
            if poly.vertices.len() >= 3 && area > 1e-12 * scale * scale {
                let mut keep: Vec<usize> = poly
                    .supporting_labels(1e-9 * scale)
                    .into_iter()
                    .flatten()
                    .collect();
                keep.sort_unstable();
                keep.dedup();
                let rows = keep.iter().map(|&i| p.row(i)).collect();
                return Self::from_unit_rows(2, rows);
            }
        }
        p.remove_redundant_lp()
    }

    fn interval_form(&self) -> HPolytope {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (f, b) in self.rows() {
            if f[0] > 0.0 {
                hi = hi.min(b / f[0]);
            } else {
                lo = lo.max(-b / -f[0]);
            }
        }
        if lo > hi + ZERO_ROW {
            return Self::empty(1);
        }
        let mut rows = Vec::new();
        if hi.is_finite() {
            rows.push((DVector::from_element(1, 1.0), hi));
        }
        if lo.is_finite() {
            rows.push((DVector::from_element(1, -1.0), -lo));
        }
        Self::from_unit_rows(1, rows)
    }

    fn remove_redundant_lp(&self) -> HPolytope {
        let dim = self.dim();
        let mut active: Vec<bool> = vec![true; self.num_rows()];
        for i in 0..self.num_rows() {
            let others: Vec<usize> = (0..self.num_rows()).filter(|&j| j != i && active[j]).collect();
            let (fi, bi) = self.row(i);
            // maximize fi·x over the other rows, capped at bi + 1
            let mut g = DMatrix::zeros(others.len() + 1, dim);
            let mut h = Vec::with_capacity(others.len() + 1);
            for (r, &j) in others.iter().enumerate() {
                g.set_row(r, &self.f.row(j));
                h.push(self.b[j]);
            }
            g.set_row(others.len(), &fi.transpose());
            h.push(bi + 1.0);
            let c: Vec<f64> = fi.iter().map(|v| -v).collect();
            match solve_lp(&c, &g, &h) {
                Ok(r) if r.status == SolveStatus::Optimal => {
                    if -r.objective <= bi + REDUNDANCY {
                        active[i] = false;
                    }
                }
                Ok(r) if r.status == SolveStatus::Infeasible => return Self::empty(dim),
                _ => {}
            }
        }
        let rows = (0..self.num_rows())
            .filter(|&i| active[i])
            .map(|i| self.row(i))
            .collect();
        Self::from_unit_rows(dim, rows)
    }

    /// Vertex representation (dimensions 1 and 2).
    pub fn vertices(&self) -> Result<VPolytope> {
        match self.dim() {
            1 => {
                let p = self.interval_form();
                if p.is_empty_interval() {
                    return Err(Error::EmptySet);
                }
                let hi = p.rows().find(|r| r.0[0] > 0.0).map(|r| r.1);
                let lo = p.rows().find(|r| r.0[0] < 0.0).map(|r| -r.1);
                match (lo, hi) {
                    (Some(lo), Some(hi)) => VPolytope::from_points(vec![
                        DVector::from_element(1, lo),
                        DVector::from_element(1, hi),
                    ]),
                    _ => Err(Error::Unbounded),
                }
            }
            2 => {
                let poly = self.planar_clip();
                if poly.is_empty() {
                    return Err(Error::EmptySet);
                }
                if poly.labels.iter().any(Option::is_none) {
                    return Err(Error::Unbounded);
                }
                VPolytope::from_points(
                    poly.vertices
                        .iter()
                        .map(|v| DVector::from_column_slice(v))
                        .collect(),
                )
            }
            d => Err(Error::Unsupported(format!("vertex enumeration in dimension {d}"))),
        }
    }

    fn support_interval(&self, d: f64) -> Result<f64> {
        let p = self.interval_form();
        if p.is_empty_interval() {
            return Err(Error::EmptySet);
        }
        let sign = if d > 0.0 { 1.0 } else { -1.0 };
        let hit = p.rows().find(|r| r.0[0] * sign > 0.0);
        hit.map(|r| r.1 * d.abs()).ok_or(Error::Unbounded)
    }

    /// Exact planar support: maximum over the clipped polygon's vertices.
    /// When a maximizer touches the artificial bounding box, a second clip in
    /// a larger box tells bounded from unbounded.
    fn support_planar(&self, dir: &DVector<f64>) -> Result<f64> {
        let vertex_max = |poly: &LabeledPolygon| -> (f64, bool) {
            let n = poly.vertices.len();
            let vals: Vec<f64> = poly
                .vertices
                .iter()
                .map(|v| dir[0] * v[0] + dir[1] * v[1])
                .collect();
            let best = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let tol = 1e-12 * (1.0 + best.abs());
            let on_box = (0..n).any(|i| {
                vals[i] >= best - tol
                    && (poly.labels[i].is_none() || poly.labels[(i + n - 1) % n].is_none())
            });
            (best, on_box)
        };
        let poly = self.planar_clip();
        if poly.is_empty() {
            return Err(Error::EmptySet);
        }
        let (best, on_box) = vertex_max(&poly);
        if on_box {
            let (wider, _) = vertex_max(&self.planar_clip_in(2e6));
            if wider > best + 1e-6 * (1.0 + best.abs()) {
                return Err(Error::Unbounded);
            }
        }
        Ok(best)
    }

    fn is_empty_interval(&self) -> bool {
        self.num_rows() == 2 && self.b.iter().all(|v| *v == -1.0) && self.f[(0, 0)] == 1.0
    }

    /// Axis-aligned bounding box.
    pub fn bounding_box(&self) -> Result<(DVector<f64>, DVector<f64>)> {
        let n = self.dim();
        let mut lo = DVector::zeros(n);
        let mut hi = DVector::zeros(n);
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            hi[i] = self.support(&e)?;
            lo[i] = -self.support(&(-e))?;
        }
        Ok((lo, hi))
    }

    /// `p ⊆ self`, checked through the support function of `p` on every row.
    pub fn contains_set(&self, p: &dyn SupportFunction, tol: f64) -> Result<bool> {
        for (f, b) in self.rows() {
            if p.support(&f)? > b + tol {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// True when the origin is strictly inside (every offset positive).
    pub fn contains_origin_strictly(&self) -> bool {
        self.b.iter().all(|v| *v > 0.0)
    }

    pub fn to_json(&self) -> PolytopeJson {
        PolytopeJson {
            f: matrix_to_rows(&self.f),
            b: self.b.iter().copied().collect(),
        }
    }

    pub fn from_json(j: &PolytopeJson) -> Result<Self> {
        let f = matrix_from_rows("F", &j.f)?;
        if j.f.is_empty() {
            return Err(Error::Validation("polytope JSON needs at least one row".into()));
        }
        Self::new(f, DVector::from_column_slice(&j.b))
    }

    /// Scales by `s >= 0` about the origin.
    pub fn scaled(&self, s: f64) -> HPolytope {
        Self {
            f: self.f.clone(),
            b: &self.b * s,
        }
    }
}

impl SupportFunction for HPolytope {
    fn dim(&self) -> usize {
        self.f.ncols()
    }

    /// `max dirᵀx s.t. F x <= b`: exact vertex maximum in one and two
    /// dimensions, a linear program otherwise.
    fn support(&self, dir: &DVector<f64>) -> Result<f64> {
        if dir.len() != self.dim() {
            return Err(Error::DimensionMismatch("support direction".into()));
        }
        if dir.iter().all(|v| *v == 0.0) {
            return if self.is_empty() { Err(Error::EmptySet) } else { Ok(0.0) };
        }
        match self.dim() {
            1 => return self.support_interval(dir[0]),
            2 => return self.support_planar(dir),
            _ => {}
        }
        let c: Vec<f64> = dir.iter().map(|v| -v).collect();
        let r = solve_lp(&c, &self.f, self.b.as_slice())?;
        match r.status {
            SolveStatus::Optimal => Ok(-r.objective),
            SolveStatus::Infeasible => Err(Error::EmptySet),
            SolveStatus::Unbounded => Err(Error::Unbounded),
            s => Err(Error::Solver(format!("support LP ended with {}", s.as_str()))),
        }
    }
}

/// Grid-membership helper with the shared tolerance.
pub fn member(p: &HPolytope, x: &DVector<f64>) -> bool {
    p.contains(x, MEMBERSHIP)
}
