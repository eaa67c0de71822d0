use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use super::hrep::HPolytope;
use super::planar;
use super::SupportFunction;
use crate::error::{Error, Result};

/// Vertex polytope. Planar sets are kept counterclockwise; intervals as
/// `[lo, hi]`. Lower-dimensional (point, segment) sets are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct VPolytope {
    dim: usize,
    vertices: Vec<DVector<f64>>,
}

impl VPolytope {
    /// Convex hull of `points` (dimension 1 or 2).
    pub fn from_points(points: Vec<DVector<f64>>) -> Result<Self> {
        let dim = points.first().ok_or(Error::EmptySet)?.len();
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch("mixed point dimensions".into()));
        }
        match dim {
            1 => {
                let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
                let hi = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
                let mut vertices = vec![DVector::from_element(1, lo)];
                if hi > lo {
                    vertices.push(DVector::from_element(1, hi));
                }
                Ok(Self { dim, vertices })
            }
            2 => {
                let pts: Vec<[f64; 2]> = points.iter().map(|p| [p[0], p[1]]).collect();
                let hull = planar::convex_hull(&pts);
                Ok(Self {
                    dim,
                    vertices: hull.iter().map(|v| DVector::from_column_slice(v)).collect(),
                })
            }
            d => Err(Error::Unsupported(format!("vertex polytopes in dimension {d}"))),
        }
    }

    pub fn point(x: DVector<f64>) -> Self {
        Self {
            dim: x.len(),
            vertices: vec![x],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.vertices
    }

    /// Image under a linear map, re-hulled.
    pub fn linear_map(&self, m: &DMatrix<f64>) -> Result<VPolytope> {
        if m.ncols() != self.dim {
            return Err(Error::DimensionMismatch("linear map".into()));
        }
        Self::from_points(self.vertices.iter().map(|v| m * v).collect())
    }

    pub fn scaled(&self, s: f64) -> VPolytope {
        Self {
            dim: self.dim,
            vertices: self.vertices.iter().map(|v| v * s).collect(),
        }
    }

    /// Halfspace form. Points and segments get explicit equality pairs.
    pub fn to_hrep(&self) -> Result<HPolytope> {
        let n = self.dim;
        let v = &self.vertices;
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        match (n, v.len()) {
            (_, 1) => {
                for i in 0..n {
                    let mut e = vec![0.0; n];
                    e[i] = 1.0;
                    rows.push((e.clone(), v[0][i]));
                    e[i] = -1.0;
                    rows.push((e, -v[0][i]));
                }
            }
            (1, _) => {
                rows.push((vec![1.0], v[1][0]));
                rows.push((vec![-1.0], -v[0][0]));
            }
            (2, 2) => {
                let d = &v[1] - &v[0];
                let nrm = [-d[1], d[0]];
                let c = nrm[0] * v[0][0] + nrm[1] * v[0][1];
                rows.push((nrm.to_vec(), c));
                rows.push((vec![-nrm[0], -nrm[1]], -c));
                rows.push((vec![d[0], d[1]], d.dot(&v[1])));
                rows.push((vec![-d[0], -d[1]], -d.dot(&v[0])));
            }
            (2, k) => {
                for i in 0..k {
                    let (a, b) = (&v[i], &v[(i + 1) % k]);
                    // outward normal of a CCW edge
                    let nrm = [b[1] - a[1], a[0] - b[0]];
                    rows.push((nrm.to_vec(), nrm[0] * a[0] + nrm[1] * a[1]));
                }
            }
            _ => unreachable!(),
        }
        let f = DMatrix::from_fn(rows.len(), n, |i, j| rows[i].0[j]);
        let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
        HPolytope::new(f, b)
    }

    /// Vertex dump, one `v1,v2,…` line per vertex.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let header: Vec<String> = (1..=self.dim).map(|i| format!("v{i}")).collect();
        let _ = writeln!(s, "{}", header.join(","));
        for v in &self.vertices {
            let line: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
            let _ = writeln!(s, "{}", line.join(","));
        }
        s
    }

    pub fn area(&self) -> f64 {
        if self.dim != 2 {
            return 0.0;
        }
        let pts: Vec<[f64; 2]> = self.vertices.iter().map(|p| [p[0], p[1]]).collect();
        planar::polygon_area(&pts)
    }
}

impl SupportFunction for VPolytope {
    fn dim(&self) -> usize {
        self.dim
    }

    fn support(&self, dir: &DVector<f64>) -> Result<f64> {
        if dir.len() != self.dim {
            return Err(Error::DimensionMismatch("support direction".into()));
        }
        Ok(self
            .vertices
            .iter()
            .map(|v| v.dot(dir))
            .fold(f64::NEG_INFINITY, f64::max))
    }
}
