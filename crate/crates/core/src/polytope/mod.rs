//! Polytope geometry for constraint sets, tubes and invariant sets.
//!
//! Halfspace operations are dimension generic. Vertex enumeration,
//! Minkowski sums and the fast redundancy path are planar (or 1-D), which
//! covers every set the controllers in this crate build.

mod hrep;
mod invariant;
mod ops;
mod planar;
mod vrep;

use nalgebra::DVector;

use crate::error::{Error, Result};

pub use hrep::{member, HPolytope, PolytopeJson};
pub use invariant::{
    max_rci, mrpi_approx, rci_certificate, robust_pre, rpi_slack, RciCertificate, RciOptions,
};
pub use ops::{minkowski_sum, pontryagin_diff, project_state};
pub use planar::convex_hull;
pub use vrep::VPolytope;

/// `h_S(d) = max { dᵀx | x ∈ S }`.
pub trait SupportFunction {
    fn dim(&self) -> usize;
    fn support(&self, dir: &DVector<f64>) -> Result<f64>;
}

/// `{x | ‖x‖∞ <= radius}` with the closed-form support `radius·‖d‖₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfBall {
    pub dim: usize,
    pub radius: f64,
}

impl SupportFunction for InfBall {
    fn dim(&self) -> usize {
        self.dim
    }

    fn support(&self, dir: &DVector<f64>) -> Result<f64> {
        if dir.len() != self.dim {
            return Err(Error::DimensionMismatch("support direction".into()));
        }
        Ok(self.radius * dir.iter().map(|v| v.abs()).sum::<f64>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_column_slice(&[a, b])
    }

    #[test]
    fn box_support() {
        let x = HPolytope::from_box(&[-8.0, -8.0], &[8.0, 8.0]).unwrap();
        assert_abs_diff_eq!(x.support(&v2(1.0, 0.0)).unwrap(), 8.0, epsilon = 1e-12);
        let unit = HPolytope::inf_ball(2, 1.0);
        assert_abs_diff_eq!(unit.support(&v2(1.0, 1.0)).unwrap(), 2.0, epsilon = 1e-12);
        let ball = InfBall { dim: 2, radius: 1.0 };
        assert_abs_diff_eq!(ball.support(&v2(1.0, 1.0)).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn triangle_support_matches_vertex_max() {
        let tri = VPolytope::from_points(vec![v2(0.0, 0.0), v2(1.0, 0.0), v2(0.0, 1.0)]).unwrap();
        let h = tri.to_hrep().unwrap();
        let d = v2(1.0, 2.0);
        let oracle = [0.0, 1.0, 2.0].into_iter().fold(f64::MIN, f64::max);
        assert_abs_diff_eq!(h.support(&d).unwrap(), oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(tri.support(&d).unwrap(), oracle, epsilon = 1e-15);
    }

    #[test]
    fn support_errors() {
        let half = HPolytope::new(
            nalgebra::DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        assert!(matches!(half.support(&v2(0.0, 1.0)), Err(Error::Unbounded)));
        assert_abs_diff_eq!(half.support(&v2(1.0, 0.0)).unwrap(), 1.0, epsilon = 1e-12);
        assert!(matches!(HPolytope::empty(2).support(&v2(1.0, 0.0)), Err(Error::EmptySet)));
    }

    #[test]
    fn support_lp_path_in_three_dimensions() {
        let b = HPolytope::from_box(&[-1.0, -2.0, -3.0], &[1.0, 2.0, 3.0]).unwrap();
        let d = DVector::from_column_slice(&[1.0, -1.0, 0.5]);
        assert_abs_diff_eq!(b.support(&d).unwrap(), 1.0 + 2.0 + 1.5, epsilon = 1e-6);
    }

    #[test]
    fn vertices_of_box_and_redundancy() {
        let mut f = nalgebra::DMatrix::zeros(5, 2);
        f.copy_from(&nalgebra::DMatrix::from_row_slice(
            5,
            2,
            &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0, 1.0, 1.0],
        ));
        let p = HPolytope::new(f, DVector::from_column_slice(&[1.0, 1.0, 1.0, 1.0, 5.0])).unwrap();
        assert_eq!(p.remove_redundant().num_rows(), 4);
        let v = p.vertices().unwrap();
        assert_eq!(v.vertices().len(), 4);
        assert_abs_diff_eq!(v.area(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let p = HPolytope::from_box(&[-1.0, -2.0], &[3.0, 4.0]).unwrap();
        let s = serde_json::to_string(&p.to_json()).unwrap();
        assert!(s.contains("\"F\""));
        let back = HPolytope::from_json(&serde_json::from_str(&s).unwrap()).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn vertex_csv_header() {
        let v = HPolytope::inf_ball(2, 1.0).vertices().unwrap();
        let csv = v.to_csv();
        assert!(csv.starts_with("v1,v2\n"));
        assert_eq!(csv.lines().count(), 5);
    }
}
