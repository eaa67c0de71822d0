use nalgebra::{DMatrix, DVector};

use super::hrep::HPolytope;
use super::planar;
use super::vrep::VPolytope;
use super::SupportFunction;
use crate::error::{Error, Result};
use crate::tolerances::ZERO_ROW;

/// `p ⊖ q = {x | f_i·x <= b_i - h_q(f_i)}`. The result may be empty.
pub fn pontryagin_diff(p: &HPolytope, q: &dyn SupportFunction) -> Result<HPolytope> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch("Pontryagin difference".into()));
    }
    let mut b = p.b().clone();
    for (i, (f, _)) in p.rows().enumerate() {
        b[i] -= q.support(&f)?;
    }
    HPolytope::new(p.f().clone(), b)
}

/// `p ⊕ q` for intervals and planar polygons.
pub fn minkowski_sum(p: &VPolytope, q: &VPolytope) -> Result<VPolytope> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch("Minkowski sum".into()));
    }
    match p.dim() {
        1 => {
            let lo = p.vertices()[0][0] + q.vertices()[0][0];
            let hi = p.vertices().last().unwrap()[0] + q.vertices().last().unwrap()[0];
            VPolytope::from_points(vec![DVector::from_element(1, lo), DVector::from_element(1, hi)])
        }
        2 => {
            let a: Vec<[f64; 2]> = p.vertices().iter().map(|v| [v[0], v[1]]).collect();
            let b: Vec<[f64; 2]> = q.vertices().iter().map(|v| [v[0], v[1]]).collect();
            let s = planar::minkowski_sum(&a, &b);
            VPolytope::from_points(s.iter().map(|v| DVector::from_column_slice(v)).collect())
        }
        d => Err(Error::Unsupported(format!("Minkowski sum in dimension {d}"))),
    }
}

/// Projection onto the first `n_x` coordinates by Fourier–Motzkin
/// elimination of the trailing ones, last coordinate first.
pub fn project_state(p: &HPolytope, n_x: usize) -> Result<HPolytope> {
    if n_x == 0 || n_x > p.dim() {
        return Err(Error::DimensionMismatch(format!(
            "cannot project dimension {} onto {n_x}",
            p.dim()
        )));
    }
    let mut cur = p.dedup();
    while cur.dim() > n_x {
        cur = eliminate_last(&cur)?.remove_redundant();
    }
    Ok(cur)
}

fn eliminate_last(p: &HPolytope) -> Result<HPolytope> {
    let k = p.dim() - 1;
    let (mut pos, mut neg, mut rows) = (Vec::new(), Vec::new(), Vec::new());
    for (f, b) in p.rows() {
        let c = f[k];
        if c > ZERO_ROW {
            pos.push((f, b, c));
        } else if c < -ZERO_ROW {
            neg.push((f, b, -c));
        } else {
            rows.push((f.rows(0, k).into_owned(), b));
        }
    }
    for (fp, bp, cp) in &pos {
        for (fn_, bn, cn) in &neg {
            let f = fp.rows(0, k) * *cn + fn_.rows(0, k) * *cp;
            rows.push((f, bp * cn + bn * cp));
        }
    }
    let f = DMatrix::from_fn(rows.len(), k, |i, j| rows[i].0[j]);
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    HPolytope::new(f, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bx(r: f64) -> HPolytope {
        HPolytope::inf_ball(2, r)
    }

    #[test]
    fn box_erosion() {
        let e = pontryagin_diff(&bx(8.0), &bx(1.0)).unwrap();
        assert!(e.remove_redundant() == bx(7.0).remove_redundant());
        let origin = VPolytope::point(DVector::zeros(2));
        assert_eq!(pontryagin_diff(&bx(8.0), &origin).unwrap(), bx(8.0));
        let one = |r: f64| HPolytope::from_box(&[-r], &[r]).unwrap();
        assert!(pontryagin_diff(&one(4.0), &one(5.0)).unwrap().is_empty());
    }

    #[test]
    fn box_sums() {
        let sq = bx(1.0).vertices().unwrap();
        let origin = VPolytope::point(DVector::zeros(2));
        assert_eq!(minkowski_sum(&sq, &origin).unwrap().vertices().len(), 4);
        let s = minkowski_sum(&sq, &sq).unwrap();
        assert_abs_diff_eq!(s.area(), 16.0, epsilon = 1e-12);
        let i = VPolytope::from_points(vec![DVector::from_element(1, -1.0), DVector::from_element(1, 2.0)])
            .unwrap();
        let s1 = minkowski_sum(&i, &i).unwrap();
        assert_eq!(s1.vertices()[0][0], -2.0);
        assert_eq!(s1.vertices()[1][0], 4.0);
    }

    #[test]
    fn rotated_square_sum_is_octagon() {
        let sq = bx(1.0).vertices().unwrap();
        let rot = nalgebra::Rotation2::new(std::f64::consts::FRAC_PI_4).into_inner();
        let m = DMatrix::from_row_slice(2, 2, rot.as_slice()).transpose();
        let turned = sq.linear_map(&m).unwrap();
        let s = minkowski_sum(&sq, &turned).unwrap();
        assert_eq!(s.vertices().len(), 8);
        let pairs: Vec<DVector<f64>> = sq
            .vertices()
            .iter()
            .flat_map(|a| turned.vertices().iter().map(move |b| a + b))
            .collect();
        let oracle = VPolytope::from_points(pairs).unwrap();
        assert_abs_diff_eq!(s.area(), oracle.area(), epsilon = 1e-12);
    }

    #[test]
    fn three_dimensional_sum_is_unsupported() {
        let p = VPolytope::point(DVector::zeros(3));
        assert!(matches!(minkowski_sum(&p, &p), Err(Error::Unsupported(_))));
    }

    #[test]
    fn project_separable_box() {
        let b3 = HPolytope::from_box(&[-1.0, -2.0, -3.0], &[1.0, 2.0, 3.0]).unwrap();
        let p = project_state(&b3, 2).unwrap();
        assert_eq!(p.remove_redundant(), HPolytope::from_box(&[-1.0, -2.0], &[1.0, 2.0]).unwrap());
    }

    #[test]
    fn project_hand_example() {
        // x + u <= 1, -u <= 0, u <= 1, -x <= 0  ==>  0 <= x <= 1
        let f = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 0.0, -1.0, 0.0, 1.0, -1.0, 0.0]);
        let p = HPolytope::new(f, DVector::from_column_slice(&[1.0, 0.0, 1.0, 0.0])).unwrap();
        let x = project_state(&p, 1).unwrap();
        assert_eq!(x, HPolytope::from_box(&[0.0], &[1.0]).unwrap());
        assert_eq!(project_state(&x, 1).unwrap(), x);
    }
}
