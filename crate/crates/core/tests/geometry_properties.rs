//! Property tests for block operators, polytopes and the QP backend.

mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rmpc::blockops::BlockLtOperator;
use rmpc::model::paper_benchmark;
use rmpc::polytope::{
    minkowski_sum, mrpi_approx, pontryagin_diff, robust_pre, rpi_slack, HPolytope, InfBall, SupportFunction, VPolytope,
};
use rmpc::qp::{LinExpr, QuadraticProgram, SolveStatus, SolverSettings};

fn dense_identity(op: &BlockLtOperator) -> DMatrix<f64> {
    BlockLtOperator::identity(op.horizon(), op.row_block_dim()).to_dense()
}

/// Polygon `{x | f_i·x <= b_i}` with outward normals at random angles and
/// offsets in `[0.5, 3]`; the origin is strictly inside.
fn random_polygon(seed: u64) -> HPolytope {
    let mut rng = common::rng(seed);
    let m = rng.gen_range(3..9);
    let mut f = DMatrix::zeros(m + 4, 2);
    let mut b = DVector::zeros(m + 4);
    for i in 0..m {
        let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        f[(i, 0)] = th.cos();
        f[(i, 1)] = th.sin();
        b[i] = rng.gen_range(0.5..3.0);
    }
    // a bounding box keeps the polygon compact
    for (k, (x, y)) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)].into_iter().enumerate() {
        f[(m + k, 0)] = x;
        f[(m + k, 1)] = y;
        b[m + k] = 4.0;
    }
    HPolytope::new(f, b).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn blt_matches_dense_oracle(seed in any::<u64>(), t in 0usize..6, p in 1usize..4, q in 1usize..4, r in 1usize..4) {
        let mut rng = common::rng(seed);
        let a = common::random_blt(&mut rng, t, p, q);
        let b = common::random_blt(&mut rng, t, q, r);
        let prod = a.multiply(&b).unwrap().to_dense();
        prop_assert!((prod - a.to_dense() * b.to_dense()).amax() <= 1e-10);

        let x: Vec<DVector<f64>> = (0..=t).map(|_| DVector::from_fn(q, |_, _| rng.gen_range(-1.0..1.0))).collect();
        let stacked = DVector::from_iterator((t + 1) * q, x.iter().flat_map(|v| v.iter().copied()));
        let applied = a.apply(&x).unwrap();
        let dense = a.to_dense() * stacked;
        for (k, y) in applied.iter().enumerate() {
            prop_assert!((y - dense.rows(k * p, p)).amax() <= 1e-10);
        }
        prop_assert_eq!(BlockLtOperator::from_dense(&a.to_dense(), t, p, q).unwrap().to_dense(), a.to_dense());
    }

    #[test]
    fn blt_multiply_is_associative(seed in any::<u64>(), t in 0usize..5) {
        let mut rng = common::rng(seed);
        let a = common::random_blt(&mut rng, t, 2, 3);
        let b = common::random_blt(&mut rng, t, 3, 1);
        let c = common::random_blt(&mut rng, t, 1, 2);
        let left = a.multiply(&b).unwrap().multiply(&c).unwrap();
        let right = a.multiply(&b.multiply(&c).unwrap()).unwrap();
        prop_assert!(left.max_abs_diff(&right) <= 1e-9);
    }

    #[test]
    fn blt_inverse_both_sides(seed in any::<u64>(), t in 0usize..6, n in 1usize..4) {
        let mut rng = common::rng(seed);
        let a = common::random_blt(&mut rng, t, n, n);
        let inv = a.inverse().unwrap();
        prop_assert!((a.multiply(&inv).unwrap().to_dense() - dense_identity(&a)).amax() <= 1e-9);
        prop_assert!((inv.multiply(&a).unwrap().to_dense() - dense_identity(&a)).amax() <= 1e-9);
        let rhs: Vec<DVector<f64>> = (0..=t).map(|_| DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))).collect();
        let x = a.solve_lower(&rhs).unwrap();
        let back = a.apply(&x).unwrap();
        for (u, v) in back.iter().zip(&rhs) {
            prop_assert!((u - v).amax() <= 1e-9);
        }
    }

    #[test]
    fn shift_powers_are_strictly_causal(seed in any::<u64>(), t in 1usize..6, k in 1usize..6) {
        let mut rng = common::rng(seed);
        let m = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
        let z = BlockLtOperator::shift_stack(&m, t);
        prop_assert_eq!(z.to_dense(), common::dense_shift(&m, t));
        let mut pow = z.clone();
        for _ in 1..k {
            pow = pow.multiply(&z).unwrap();
        }
        for (&(_, delay), blk) in pow.blocks() {
            prop_assert!(delay == k || blk.amax() == 0.0);
        }
    }

    #[test]
    fn support_is_positively_homogeneous(seed in any::<u64>(), th in 0.0f64..6.283, alpha in 0.01f64..100.0) {
        let p = random_polygon(seed);
        let d = DVector::from_column_slice(&[th.cos(), th.sin()]);
        let h = p.support(&d).unwrap();
        let ha = p.support(&(&d * alpha)).unwrap();
        prop_assert!((ha - alpha * h).abs() <= 1e-9 * (1.0 + alpha * h.abs()));
        let v = p.vertices().unwrap();
        prop_assert!((v.support(&d).unwrap() - h).abs() <= 1e-9);
    }

    #[test]
    fn erosion_then_sum_stays_inside(seed in any::<u64>(), r in 0.01f64..0.4) {
        let p = random_polygon(seed);
        let q = InfBall { dim: 2, radius: r };
        let eroded = pontryagin_diff(&p, &q).unwrap();
        prop_assume!(!eroded.is_empty());
        let q_v = HPolytope::inf_ball(2, r).vertices().unwrap();
        let sum = minkowski_sum(&eroded.vertices().unwrap(), &q_v).unwrap();
        prop_assert!(p.contains_set(&sum, 1e-9).unwrap());
    }

    #[test]
    fn robust_pre_is_monotone(lo in 0.5f64..4.0, extra in 0.0f64..3.0, seed in any::<u64>()) {
        let spec = paper_benchmark(0.1, 0.1, 0.1).unwrap();
        let small = HPolytope::from_box(&[-lo, -lo], &[lo, lo]).unwrap();
        let big_r = lo + extra;
        let big = HPolytope::from_box(&[-big_r, -big_r], &[big_r, big_r]).unwrap();
        let pre_small = robust_pre(&small, &spec).unwrap();
        let pre_big = robust_pre(&big, &spec).unwrap();
        prop_assume!(!pre_small.is_empty());
        prop_assert!(pre_big.contains_set(&pre_small, 1e-7).unwrap());
        // and every sampled point of the smaller pre-set lies in the larger
        let mut rng = common::rng(seed);
        let (l, h) = pre_small.bounding_box().unwrap();
        for _ in 0..20 {
            let x = DVector::from_fn(2, |i, _| rng.gen_range(l[i]..=h[i]));
            if pre_small.contains(&x, 0.0) {
                prop_assert!(pre_big.contains(&x, 1e-7));
            }
        }
    }

    #[test]
    fn mrpi_is_invariant(seed in any::<u64>(), sigma in 0.01f64..0.5) {
        let mut rng = common::rng(seed);
        let raw = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
        let rho = rmpc::linalg::spectral_radius(&raw).max(1e-3);
        let a_cl = raw * (rng.gen_range(0.1..0.8) / rho);
        let w = HPolytope::inf_ball(2, sigma);
        let omega = mrpi_approx(&a_cl, &w, 1e-2).unwrap();
        let ball = InfBall { dim: 2, radius: sigma };
        prop_assert!(rpi_slack(&a_cl, &omega, &ball).unwrap() >= -1e-8);
        // Ω contains the disturbance set itself
        let w_v: VPolytope = w.vertices().unwrap();
        for v in w_v.vertices() {
            prop_assert!(omega.to_hrep().unwrap().contains(v, 1e-8));
        }
    }

    #[test]
    fn qp_is_deterministic_and_redundancy_safe(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let n = rng.gen_range(1..5);
        let mut qp = QuadraticProgram::new();
        let vars: Vec<usize> = (0..n).map(|i| qp.add_variable(format!("z{i}"))).collect();
        let exprs: Vec<LinExpr> = vars.iter().map(|&v| LinExpr::var(v)).collect();
        let l = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        qp.add_quadratic_form(&exprs, &(&l * l.transpose() + DMatrix::identity(n, n) * 0.1));
        for e in &exprs {
            qp.add_linear_objective(e, rng.gen_range(-1.0..1.0));
        }
        for _ in 0..rng.gen_range(1..6) {
            let mut e = LinExpr::zero();
            for &v in &vars {
                e.add_term(v, rng.gen_range(-1.0..1.0));
            }
            qp.add_le(&e, rng.gen_range(-0.5..1.0));
        }
        let s = SolverSettings::default();
        let a = qp.solve(&s).unwrap();
        let b = qp.solve(&s).unwrap();
        prop_assert_eq!(a.status, b.status);
        if a.status == SolveStatus::Optimal {
            prop_assert!((a.objective - b.objective).abs() <= 1e-9);
            // a constraint implied by a far-away box never flips the status
            let mut looser = qp.clone();
            let big: f64 = 1e3 + a.z.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            for e in &exprs {
                looser.add_le(e, big);
            }
            let c = looser.solve(&s).unwrap();
            prop_assert_eq!(c.status, SolveStatus::Optimal);
            prop_assert!((c.objective - a.objective).abs() <= 1e-6 * (1.0 + a.objective.abs()));
        }
    }
}
