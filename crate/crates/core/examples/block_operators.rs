//! Block-lower-triangular operators: products, inverses and the dense view.

use nalgebra::{DMatrix, DVector};
use rmpc::blockops::BlockLtOperator;

fn main() -> rmpc::Result<()> {
    let horizon = 3;
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.15, 0.1, 1.0]);

    // Z Â: the nominal dynamics pushed one step down
    let za = BlockLtOperator::shift_stack(&a, horizon);
    let mut lhs = BlockLtOperator::identity(horizon, 2);
    for (&(t, k), m) in za.blocks() {
        lhs.set_block(t, k, -m.clone())?;
    }
    println!("I - Z Â (dense):\n{:.3}", lhs.to_dense());

    // (I - ZÂ)^-1 maps a disturbance stack to the free response
    let inv = lhs.inverse()?;
    println!("round-trip error {:.1e}", lhs.multiply(&inv)?.max_abs_diff(&BlockLtOperator::identity(horizon, 2)));
    for k in 0..=horizon {
        println!("block (t = {horizon}, delay {k}) = Â^{k}:\n{:.4}", inv.block_or_zero(horizon, k));
    }

    // forward substitution agrees with applying the inverse
    let rhs: Vec<DVector<f64>> = (0..=horizon).map(|t| DVector::from_column_slice(&[1.0, t as f64])).collect();
    let by_solve = lhs.solve_lower(&rhs)?;
    let by_inverse = inv.apply(&rhs)?;
    let gap = by_solve
        .iter()
        .zip(&by_inverse)
        .map(|(a, b)| (a - b).amax())
        .fold(0.0, f64::max);
    println!("solve_lower vs inverse: {gap:.1e}");
    Ok(())
}
