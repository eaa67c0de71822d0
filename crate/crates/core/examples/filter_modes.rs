//! Full block-lower-triangular filter against the diagonal-only filter.

use nalgebra::DVector;
use rmpc::model::{paper_benchmark, FilterMode};
use rmpc::sls::{solve_sls, SynthesisOptions};

fn main() -> rmpc::Result<()> {
    let base = paper_benchmark(0.3, 0.1, 0.1)?;
    let opts = SynthesisOptions {
        filter_weight: 1e-3,
        ..Default::default()
    };
    println!("{:>14} {:>10} {:>10}", "x0", "full", "diagonal");
    for x0 in [[0.0, 0.0], [3.0, -2.0], [5.0, -4.0], [-6.0, 5.0], [7.0, 0.0]] {
        let x = DVector::from_column_slice(&x0);
        let mut row = format!("{:>14}", format!("{x0:?}"));
        for mode in [FilterMode::FullBlockLowerTriangular, FilterMode::DiagonalOnly] {
            let out = solve_sls(&base.with_filter_mode(mode), &x, &opts)?;
            let cell = match out.solution {
                Some(sol) => format!("{:.2}", sol.d.iter().map(|d| d.sum()).sum::<f64>()),
                None => out.status.as_str().to_string(),
            };
            row.push_str(&format!(" {cell:>10}"));
        }
        println!("{row}");
    }
    println!("(entries: total filter size Σ d, or the solver status)");
    Ok(())
}
