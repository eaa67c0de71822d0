//! Terminal-set coverage of SLS and tube MPC as ε_A grows.
//!
//! cargo run --example coverage_sweep -- [grid]

use rmpc::experiments::{benchmark_sweep, epsilon_a_values, sweep_csv, CoverageMethod, SweepParameter};

fn main() -> rmpc::Result<()> {
    let grid = std::env::args().nth(1).and_then(|g| g.parse().ok()).unwrap_or(7);
    let methods = [CoverageMethod::Sls, CoverageMethod::Tube];
    let rows = benchmark_sweep(SweepParameter::EpsilonA, &epsilon_a_values(), grid, &methods)?;
    print!("{}", sweep_csv(&rows, &methods));
    Ok(())
}
