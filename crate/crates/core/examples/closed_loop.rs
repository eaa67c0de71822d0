//! Receding-horizon closed loop for both controllers under sampled model
//! error and disturbances. Writes trajectory CSVs to the temp directory.
//!
//! The SLS cost only prices the x0 column of the nominal response, and the
//! first filter column is free to absorb the whole prediction, so the SLS
//! loop stays inside the constraints without steering toward the origin.

use nalgebra::DVector;
use rmpc::model::paper_benchmark;
use rmpc::simulate::{run_receding_horizon, DeltaMode, Method, ScenarioSampler};

fn main() -> rmpc::Result<()> {
    let spec = paper_benchmark(0.1, 0.1, 0.1)?;
    let x0 = DVector::from_column_slice(&[2.0, -1.0]);
    let sampler = ScenarioSampler::new(42).with_delta_mode(DeltaMode::VertexOnly);
    for method in [Method::Sls, Method::Tube] {
        let rec = run_receding_horizon(&spec, &x0, 20, method, &sampler)?;
        let mean_ms = rec.solve_ms.iter().sum::<f64>() / rec.solve_ms.len().max(1) as f64;
        println!(
            "{method:?}: {:?} after {} steps, final state {:.3?}, worst slacks x {:.3} u {:.3}, {mean_ms:.1} ms/solve",
            rec.outcome,
            rec.steps(),
            rec.states.last().unwrap(),
            rec.min_state_slack(&spec),
            rec.min_input_slack(),
        );
        let path = std::env::temp_dir().join(format!("rmpc_{method:?}.csv").to_lowercase());
        std::fs::write(&path, rec.to_csv(&spec))?;
        println!("  trajectory written to {}", path.display());
    }
    Ok(())
}
