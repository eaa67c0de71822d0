//! Tube MPC baseline: LQR gain, mRPI cross-section, tightened sets and one
//! tube program.

use nalgebra::DVector;
use rmpc::model::paper_benchmark;
use rmpc::qp::SolverSettings;
use rmpc::tube::{build_tube_controller, dlqr, tube_feasible, TubeScaling};

fn main() -> rmpc::Result<()> {
    let spec = paper_benchmark(0.1, 0.1, 0.1)?;
    let w = spec.weights();
    let k = dlqr(spec.a_hat(), spec.b_hat(), w.q(), w.r())?;
    println!("LQR gain (u = -Kx): {:.4}", k);

    let tc = build_tube_controller(&spec, TubeScaling::Homothetic)?;
    println!("tightened input set: {:.4}", tc.u_tight.b());
    let (lo, hi) = tc.x_tight.bounding_box()?;
    println!("tightened state box: [{:.3}, {:.3}] x [{:.3}, {:.3}]", lo[0], hi[0], lo[1], hi[1]);

    let x0 = DVector::from_column_slice(&[2.0, -1.0]);
    let settings = SolverSettings::default();
    let out = tube_feasible(&tc, &spec, &x0, &settings)?;
    println!("homothetic tube at {:?}: {}", x0.as_slice(), out.status.as_str());
    if let Some(plan) = &out.plan {
        let scales: Vec<String> = plan.alpha.iter().map(|a| format!("{a:.2}")).collect();
        println!("cross-section scales: {}", scales.join(" "));
        println!("first input {:.4}", plan.input(&tc, 0, &x0)[0]);
    }

    let rigid = build_tube_controller(&spec, TubeScaling::Rigid)?;
    println!("rigid tube at {:?}: {}", x0.as_slice(), tube_feasible(&rigid, &spec, &x0, &settings)?.status.as_str());
    Ok(())
}
