//! Synthesize one robust controller on the benchmark and validate it.
//!
//! cargo run --example synthesize_benchmark -- [x1 x2]

use nalgebra::DVector;
use rmpc::model::paper_benchmark;
use rmpc::sls::{synthesize, validate_certificate, CertificateOptions, SynthesisOptions};

fn main() -> rmpc::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let x0 = match args.as_slice() {
        [a, b] => DVector::from_column_slice(&[*a, *b]),
        _ => DVector::from_column_slice(&[2.0, -1.0]),
    };
    let spec = paper_benchmark(0.1, 0.1, 0.1)?;
    let sol = synthesize(&spec, &x0, &SynthesisOptions::default())?;
    println!("objective      {:.6}", sol.objective);
    println!("solve time     {:.3} s ({} iterations)", sol.solve_time, sol.iterations);
    println!("first input    {:.6}", sol.first_input()[0]);
    println!("affine resid   {:.2e}", sol.affine_residual(&spec));
    for (t, d) in sol.d.iter().enumerate() {
        println!("d[{t}] = [{:.4}, {:.4}]", d[0], d[1]);
    }
    let report = validate_certificate(&sol, &spec, &CertificateOptions::default())?;
    println!(
        "certificate    max |w~| = {:.6}, min slack = {:.4}, passed = {}",
        report.max_w_tilde,
        report.min_slack(),
        report.passed
    );
    Ok(())
}
