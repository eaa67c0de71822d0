//! A handful of random two-state systems ranked by SLS coverage.

use rmpc::experiments::random_suite;
use rmpc::model::random_system;

fn main() -> rmpc::Result<()> {
    let sys = random_system(3)?;
    println!("seed 3: Â = {:.3}B̂ = {:.3}spectral radius {:.3}", sys.spec.a_hat(), sys.spec.b_hat(), sys.spectral_radius);

    let res = random_suite(5, 0, 7)?;
    print!("{}", res.summary_csv());
    println!("SLS at least as large as tube on {}/{}", res.dominated_count(), res.rows.len());
    Ok(())
}
