//! Maximal robust control invariant set of the benchmark and its vertex
//! certificate, plus the tube cross-section used by the baseline.

use rmpc::model::paper_benchmark;
use rmpc::polytope::{max_rci, rci_certificate, RciOptions};
use rmpc::tube::{build_tube_controller, TubeScaling};

fn main() -> rmpc::Result<()> {
    let spec = paper_benchmark(0.1, 0.1, 0.1)?;
    let rci = max_rci(&spec, RciOptions::default())?;
    let verts = rci.vertices()?;
    println!("maximal RCI set: {} facets, {} vertices, area {:.3}", rci.num_rows(), verts.vertices().len(), verts.area());
    print!("{}", verts.to_csv());

    let cert = rci_certificate(&rci, &spec)?;
    println!("worst vertex slack {:.3e} (passes: {})", cert.min_slack, cert.passes(1e-7));

    let tc = build_tube_controller(&spec, TubeScaling::Homothetic)?;
    println!(
        "mRPI cross-section: {} vertices, area {:.4}, invariance slack {:.2e}",
        tc.omega.vertices().len(),
        tc.omega.area(),
        tc.rpi_slack(&spec)?
    );

    // larger disturbances shrink the invariant set until it disappears
    for sigma in [0.3, 0.6, 1.0, 5.0] {
        let spec = paper_benchmark(0.1, 0.1, sigma)?;
        match max_rci(&spec, RciOptions::default()) {
            Ok(set) => println!("sigma_w = {sigma}: area {:.3}", set.vertices()?.area()),
            Err(e) => println!("sigma_w = {sigma}: {e}"),
        }
    }
    Ok(())
}
