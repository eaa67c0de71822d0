//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so every line is printed; exits non-zero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rmpc::blockops::BlockLtOperator;
use rmpc::experiments::{
    benchmark_sweep, epsilon_a_values, grid_points, random_suite, sigma_w_values, with_rci_terminal, CoverageMethod,
    SweepParameter, SweepRow,
};
use rmpc::model::{paper_benchmark, FilterMode};
use rmpc::polytope::{max_rci, rci_certificate, RciOptions};
use rmpc::simulate::{ScenarioSampler, WMode};
use rmpc::sls::{certificate_rollout, synthesize, validate_certificate, CertificateOptions, SynthesisOptions};
use rmpc::tube::{build_tube_controller, TubeScaling};
use rmpc::Result;

const METHODS: [CoverageMethod; 3] = [CoverageMethod::Sls, CoverageMethod::Tube, CoverageMethod::SlsDiag];

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Result<Verdict> {
    Ok(Verdict {
        passed,
        detail: detail.into(),
    })
}

fn certificate_and_structure() -> Result<(Verdict, Verdict)> {
    let start = Instant::now();
    let (spec, rci) = with_rci_terminal(&paper_benchmark(0.1, 0.1, 0.1)?)?;
    let inside: Vec<DVector<f64>> = grid_points(&rci, 7)?
        .into_iter()
        .filter(|x| rci.contains(x, 1e-9))
        .collect();
    let step = inside.len() as f64 / 25.0;
    let states: Vec<&DVector<f64>> = (0..25).map(|i| &inside[(i as f64 * step) as usize]).collect();

    let (mut optimal, mut failed) = (0, Vec::new());
    let (mut worst_w, mut worst_slack) = (0.0_f64, f64::INFINITY);
    let (mut affine, mut structural) = (0.0_f64, 0.0_f64);
    let opts = CertificateOptions::default();
    for x0 in &states {
        for mode in [FilterMode::FullBlockLowerTriangular, FilterMode::DiagonalOnly] {
            let spec = spec.with_filter_mode(mode);
            let Ok(sol) = synthesize(&spec, x0, &SynthesisOptions::default()) else {
                continue;
            };
            affine = affine.max(sol.affine_residual(&spec));
            structural = structural.max(sol.structural_error());
            if mode == FilterMode::DiagonalOnly {
                continue;
            }
            optimal += 1;
            let r = validate_certificate(&sol, &spec, &opts)?;
            worst_w = worst_w.max(r.max_w_tilde);
            worst_slack = worst_slack.min(r.min_slack());
            if !r.passed {
                failed.push(x0.as_slice().to_vec());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let cert = verdict(
        failed.is_empty() && optimal > 0 && secs <= 60.0,
        format!(
            "{optimal}/25 optimal, {} failed, max |w~| {worst_w:.6}, min slack {worst_slack:.4}, {secs:.1} s",
            failed.len()
        ),
    )?;
    let structure = verdict(
        affine <= 1e-6 && structural <= 1e-7,
        format!("affine residual {affine:.2e}, diagonal identity error {structural:.2e}"),
    )?;
    Ok((cert, structure))
}

fn non_increasing(values: &[f64], slack: f64) -> bool {
    values.iter().enumerate().all(|(i, v)| values[..i].iter().all(|prev| *v <= prev + slack))
}

fn coverages(rows: &[SweepRow], m: CoverageMethod) -> Vec<f64> {
    rows.iter().map(|r| r.coverage(m).unwrap_or(f64::NAN)).collect()
}

fn sweeps() -> Result<(Vec<SweepRow>, Vec<SweepRow>, f64)> {
    let start = Instant::now();
    let a = benchmark_sweep(SweepParameter::EpsilonA, &epsilon_a_values(), 15, &METHODS)?;
    let s = benchmark_sweep(SweepParameter::SigmaW, &sigma_w_values(), 15, &METHODS)?;
    Ok((a, s, start.elapsed().as_secs_f64()))
}

fn dominance(a: &[SweepRow], s: &[SweepRow], secs: f64) -> Result<Verdict> {
    let mut ok = secs <= 1800.0;
    let mut detail = String::new();
    for (name, rows) in [("eps_a", a), ("sigma_w", s)] {
        let sls = coverages(rows, CoverageMethod::Sls);
        let tube = coverages(rows, CoverageMethod::Tube);
        let errors = rows.iter().filter(|r| r.error.is_some()).count();
        let dominates = sls.iter().zip(&tube).all(|(s, t)| s >= t);
        let trend = non_increasing(&sls, 0.05);
        ok &= dominates && trend && errors == 0;
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
        detail.push_str(&format!("{name}: sls [{}] tube [{}]; ", fmt(&sls), fmt(&tube)));
    }
    detail.push_str(&format!("{secs:.0} s"));
    verdict(ok, detail)
}

fn near_maximal(a: &[SweepRow]) -> Result<Verdict> {
    let row = a.iter().find(|r| (r.value - 0.1).abs() < 1e-12).expect("eps_a = 0.1 row");
    let c = row.coverage(CoverageMethod::Sls).unwrap_or(0.0);
    verdict(c >= 0.90, format!("sls coverage {c:.4} on the terminal-set grid"))
}

fn mode_containment(a: &[SweepRow], s: &[SweepRow]) -> Result<Verdict> {
    let mut violations = 0;
    let mut points = 0;
    for row in a.iter().chain(s) {
        let Some(rep) = &row.report else { continue };
        let full = rep.feasible_flags(CoverageMethod::Sls).unwrap();
        let diag = rep.feasible_flags(CoverageMethod::SlsDiag).unwrap();
        points += rep.in_region;
        violations += full.iter().zip(&diag).filter(|(f, d)| **d && !**f).count();
    }
    verdict(violations == 0, format!("{violations} violations over {points} grid solves"))
}

fn timing(a: &[SweepRow]) -> Result<Verdict> {
    let row = a.iter().find(|r| (r.value - 0.1).abs() < 1e-12).expect("eps_a = 0.1 row");
    let ms = row.report.as_ref().unwrap().summary(CoverageMethod::Sls).unwrap().mean_solve_ms;
    verdict(ms <= 2000.0, format!("mean SLS solve {ms:.1} ms on the benchmark grid"))
}

fn rci() -> Result<Verdict> {
    let spec = paper_benchmark(0.1, 0.1, 0.1)?;
    let set = max_rci(&spec, RciOptions::default())?;
    let cert = rci_certificate(&set, &spec)?;
    verdict(
        spec.uncertainty().len() == 4 && cert.passes(1e-7),
        format!("{} vertices, min slack {:.3e}", cert.vertex_slacks.len(), cert.min_slack),
    )
}

fn mrpi() -> Result<Verdict> {
    let spec = paper_benchmark(0.1, 0.1, 0.1)?;
    let tc = build_tube_controller(&spec, TubeScaling::Homothetic)?;
    let slack = tc.rpi_slack(&spec)?;
    verdict(slack >= -1e-8, format!("facet-wise slack {slack:.3e}"))
}

fn operator_oracle() -> Result<Verdict> {
    let mut rng = common::rng(2024);
    let mut worst = 0.0_f64;
    for _ in 0..200 {
        let t = rng.gen_range(0..6);
        let (p, q, r) = (rng.gen_range(1..4), rng.gen_range(1..4), rng.gen_range(1..4));
        let a = common::random_blt(&mut rng, t, p, q);
        let b = common::random_blt(&mut rng, t, q, r);
        worst = worst.max((a.multiply(&b)?.to_dense() - a.to_dense() * b.to_dense()).amax());
        let sq = common::random_blt(&mut rng, t, p, p);
        let dense_inv = sq.to_dense().try_inverse().expect("invertible");
        worst = worst.max((sq.inverse()?.to_dense() - dense_inv).amax());
        let m = DMatrix::from_fn(p, q, |_, _| rng.gen_range(-1.0..1.0));
        worst = worst.max((BlockLtOperator::shift_stack(&m, t).to_dense() - common::dense_shift(&m, t)).amax());
    }
    verdict(worst <= 1e-9, format!("200 instances, worst entry gap {worst:.2e}"))
}

fn degenerate() -> Result<Verdict> {
    let sigma = 0.1;
    let spec = paper_benchmark(0.0, 0.0, sigma)?.with_filter_mode(FilterMode::DiagonalOnly);
    let opts = SynthesisOptions {
        filter_weight: 1.0,
        ..Default::default()
    };
    let (mut d_gap, mut w_gap) = (0.0_f64, 0.0_f64);
    for x0 in [DVector::zeros(2), DVector::from_column_slice(&[2.0, -1.0])] {
        let sol = synthesize(&spec, &x0, &opts)?;
        d_gap = d_gap.max(sol.d.iter().map(|d| d.add_scalar(-sigma).amax()).fold(0.0, f64::max));
        let sampler = ScenarioSampler::new(5).with_w_mode(WMode::CornersOnly);
        for i in 0..20 {
            let tr = certificate_rollout(&sol, &spec, &mut sampler.rollout(i))?;
            for (t, w) in tr.disturbances.iter().enumerate() {
                w_gap = w_gap.max((&tr.w_tilde[t + 1] - w / sigma).amax());
            }
        }
    }
    verdict(
        d_gap <= 1e-6 && w_gap <= 1e-6,
        format!("max |d - sigma_w| {d_gap:.2e}, max |w~ - w/sigma_w| {w_gap:.2e}"),
    )
}

fn suite() -> Result<Verdict> {
    let start = Instant::now();
    let res = random_suite(50, 0, 15)?;
    let secs = start.elapsed().as_secs_f64();
    let sorted = res.rows.windows(2).all(|w| w[0].sls_coverage <= w[1].sls_coverage);
    let dominated = res.dominated_count();
    let errors = res.rows.iter().filter(|r| r.error.is_some()).count();
    verdict(
        res.rows.len() == 50 && sorted && dominated >= 45 && errors == 0 && secs <= 3600.0,
        format!(
            "{} rows, sorted {sorted}, sls >= tube on {dominated}/50, {errors} errors, {secs:.0} s",
            res.rows.len()
        ),
    )
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |name: &str, v: Result<Verdict>| {
        let v = v.unwrap_or_else(|e| Verdict {
            passed: false,
            detail: format!("error: {e}"),
        });
        all &= v.passed;
        println!("[{}] {name}: {}", if v.passed { "PASS" } else { "FAIL" }, v.detail);
    };

    report("operator oracle equivalence", operator_oracle());
    report("degenerate analytics", degenerate());
    report("RCI certificate", rci());
    report("mRPI certificate", mrpi());
    match certificate_and_structure() {
        Ok((c, s)) => {
            report("certificate soundness", Ok(c));
            report("structural identities", Ok(s));
        }
        Err(e) => {
            let msg = e.to_string();
            report("certificate soundness", Err(e));
            report("structural identities", verdict(false, format!("error: {msg}")));
        }
    }
    match sweeps() {
        Ok((a, s, secs)) => {
            report("coverage dominance and trend", dominance(&a, &s, secs));
            report("near-maximal feasible domain", near_maximal(&a));
            report("mode containment", mode_containment(&a, &s));
            report("timing sanity", timing(&a));
        }
        Err(e) => {
            for name in [
                "coverage dominance and trend",
                "near-maximal feasible domain",
                "mode containment",
                "timing sanity",
            ] {
                report(name, verdict(false, format!("error: {e}")));
            }
        }
    }
    report("random suite shape", suite());

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
