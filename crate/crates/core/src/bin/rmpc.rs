//! Command-line harness for the coverage experiments.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use rmpc::experiments::{
    benchmark_sweep, coverage, epsilon_a_values, random_suite, sigma_w_values, sweep_csv, with_rci_terminal,
    CoverageMethod, Region, SweepParameter,
};
use rmpc::model::{load_spec, paper_benchmark, OcpSpec};
use rmpc::polytope::{max_rci, HPolytope, PolytopeJson, RciOptions};
use rmpc::simulate::{run_receding_horizon, Method, ScenarioSampler};
use rmpc::sls::{solve_sls, SynthesisOptions};
use rmpc::{Error, Result};

#[derive(Parser)]
#[command(name = "rmpc", version, about = "Robust MPC under polytopic model uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    EpsilonA,
    SigmaW,
}

#[derive(Subcommand)]
enum Command {
    /// Write the benchmark spec for the given uncertainty parameters.
    Spec {
        #[arg(long, default_value_t = 0.1)]
        eps_a: f64,
        #[arg(long, default_value_t = 0.1)]
        eps_b: f64,
        #[arg(long, default_value_t = 0.1)]
        sigma_w: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Maximal robust control invariant set: rci.json and rci_vertices.csv.
    Rci {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Feasibility coverage of each method over a grid.
    Coverage {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 15)]
        grid: usize,
        /// terminal | state
        #[arg(long, default_value = "terminal")]
        region: String,
        #[arg(long, default_value = "sls,tube")]
        methods: String,
        /// Precomputed RCI set (rci.json); computed when absent.
        #[arg(long)]
        rci: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Terminal-set coverage on the benchmark over an ε_A or σ_w grid.
    Sweep {
        #[arg(long, value_enum)]
        parameter: SweepArg,
        #[arg(long, default_value_t = 15)]
        grid: usize,
        #[arg(long, default_value = "sls,tube")]
        methods: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// SLS and tube coverage on random two-state systems.
    RandomSuite {
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 15)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Receding-horizon closed loop with sampled uncertainty.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        /// Comma-separated initial state.
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        /// sls | tube
        #[arg(long, default_value = "sls")]
        method: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one robust OCP and dump the solution JSON.
    Synthesize {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_x0(s: &str, spec: &OcpSpec) -> Result<DVector<f64>> {
    let v: std::result::Result<Vec<f64>, _> = s.split(',').map(|p| p.trim().parse::<f64>()).collect();
    let v = v.map_err(|e| Error::Validation(format!("bad --x0 {s:?}: {e}")))?;
    if v.len() != spec.n_x() {
        return Err(Error::DimensionMismatch(format!("--x0 has {} entries, spec has n_x = {}", v.len(), spec.n_x())));
    }
    Ok(DVector::from_vec(v))
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn write_rci(dir: &Path, rci: &HPolytope) -> Result<()> {
    write(dir, "rci.json", serde_json::to_string_pretty(&rci.to_json())? + "\n")?;
    write(dir, "rci_vertices.csv", rci.vertices()?.to_csv())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Spec {
            eps_a,
            eps_b,
            sigma_w,
            out,
        } => {
            let file = paper_benchmark(eps_a, eps_b, sigma_w)?.to_file()?;
            if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(&out, serde_json::to_string_pretty(&file)? + "\n")?;
        }
        Command::Rci { spec, out } => {
            let spec = load_spec(&spec)?;
            let rci = max_rci(&spec, RciOptions::default())?;
            write_rci(&out, &rci)?;
        }
        Command::Coverage {
            spec,
            grid,
            region,
            methods,
            rci,
            out,
        } => {
            let mut spec = load_spec(&spec)?;
            let region: Region = region.parse()?;
            let methods = CoverageMethod::parse_list(&methods)?;
            if region == Region::TerminalSet {
                spec = match rci {
                    Some(path) => {
                        let j: PolytopeJson = serde_json::from_str(&fs::read_to_string(path)?)?;
                        spec.with_terminal_set(HPolytope::from_json(&j)?)?
                    }
                    None => {
                        let (spec, rci) = with_rci_terminal(&spec)?;
                        write_rci(&out, &rci)?;
                        spec
                    }
                };
            }
            let rep = coverage(&spec, region, grid, &methods)?;
            for s in &rep.summaries {
                println!(
                    "{:<9} coverage {:.4} ({}/{}), mean solve {:.1} ms",
                    s.method.name(),
                    s.coverage,
                    s.feasible,
                    rep.in_region,
                    s.mean_solve_ms
                );
            }
            write(&out, "coverage.csv", rep.to_csv())?;
            write(&out, "coverage.json", serde_json::to_string_pretty(&rep)? + "\n")?;
        }
        Command::Sweep {
            parameter,
            grid,
            methods,
            out,
        } => {
            let methods = CoverageMethod::parse_list(&methods)?;
            let (p, values, name) = match parameter {
                SweepArg::EpsilonA => (SweepParameter::EpsilonA, epsilon_a_values(), "sweep_epsilon_a"),
                SweepArg::SigmaW => (SweepParameter::SigmaW, sigma_w_values(), "sweep_sigma_w"),
            };
            let rows = benchmark_sweep(p, &values, grid, &methods)?;
            let csv = sweep_csv(&rows, &methods);
            print!("{csv}");
            write(&out, &format!("{name}.csv"), csv)?;
            write(&out, &format!("{name}.json"), serde_json::to_string_pretty(&rows)? + "\n")?;
        }
        Command::RandomSuite { count, seed, grid, out } => {
            let res = random_suite(count, seed, grid)?;
            println!(
                "sls >= tube on {}/{} systems",
                res.dominated_count(),
                res.rows.len()
            );
            write(&out, "summary.csv", res.summary_csv())?;
            write(&out, "timing.csv", res.timing_csv())?;
            for (s, rep) in &res.reports {
                if let Some(rep) = rep {
                    write(&out.join("systems"), &format!("seed_{s}.csv"), rep.to_csv())?;
                }
            }
        }
        Command::Simulate {
            spec,
            x0,
            steps,
            method,
            seed,
            out,
        } => {
            let spec = load_spec(&spec)?;
            let x0 = parse_x0(&x0, &spec)?;
            let method: Method = method.parse()?;
            let rec = run_receding_horizon(&spec, &x0, steps, method, &ScenarioSampler::new(seed))?;
            println!("outcome {:?}, {} steps", rec.outcome, rec.steps());
            write(&out, "trajectory.csv", rec.to_csv(&spec))?;
            write(&out, "trajectory.json", serde_json::to_string_pretty(&rec)? + "\n")?;
        }
        Command::Synthesize { spec, x0, out } => {
            let spec = load_spec(&spec)?;
            let x0 = parse_x0(&x0, &spec)?;
            let outcome = solve_sls(&spec, &x0, &SynthesisOptions::default())?;
            let json = match &outcome.solution {
                Some(sol) => serde_json::to_string_pretty(&sol.to_dump())?,
                None => serde_json::to_string_pretty(&serde_json::json!({
                    "status": outcome.status.as_str(),
                    "solve_time": outcome.solve_time,
                }))?,
            };
            println!("status {}", outcome.status.as_str());
            write(&out, "solution.json", json + "\n")?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::EmptyInvariantSet => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
