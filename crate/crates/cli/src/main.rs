use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use diffperf_core::inter_class::per_flow_ratio;
use diffperf_core::{allocate_closed_form, InterClassInput};
use diffperf_sim::{run, sweep, write_report, write_sweep, Scenario, SimError, SweepParam};
use log::error;

const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "diffperf",
    version,
    about = "Class-based bandwidth differentiation: allocator and simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write CSV reports plus summary.json.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the alpha-fair split of a capacity across weighted classes.
    Allocate {
        /// Class weights, comma separated.
        #[arg(short = 'w', long, value_delimiter = ',', required = true)]
        weights: Vec<f64>,
        /// Flows per class, comma separated.
        #[arg(short = 'n', long, value_delimiter = ',', required = true)]
        counts: Vec<usize>,
        /// Capacity in bits/second.
        #[arg(short = 'C', long)]
        capacity: f64,
        #[arg(short = 'a', long, default_value_t = 1.0)]
        alpha: f64,
    },
    /// Run a scenario once per value of one parameter.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// alpha, beta, gamma or buffer (bytes).
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check that scenario files parse and validate.
    Validate {
        #[arg(long = "scenario", required = true, num_args = 1..)]
        scenarios: Vec<PathBuf>,
    },
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

/// Any failure to obtain a usable scenario, unreadable file included, is
/// the caller's input error.
fn load(path: &Path, seed: Option<u64>) -> Result<Scenario, Failure> {
    let mut sc = Scenario::load(path).map_err(|e| Failure::Validation(e.to_string()))?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    Ok(sc)
}

fn allocate(weights: &[f64], counts: &[usize], capacity: f64, alpha: f64) -> Result<(), Failure> {
    if weights.len() != counts.len() {
        return Err(Failure::Validation(format!(
            "{} weights but {} counts",
            weights.len(),
            counts.len()
        )));
    }
    let names: Vec<String> = (1..=weights.len()).map(|i| format!("c{i}")).collect();
    let input = names
        .iter()
        .zip(weights.iter().zip(counts))
        .fold(InterClassInput::new(capacity, alpha), |acc, (name, (w, n))| {
            acc.with_class(name.as_str(), *w, *n)
        });
    let alloc = allocate_closed_form(&input).map_err(|e| Failure::Validation(e.to_string()))?;
    println!(
        "{:<6} {:>8} {:>6} {:>14} {:>14}",
        "class", "weight", "flows", "share_mbps", "per_flow_mbps"
    );
    for (name, (w, n)) in names.iter().zip(weights.iter().zip(counts)) {
        let x = alloc.shares[&name.as_str().into()];
        let per_flow = if *n > 0 {
            format!("{:.4}", x / *n as f64 / 1e6)
        } else {
            "-".into()
        };
        println!("{name:<6} {w:>8} {n:>6} {:>14.4} {per_flow:>14}", x / 1e6);
    }
    let nonempty: Vec<usize> = (0..names.len()).filter(|i| counts[*i] > 0).collect();
    if nonempty.len() > 1 {
        println!();
        println!("per-flow ratios");
        for (k, &i) in nonempty.iter().enumerate() {
            for &j in &nonempty[k + 1..] {
                let r = per_flow_ratio(&alloc, &input, &names[i].as_str().into(), &names[j].as_str().into())
                    .map_err(|e| Failure::Validation(e.to_string()))?;
                println!("{}/{} {:.6}", names[i], names[j], r);
            }
        }
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { scenario, out, seed } => {
            let sc = load(&scenario, seed)?;
            let report = run(&sc)?;
            write_report(&report, &out)?;
            let a = &report.aggregates;
            println!(
                "{}: {} clients, mean QoE {:.2}, mean stall {:.2} s, utilization {:.3}, Jain {:.3}",
                sc.name,
                a.overall.clients,
                a.overall.mean_qoe,
                a.overall.mean_stall_s,
                a.mean_utilization,
                a.jain_index
            );
            if !report.violations.is_empty() {
                return Err(Failure::Runtime(format!(
                    "{} invariant violations",
                    report.violations.len()
                )));
            }
            Ok(())
        }
        Command::Allocate {
            weights,
            counts,
            capacity,
            alpha,
        } => allocate(&weights, &counts, capacity, alpha),
        Command::Sweep {
            scenario,
            param,
            values,
            out,
            seed,
        } => {
            let param: SweepParam = param.parse()?;
            let sc = load(&scenario, seed)?;
            let results = sweep(&sc, param, &values)?;
            let rows = write_sweep(&results, param, &out)?;
            println!(
                "{param:>10} {:>10} {:>10} {:>14} {:>8}",
                "mean_qoe", "stall_s", "agg_mbps", "jain"
            );
            for r in rows {
                println!(
                    "{:>10} {:>10.2} {:>10.2} {:>14.3} {:>8.4}",
                    r.value,
                    r.mean_qoe,
                    r.mean_stall_s,
                    r.aggregate_throughput_bps / 1e6,
                    r.jain_index
                );
            }
            Ok(())
        }
        Command::Validate { scenarios } => {
            for path in scenarios {
                load(&path, None)?;
                println!("{}: ok", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DIFFPERF_LOG", "warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            error!("{msg}");
            eprintln!("validation error: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Runtime(msg)) => {
            error!("{msg}");
            eprintln!("runtime error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
