use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use decopt::harness::{self, RunConfig};
use decopt::metrics::Metric;
use decopt::problems::{default_delta_scale, estimate_delta, partitioned_logistic, Dataset};
use decopt::topology::{build_graph, metropolis_weights, TopologyKind};
use decopt::Error;

#[derive(Parser)]
#[command(name = "decopt", version, about = "Decentralized optimization simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; the telemetry CSV goes to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment once per value of one config key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Alias (M, lambda, alpha, target_delta, kind, ...) or `section.key`.
        #[arg(long)]
        axis: Option<String>,
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<String>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Graph utilities.
    Topology {
        #[command(subcommand)]
        action: TopologyAction,
    },
    /// Estimate the similarity constant of a partitioned dataset.
    EstimateDelta {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        nodes: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.01)]
        reg: f64,
        /// Sampling radius; defaults to 1/sqrt(2d).
        #[arg(long)]
        scale: Option<f64>,
    },
    /// Plot telemetry CSVs against communication.
    Plot {
        #[arg(long = "in", num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "grad_norm")]
        metric: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum TopologyAction {
    /// Print node count, edge count and the mixing rate.
    Inspect {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// `x` with `digits` significant digits in positional notation.
fn significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

fn execute(cli: Cli) -> decopt::Result<()> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let rec = harness::run_experiment(&cfg)?;
            eprintln!("{}", rec.resolved);
            match rec.rounds_to_eps {
                Some(r) => eprintln!("grad_norm <= {} at round {r}", cfg.run.eps),
                None => eprintln!("grad_norm did not reach {}", cfg.run.eps),
            }
            match out.or_else(|| cfg.run.out.clone().map(PathBuf::from)) {
                Some(dir) => rec.write(dir)?,
                None => print!("{}", rec.csv()),
            }
        }
        Command::Sweep { config, axis, values, out } => {
            let cfg = RunConfig::load(&config)?;
            let axis = axis.or_else(|| cfg.sweep.as_ref().map(|s| s.axis.clone())).ok_or_else(|| {
                Error::Config("no sweep axis: pass --axis or add a [sweep] section".into())
            })?;
            let values = match values {
                Some(v) => v,
                None => cfg.sweep.as_ref().map(|s| s.value_strings()).unwrap_or_default(),
            };
            let results = harness::run_sweep(&cfg, &axis, &values)?;
            match out.or_else(|| cfg.run.out.clone().map(PathBuf::from)) {
                Some(dir) => harness::write_sweep(dir, &axis, &results)?,
                None => print!("{}", harness::sweep_summary_csv(&results)),
            }
        }
        Command::Topology { action: TopologyAction::Inspect { kind, n, p, seed } } => {
            let kind = TopologyKind::parse(&kind, p).map_err(|e| Error::Config(e.to_string()))?;
            let graph = build_graph(kind, n, seed).map_err(|e| Error::Config(e.to_string()))?;
            let w = metropolis_weights(&graph);
            println!("n = {}", graph.n());
            println!("edges = {}", graph.edge_count());
            println!("rho = {}", significant(w.rho(), 12));
            println!("diameter = {}", graph.diameter());
        }
        Command::EstimateDelta { dataset, alpha, nodes, samples, seed, reg, scale } => {
            let data = Dataset::read(&dataset)?;
            let objs = partitioned_logistic(&data, nodes, alpha, reg, seed)?;
            let scale = scale.unwrap_or_else(|| default_delta_scale(data.dim()));
            let delta = estimate_delta(&objs, samples, scale, seed)?;
            println!("delta = {}", significant(delta, 12));
            println!("big_l = {}", significant(objs.big_l(), 12));
        }
        Command::Plot { inputs, metric, out } => {
            let metric =
                Metric::parse(&metric).ok_or_else(|| Error::Config(format!("unknown metric `{metric}`")))?;
            let records = inputs
                .iter()
                .map(|p| {
                    let label = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into());
                    harness::read_telemetry_csv(p).map(|r| (label, r))
                })
                .collect::<decopt::Result<Vec<_>>>()?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            harness::emit_plot(&records, metric, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Divergence { .. } => 3,
                Error::Io(_) => 1,
                _ => 2,
            })
        }
    }
}
