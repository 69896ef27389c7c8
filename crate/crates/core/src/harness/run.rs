//! Assembling and running a single experiment.

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::config::{GossipChoice, InnerChoice, ProblemKind, RunConfig, SpectrumKind, StopChoice};
use crate::algorithms::{AlgorithmConfig, AlgorithmKind, GossipKind, InnerSolver, Simulation, StopPolicy};
use crate::gossip::chebyshev_gamma;
use crate::metrics::{self, Metric, RoundTelemetry};
use crate::problems::{
    default_delta_scale, estimate_delta, make_classification, partitioned_logistic, Dataset, ObjectiveSet,
    QuadraticEnsemble, Spectrum,
};
use crate::topology::{build_graph, metropolis_weights, Graph, MixingMatrix, TopologyKind};
use crate::{Error, Result, Vector};

/// Parameters after `"auto"` resolution, echoed with every run.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    pub lambda: f64,
    pub gossip_steps: usize,
    pub gamma: Option<f64>,
    pub rho: f64,
    pub delta: f64,
    pub mu: f64,
    pub big_l: f64,
    /// Gradient-tracking step, when applicable.
    pub eta: Option<f64>,
    pub diameter: usize,
}

impl fmt::Display for Resolved {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "lambda = {}", self.lambda)?;
        writeln!(f, "M = {}", self.gossip_steps)?;
        if let Some(g) = self.gamma {
            writeln!(f, "gamma = {g}")?;
        }
        if let Some(eta) = self.eta {
            writeln!(f, "eta = {eta}")?;
        }
        writeln!(f, "rho = {}", self.rho)?;
        writeln!(f, "delta = {}", self.delta)?;
        writeln!(f, "mu = {}", self.mu)?;
        writeln!(f, "big_l = {}", self.big_l)?;
        write!(f, "diameter = {}", self.diameter)
    }
}

/// Everything needed to start a simulation.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub graph: Graph,
    pub mixing: MixingMatrix,
    pub objectives: ObjectiveSet,
    pub algorithm: AlgorithmConfig,
    pub resolved: Resolved,
    pub x0: Vector,
}

/// Output of [`run_experiment`].
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub config: RunConfig,
    pub resolved: Resolved,
    /// Round 0 (initial state) followed by one entry per executed round.
    pub telemetry: Vec<RoundTelemetry>,
    /// Cumulative gradient calls of every node, aligned with `telemetry`.
    pub node_grads: Vec<Vec<u64>>,
    /// First round with `grad_norm <= run.eps`.
    pub rounds_to_eps: Option<usize>,
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) | Error::Io(_) | Error::Divergence { .. } => e,
        other => Error::Config(other.to_string()),
    }
}

fn build_problem(cfg: &RunConfig) -> Result<ObjectiveSet> {
    let p = &cfg.problem;
    let n = cfg.topology.n;
    let seed = cfg.problem_seed();
    match p.kind {
        ProblemKind::Quadratic => {
            let spectrum = match p.spectrum {
                SpectrumKind::Uniform => Spectrum::Uniform,
                SpectrumKind::LogSpaced => Spectrum::LogSpaced { min_ratio: p.min_ratio },
            };
            QuadraticEnsemble::new(n, p.d, p.mu, p.big_l, p.target_delta, seed)
                .spectrum(spectrum)
                .offset_scale(p.offset_scale)
                .build()
        }
        ProblemKind::Logistic | ProblemKind::Dataset => {
            let data = match &p.path {
                Some(path) if p.kind == ProblemKind::Dataset => Dataset::read(path)?,
                _ => make_classification(p.samples, p.d, p.classes, p.separation, seed)?,
            };
            let objs = partitioned_logistic(&data, n, p.alpha, p.reg, seed)?;
            let delta = match p.delta {
                Some(d) => d,
                None => {
                    let scale = p.delta_scale.unwrap_or_else(|| default_delta_scale(data.dim()));
                    estimate_delta(&objs, p.delta_samples, scale, seed)?
                }
            };
            objs.with_delta(delta)
        }
    }
}

fn need_delta(what: &str, delta: f64) -> Result<()> {
    if delta > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} = \"auto\" needs delta > 0; set it explicitly")))
    }
}

/// Default `λ` for each method.
pub fn auto_lambda(kind: AlgorithmKind, mu: f64, delta: f64) -> f64 {
    match kind {
        AlgorithmKind::Pdo => 4.0 * delta,
        AlgorithmKind::Spdo => 20.0 * delta,
        AlgorithmKind::AccSpdo if mu > 0.0 => 96.0 * delta,
        AlgorithmKind::AccSpdo => 208.0 * delta,
        AlgorithmKind::GradientTracking => 0.0,
    }
}

/// Default gossip steps `M`. `eps` and `d0 = ||x0 - x*||` only matter for
/// accelerated SPDO with `μ = 0`.
pub fn auto_gossip_steps(kind: AlgorithmKind, rho: f64, mu: f64, big_l: f64, delta: f64, eps: f64, d0: f64) -> usize {
    let gap = 1.0 - rho;
    let m = match kind {
        AlgorithmKind::GradientTracking => 1.0,
        AlgorithmKind::Pdo => (6.0 * big_l / delta).ln() / gap,
        AlgorithmKind::Spdo => (5.0 * big_l / delta).ln() / gap,
        AlgorithmKind::AccSpdo if mu > 0.0 => {
            4.0 / gap.sqrt() * (18.0 * big_l * big_l * (192.0 * delta + mu) / (mu * delta * delta)).ln()
        }
        AlgorithmKind::AccSpdo => {
            let inner = (12.0 * big_l / delta).max(20384.0 * delta * d0 * d0 / eps);
            1.5 / gap.sqrt() * inner.ln()
        }
    };
    (m.ceil() as usize).max(1)
}

/// Builds graph, objectives and solver settings, resolving `"auto"` values.
pub fn assemble(cfg: &RunConfig) -> Result<Experiment> {
    cfg.validate()?;
    let n = cfg.topology.n;
    let kind = TopologyKind::parse(&cfg.topology.kind, cfg.topology.p).map_err(config_err)?;
    let graph = build_graph(kind, n, cfg.topology_seed()).map_err(config_err)?;
    let mixing = metropolis_weights(&graph);
    let objectives = build_problem(cfg).map_err(config_err)?;
    let x0 = Vector::zeros(objectives.d());

    let a = &cfg.algorithm;
    let algo_kind: AlgorithmKind = a.kind.parse().map_err(config_err)?;
    let (mu, big_l, delta, rho) = (objectives.mu(), objectives.big_l(), objectives.delta(), mixing.rho());

    let lambda = if algo_kind.is_proximal() {
        a.lambda.or_else(|| {
            need_delta("lambda", delta)?;
            Ok(auto_lambda(algo_kind, mu, delta))
        })?
    } else {
        a.lambda.or_else(|| Ok(0.0))?
    };
    let gossip_steps = a.gossip_steps.or_else(|| {
        if algo_kind.is_proximal() {
            need_delta("M", delta)?;
        }
        let d0 = objectives.optimum().map_or(1.0, |o| (&x0 - &o.x).norm());
        Ok(auto_gossip_steps(algo_kind, rho, mu, big_l, delta, cfg.run.eps, d0))
    })?;
    let fast = a.gossip.unwrap_or(if algo_kind == AlgorithmKind::AccSpdo {
        GossipChoice::Fast
    } else {
        GossipChoice::Plain
    }) == GossipChoice::Fast;
    let gamma = if fast { Some(a.gamma.or_else(|| chebyshev_gamma(rho).map_err(config_err))?) } else { None };
    let eta = (algo_kind == AlgorithmKind::GradientTracking).then(|| a.eta.or_else(|| Ok(1.0 / big_l))).transpose()?;

    let inner = match a.inner {
        InnerChoice::Agd => InnerSolver::Agd,
        InnerChoice::Gd => InnerSolver::Gd { eta: a.inner_eta.or_else(|| Ok(1.0 / (big_l + lambda)))? },
    };
    let stop = match a.stop {
        StopChoice::Theory => StopPolicy::Theory,
        StopChoice::Experiment => StopPolicy::Experiment,
        StopChoice::Exact => StopPolicy::Exact { tol: a.stop_tol },
        StopChoice::MaxIters => StopPolicy::MaxIters(a.stop_iters),
    };
    let algorithm = AlgorithmConfig {
        kind: algo_kind,
        lambda,
        gossip_steps,
        gossip: gamma.map_or(GossipKind::Plain, |gamma| GossipKind::Fast { gamma }),
        inner,
        stop,
        max_inner: a.max_inner,
        eta_gt: eta.unwrap_or(0.0),
    };
    algorithm.validate().map_err(config_err)?;
    let resolved =
        Resolved { lambda, gossip_steps, gamma, rho, delta, mu, big_l, eta, diameter: graph.diameter() };
    Ok(Experiment { graph, mixing, objectives, algorithm, resolved, x0 })
}

/// Runs the configured method and records telemetry after every round.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunRecord> {
    let exp = assemble(cfg)?;
    let mut sim =
        Simulation::new(&exp.objectives, &exp.mixing, exp.algorithm.clone(), &exp.x0, exp.resolved.diameter as u64)?;
    let mut telemetry = vec![sim.telemetry()];
    let mut node_grads = vec![sim.counters().grads.clone()];
    let eps = cfg.run.eps;
    for r in 0..cfg.run.rounds {
        if cfg.run.early_stop && telemetry.last().is_some_and(|t| t.grad_norm <= eps) {
            break;
        }
        if let Some(budget) = cfg.run.comm_budget {
            if sim.counters().comm + sim.next_round_comm() > budget {
                break;
            }
        }
        sim.step()?;
        let t = sim.telemetry();
        if !t.grad_norm.is_finite() || t.grad_norm > 1e12 {
            return Err(Error::Divergence { round: Some(r), norm: t.grad_norm });
        }
        telemetry.push(t);
        node_grads.push(sim.counters().grads.clone());
    }
    let rounds_to_eps = metrics::rounds_to_tolerance(&telemetry, Metric::GradNorm, eps);
    Ok(RunRecord { config: cfg.clone(), resolved: exp.resolved, telemetry, node_grads, rounds_to_eps })
}

impl RunRecord {
    pub fn csv(&self) -> String {
        metrics::to_csv(&self.telemetry)
    }

    /// `round,node_0,...,node_{n-1}` with cumulative gradient calls.
    pub fn node_grads_csv(&self) -> String {
        let n = self.node_grads.first().map_or(0, Vec::len);
        let mut out = String::from("round");
        for i in 0..n {
            let _ = write!(out, ",node_{i}");
        }
        out.push('\n');
        for (t, row) in self.telemetry.iter().zip(&self.node_grads) {
            let _ = write!(out, "{}", t.round);
            for g in row {
                let _ = write!(out, ",{g}");
            }
            out.push('\n');
        }
        out
    }

    pub fn final_grad_norm(&self) -> f64 {
        self.telemetry.last().map_or(f64::NAN, |t| t.grad_norm)
    }

    /// Writes `telemetry.csv`, `node_grads.csv` and `resolved.txt` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join("telemetry.csv"), self.csv())?;
        fs::write(dir.join("node_grads.csv"), self.node_grads_csv())?;
        fs::write(dir.join("resolved.txt"), format!("{}\n\n{}", self.resolved, self.config))?;
        Ok(())
    }
}
