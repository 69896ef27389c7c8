//! Per-round diagnostics and counters.

use std::fmt::Write as _;

use crate::algorithms::{AlgorithmKind, NodeState};
use crate::gossip::disagreement;
use crate::problems::ObjectiveSet;
use crate::{mean_of, Vector};

/// Cumulative resource counters of a run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    /// Communication steps per node.
    pub comm: u64,
    /// Gradient-oracle calls, one entry per node.
    pub grads: Vec<u64>,
}

impl Counters {
    pub fn new(n: usize) -> Self {
        Counters { comm: 0, grads: vec![0; n] }
    }

    /// Calls made by the busiest node.
    pub fn max_grads(&self) -> u64 {
        self.grads.iter().copied().max().unwrap_or(0)
    }
}

/// Snapshot of a run after `round` rounds.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundTelemetry {
    pub round: usize,
    pub comm: u64,
    pub grads: u64,
    /// `||∇f(x̄)||` at the node average.
    pub grad_norm: f64,
    /// `f(x̄) - f(x*)`, when the optimum is known.
    pub subopt: Option<f64>,
    /// `(1/n) Σ ||x_i - x̄||²`.
    pub consensus_x: f64,
    pub consensus_v: Option<f64>,
    /// `(1/n) Σ ||h_i - ∇h_i(anchor)||²`. For gradient tracking this is
    /// `(1/n) Σ ||g_i - ∇f(x̄)||²` instead.
    pub tracking_err: f64,
    pub inner_iters: usize,
}

/// Quantity to threshold in [`rounds_to_tolerance`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    GradNorm,
    Subopt,
}

impl Metric {
    pub fn parse(name: &str) -> Option<Metric> {
        match name {
            "grad_norm" => Some(Metric::GradNorm),
            "subopt" => Some(Metric::Subopt),
            _ => None,
        }
    }

    pub fn of(&self, t: &RoundTelemetry) -> Option<f64> {
        match self {
            Metric::GradNorm => Some(t.grad_norm),
            Metric::Subopt => t.subopt,
        }
    }
}

/// Builds the telemetry for the given states.
pub fn collect(
    states: &[NodeState],
    objs: &ObjectiveSet,
    counters: &Counters,
    round: usize,
    kind: AlgorithmKind,
    inner_iters: usize,
) -> RoundTelemetry {
    let xs: Vec<Vector> = states.iter().map(|s| s.x.clone()).collect();
    let x_bar = mean_of(&xs);
    let grad = objs.gradient(&x_bar);
    let subopt = objs.optimum().map(|opt| objs.value(&x_bar) - opt.value);
    let vs: Option<Vec<Vector>> = states.iter().map(|s| s.v.clone()).collect();
    let n = states.len() as f64;
    let consensus_v = vs.as_deref().map(|v| disagreement(v) / n);
    let tracking_err = match kind {
        AlgorithmKind::GradientTracking => {
            states.iter().filter_map(|s| s.g.as_ref()).map(|g| (g - &grad).norm_squared()).sum::<f64>() / n
        }
        _ => {
            let anchor = match kind {
                AlgorithmKind::Spdo => mean_of(vs.as_deref().unwrap_or(&xs)),
                AlgorithmKind::AccSpdo => {
                    let ys: Option<Vec<Vector>> = states.iter().map(|s| s.y.clone()).collect();
                    mean_of(ys.as_deref().unwrap_or(&xs))
                }
                _ => x_bar.clone(),
            };
            let truth = objs.h_gradients(&anchor);
            states.iter().zip(&truth).map(|(s, t)| (&s.h - t).norm_squared()).sum::<f64>() / n
        }
    };

    RoundTelemetry {
        round,
        comm: counters.comm,
        grads: counters.max_grads(),
        grad_norm: grad.norm(),
        subopt,
        consensus_x: disagreement(&xs) / n,
        consensus_v,
        tracking_err,
        inner_iters,
    }
}

/// First round whose metric is at most `eps`.
pub fn rounds_to_tolerance(record: &[RoundTelemetry], metric: Metric, eps: f64) -> Option<usize> {
    record.iter().find(|t| metric.of(t).is_some_and(|v| v <= eps)).map(|t| t.round)
}

/// Geometric round weights `w_r = q^r` used to average iterates in the
/// strongly convex guarantees.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedAverage {
    ratio: f64,
    weights: Vec<f64>,
}

impl WeightedAverage {
    pub fn new(ratio: f64) -> Self {
        WeightedAverage { ratio, weights: Vec::new() }
    }

    /// `q = 1 + μ/(4δ)`.
    pub fn pdo(mu: f64, delta: f64) -> Self {
        Self::new(1.0 + mu / (4.0 * delta))
    }

    /// `q = 1 + μ/(20δ)`.
    pub fn spdo(mu: f64, delta: f64) -> Self {
        Self::new(1.0 + mu / (20.0 * delta))
    }

    /// Weights for rounds `0..rounds`.
    pub fn weights(&mut self, rounds: usize) -> &[f64] {
        while self.weights.len() < rounds {
            self.weights.push(self.ratio.powi(self.weights.len() as i32));
        }
        &self.weights[..rounds]
    }

    /// `W_R = Σ_{r<R} w_r`.
    pub fn total(&mut self, rounds: usize) -> f64 {
        self.weights(rounds).iter().sum()
    }

    /// `(1/W_R) Σ_{r<R} w_r values[r]`.
    pub fn average(&mut self, values: &[f64]) -> f64 {
        let w = self.weights(values.len());
        let total: f64 = w.iter().sum();
        w.iter().zip(values).map(|(w, v)| w * v).sum::<f64>() / total
    }
}

pub const CSV_HEADER: &str = "round,comm,grads,grad_norm,subopt,consensus_x,consensus_v,tracking_err,inner_iters";

pub(crate) fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// One CSV line (no trailing newline) in the [`CSV_HEADER`] layout.
pub fn csv_row(t: &RoundTelemetry) -> String {
    let mut s = String::new();
    let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
    let _ = write!(
        s,
        "{},{},{},{},{},{},{},{},{}",
        t.round,
        t.comm,
        t.grads,
        fmt_float(t.grad_norm),
        opt(t.subopt),
        fmt_float(t.consensus_x),
        opt(t.consensus_v),
        fmt_float(t.tracking_err),
        t.inner_iters
    );
    s
}

/// Header plus one row per telemetry entry.
pub fn to_csv(record: &[RoundTelemetry]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for t in record {
        out.push_str(&csv_row(t));
        out.push('\n');
    }
    out
}
