//! Round-level decentralized methods.
//!
//! Every method keeps per-node iterates and a tracking variable `h_i` that
//! estimates `∇h_i = ∇f - ∇f_i`. Rounds are bulk-synchronous: all nodes do
//! their local work, then values are gossiped. Nodes are processed in index
//! order and gossip sums in ascending neighbour order, so runs are
//! bitwise reproducible.
//!
//! * [`gradient_tracking_round`]: gradient tracking baseline.
//! * [`pdo_round`]: proximal decentralized optimization, exact or inexact.
//! * [`spdo_round`]: stabilized PDO; the prox centre is a separate
//!   sequence `v_i` updated in closed form, so inexact solves need not get
//!   more accurate over time.
//! * [`acc_spdo_round`]: accelerated SPDO with the `A/B/a` schedule of
//!   [`AccSchedule`] and fast gossip.

mod schedule;

pub use schedule::AccSchedule;

use std::fmt;
use std::str::FromStr;

use crate::gossip::{fast_gossip, multi_gossip, GossipBatch};
use crate::metrics::{self, Counters, RoundTelemetry};
use crate::problems::ObjectiveSet;
use crate::subsolvers::{solve_agd, solve_gd, InnerSolution, ProxSubproblem, StopRule};
use crate::topology::MixingMatrix;
use crate::{check_finite, Error, Result, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AlgorithmKind {
    GradientTracking,
    Pdo,
    Spdo,
    AccSpdo,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 4] =
        [AlgorithmKind::GradientTracking, AlgorithmKind::Pdo, AlgorithmKind::Spdo, AlgorithmKind::AccSpdo];

    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmKind::GradientTracking => "gradient_tracking",
            AlgorithmKind::Pdo => "pdo",
            AlgorithmKind::Spdo => "spdo",
            AlgorithmKind::AccSpdo => "acc_spdo",
        }
    }

    pub fn is_proximal(&self) -> bool {
        !matches!(self, AlgorithmKind::GradientTracking)
    }

    /// Gossip exchanges per round, in units of `M`.
    pub fn exchanges_per_round(&self, round: usize) -> u64 {
        match self {
            AlgorithmKind::AccSpdo if round == 0 => 2,
            AlgorithmKind::AccSpdo => 3,
            _ => 2,
        }
    }
}

impl FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gradient_tracking" | "gt" => Ok(AlgorithmKind::GradientTracking),
            "pdo" | "inexact_pdo" => Ok(AlgorithmKind::Pdo),
            "spdo" => Ok(AlgorithmKind::Spdo),
            "acc_spdo" | "accelerated_spdo" => Ok(AlgorithmKind::AccSpdo),
            other => Err(Error::invalid(format!("unknown algorithm `{other}`"))),
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GossipKind {
    Plain,
    Fast { gamma: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InnerSolver {
    Gd { eta: f64 },
    Agd,
}

/// How the per-round [`StopRule`] is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopPolicy {
    /// The accuracy conditions the convergence guarantees are stated with.
    Theory,
    /// The looser, practical conditions (`||∇F|| ≤ λ||x - anchor||` style).
    Experiment,
    Exact { tol: f64 },
    MaxIters(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlgorithmConfig {
    pub kind: AlgorithmKind,
    pub lambda: f64,
    /// Gossip steps `M` per exchange.
    pub gossip_steps: usize,
    pub gossip: GossipKind,
    pub inner: InnerSolver,
    pub stop: StopPolicy,
    /// Iteration cap for the inner solver.
    pub max_inner: usize,
    /// Step size of gradient tracking.
    pub eta_gt: f64,
}

impl AlgorithmConfig {
    pub fn new(kind: AlgorithmKind, lambda: f64, gossip_steps: usize) -> Self {
        AlgorithmConfig {
            kind,
            lambda,
            gossip_steps,
            gossip: GossipKind::Plain,
            inner: InnerSolver::Agd,
            stop: StopPolicy::Theory,
            max_inner: 10_000,
            eta_gt: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gossip_steps == 0 {
            return Err(Error::invalid("gossip steps M must be at least 1"));
        }
        if self.kind.is_proximal() && !(self.lambda > 0.0) {
            return Err(Error::invalid(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.kind == AlgorithmKind::GradientTracking && !(self.eta_gt > 0.0) {
            return Err(Error::invalid(format!("gradient tracking step must be positive, got {}", self.eta_gt)));
        }
        if let GossipKind::Fast { gamma } = self.gossip {
            if !(gamma >= 0.0) {
                return Err(Error::invalid(format!("gamma must be nonnegative, got {gamma}")));
            }
        }
        if let InnerSolver::Gd { eta } = self.inner {
            if !(eta > 0.0) {
                return Err(Error::invalid(format!("inner step must be positive, got {eta}")));
            }
        }
        Ok(())
    }

    /// Stopping rule for the subproblems of round `r`.
    pub fn stop_rule(&self, r: usize, objs: &ObjectiveSet) -> StopRule {
        let lambda = self.lambda;
        match (self.stop, self.kind) {
            (StopPolicy::Exact { tol }, _) => StopRule::Exact { tol },
            (StopPolicy::MaxIters(t), _) => StopRule::MaxIters(t),
            (StopPolicy::Theory, AlgorithmKind::Spdo) => StopRule::Spdo { lambda },
            (StopPolicy::Theory, AlgorithmKind::AccSpdo) => StopRule::AccSpdo { lambda },
            (StopPolicy::Theory, _) => StopRule::InexactPdo { round: r, delta: objs.delta(), mu: objs.mu() },
            (StopPolicy::Experiment, AlgorithmKind::Spdo) => StopRule::ExperimentSpdo { lambda },
            (StopPolicy::Experiment, AlgorithmKind::AccSpdo) => StopRule::ExperimentAcc { lambda },
            (StopPolicy::Experiment, _) => StopRule::ExperimentPdo { round: r, lambda, mu: objs.mu() },
        }
    }

    fn mix(&self, w: &MixingMatrix, values: Vec<Vector>) -> Result<(Vec<Vector>, u64)> {
        let batch = GossipBatch::new(values);
        let out = match self.gossip {
            GossipKind::Plain => multi_gossip(batch, w, self.gossip_steps)?,
            GossipKind::Fast { gamma } => fast_gossip(batch, w, self.gossip_steps, gamma)?,
        };
        Ok((out.values, out.comm_steps))
    }

    fn solve(&self, sub: &ProxSubproblem<'_>, rule: &StopRule) -> Result<InnerSolution> {
        match self.inner {
            InnerSolver::Gd { eta } => solve_gd(sub, rule, eta, self.max_inner),
            InnerSolver::Agd => solve_agd(sub, rule, self.max_inner),
        }
    }
}

/// Per-node variables. Unused slots are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeState {
    pub x: Vector,
    /// Prox-centre sequence of SPDO and accelerated SPDO.
    pub v: Option<Vector>,
    /// Tracking estimate of `∇f - ∇f_i` (zero and unused for gradient tracking).
    pub h: Vector,
    /// Extrapolated point of accelerated SPDO.
    pub y: Option<Vector>,
    /// Tracked global gradient of gradient tracking.
    pub g: Option<Vector>,
    /// `∇f_i(x)` at the current `x` (gradient tracking only).
    pub local_grad: Option<Vector>,
}

/// Starting states: every node at `x0`, `h_i = ∇f(x0) - ∇f_i(x0)` computed
/// exactly. Costs one gradient call per node; the aggregation itself is
/// charged separately by the caller.
pub fn init_states(objs: &ObjectiveSet, x0: &Vector, kind: AlgorithmKind) -> Result<Vec<NodeState>> {
    if x0.len() != objs.d() {
        return Err(Error::DimensionMismatch { expected: objs.d(), found: x0.len() });
    }
    let grads: Vec<Vector> = objs.locals().iter().map(|l| l.gradient(x0)).collect();
    let global = crate::mean_of(&grads);
    Ok(grads
        .into_iter()
        .map(|gi| {
            let gt = kind == AlgorithmKind::GradientTracking;
            NodeState {
                x: x0.clone(),
                v: matches!(kind, AlgorithmKind::Spdo | AlgorithmKind::AccSpdo).then(|| x0.clone()),
                h: if gt { Vector::zeros(x0.len()) } else { &global - &gi },
                y: (kind == AlgorithmKind::AccSpdo).then(|| x0.clone()),
                g: gt.then(|| gi.clone()),
                local_grad: gt.then_some(gi),
            }
        })
        .collect())
}

fn v_of(s: &NodeState) -> &Vector {
    s.v.as_ref().expect("state has no v slot")
}

fn subproblem<'a>(
    objs: &'a ObjectiveSet,
    i: usize,
    linear: &'a Vector,
    center: &'a Vector,
    lambda: f64,
) -> ProxSubproblem<'a> {
    ProxSubproblem { base: objs.local(i), linear, center, lambda, mu: objs.mu(), big_l: objs.big_l() }
}

/// `∇f_i` at the solver's output, reusing the solver's last evaluation.
fn base_gradient(objs: &ObjectiveSet, i: usize, sol: &InnerSolution, counters: &mut Counters) -> Vector {
    match &sol.base_grad {
        Some(g) => g.clone(),
        None => {
            counters.grads[i] += 1;
            objs.local(i).gradient(&sol.x)
        }
    }
}

/// `h_i ← Gossip(h_i + ∇f_i(p_i)) - ∇f_i(p_i)`.
fn refresh_tracking(
    states: &mut [NodeState],
    w: &MixingMatrix,
    cfg: &AlgorithmConfig,
    objs: &ObjectiveSet,
    points: &[Vector],
    counters: &mut Counters,
) -> Result<()> {
    let grads: Vec<Vector> = points.iter().enumerate().map(|(i, p)| objs.local(i).gradient(p)).collect();
    for g in counters.grads.iter_mut() {
        *g += 1;
    }
    let shifted: Vec<Vector> = states.iter().zip(&grads).map(|(s, g)| &s.h + g).collect();
    let (mixed, comm) = cfg.mix(w, shifted)?;
    counters.comm += comm;
    for ((s, m), g) in states.iter_mut().zip(mixed).zip(&grads) {
        s.h = m - g;
    }
    Ok(())
}

fn check_dims(states: &[NodeState], w: &MixingMatrix, objs: &ObjectiveSet) -> Result<()> {
    if states.len() != w.n() || objs.n() != w.n() {
        return Err(Error::DimensionMismatch { expected: w.n(), found: states.len().max(objs.n()) });
    }
    Ok(())
}

/// One PDO round. Returns the largest inner gradient-call count over nodes.
pub fn pdo_round(
    states: &mut [NodeState],
    w: &MixingMatrix,
    cfg: &AlgorithmConfig,
    objs: &ObjectiveSet,
    r: usize,
    counters: &mut Counters,
) -> Result<usize> {
    check_dims(states, w, objs)?;
    let rule = cfg.stop_rule(r, objs);
    let mut inner = 0;
    let mut halves = Vec::with_capacity(states.len());
    for (i, s) in states.iter().enumerate() {
        let sol = cfg.solve(&subproblem(objs, i, &s.h, &s.x, cfg.lambda), &rule)?;
        counters.grads[i] += sol.grad_calls as u64;
        inner = inner.max(sol.grad_calls);
        halves.push(sol.x);
    }
    let (mixed, comm) = cfg.mix(w, halves)?;
    counters.comm += comm;
    for (s, x) in states.iter_mut().zip(mixed) {
        check_finite(&x)?;
        s.x = x;
    }
    let points: Vec<Vector> = states.iter().map(|s| s.x.clone()).collect();
    refresh_tracking(states, w, cfg, objs, &points, counters)?;
    Ok(inner)
}

/// One SPDO round.
pub fn spdo_round(
    states: &mut [NodeState],
    w: &MixingMatrix,
    cfg: &AlgorithmConfig,
    objs: &ObjectiveSet,
    r: usize,
    counters: &mut Counters,
) -> Result<usize> {
    check_dims(states, w, objs)?;
    let rule = cfg.stop_rule(r, objs);
    let (mu, lambda) = (objs.mu(), cfg.lambda);
    let mut inner = 0;
    let mut v_halves = Vec::with_capacity(states.len());
    for (i, s) in states.iter_mut().enumerate() {
        let v = v_of(s);
        let sol = cfg.solve(&subproblem(objs, i, &s.h, v, lambda), &rule)?;
        counters.grads[i] += sol.grad_calls as u64;
        inner = inner.max(sol.grad_calls);
        let gx = base_gradient(objs, i, &sol, counters);
        // argmin_v ⟨∇f_i(x) + h, v⟩ + (μ/2)||v - x||² + (λ/2)||v - v_old||²
        let mut v_half = &sol.x * mu + v * lambda - gx - &s.h;
        v_half /= mu + lambda;
        v_halves.push(v_half);
        s.x = sol.x;
    }
    let (mixed, comm) = cfg.mix(w, v_halves)?;
    counters.comm += comm;
    for (s, v) in states.iter_mut().zip(mixed) {
        check_finite(&v)?;
        s.v = Some(v);
    }
    let points: Vec<Vector> = states.iter().map(|s| v_of(s).clone()).collect();
    refresh_tracking(states, w, cfg, objs, &points, counters)?;
    Ok(inner)
}

/// One accelerated SPDO round; advances `sched` in place.
pub fn acc_spdo_round(
    states: &mut [NodeState],
    w: &MixingMatrix,
    sched: &mut AccSchedule,
    cfg: &AlgorithmConfig,
    objs: &ObjectiveSet,
    r: usize,
    counters: &mut Counters,
) -> Result<usize> {
    check_dims(states, w, objs)?;
    let mu = objs.mu();
    let (next, a) = sched.advance();
    let (a_prev, b_prev) = (sched.a_total, sched.b);
    let (a_next, b_next) = (next.a_total, next.b);

    for s in states.iter_mut() {
        let y = if a_prev == 0.0 { v_of(s).clone() } else { (&s.x * a_prev + v_of(s) * a) / a_next };
        s.y = Some(y);
    }
    if r >= 1 {
        let points: Vec<Vector> = states.iter().map(|s| s.y.clone().expect("y set above")).collect();
        refresh_tracking(states, w, cfg, objs, &points, counters)?;
    }

    let rule = cfg.stop_rule(r, objs);
    let mut inner = 0;
    let mut x_halves = Vec::with_capacity(states.len());
    let mut v_halves = Vec::with_capacity(states.len());
    for (i, s) in states.iter().enumerate() {
        let y = s.y.as_ref().expect("y set above");
        let sol = cfg.solve(&subproblem(objs, i, &s.h, y, cfg.lambda), &rule)?;
        counters.grads[i] += sol.grad_calls as u64;
        inner = inner.max(sol.grad_calls);
        let gx = base_gradient(objs, i, &sol, counters);
        let mut v_half = v_of(s) * b_prev + &sol.x * (mu * a) - (gx + &s.h) * a;
        v_half /= b_next;
        v_halves.push(v_half);
        x_halves.push(sol.x);
    }
    let (xs, comm_x) = cfg.mix(w, x_halves)?;
    let (vs, comm_v) = cfg.mix(w, v_halves)?;
    counters.comm += comm_x + comm_v;
    for ((s, x), v) in states.iter_mut().zip(xs).zip(vs) {
        check_finite(&x)?;
        check_finite(&v)?;
        s.x = x;
        s.v = Some(v);
    }
    *sched = next;
    Ok(inner)
}

/// One gradient-tracking round:
/// `x ← Gossip(x - η g)`, `g ← Gossip(g) + ∇f_i(x_new) - ∇f_i(x_old)`.
pub fn gradient_tracking_round(
    states: &mut [NodeState],
    w: &MixingMatrix,
    cfg: &AlgorithmConfig,
    objs: &ObjectiveSet,
    counters: &mut Counters,
) -> Result<usize> {
    check_dims(states, w, objs)?;
    let eta = cfg.eta_gt;
    let stepped: Vec<Vector> = states
        .iter()
        .map(|s| {
            let mut x = s.x.clone();
            x.axpy(-eta, s.g.as_ref().expect("gradient tracking state"), 1.0);
            x
        })
        .collect();
    let (xs, comm_x) = cfg.mix(w, stepped)?;
    let trackers: Vec<Vector> = states.iter().map(|s| s.g.clone().expect("gradient tracking state")).collect();
    let (gs, comm_g) = cfg.mix(w, trackers)?;
    counters.comm += comm_x + comm_g;
    for (i, ((s, x), g)) in states.iter_mut().zip(xs).zip(gs).enumerate() {
        check_finite(&x)?;
        let fresh = objs.local(i).gradient(&x);
        counters.grads[i] += 1;
        let old = s.local_grad.replace(fresh.clone()).expect("gradient tracking state");
        s.g = Some(g + fresh - old);
        s.x = x;
    }
    Ok(1)
}

/// A running instance of one method on one problem.
#[derive(Clone, Debug)]
pub struct Simulation<'a> {
    objs: &'a ObjectiveSet,
    mixing: &'a MixingMatrix,
    cfg: AlgorithmConfig,
    states: Vec<NodeState>,
    schedule: AccSchedule,
    counters: Counters,
    round: usize,
    last_inner: usize,
}

impl<'a> Simulation<'a> {
    /// Initialises all nodes at `x0`. `init_comm` is the communication
    /// charged for the exact initial aggregation of `h` (usually the graph
    /// diameter); gradient tracking needs none and is never charged.
    pub fn new(
        objs: &'a ObjectiveSet,
        mixing: &'a MixingMatrix,
        cfg: AlgorithmConfig,
        x0: &Vector,
        init_comm: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        if objs.n() != mixing.n() {
            return Err(Error::DimensionMismatch { expected: mixing.n(), found: objs.n() });
        }
        let states = init_states(objs, x0, cfg.kind)?;
        let comm = if cfg.kind.is_proximal() { init_comm } else { 0 };
        let counters = Counters { comm, grads: vec![1; objs.n()] };
        let schedule = AccSchedule::new(cfg.lambda, objs.mu());
        Ok(Simulation { objs, mixing, cfg, states, schedule, counters, round: 0, last_inner: 0 })
    }

    pub fn step(&mut self) -> Result<()> {
        let r = self.round;
        let (states, w, cfg, objs, counters) =
            (&mut self.states, self.mixing, &self.cfg, self.objs, &mut self.counters);
        let inner = match cfg.kind {
            AlgorithmKind::GradientTracking => gradient_tracking_round(states, w, cfg, objs, counters),
            AlgorithmKind::Pdo => pdo_round(states, w, cfg, objs, r, counters),
            AlgorithmKind::Spdo => spdo_round(states, w, cfg, objs, r, counters),
            AlgorithmKind::AccSpdo => acc_spdo_round(states, w, &mut self.schedule, cfg, objs, r, counters),
        }
        .map_err(|e| e.at_round(r))?;
        self.last_inner = inner;
        self.round += 1;
        Ok(())
    }

    /// Communication the next round will consume.
    pub fn next_round_comm(&self) -> u64 {
        self.cfg.kind.exchanges_per_round(self.round) * self.cfg.gossip_steps as u64
    }

    pub fn telemetry(&self) -> RoundTelemetry {
        metrics::collect(&self.states, self.objs, &self.counters, self.round, self.cfg.kind, self.last_inner)
    }

    pub fn states(&self) -> &[NodeState] {
        &self.states
    }

    pub fn states_mut(&mut self) -> &mut [NodeState] {
        &mut self.states
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    pub fn schedule(&self) -> &AccSchedule {
        &self.schedule
    }

    pub fn config(&self) -> &AlgorithmConfig {
        &self.cfg
    }
}
