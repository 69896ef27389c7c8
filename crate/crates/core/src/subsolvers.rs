//! Inexact solvers for the per-node proximal subproblem
//!
//! `F(x) = f_i(x) + ⟨h, x⟩ + (λ/2)||x - c||²`.
//!
//! Solvers always start at the centre `c`, so the displacement measured by a
//! [`StopRule`] is `x - c`.

use crate::problems::LocalObjective;
use crate::{check_finite, Error, Result, Vector};

/// One node's proximal subproblem.
#[derive(Clone, Copy, Debug)]
pub struct ProxSubproblem<'a> {
    pub base: &'a LocalObjective,
    pub linear: &'a Vector,
    pub center: &'a Vector,
    pub lambda: f64,
    /// Strong convexity of `base`.
    pub mu: f64,
    /// Smoothness of `base`.
    pub big_l: f64,
}

impl ProxSubproblem<'_> {
    pub fn value(&self, x: &Vector) -> f64 {
        self.base.value(x) + self.linear.dot(x) + 0.5 * self.lambda * (x - self.center).norm_squared()
    }

    /// Returns `(∇F(x), ∇f_i(x))`.
    pub fn gradient(&self, x: &Vector) -> (Vector, Vector) {
        let base = self.base.gradient(x);
        let mut g = &base + self.linear;
        g.axpy(self.lambda, &(x - self.center), 1.0);
        (g, base)
    }

    pub fn strong_convexity(&self) -> f64 {
        self.mu + self.lambda
    }

    pub fn smoothness(&self) -> f64 {
        self.big_l + self.lambda
    }
}

/// Accuracy criterion for an inner solve, in per-node form
/// `||∇F(x)||² ≤ c · ||x - anchor||²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopRule {
    /// `c = δ(4δ + μ) / (4(r+1)(r+2))`; tightens every round.
    InexactPdo { round: usize, delta: f64, mu: f64 },
    /// `c = λ²/10`.
    Spdo { lambda: f64 },
    /// `c = λ²/352`.
    AccSpdo { lambda: f64 },
    /// Practical PDO rule, `c = λ(λ + μ) / ((r+1)(r+2))`.
    ExperimentPdo { round: usize, lambda: f64, mu: f64 },
    /// Practical SPDO rule, `c = λ²`.
    ExperimentSpdo { lambda: f64 },
    /// Practical accelerated rule, `c = λ²`.
    ExperimentAcc { lambda: f64 },
    /// `||∇F(x)|| ≤ tol`.
    Exact { tol: f64 },
    /// Run a fixed number of steps; only an exactly stationary point stops early.
    MaxIters(usize),
}

impl StopRule {
    /// The constant `c` of `||∇F||² ≤ c ||x - anchor||²`, for the
    /// displacement-based rules.
    pub fn coefficient(&self) -> Option<f64> {
        match *self {
            StopRule::InexactPdo { round, delta, mu } => {
                Some(delta * (4.0 * delta + mu) / (4.0 * (round as f64 + 1.0) * (round as f64 + 2.0)))
            }
            StopRule::Spdo { lambda } => Some(lambda * lambda / 10.0),
            StopRule::AccSpdo { lambda } => Some(lambda * lambda / 352.0),
            StopRule::ExperimentPdo { round, lambda, mu } => {
                Some(lambda * (lambda + mu) / ((round as f64 + 1.0) * (round as f64 + 2.0)))
            }
            StopRule::ExperimentSpdo { lambda } | StopRule::ExperimentAcc { lambda } => Some(lambda * lambda),
            StopRule::Exact { .. } | StopRule::MaxIters(_) => None,
        }
    }
}

pub fn check_stop(rule: &StopRule, grad: &Vector, displacement: &Vector) -> bool {
    let g2 = grad.norm_squared();
    if g2 == 0.0 {
        return true;
    }
    match rule {
        StopRule::Exact { tol } => g2.sqrt() <= *tol,
        StopRule::MaxIters(_) => false,
        rule => g2 <= rule.coefficient().unwrap_or(0.0) * displacement.norm_squared(),
    }
}

/// Result of an inner solve.
#[derive(Clone, Debug)]
pub struct InnerSolution {
    pub x: Vector,
    /// Gradient-oracle calls, including the final acceptance check.
    pub grad_calls: usize,
    /// `∇f_i(x)` when it was evaluated at the returned point.
    pub base_grad: Option<Vector>,
    /// Whether the rule accepted `x` (false when the iteration cap hit first).
    pub satisfied: bool,
}

fn max_steps(rule: &StopRule, max_iters: usize) -> usize {
    match rule {
        StopRule::MaxIters(t) => *t,
        _ => max_iters,
    }
}

/// Gradient descent with constant step `eta`, started at the subproblem centre.
pub fn solve_gd(sub: &ProxSubproblem<'_>, rule: &StopRule, eta: f64, max_iters: usize) -> Result<InnerSolution> {
    if !(eta > 0.0) {
        return Err(Error::invalid(format!("step size must be positive, got {eta}")));
    }
    let steps = max_steps(rule, max_iters);
    let mut x = sub.center.clone();
    if let StopRule::MaxIters(_) = rule {
        for _ in 0..steps {
            let (g, _) = sub.gradient(&x);
            x.axpy(-eta, &g, 1.0);
            check_finite(&x)?;
        }
        return Ok(InnerSolution { x, grad_calls: steps, base_grad: None, satisfied: true });
    }
    let mut calls = 0;
    for step in 0..=steps {
        let (g, base) = sub.gradient(&x);
        calls += 1;
        let ok = check_stop(rule, &g, &(&x - sub.center));
        if ok || step == steps {
            return Ok(InnerSolution { x, grad_calls: calls, base_grad: Some(base), satisfied: ok });
        }
        x.axpy(-eta, &g, 1.0);
        check_finite(&x)?;
    }
    unreachable!("loop returns on its last iteration")
}

/// Constant-momentum Nesterov method for the `(μ+λ)`-strongly convex,
/// `(L+λ)`-smooth subproblem, started at the centre. Step `1/(L+λ)`,
/// momentum `(√κ - 1)/(√κ + 1)` with `κ = (L+λ)/(μ+λ)`. The stopping rule is
/// tested at the extrapolated point, where the gradient is evaluated anyway.
pub fn solve_agd(sub: &ProxSubproblem<'_>, rule: &StopRule, max_iters: usize) -> Result<InnerSolution> {
    let smooth = sub.smoothness();
    let strong = sub.strong_convexity();
    if !(strong > 0.0) {
        return Err(Error::invalid("AGD needs a strongly convex subproblem (lambda > 0)"));
    }
    let sqrt_kappa = (smooth / strong).sqrt();
    let beta = (sqrt_kappa - 1.0) / (sqrt_kappa + 1.0);
    let step = 1.0 / smooth;
    let steps = max_steps(rule, max_iters);
    let fixed = matches!(rule, StopRule::MaxIters(_));

    let mut x = sub.center.clone();
    let mut x_prev = x.clone();
    let mut calls = 0;
    for k in 0..=steps {
        if fixed && k == steps {
            return Ok(InnerSolution { x, grad_calls: calls, base_grad: None, satisfied: true });
        }
        let y = &x + (&x - &x_prev) * beta;
        let (g, base) = sub.gradient(&y);
        calls += 1;
        let ok = !fixed && check_stop(rule, &g, &(&y - sub.center));
        if ok || (!fixed && k == steps) {
            return Ok(InnerSolution { x: y, grad_calls: calls, base_grad: Some(base), satisfied: ok });
        }
        x_prev = std::mem::replace(&mut x, y);
        x.axpy(-step, &g, 1.0);
        check_finite(&x)?;
    }
    unreachable!("loop returns on its last iteration")
}
