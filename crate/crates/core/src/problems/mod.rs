//! Local objectives `f_i`, their constants `(μ, L, δ)`, and the data
//! plumbing used to build them.
//!
//! `f(x) = (1/n) Σ f_i(x)` is the global objective. `h_i = f - f_i` is the
//! part of `f` node `i` cannot see; the similarity constant `δ` is the
//! smallest number with
//! `(1/n) Σ ||∇h_i(x) - ∇h_i(y)||² ≤ δ² ||x - y||²` for all `x, y`.

mod dataset;
mod delta;
mod generate;
mod partition;

pub use dataset::{make_classification, Dataset};
pub use delta::{default_delta_scale, estimate_delta, exact_delta_quadratic};
pub use generate::{make_quadratic_ensemble, QuadraticEnsemble, Spectrum};
pub use partition::dirichlet_partition;

use nalgebra::DMatrix;

use crate::{Error, Result, Vector};

/// `f_i(x) = ½ xᵀ H x - bᵀ x`.
#[derive(Clone, Debug)]
pub struct QuadraticLocal {
    pub hessian: DMatrix<f64>,
    pub linear: Vector,
}

impl QuadraticLocal {
    pub fn new(hessian: DMatrix<f64>, linear: Vector) -> Result<Self> {
        let d = linear.len();
        if hessian.nrows() != d || hessian.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: hessian.nrows() });
        }
        if hessian != hessian.transpose() {
            return Err(Error::invalid("quadratic Hessian must be symmetric"));
        }
        Ok(QuadraticLocal { hessian, linear })
    }

    pub fn value(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) - self.linear.dot(x)
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        &self.hessian * x - &self.linear
    }
}

/// Mean logistic loss over `m_i` rows plus `(reg/2)||x||²`. Labels are 0/1.
#[derive(Clone, Debug)]
pub struct LogisticLocal {
    features: DMatrix<f64>,
    labels: Vector,
    reg: f64,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticLocal {
    pub fn new(features: DMatrix<f64>, labels: Vec<f64>, reg: f64) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::invalid("logistic local needs at least one sample"));
        }
        if labels.len() != features.nrows() {
            return Err(Error::DimensionMismatch { expected: features.nrows(), found: labels.len() });
        }
        if labels.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::invalid("logistic labels must be 0 or 1"));
        }
        if !(reg >= 0.0) {
            return Err(Error::invalid(format!("regularisation must be nonnegative, got {reg}")));
        }
        Ok(LogisticLocal { features, labels: Vector::from_vec(labels), reg })
    }

    pub fn reg(&self) -> f64 {
        self.reg
    }

    pub fn samples(&self) -> usize {
        self.features.nrows()
    }

    /// `reg + max_k ||a_k||² / 4`, an upper bound on the Hessian norm.
    pub fn smoothness_bound(&self) -> f64 {
        let max_sq = self.features.row_iter().map(|r| r.norm_squared()).fold(0.0, f64::max);
        self.reg + max_sq / 4.0
    }

    pub fn value(&self, x: &Vector) -> f64 {
        let z = &self.features * x;
        let loss: f64 = z.iter().zip(self.labels.iter()).map(|(&z, &y)| softplus(z) - y * z).sum();
        loss / self.samples() as f64 + 0.5 * self.reg * x.norm_squared()
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        let z = &self.features * x;
        let resid = Vector::from_iterator(z.len(), z.iter().zip(self.labels.iter()).map(|(&z, &y)| sigmoid(z) - y));
        let mut g = self.features.tr_mul(&resid) / self.samples() as f64;
        g.axpy(self.reg, x, 1.0);
        g
    }
}

/// A node's private objective.
#[derive(Clone, Debug)]
pub enum LocalObjective {
    Quadratic(QuadraticLocal),
    Logistic(LogisticLocal),
}

impl LocalObjective {
    pub fn dim(&self) -> usize {
        match self {
            LocalObjective::Quadratic(q) => q.linear.len(),
            LocalObjective::Logistic(l) => l.features.ncols(),
        }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        match self {
            LocalObjective::Quadratic(q) => q.value(x),
            LocalObjective::Logistic(l) => l.value(x),
        }
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        match self {
            LocalObjective::Quadratic(q) => q.gradient(x),
            LocalObjective::Logistic(l) => l.gradient(x),
        }
    }
}

/// Known minimiser of the global objective.
#[derive(Clone, Debug)]
pub struct Optimum {
    pub x: Vector,
    pub value: f64,
}

/// The `n` local objectives together with their constants.
#[derive(Clone, Debug)]
pub struct ObjectiveSet {
    locals: Vec<LocalObjective>,
    mu: f64,
    big_l: f64,
    delta: f64,
    optimum: Option<Optimum>,
}

impl ObjectiveSet {
    pub fn new(locals: Vec<LocalObjective>, mu: f64, big_l: f64, delta: f64) -> Result<Self> {
        let Some(first) = locals.first() else {
            return Err(Error::invalid("objective set needs at least one node"));
        };
        let d = first.dim();
        if let Some(bad) = locals.iter().find(|l| l.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: bad.dim() });
        }
        if !(big_l > 0.0) || !(mu >= 0.0) || mu > big_l {
            return Err(Error::invalid(format!("need 0 <= mu <= L and L > 0, got mu = {mu}, L = {big_l}")));
        }
        let set = ObjectiveSet { locals, mu, big_l, delta: 0.0, optimum: None };
        set.with_delta(delta)
    }

    /// Replaces `δ`; it must satisfy `0 <= δ <= L`.
    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta >= 0.0) || delta > self.big_l * (1.0 + 1e-12) {
            return Err(Error::invalid(format!("need 0 <= delta <= L, got delta = {delta}, L = {}", self.big_l)));
        }
        self.delta = delta;
        Ok(self)
    }

    /// Attaches a known minimiser; its global gradient must vanish.
    pub fn with_optimum(mut self, x: Vector) -> Result<Self> {
        let g = self.gradient(&x);
        if g.norm() > 1e-8 {
            return Err(Error::invalid(format!("claimed optimum has gradient norm {:e}", g.norm())));
        }
        let value = self.value(&x);
        self.optimum = Some(Optimum { x, value });
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.locals.len()
    }

    pub fn d(&self) -> usize {
        self.locals[0].dim()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn big_l(&self) -> f64 {
        self.big_l
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn optimum(&self) -> Option<&Optimum> {
        self.optimum.as_ref()
    }

    pub fn locals(&self) -> &[LocalObjective] {
        &self.locals
    }

    pub fn local(&self, i: usize) -> &LocalObjective {
        &self.locals[i]
    }

    pub fn value(&self, x: &Vector) -> f64 {
        self.locals.iter().map(|l| l.value(x)).sum::<f64>() / self.n() as f64
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        let mut g = Vector::zeros(self.d());
        for l in &self.locals {
            g += l.gradient(x);
        }
        g / self.n() as f64
    }

    /// `∇h_i(x) = ∇f(x) - ∇f_i(x)` for every node.
    pub fn h_gradients(&self, x: &Vector) -> Vec<Vector> {
        let locals: Vec<Vector> = self.locals.iter().map(|l| l.gradient(x)).collect();
        let global = crate::mean_of(&locals);
        locals.into_iter().map(|g| &global - g).collect()
    }

    pub fn is_quadratic(&self) -> bool {
        self.locals.iter().all(|l| matches!(l, LocalObjective::Quadratic(_)))
    }
}

/// Regularised logistic regression on a Dirichlet split of `data`.
///
/// Node `i` gets the rows chosen by [`dirichlet_partition`] with binary
/// targets `label % 2`. `μ` is the regulariser, `L` the largest per-node
/// smoothness bound, and `δ` is left at zero for the caller to fill in.
pub fn partitioned_logistic(data: &Dataset, n: usize, alpha: f64, reg: f64, seed: u64) -> Result<ObjectiveSet> {
    let parts = dirichlet_partition(&data.labels, n, alpha, seed)?;
    let locals: Vec<LogisticLocal> = parts
        .iter()
        .map(|idx| LogisticLocal::new(data.rows(idx), data.binary_targets(idx), reg))
        .collect::<Result<_>>()?;
    let big_l = locals.iter().map(LogisticLocal::smoothness_bound).fold(0.0, f64::max);
    ObjectiveSet::new(locals.into_iter().map(LocalObjective::Logistic).collect(), reg, big_l, 0.0)
}
