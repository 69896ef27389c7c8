//! Decentralized optimization with proximal local updates.
//!
//! `decopt` simulates `n` nodes that cooperatively minimize
//! `f(x) = (1/n) Σ f_i(x)` while talking only to their graph neighbours.
//! It provides
//!
//! * communication graphs and Metropolis–Hastings mixing matrices ([`topology`]),
//! * plain and Chebyshev-accelerated gossip averaging ([`gossip`]),
//! * synthetic and data-driven local objectives together with estimates of
//!   the second-order similarity constant `δ` ([`problems`]),
//! * inexact solvers for the per-node proximal subproblems ([`subsolvers`]),
//! * the round-level methods: gradient tracking, PDO, SPDO and
//!   accelerated SPDO ([`algorithms`]),
//! * telemetry ([`metrics`]) and an experiment runner with CSV / SVG output
//!   ([`harness`]).
//!
//! The `book/` directory next to the workspace root walks through the
//! concepts; every Rust snippet there is compiled and run as a doctest.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod error;
pub mod gossip;
pub mod harness;
pub mod metrics;
pub mod problems;
pub mod subsolvers;
pub mod topology;

pub use error::{Error, Result};

/// Column vector used for every parameter, gradient and tracking variable.
pub type Vector = nalgebra::DVector<f64>;

pub(crate) fn mean_of(values: &[Vector]) -> Vector {
    let d = values.first().map_or(0, |v| v.len());
    let mut acc = Vector::zeros(d);
    for v in values {
        acc += v;
    }
    acc / values.len().max(1) as f64
}

pub(crate) fn check_finite(x: &Vector) -> Result<()> {
    let norm = x.norm();
    if !norm.is_finite() || norm > 1e12 {
        return Err(Error::Divergence { round: None, norm });
    }
    Ok(())
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/topology.md")]
    mod topology {}
    #[doc = include_str!("../../../book/src/gossip.md")]
    mod gossip {}
    #[doc = include_str!("../../../book/src/similarity.md")]
    mod similarity {}
    #[doc = include_str!("../../../book/src/subproblems.md")]
    mod subproblems {}
    #[doc = include_str!("../../../book/src/algorithms.md")]
    mod algorithms {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}

pub(crate) fn gauss<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, rng)
}
