//! Gossip averaging: repeated multiplication by the mixing matrix, plain or
//! with Chebyshev-style two-term momentum.
//!
//! Every inner step is one exchange with the neighbours and is charged one
//! unit of communication on the batch.

use crate::topology::MixingMatrix;
use crate::{Error, Result, Vector};

/// One `d`-vector per node plus the communication spent on it so far.
#[derive(Clone, Debug, PartialEq)]
pub struct GossipBatch {
    pub values: Vec<Vector>,
    pub comm_steps: u64,
}

impl GossipBatch {
    pub fn new(values: Vec<Vector>) -> Self {
        GossipBatch { values, comm_steps: 0 }
    }

    pub fn mean(&self) -> Vector {
        crate::mean_of(&self.values)
    }

    /// `Σ_i ||a_i - ā||²`.
    pub fn disagreement(&self) -> f64 {
        disagreement(&self.values)
    }

    fn check(&self, w: &MixingMatrix) -> Result<()> {
        if self.values.len() != w.n() {
            return Err(Error::DimensionMismatch { expected: w.n(), found: self.values.len() });
        }
        let d = self.values.first().map_or(0, |v| v.len());
        match self.values.iter().find(|v| v.len() != d) {
            Some(v) => Err(Error::DimensionMismatch { expected: d, found: v.len() }),
            None => Ok(()),
        }
    }
}

/// `Σ_i ||a_i - ā||²`.
pub fn disagreement(values: &[Vector]) -> f64 {
    let mean = crate::mean_of(values);
    values.iter().map(|v| (v - &mean).norm_squared()).sum()
}

/// Applies `W` to the batch `m` times.
pub fn multi_gossip(batch: GossipBatch, w: &MixingMatrix, m: usize) -> Result<GossipBatch> {
    batch.check(w)?;
    let GossipBatch { mut values, comm_steps } = batch;
    for _ in 0..m {
        values = w.apply(&values);
    }
    Ok(GossipBatch { values, comm_steps: comm_steps + m as u64 })
}

/// Runs `a⁽ᵐ⁺¹⁾ = (1 + γ) W a⁽ᵐ⁾ - γ a⁽ᵐ⁻¹⁾` for `m` steps, starting from
/// `a⁽⁰⁾ = a⁽⁻¹⁾ = input`.
pub fn fast_gossip(batch: GossipBatch, w: &MixingMatrix, m: usize, gamma: f64) -> Result<GossipBatch> {
    batch.check(w)?;
    if !(gamma >= 0.0) {
        return Err(Error::invalid(format!("gamma must be nonnegative, got {gamma}")));
    }
    let GossipBatch { values, comm_steps } = batch;
    let mut prev = values.clone();
    let mut cur = values;
    for _ in 0..m {
        let mixed = w.apply(&cur);
        let next: Vec<Vector> = mixed
            .into_iter()
            .zip(&prev)
            .map(|(mut wa, old)| {
                wa *= 1.0 + gamma;
                wa.axpy(-gamma, old, 1.0);
                wa
            })
            .collect();
        prev = std::mem::replace(&mut cur, next);
    }
    Ok(GossipBatch { values: cur, comm_steps: comm_steps + m as u64 })
}

/// Momentum for [`fast_gossip`]: `(1 - √(1 - ρ²)) / (1 + √(1 + ρ²))`.
///
/// This is the coefficient the convergence guarantees for accelerated SPDO
/// are stated with. It is smaller than the Chebyshev-optimal value
/// ([`optimal_chebyshev_gamma`]) and on slowly mixing graphs its contraction
/// over many steps is correspondingly weaker.
pub fn chebyshev_gamma(rho: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok((1.0 - (1.0 - rho * rho).sqrt()) / (1.0 + (1.0 + rho * rho).sqrt()))
}

/// Classical Chebyshev momentum `(1 - √(1 - ρ²)) / (1 + √(1 - ρ²))`.
pub fn optimal_chebyshev_gamma(rho: f64) -> Result<f64> {
    check_rho(rho)?;
    let s = (1.0 - rho * rho).sqrt();
    Ok((1.0 - s) / (1.0 + s))
}

fn check_rho(rho: f64) -> Result<()> {
    if (0.0..1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::invalid(format!("rho must lie in [0, 1), got {rho}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_graph, metropolis_weights, TopologyKind};

    fn scalars(xs: &[f64]) -> Vec<Vector> {
        xs.iter().map(|&x| Vector::from_vec(vec![x])).collect()
    }

    fn mixing(kind: TopologyKind, n: usize) -> MixingMatrix {
        metropolis_weights(&build_graph(kind, n, 0).unwrap())
    }

    #[test]
    fn consensus_is_a_fixed_point() {
        let w = mixing(TopologyKind::Ring, 6);
        let v = Vector::from_vec(vec![0.25, -3.0, 7.5]);
        let batch = GossipBatch::new(vec![v.clone(); 6]);
        let out = multi_gossip(batch.clone(), &w, 7).unwrap();
        assert!(out.values.iter().all(|x| (x - &v).amax() < 1e-15));
        assert_eq!(out.comm_steps, 7);
        let out = fast_gossip(batch, &w, 7, 0.3).unwrap();
        assert!(out.values.iter().all(|x| (x - &v).amax() < 1e-14));
    }

    #[test]
    fn complete_graph_averages_in_one_step() {
        let w = mixing(TopologyKind::Complete, 3);
        let out = multi_gossip(GossipBatch::new(scalars(&[0.0, 3.0, 6.0])), &w, 1).unwrap();
        for v in &out.values {
            assert!((v[0] - 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_steps_is_identity() {
        let w = mixing(TopologyKind::Ring, 4);
        let batch = GossipBatch::new(scalars(&[1.0, 2.0, 3.0, 4.0]));
        assert_eq!(multi_gossip(batch.clone(), &w, 0).unwrap(), batch);
        assert_eq!(fast_gossip(batch.clone(), &w, 0, 0.2).unwrap(), batch);
    }

    #[test]
    fn zero_gamma_matches_plain_gossip() {
        let w = mixing(TopologyKind::Ring, 7);
        let batch = GossipBatch::new(scalars(&[1.0, -2.0, 0.5, 9.0, 3.0, 0.0, -4.0]));
        let a = multi_gossip(batch.clone(), &w, 5).unwrap();
        let b = fast_gossip(batch, &w, 5, 0.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fast_gossip_on_complete_graph_with_recommended_gamma() {
        let w = mixing(TopologyKind::Complete, 5);
        let gamma = chebyshev_gamma(w.rho()).unwrap();
        assert!(gamma.abs() < 1e-12);
        let out = fast_gossip(GossipBatch::new(scalars(&[5.0, 0.0, 0.0, 0.0, 0.0])), &w, 1, gamma).unwrap();
        assert!(out.values.iter().all(|v| (v[0] - 1.0).abs() < 1e-12));
    }

    #[test]
    fn gamma_values() {
        assert_eq!(chebyshev_gamma(0.0).unwrap(), 0.0);
        let third = chebyshev_gamma(1.0 / 3.0).unwrap();
        let expected = (1.0 - (8.0f64 / 9.0).sqrt()) / (1.0 + (10.0f64 / 9.0).sqrt());
        assert_eq!(third, expected);
        assert!((third - 0.02784).abs() < 5e-5);
        let near_one = chebyshev_gamma(1.0 - 1e-15).unwrap();
        assert!((near_one - 1.0 / (1.0 + 2f64.sqrt())).abs() < 1e-6);
        assert!(chebyshev_gamma(1.0).is_err());
        assert!(chebyshev_gamma(-0.1).is_err());
        assert_eq!(optimal_chebyshev_gamma(0.0).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let w = mixing(TopologyKind::Ring, 4);
        assert!(multi_gossip(GossipBatch::new(scalars(&[1.0, 2.0])), &w, 1).is_err());
        let mut ragged = scalars(&[1.0, 2.0, 3.0, 4.0]);
        ragged[1] = Vector::zeros(2);
        assert!(fast_gossip(GossipBatch::new(ragged), &w, 1, 0.1).is_err());
    }
}
