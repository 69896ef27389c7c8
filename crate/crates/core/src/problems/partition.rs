use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;

use crate::{Error, Result};

const RETRIES: usize = 100;

/// Draws `ln G` for `G ~ Gamma(alpha, 1)`. For `alpha < 1` this uses
/// `G = G' · U^(1/alpha)` with `G' ~ Gamma(alpha + 1, 1)` so tiny shapes do
/// not underflow to zero.
fn log_gamma_sample<R: Rng>(alpha: f64, rng: &mut R) -> f64 {
    if alpha >= 1.0 {
        let g: f64 = Gamma::new(alpha, 1.0).expect("valid shape").sample(rng);
        g.ln()
    } else {
        let g: f64 = Gamma::new(alpha + 1.0, 1.0).expect("valid shape").sample(rng);
        let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
        g.ln() + u.ln() / alpha
    }
}

/// Symmetric Dirichlet(alpha · 1_n) draw, normalised in log space.
fn dirichlet_weights<R: Rng>(alpha: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let logs: Vec<f64> = (0..n).map(|_| log_gamma_sample(alpha, rng)).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Splits sample indices across `n` nodes with label skew controlled by
/// `alpha`: for every class, node shares are drawn from a symmetric
/// Dirichlet and that class's samples are assigned multinomially. Small
/// `alpha` concentrates each class on few nodes; large `alpha` approaches
/// an IID split.
///
/// Draws are repeated (up to 100 times) until every node owns at least one
/// sample. Returned index lists are ascending.
pub fn dirichlet_partition(labels: &[usize], n: usize, alpha: f64, seed: u64) -> Result<Vec<Vec<usize>>> {
    if n == 0 {
        return Err(Error::invalid("need at least one node"));
    }
    if labels.len() < n {
        return Err(Error::invalid(format!("{} samples cannot cover {n} nodes", labels.len())));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("alpha must be positive and finite, got {alpha}")));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (idx, &c) in labels.iter().enumerate() {
        by_class.entry(c).or_default().push(idx);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RETRIES {
        let mut parts = vec![Vec::new(); n];
        for members in by_class.values() {
            let p = dirichlet_weights(alpha, n, &mut rng);
            let pick = WeightedIndex::new(&p).map_err(|e| Error::invalid(format!("bad class weights: {e}")))?;
            for &idx in members {
                parts[pick.sample(&mut rng)].push(idx);
            }
        }
        if parts.iter().all(|p| !p.is_empty()) {
            for p in &mut parts {
                p.sort_unstable();
            }
            return Ok(parts);
        }
    }
    Err(Error::RetriesExhausted {
        attempts: RETRIES,
        what: format!("Dirichlet partition with every one of {n} nodes nonempty (alpha = {alpha})"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(classes: usize, per_class: usize) -> Vec<usize> {
        (0..classes * per_class).map(|i| i % classes).collect()
    }

    #[test]
    fn single_node_takes_everything() {
        let l = labels(3, 5);
        let parts = dirichlet_partition(&l, 1, 0.5, 1).unwrap();
        assert_eq!(parts, vec![(0..15).collect::<Vec<_>>()]);
    }

    #[test]
    fn parts_are_a_partition() {
        let l = labels(10, 40);
        for alpha in [0.05, 1.0, 100.0] {
            let parts = dirichlet_partition(&l, 7, alpha, 3).unwrap();
            let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..l.len()).collect::<Vec<_>>());
            assert!(parts.iter().all(|p| !p.is_empty()));
        }
    }

    #[test]
    fn large_alpha_approaches_global_proportions() {
        let classes = 10;
        let l = labels(classes, 200);
        let n = 5;
        let mut tv_sum = 0.0;
        let seeds = 20;
        for seed in 0..seeds {
            let parts = dirichlet_partition(&l, n, 1000.0, seed).unwrap();
            for p in &parts {
                let mut counts = vec![0.0; classes];
                for &i in p {
                    counts[l[i]] += 1.0;
                }
                let tv: f64 = counts.iter().map(|c| (c / p.len() as f64 - 0.1).abs()).sum::<f64>() / 2.0;
                tv_sum += tv;
            }
        }
        let avg = tv_sum / (seeds as f64 * n as f64);
        assert!(avg < 0.1, "average total variation {avg}");
    }

    #[test]
    fn tiny_alpha_does_not_produce_nan_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let w = dirichlet_weights(1e-3, 25, &mut rng);
            assert!(w.iter().all(|x| x.is_finite() && *x >= 0.0));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn infeasible_nonempty_constraint() {
        // Two classes cannot populate 25 nodes when each class lands on one node.
        let l = labels(2, 20);
        let err = dirichlet_partition(&l, 25, 1e-4, 0).unwrap_err();
        assert!(matches!(err, Error::RetriesExhausted { .. }));
    }

    #[test]
    fn argument_checks() {
        assert!(dirichlet_partition(&[0, 1], 3, 1.0, 0).is_err());
        assert!(dirichlet_partition(&[0, 1], 2, 0.0, 0).is_err());
        assert!(dirichlet_partition(&[0, 1], 0, 1.0, 0).is_err());
    }
}
