use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{LocalObjective, ObjectiveSet};
use crate::{Error, Result, Vector};

/// Default sampling scale `(2d)^(-1/2)` for [`estimate_delta`].
pub fn default_delta_scale(d: usize) -> f64 {
    (2.0 * d as f64).powf(-0.5)
}

/// Sampled lower bound on `δ`.
///
/// Draws `num_samples` points from `N(0, scale² I)` and returns the largest
/// ratio `sqrt((1/n) Σ_i ||∇h_i(x_k) - ∇h_i(x_l)||²) / ||x_k - x_l||` over
/// all pairs. Coincident pairs are skipped.
pub fn estimate_delta(objs: &ObjectiveSet, num_samples: usize, scale: f64, seed: u64) -> Result<f64> {
    if num_samples < 2 {
        return Err(Error::invalid("estimate_delta needs at least two samples"));
    }
    if !(scale > 0.0) {
        return Err(Error::invalid(format!("sampling scale must be positive, got {scale}")));
    }
    let (n, d) = (objs.n(), objs.d());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vector> = (0..num_samples)
        .map(|_| Vector::from_fn(d, |_, _| scale * crate::gauss(&mut rng)))
        .collect();
    // Row k holds [∇h_1(x_k); ...; ∇h_n(x_k)] stacked.
    let stacked: Vec<Vector> = points
        .iter()
        .map(|x| {
            let hs = objs.h_gradients(x);
            Vector::from_iterator(n * d, hs.iter().flat_map(|h| h.iter().copied()))
        })
        .collect();

    let mut best: Option<f64> = None;
    for k in 0..num_samples {
        for l in k + 1..num_samples {
            let dx = (&points[k] - &points[l]).norm_squared();
            if dx == 0.0 {
                continue;
            }
            let dh = (&stacked[k] - &stacked[l]).norm_squared() / n as f64;
            let ratio = (dh / dx).sqrt();
            best = Some(best.map_or(ratio, |b: f64| b.max(ratio)));
        }
    }
    best.ok_or_else(|| Error::invalid("all sampled points coincide"))
}

/// Tight `δ` for quadratic locals: `sqrt(λ_max((1/n) Σ (H̄ - H_i)ᵀ (H̄ - H_i)))`.
pub fn exact_delta_quadratic(objs: &ObjectiveSet) -> Result<f64> {
    let hessians: Vec<&DMatrix<f64>> = objs
        .locals()
        .iter()
        .map(|l| match l {
            LocalObjective::Quadratic(q) => Ok(&q.hessian),
            LocalObjective::Logistic(_) => Err(Error::invalid("exact delta needs quadratic locals")),
        })
        .collect::<Result<_>>()?;
    Ok(exact_delta_from_hessians(&hessians))
}

pub(crate) fn exact_delta_from_hessians(hessians: &[&DMatrix<f64>]) -> f64 {
    let n = hessians.len();
    let d = hessians[0].nrows();
    let mut mean = DMatrix::zeros(d, d);
    for h in hessians {
        mean += *h;
    }
    mean /= n as f64;
    let mut s = DMatrix::zeros(d, d);
    for h in hessians {
        let dev = &mean - *h;
        s += dev.transpose() * &dev;
    }
    s /= n as f64;
    let s = (&s + s.transpose()) * 0.5;
    let top = SymmetricEigen::new(s).eigenvalues.iter().copied().fold(0.0f64, f64::max);
    top.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_quadratic_ensemble, QuadraticLocal};

    fn scalar_pair(h1: f64, h2: f64) -> ObjectiveSet {
        let q = |h: f64, b: f64| {
            LocalObjective::Quadratic(
                QuadraticLocal::new(DMatrix::from_element(1, 1, h), Vector::from_vec(vec![b])).unwrap(),
            )
        };
        ObjectiveSet::new(vec![q(h1, 0.3), q(h2, -1.0)], h1.min(h2), h1.max(h2), 0.0).unwrap()
    }

    #[test]
    fn two_scalar_nodes_have_unit_delta() {
        // H̄ = 1, deviations ±1: sqrt(½(1 + 1)) = 1.
        let objs = scalar_pair(2.0, 0.0);
        assert!((exact_delta_quadratic(&objs).unwrap() - 1.0).abs() < 1e-15);
        let est = estimate_delta(&objs, 10, 1.0, 4).unwrap();
        assert!((est - 1.0).abs() < 1e-12, "{est}");
    }

    #[test]
    fn identical_locals_have_zero_delta() {
        let objs = make_quadratic_ensemble(4, 5, 0.5, 3.0, 0.0, 1).unwrap();
        assert!(exact_delta_quadratic(&objs).unwrap() < 1e-12);
        assert!(estimate_delta(&objs, 20, 0.3, 2).unwrap() < 1e-12);
    }

    #[test]
    fn estimate_is_a_lower_bound() {
        for seed in 0..5 {
            let objs = make_quadratic_ensemble(6, 8, 0.2, 5.0, 1.3, seed).unwrap();
            let exact = exact_delta_quadratic(&objs).unwrap();
            let est = estimate_delta(&objs, 60, default_delta_scale(8), seed + 100).unwrap();
            assert!(est <= exact * (1.0 + 1e-9), "{est} > {exact}");
            assert!(est > 0.5 * exact);
        }
    }

    #[test]
    fn rejects_degenerate_sampling() {
        let objs = scalar_pair(2.0, 0.0);
        assert!(estimate_delta(&objs, 1, 1.0, 0).is_err());
        assert!(estimate_delta(&objs, 5, 0.0, 0).is_err());
    }
}
