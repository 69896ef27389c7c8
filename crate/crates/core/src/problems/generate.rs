use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::delta::exact_delta_from_hessians;
use super::{LocalObjective, ObjectiveSet, QuadraticLocal};
use crate::{Error, Result, Vector};

/// Eigenvalue layout of the mean Hessian `H̄`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Spectrum {
    /// Evenly spaced over `[mu, L]`, both ends included (for `d >= 3`).
    Uniform,
    /// Geometrically spaced over `[floor, L]` with
    /// `floor = max(mu, min_ratio · L)`. With `mu = 0` and a tiny ratio this
    /// behaves like an ill-posed least-squares problem.
    LogSpaced { min_ratio: f64 },
}

/// Synthetic quadratic family with exactly controlled similarity.
///
/// `H_i = Q diag(λ + t ∘ z_i) Qᵀ` where `Q` is a random rotation, `λ` is
/// the spectrum of `H̄` and `z_i` are balanced ±1 sign patterns (mean zero
/// over nodes, unit mean square). The per-direction amplitudes `t_k` are the
/// target `δ`, clipped so every eigenvalue stays inside `[mu, L]`; the
/// resulting `δ` is `max_k t_k`.
#[derive(Clone, Debug)]
pub struct QuadraticEnsemble {
    pub n: usize,
    pub d: usize,
    pub mu: f64,
    pub big_l: f64,
    pub target_delta: f64,
    pub spectrum: Spectrum,
    /// Standard deviation of the per-node shifts of the local minimisers.
    pub offset_scale: f64,
    pub seed: u64,
}

/// Uniform-spectrum ensemble; see [`QuadraticEnsemble`].
pub fn make_quadratic_ensemble(
    n: usize,
    d: usize,
    mu: f64,
    big_l: f64,
    target_delta: f64,
    seed: u64,
) -> Result<ObjectiveSet> {
    QuadraticEnsemble::new(n, d, mu, big_l, target_delta, seed).build()
}

impl QuadraticEnsemble {
    pub fn new(n: usize, d: usize, mu: f64, big_l: f64, target_delta: f64, seed: u64) -> Self {
        QuadraticEnsemble { n, d, mu, big_l, target_delta, spectrum: Spectrum::Uniform, offset_scale: 1.0, seed }
    }

    pub fn spectrum(mut self, spectrum: Spectrum) -> Self {
        self.spectrum = spectrum;
        self
    }

    pub fn offset_scale(mut self, scale: f64) -> Self {
        self.offset_scale = scale;
        self
    }

    fn eigenvalues(&self) -> Vec<f64> {
        let (mu, l, d) = (self.mu, self.big_l, self.d);
        match self.spectrum {
            Spectrum::Uniform => match d {
                1 => vec![0.5 * (mu + l)],
                2 => vec![mu, 0.5 * (mu + l)],
                _ => (0..d).map(|k| mu + (l - mu) * k as f64 / (d - 1) as f64).collect(),
            },
            Spectrum::LogSpaced { min_ratio } => {
                let floor = mu.max(min_ratio * l);
                if d == 1 {
                    return vec![l];
                }
                (0..d).map(|k| floor * (l / floor).powf(k as f64 / (d - 1) as f64)).collect()
            }
        }
    }

    pub fn build(&self) -> Result<ObjectiveSet> {
        let QuadraticEnsemble { n, d, mu, big_l, target_delta, .. } = *self;
        if n == 0 || d == 0 {
            return Err(Error::invalid("ensemble needs n, d >= 1"));
        }
        if !(big_l > 0.0) || !(mu >= 0.0) || mu > big_l {
            return Err(Error::invalid(format!("need 0 <= mu <= L and L > 0, got mu = {mu}, L = {big_l}")));
        }
        if !(target_delta >= 0.0) {
            return Err(Error::invalid(format!("target delta must be nonnegative, got {target_delta}")));
        }
        if let Spectrum::LogSpaced { min_ratio } = self.spectrum {
            if !(min_ratio > 0.0 && min_ratio <= 1.0) {
                return Err(Error::invalid(format!("min_ratio must lie in (0, 1], got {min_ratio}")));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);

        let gauss = DMatrix::from_fn(d, d, |_, _| crate::gauss(&mut rng));
        let rotation = gauss.qr().q();

        // Balanced sign pattern; odd n leaves one zero and rescales.
        let half = n / 2;
        let amp = if n % 2 == 1 && n > 1 { (n as f64 / (n - 1) as f64).sqrt() } else { 1.0 };
        let base: Vec<f64> = (0..n)
            .map(|i| if i < half { amp } else if i < 2 * half { -amp } else { 0.0 })
            .collect();
        let patterns: Vec<Vec<f64>> = (0..d)
            .map(|_| {
                let mut p = base.clone();
                p.shuffle(&mut rng);
                p
            })
            .collect();

        let lambdas = self.eigenvalues();
        let reach = if n > 1 { amp } else { f64::INFINITY };
        let amplitudes: Vec<f64> = lambdas
            .iter()
            .map(|&lk| target_delta.min((lk - mu) / reach).min((big_l - lk) / reach).max(0.0))
            .collect();
        let achieved = amplitudes.iter().copied().fold(0.0, f64::max);
        if target_delta > 0.0 && (achieved - target_delta).abs() > 1e-12 * target_delta.max(1.0) {
            return Err(Error::Infeasible(format!(
                "delta = {target_delta} is out of reach for n = {n}, mu = {mu}, L = {big_l} (at most {achieved})"
            )));
        }

        let x_star = Vector::from_fn(d, |_, _| crate::gauss(&mut rng));
        let noise: Vec<Vector> =
            (0..n).map(|_| Vector::from_fn(d, |_, _| self.offset_scale * crate::gauss(&mut rng))).collect();
        let noise_mean = crate::mean_of(&noise);

        let mut hessians = Vec::with_capacity(n);
        for i in 0..n {
            let diag = Vector::from_fn(d, |k, _| lambdas[k] + amplitudes[k] * patterns[k][i]);
            let h: DMatrix<f64> = &rotation * DMatrix::<f64>::from_diagonal(&diag) * rotation.transpose();
            hessians.push((&h + h.transpose()) * 0.5);
        }
        // identical Hessians: report zero rather than rounding noise
        let delta =
            if achieved == 0.0 { 0.0 } else { exact_delta_from_hessians(&hessians.iter().collect::<Vec<_>>()) };
        // ∇f_i(x*) = -(noise_i - mean) so the mean gradient vanishes at x*.
        let locals = hessians
            .into_iter()
            .zip(&noise)
            .map(|(h, e)| {
                let b = &h * &x_star + (e - &noise_mean);
                QuadraticLocal::new(h, b).map(LocalObjective::Quadratic)
            })
            .collect::<Result<Vec<_>>>()?;
        ObjectiveSet::new(locals, mu, big_l, delta)?.with_optimum(x_star)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::exact_delta_quadratic;
    use nalgebra::SymmetricEigen;

    fn eig_range(objs: &ObjectiveSet) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for l in objs.locals() {
            let LocalObjective::Quadratic(q) = l else { unreachable!() };
            for e in SymmetricEigen::new(q.hessian.clone()).eigenvalues.iter() {
                lo = lo.min(*e);
                hi = hi.max(*e);
            }
        }
        (lo, hi)
    }

    #[test]
    fn homogeneous_target() {
        let objs = make_quadratic_ensemble(5, 6, 0.1, 10.0, 0.0, 3).unwrap();
        let LocalObjective::Quadratic(first) = objs.local(0) else { unreachable!() };
        for l in objs.locals() {
            let LocalObjective::Quadratic(q) = l else { unreachable!() };
            assert!((&q.hessian - &first.hessian).amax() < 1e-14);
        }
    }

    #[test]
    fn hits_target_delta_and_stays_in_range() {
        for (n, t) in [(9, 1.0), (4, 4.4), (25, 0.3), (2, 2.0)] {
            let objs = make_quadratic_ensemble(n, 12, 0.1, 10.0, t, 7).unwrap();
            let exact = exact_delta_quadratic(&objs).unwrap();
            assert!((exact - t).abs() <= 0.01 * t, "n={n}: {exact} vs {t}");
            assert!((objs.delta() - exact).abs() < 1e-12);
            let (lo, hi) = eig_range(&objs);
            assert!(lo >= 0.1 - 1e-9 && hi <= 10.0 + 1e-9, "{lo} {hi}");
        }
    }

    #[test]
    fn optimum_is_stationary() {
        let objs = make_quadratic_ensemble(9, 20, 0.1, 10.0, 1.0, 0).unwrap();
        let opt = objs.optimum().unwrap();
        assert!(objs.gradient(&opt.x).norm() <= 1e-10);
    }

    #[test]
    fn infeasible_targets() {
        assert!(matches!(make_quadratic_ensemble(4, 5, 1.0, 3.0, 1.5, 0), Err(Error::Infeasible(_))));
        assert!(matches!(make_quadratic_ensemble(1, 5, 1.0, 3.0, 0.5, 0), Err(Error::Infeasible(_))));
        assert!(make_quadratic_ensemble(4, 5, 3.0, 1.0, 0.0, 0).is_err());
    }

    #[test]
    fn log_spectrum_reaches_small_curvature() {
        let objs = QuadraticEnsemble::new(6, 30, 0.0, 1.0, 0.05, 2)
            .spectrum(Spectrum::LogSpaced { min_ratio: 1e-6 })
            .build()
            .unwrap();
        let (lo, hi) = eig_range(&objs);
        assert!((-1e-12..1e-5).contains(&lo));
        assert!(hi <= 1.0 + 1e-12);
        assert!((exact_delta_quadratic(&objs).unwrap() - 0.05).abs() < 1e-9);
    }

    #[test]
    fn seed_determines_everything_but_delta_scale() {
        let a = make_quadratic_ensemble(5, 4, 0.5, 5.0, 0.5, 11).unwrap();
        let b = make_quadratic_ensemble(5, 4, 0.5, 5.0, 1.0, 11).unwrap();
        assert_eq!(a.optimum().unwrap().x, b.optimum().unwrap().x);
    }
}
