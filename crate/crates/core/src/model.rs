//! Lévy process models.
//!
//! A model supplies everything the exit-probability approximation, its
//! error bounds and the bridge sampler need: the Lévy density `s`, the
//! marginal density `f_t`, an exact increment sampler, the truncation
//! quantities for a jump-size cutoff `ε`, and the incomplete convolution
//! `C(b, y) = ∫_b^∞ s(v) s(y - v) dv`.
//!
//! Only the Cauchy process (symmetric 1-stable, `s(x) = c / x²`) ships.
//! The jump-size cutoff is the sharp indicator `1{|x| > ε}`.

use std::f64::consts::PI;

use rand::distr::Open01;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics;

/// Scalars of the Lévy density split at jump size `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationQuantities {
    pub epsilon: f64,
    /// Intensity of jumps larger than `epsilon`.
    pub lambda_eps: f64,
    /// `sup_x s_ε(x)`.
    pub a_eps: f64,
    /// `sup_x |s'_ε(x)|`.
    pub aprime_eps: f64,
    /// Variance rate of the small-jump part.
    pub sigma2_eps: f64,
    /// Drift of the small-jump part.
    pub mu_eps: f64,
}

/// Analytic capabilities of a Lévy process used by the simulation engine.
pub trait LevyModel: Send + Sync {
    /// Lévy density `s(x)`; singular at the origin.
    fn levy_density(&self, x: f64) -> Result<f64>;

    /// Marginal density `f_t(x)` without argument checks. Callers guarantee `t > 0`.
    fn density(&self, t: f64, x: f64) -> f64;

    /// Exact draw of `X_t`.
    fn sample_increment<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> f64;

    /// `ψ(u)` with `E[exp(iuX_t)] = exp(tψ(u))`. Only the real part is
    /// returned; the shipped models are symmetric.
    fn characteristic_exponent(&self, u: f64) -> f64;

    fn truncation_quantities(&self, epsilon: f64) -> Result<TruncationQuantities>;

    /// `C(b, y) = ∫_b^∞ s(v) s(y - v) dv` for `b > 0`, `y < b`.
    fn incomplete_convolution(&self, b: f64, y: f64) -> Result<f64>;

    /// Symmetric laws have the small-jump mode pinned at zero, which removes
    /// the time restrictions of the general remainder bound.
    fn is_symmetric(&self) -> bool;

    /// Model-specific sharp error bound for the one-sided domain `(-∞, b)`
    /// started at 0, if the model has one.
    fn one_sided_error_bound(&self, _b: f64, _y: f64, _t: f64) -> Option<f64> {
        None
    }

    /// Checked marginal density.
    fn marginal_density(&self, t: f64, x: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::domain("marginal_density", format!("t must be positive, got {t}")));
        }
        Ok(self.density(t, x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Cauchy,
}

/// Parameters of the driving Lévy process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevyModelSpec {
    pub kind: ModelKind,
    /// Intensity of the Lévy density, `s(x) = c / x²`.
    pub c: f64,
}

impl LevyModelSpec {
    pub fn cauchy(c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::domain("levy-model", format!("Cauchy intensity must be positive, got {c}")));
        }
        Ok(Self {
            kind: ModelKind::Cauchy,
            c,
        })
    }

    /// Scale of the Cauchy marginal at time `t`.
    #[inline]
    pub fn cauchy_scale(&self, t: f64) -> f64 {
        PI * self.c * t
    }

    /// Closed-form CDF of `X_t`.
    pub fn cdf(&self, t: f64, x: f64) -> f64 {
        match self.kind {
            ModelKind::Cauchy => 0.5 + (x / self.cauchy_scale(t)).atan() / PI,
        }
    }
}

impl LevyModel for LevyModelSpec {
    fn levy_density(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Err(Error::domain("levy_density", "density is singular at the origin"));
        }
        match self.kind {
            ModelKind::Cauchy => Ok(self.c / (x * x)),
        }
    }

    #[inline]
    fn density(&self, t: f64, x: f64) -> f64 {
        match self.kind {
            ModelKind::Cauchy => {
                let g = self.cauchy_scale(t);
                g / (PI * (g * g + x * x))
            }
        }
    }

    #[inline]
    fn sample_increment<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> f64 {
        match self.kind {
            ModelKind::Cauchy => {
                let u: f64 = rng.sample(Open01);
                self.cauchy_scale(t) * (PI * (u - 0.5)).tan()
            }
        }
    }

    fn characteristic_exponent(&self, u: f64) -> f64 {
        match self.kind {
            ModelKind::Cauchy => -PI * self.c * u.abs(),
        }
    }

    fn truncation_quantities(&self, epsilon: f64) -> Result<TruncationQuantities> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::domain(
                "truncation_quantities",
                format!("epsilon must be positive, got {epsilon}"),
            ));
        }
        match self.kind {
            ModelKind::Cauchy => {
                let c = self.c;
                Ok(TruncationQuantities {
                    epsilon,
                    lambda_eps: 2.0 * c / epsilon,
                    a_eps: c / (epsilon * epsilon),
                    aprime_eps: 2.0 * c / (epsilon * epsilon * epsilon),
                    sigma2_eps: 2.0 * c * epsilon,
                    mu_eps: 0.0,
                })
            }
        }
    }

    fn incomplete_convolution(&self, b: f64, y: f64) -> Result<f64> {
        match self.kind {
            ModelKind::Cauchy => numerics::cauchy_incomplete_convolution(self.c, b, y),
        }
    }

    fn is_symmetric(&self) -> bool {
        true
    }

    fn one_sided_error_bound(&self, b: f64, y: f64, t: f64) -> Option<f64> {
        match self.kind {
            ModelKind::Cauchy => crate::exit::error_bound_cauchy_refined(self, b, y, t).ok(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit() -> LevyModelSpec {
        LevyModelSpec::cauchy(1.0).unwrap()
    }

    #[test]
    fn levy_density_values() {
        let m = unit();
        assert_eq!(m.levy_density(2.0).unwrap(), 0.25);
        assert_eq!(m.levy_density(-0.5).unwrap(), 4.0);
        assert!(matches!(m.levy_density(0.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn rejects_nonpositive_intensity() {
        assert!(LevyModelSpec::cauchy(0.0).is_err());
        assert!(LevyModelSpec::cauchy(-1.0).is_err());
        assert!(LevyModelSpec::cauchy(f64::NAN).is_err());
    }

    #[test]
    fn marginal_density_at_origin_and_tail() {
        let m = unit();
        let f0 = m.marginal_density(1.0, 0.0).unwrap();
        assert!((f0 - 1.0 / (PI * PI)).abs() < 1e-15);
        // f_t(x) x² -> c t
        let x = 1e6;
        assert!((m.density(1.0, x) * x * x - 1.0).abs() < 1e-6);
        assert!(m.marginal_density(0.0, 1.0).is_err());
        assert!(m.marginal_density(-1.0, 1.0).is_err());
    }

    #[test]
    fn self_similarity_and_unimodality() {
        let m = unit();
        for &t in &[0.01, 0.25, 1.0, 3.0] {
            let mut prev = f64::INFINITY;
            for i in 0..1000 {
                let x = i as f64 * 0.01;
                let f = m.density(t, x);
                assert!((f - m.density(1.0, x / t) / t).abs() < 1e-12);
                assert!(f <= prev);
                prev = f;
            }
        }
    }

    #[test]
    fn truncation_quantity_examples() {
        let q = unit().truncation_quantities(0.1).unwrap();
        assert!((q.lambda_eps - 20.0).abs() < 1e-12);
        assert!((q.sigma2_eps - 0.2).abs() < 1e-15);
        assert_eq!(q.mu_eps, 0.0);
        assert!((q.a_eps - 100.0).abs() < 1e-9);
        assert!((q.aprime_eps - 2000.0).abs() < 1e-8);

        let q = unit().truncation_quantities(1.0).unwrap();
        assert_eq!((q.lambda_eps, q.sigma2_eps), (2.0, 2.0));

        let q = LevyModelSpec::cauchy(2.0).unwrap().truncation_quantities(0.5).unwrap();
        assert_eq!((q.lambda_eps, q.sigma2_eps), (8.0, 2.0));

        assert!(unit().truncation_quantities(0.0).is_err());
    }

    #[test]
    fn characteristic_exponent_is_even() {
        let m = unit();
        assert_eq!(m.characteristic_exponent(0.0), 0.0);
        assert_eq!(m.characteristic_exponent(-3.0), m.characteristic_exponent(3.0));
    }

    #[test]
    fn increment_quartiles() {
        let m = unit();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut xs: Vec<f64> = (0..n).map(|_| m.sample_increment(1.0, &mut rng)).collect();
        let inside = xs.iter().filter(|x| x.abs() <= PI).count() as f64 / n as f64;
        assert!((inside - 0.5).abs() < 0.01, "{inside}");
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
        assert!(median.abs() < 0.05, "{median}");
    }
}
