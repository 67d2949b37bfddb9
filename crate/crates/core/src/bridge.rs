//! Exact sampling of the bridge midpoint `X_{t/2} | X_t = y`.
//!
//! The midpoint density `f_{t/2}(x) f_{t/2}(y - x) / f_t(y)` is dominated by
//! `M · ½(f_{t/2}(x) + f_{t/2}(y - x))` with `M = 2 f_{t/2}(y/2) / f_t(y)`
//! whenever the marginals are unimodal, so plain rejection from the
//! two-component mixture is exact.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::LevyModel;

pub const DEFAULT_PROPOSAL_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeSampleStats {
    /// Proposals consumed, at least 1.
    pub proposals: u64,
    pub value: f64,
}

/// Density of `X_{t/2}` at `x` given `X_t = y`.
pub fn bridge_density<M: LevyModel>(model: &M, t: f64, x: f64, y: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain("bridge_density", format!("t must be positive, got {t}")));
    }
    let h = 0.5 * t;
    Ok(model.density(h, x) * model.density(h, y - x) / model.density(t, y))
}

/// Rejection constant `M = 2 f_{t/2}(y/2) / f_t(y)` (also the expected
/// number of proposals).
pub fn envelope_constant<M: LevyModel>(model: &M, t: f64, y: f64) -> f64 {
    2.0 * model.density(0.5 * t, 0.5 * y) / model.density(t, y)
}

/// Draws the bridge midpoint with the default proposal cap.
pub fn sample_bridge_midpoint<M: LevyModel, R: Rng + ?Sized>(
    model: &M,
    t: f64,
    y: f64,
    rng: &mut R,
) -> Result<BridgeSampleStats> {
    sample_bridge_midpoint_capped(model, t, y, rng, DEFAULT_PROPOSAL_CAP)
}

pub fn sample_bridge_midpoint_capped<M: LevyModel, R: Rng + ?Sized>(
    model: &M,
    t: f64,
    y: f64,
    rng: &mut R,
    cap: u64,
) -> Result<BridgeSampleStats> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain("sample_bridge_midpoint", format!("t must be positive, got {t}")));
    }
    let h = 0.5 * t;
    let peak = model.density(h, 0.5 * y);
    for proposals in 1..=cap {
        let z = model.sample_increment(h, rng);
        let x = if rng.random::<bool>() { y - z } else { z };
        let fx = model.density(h, x);
        let fy = model.density(h, y - x);
        // f^br / (M f̄) simplifies to f(x) f(y-x) / (f(y/2) (f(x) + f(y-x)))
        let ratio = fx * fy / (peak * (fx + fy));
        debug_assert!(ratio <= 1.0 + 1e-12, "envelope violated: ratio {ratio} at x={x}, y={y}, t={t}");
        if rng.random::<f64>() < ratio {
            return Ok(BridgeSampleStats { proposals, value: x });
        }
    }
    Err(Error::ProposalCap {
        cap,
        t,
        y,
        envelope: envelope_constant(model, t, y),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LevyModelSpec;
    use crate::numerics::{real_line_quadrature, QuadratureConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn density_symmetry_and_peak() {
        let m = LevyModelSpec::cauchy(1.0).unwrap();
        for &(t, x, y) in &[(0.5, 0.2, 0.7), (1.0, -3.0, 2.0), (0.01, 0.004, 0.001)] {
            let l = bridge_density(&m, t, x, y).unwrap();
            let r = bridge_density(&m, t, y - x, y).unwrap();
            assert!(((l - r) / l).abs() < 1e-14);
        }
        let at0 = bridge_density(&m, 1.0, 0.0, 0.0).unwrap();
        for i in 1..100 {
            assert!(bridge_density(&m, 1.0, i as f64 * 0.05, 0.0).unwrap() < at0);
        }
        assert!(bridge_density(&m, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn density_normalizes() {
        let m = LevyModelSpec::cauchy(1.0).unwrap();
        let cfg = QuadratureConfig::default();
        let total = real_line_quadrature(|x| bridge_density(&m, 0.5, x, 0.7).unwrap(), 0.35, &cfg).unwrap();
        assert!((total - 1.0).abs() < 1e-8, "{total}");
    }

    #[test]
    fn envelope_dominates_on_grid() {
        let m = LevyModelSpec::cauchy(1.0).unwrap();
        for &t in &[0.1, 1.0] {
            for &y in &[0.0, 1.0, 5.0] {
                let big_m = envelope_constant(&m, t, y);
                assert!(big_m.is_finite());
                for i in 0..1000 {
                    let x = -20.0 + 40.0 * i as f64 / 999.0;
                    let mix = 0.5 * (m.density(t / 2.0, x) + m.density(t / 2.0, y - x));
                    let f = bridge_density(&m, t, x, y).unwrap();
                    assert!(f <= big_m * mix * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn proposal_cap_is_an_error() {
        let m = LevyModelSpec::cauchy(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // y far out makes M large; a cap of one proposal must fail sometimes
        let mut failures = 0;
        for _ in 0..200 {
            if let Err(e) = sample_bridge_midpoint_capped(&m, 1.0, 1e4, &mut rng, 1) {
                assert!(matches!(e, Error::ProposalCap { cap: 1, .. }));
                failures += 1;
            }
        }
        assert!(failures > 0);
    }
}
