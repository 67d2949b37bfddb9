//! Quadrature oracles and the Cauchy incomplete convolution.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::LevyModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-15,
            max_subdivisions: 20_000,
        }
    }
}

impl QuadratureConfig {
    pub fn new(rel_tol: f64, abs_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let cfg = Self {
            rel_tol,
            abs_tol,
            max_subdivisions,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol >= 1e-14) || !(self.abs_tol > 0.0) {
            return Err(Error::Config(format!(
                "quadrature tolerances out of range: rel_tol={}, abs_tol={}",
                self.rel_tol, self.abs_tol
            )));
        }
        if self.max_subdivisions == 0 || self.max_subdivisions > 1_000_000 {
            return Err(Error::Config(format!(
                "max_subdivisions must lie in 1..=1e6, got {}",
                self.max_subdivisions
            )));
        }
        Ok(())
    }
}

// Gauss-Kronrod 7/15 abscissae and weights on [-1, 1].
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Segment {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Adaptive Gauss-Kronrod quadrature over a finite interval.
pub fn finite_quadrature<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, cfg: &QuadratureConfig) -> Result<f64> {
    cfg.validate()?;
    let first = gk15(&f, lo, hi);
    let mut total = first.value;
    let mut total_err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut subdivisions = 0;
    loop {
        if !total.is_finite() || !total_err.is_finite() {
            return Err(Error::Quadrature {
                subdivisions,
                value: total,
                error: total_err,
            });
        }
        if total_err <= cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
            return Ok(total);
        }
        if subdivisions >= cfg.max_subdivisions {
            return Err(Error::Quadrature {
                subdivisions,
                value: total,
                error: total_err,
            });
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.lo + worst.hi);
        let left = gk15(&f, worst.lo, mid);
        let right = gk15(&f, mid, worst.hi);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        subdivisions += 1;
        // Re-sum periodically so the running error does not drift below
        // the true sum through cancellation.
        if subdivisions % 64 == 0 {
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
}

/// `∫_lower^∞ f(v) dv` via `v = lower + u / (1 - u)` on `u ∈ (0, 1)`.
pub fn tail_quadrature<F: Fn(f64) -> f64>(integrand: F, lower: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let g = |u: f64| {
        let w = 1.0 - u;
        integrand(lower + u / w) / (w * w)
    };
    finite_quadrature(g, 0.0, 1.0, cfg)
}

/// `∫_{-∞}^{∞} f(v) dv`, split at `center`.
pub fn real_line_quadrature<F: Fn(f64) -> f64>(f: F, center: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let right = tail_quadrature(&f, center, cfg)?;
    let left = tail_quadrature(|v| f(2.0 * center - v), center, cfg)?;
    Ok(left + right)
}

/// `f_t(x) = (1/π) ∫_0^∞ cos(ux) exp(tψ(u)) du` for a symmetric model.
pub fn density_inversion_oracle<M: LevyModel>(model: &M, t: f64, x: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain("density_inversion_oracle", format!("t must be positive, got {t}")));
    }
    // the oscillatory integrand has a roundoff floor near 1e-12 relative
    // for small t and large |x|
    let cfg = QuadratureConfig {
        rel_tol: 1e-10,
        abs_tol: 1e-300,
        max_subdivisions: 100_000,
    };
    let integral = tail_quadrature(|u| (u * x).cos() * (t * model.characteristic_exponent(u)).exp(), 0.0, &cfg)?;
    Ok(integral / PI)
}

/// Normalized incomplete convolution `C(1, r)` for `s(x) = 1/x²` by its power series.
/// Converges for `|r| < 1`.
pub fn unit_convolution_series(r: f64) -> f64 {
    debug_assert!(r.abs() < 1.0);
    let mut sum = 0.0;
    let mut power = 1.0;
    for n in 1..100_000u32 {
        power *= r;
        let nf = n as f64;
        let term = (nf + 1.0) / (nf + 3.0) * power;
        sum += term;
        if term.abs() < 1e-17 * (1.0 + sum.abs()) {
            break;
        }
    }
    (1.0 + 3.0 * sum) / 3.0
}

/// Normalized incomplete convolution `C(1, r)` in closed form, `r < 1`, `r ≠ 0`.
///
/// `1 + 1/r + 2/r² + r/(1-r) + 2 log(1-r)/r³` with the first, second and
/// fourth terms merged into `1 / (r (1 - r))`.
pub fn unit_convolution_closed_form(r: f64) -> f64 {
    debug_assert!(r < 1.0 && r != 0.0);
    1.0 / (r * (1.0 - r)) + 2.0 / (r * r) + 2.0 * (-r).ln_1p() / (r * r * r)
}

/// `∫_b^∞ c/v² · c/(y - v)² dv` for `b > 0`, `y < b`.
pub fn cauchy_incomplete_convolution(c: f64, b: f64, y: f64) -> Result<f64> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::domain("incomplete_convolution", format!("barrier must be positive and finite, got {b}")));
    }
    if !(y < b) {
        return Err(Error::domain("incomplete_convolution", format!("target {y} is not below barrier {b}")));
    }
    let r = y / b;
    let unit = if r.abs() <= 0.5 {
        unit_convolution_series(r)
    } else {
        unit_convolution_closed_form(r)
    };
    Ok(c * c * unit / (b * b * b))
}
