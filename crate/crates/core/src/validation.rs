//! Oracle suites shared by the `validate` subcommand and the test targets.
//!
//! Every suite is generic over the model so a deliberately broken model can
//! be checked to fail.

use std::fmt;

use rand::Rng;

use crate::bridge::{bridge_density, envelope_constant, sample_bridge_midpoint};
use crate::error::{Error, Result};
use crate::exit::{exit_estimate, Domain};
use crate::model::{LevyModel, TruncationQuantities};
use crate::numerics::{density_inversion_oracle, finite_quadrature, tail_quadrature, QuadratureConfig};
use crate::rng::path_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    Convolution,
    Density,
    Bridge,
    Envelope,
    Decay,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Convolution, Suite::Density, Suite::Bridge, Suite::Envelope, Suite::Decay];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Convolution => "convolution",
            Suite::Density => "density",
            Suite::Bridge => "bridge",
            Suite::Envelope => "envelope",
            Suite::Decay => "decay",
        }
    }

    pub fn parse(s: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|x| x.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub suite: Suite,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}/{}: {}", self.suite.name(), self.name, self.detail)
    }
}

fn check(suite: Suite, name: impl Into<String>, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        suite,
        name: name.into(),
        passed,
        detail,
    }
}

/// Sample sizes for the stochastic suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationConfig {
    pub bridge_samples: usize,
    pub seed: u64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            bridge_samples: 100_000,
            seed: 20_240_601,
        }
    }
}

pub fn run_suite<M: LevyModel>(model: &M, suite: Suite, cfg: &ValidationConfig) -> Result<Vec<CheckResult>> {
    match suite {
        Suite::Convolution => convolution_suite(model),
        Suite::Density => density_suite(model),
        Suite::Bridge => bridge_suite(model, cfg),
        Suite::Envelope => envelope_suite(model),
        Suite::Decay => decay_suite(model),
    }
}

fn oracle_cfg() -> QuadratureConfig {
    QuadratureConfig {
        rel_tol: 1e-12,
        abs_tol: 1e-300,
        max_subdivisions: 100_000,
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// `(b, y)` grid with 100 points spanning four barrier scales and
/// `y/b` from deep below the barrier to just under it.
pub fn convolution_grid() -> Vec<(f64, f64)> {
    let ratios: Vec<f64> = (0..25).map(|i| -4.0 + 4.95 * i as f64 / 24.0).collect();
    [0.01, 0.1, 1.0, 10.0]
        .iter()
        .flat_map(|&b| ratios.iter().map(move |&r| (b, r * b)))
        .collect()
}

pub const CONVOLUTION_TOL: f64 = 1e-8;
pub const DENSITY_TOL: f64 = 1e-6;

/// Closed form/series against direct quadrature of `∫_b^∞ s(v) s(y-v) dv`.
pub fn convolution_suite<M: LevyModel>(model: &M) -> Result<Vec<CheckResult>> {
    let cfg = oracle_cfg();
    let mut worst: (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (b, y) in convolution_grid() {
        let fast = model.incomplete_convolution(b, y)?;
        let oracle = tail_quadrature(
            |v| model.levy_density(v).unwrap_or(f64::NAN) * model.levy_density(y - v).unwrap_or(f64::NAN),
            b,
            &cfg,
        )?;
        let e = rel_err(fast, oracle);
        if !(e <= worst.0) {
            worst = (e, b, y);
        }
    }
    Ok(vec![check(
        Suite::Convolution,
        "incomplete_convolution_vs_quadrature",
        worst.0 < CONVOLUTION_TOL,
        format!("100 points, max rel err {:.3e} at b={}, y={:.4} (tol {CONVOLUTION_TOL:e})", worst.0, worst.1, worst.2),
    )])
}

/// 50 points: five horizons times ten abscissae.
pub fn density_grid() -> Vec<(f64, f64)> {
    let xs = [-3.0, -1.0, -0.3, -0.05, 0.0, 0.02, 0.1, 0.5, 1.5, 4.0];
    [0.01, 0.1, 0.5, 1.0, 2.0]
        .iter()
        .flat_map(|&t| xs.iter().map(move |&x| (t, x)))
        .collect()
}

/// Analytic marginal density against Fourier inversion of the exponent.
pub fn density_suite<M: LevyModel>(model: &M) -> Result<Vec<CheckResult>> {
    let mut worst: (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (t, x) in density_grid() {
        let e = rel_err(model.marginal_density(t, x)?, density_inversion_oracle(model, t, x)?);
        if !(e <= worst.0) {
            worst = (e, t, x);
        }
    }
    Ok(vec![check(
        Suite::Density,
        "marginal_density_vs_inversion",
        worst.0 < DENSITY_TOL,
        format!("50 points, max rel err {:.3e} at t={}, x={} (tol {DENSITY_TOL:e})", worst.0, worst.1, worst.2),
    )])
}

/// One-sample Kolmogorov–Smirnov statistic for a sorted sample.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(usize, f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(i, x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample KS statistic; both inputs sorted.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// CDF of the bridge midpoint law evaluated at each point of a sorted
/// sample, by accumulating quadratures between consecutive points.
pub fn bridge_cdf_at<M: LevyModel>(model: &M, t: f64, y: f64, sorted: &[f64]) -> Result<Vec<f64>> {
    let cfg = QuadratureConfig {
        rel_tol: 1e-10,
        abs_tol: 1e-14,
        max_subdivisions: 100_000,
    };
    let dens = |v: f64| bridge_density(model, t, v, y).unwrap_or(f64::NAN);
    let Some(&first) = sorted.first() else {
        return Ok(Vec::new());
    };
    let mut acc = tail_quadrature(|w| dens(-w), -first, &cfg)?;
    let mut out = Vec::with_capacity(sorted.len());
    out.push(acc);
    for w in sorted.windows(2) {
        if w[1] > w[0] {
            acc += finite_quadrature(dens, w[0], w[1], &cfg)?;
        }
        out.push(acc);
    }
    Ok(out)
}

/// KS critical value at the 1% level for sample size `n`.
pub fn ks_critical(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

pub const BRIDGE_KS_CONFIGS: [(f64, f64); 3] = [(1.0, 0.7), (0.1, 0.0), (0.01, 0.05)];

fn draw_bridge<M: LevyModel, R: Rng>(model: &M, t: f64, y: f64, n: usize, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut xs = Vec::with_capacity(n);
    let mut props = Vec::with_capacity(n);
    for _ in 0..n {
        let s = sample_bridge_midpoint(model, t, y, rng)?;
        xs.push(s.value);
        props.push(s.proposals as f64);
    }
    Ok((xs, props))
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

/// Distributional checks of the rejection sampler.
pub fn bridge_suite<M: LevyModel>(model: &M, cfg: &ValidationConfig) -> Result<Vec<CheckResult>> {
    let n = cfg.bridge_samples;
    if n < 2 {
        return Err(Error::Config(format!("bridge suite needs at least 2 samples, got {n}")));
    }
    let mut out = Vec::new();
    let mut rng = path_rng(cfg.seed, 0);
    for (k, &(t, y)) in BRIDGE_KS_CONFIGS.iter().enumerate() {
        let (xs, props) = draw_bridge(model, t, y, n, &mut rng)?;
        let xs = sorted(xs);
        let cdf = bridge_cdf_at(model, t, y, &xs)?;
        let d = ks_statistic(&xs, |i, _| cdf[i]);
        let crit = ks_critical(n);
        out.push(check(
            Suite::Bridge,
            format!("ks_t{t}_y{y}"),
            d < crit,
            format!("D={d:.3e} < {crit:.3e}"),
        ));
        if k == 0 {
            let (m, sd) = mean_sd(&props);
            let expect = envelope_constant(model, t, y);
            let tol = 3.0 * sd / (n as f64).sqrt();
            out.push(check(
                Suite::Bridge,
                "conditional_proposals",
                (m - expect).abs() <= tol,
                format!("mean {m:.5} vs envelope {expect:.5} (tol {tol:.2e})"),
            ));
            // reflection symmetry in law: X and y - X
            let (xs2, _) = draw_bridge(model, t, y, n, &mut rng)?;
            let mirrored = sorted(xs2.into_iter().map(|x| y - x).collect());
            let d2 = ks_two_sample(&xs, &mirrored);
            let crit2 = 1.63 * (2.0 / n as f64).sqrt();
            out.push(check(
                Suite::Bridge,
                "reflection_symmetry",
                d2 < crit2,
                format!("two-sample D={d2:.3e} < {crit2:.3e}"),
            ));
        }
    }
    let t = 1.0;
    let mut props = Vec::with_capacity(n);
    for _ in 0..n {
        let y = model.sample_increment(t, &mut rng);
        props.push(sample_bridge_midpoint(model, t, y, &mut rng)?.proposals as f64);
    }
    let (m, _) = mean_sd(&props);
    out.push(check(
        Suite::Bridge,
        "unconditional_proposals",
        (m - 4.0).abs() <= 0.1,
        format!("mean {m:.4} vs 4 (tol 0.1)"),
    ));
    Ok(out)
}

/// Pointwise check of `f^br ≤ M f̄` on a 1000-point grid.
pub fn envelope_suite<M: LevyModel>(model: &M) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for &t in &[0.1, 1.0] {
        for &y in &[0.0, 1.0, 5.0] {
            let m = envelope_constant(model, t, y);
            let h = 0.5 * t;
            let mut worst = 0.0f64;
            for i in 0..1000 {
                let x = y / 2.0 - 20.0 + 40.0 * i as f64 / 999.0;
                let mix = 0.5 * (model.density(h, x) + model.density(h, y - x));
                worst = worst.max(bridge_density(model, t, x, y)? / (m * mix));
            }
            out.push(check(
                Suite::Envelope,
                format!("t{t}_y{y}"),
                worst <= 1.0 + 1e-12 && m.is_finite(),
                format!("max ratio {worst:.12}, M={m:.6}"),
            ));
        }
    }
    Ok(out)
}

/// `e_p(0, 0.5, 2^-k) / 2^-k` must eventually decrease and end small.
pub fn decay_suite<M: LevyModel>(model: &M) -> Result<Vec<CheckResult>> {
    let domain = Domain::upper(1.0)?;
    let ratios: Vec<f64> = (1..=20)
        .map(|k| {
            let t = 0.5f64.powi(k);
            exit_estimate(model, &domain, 0.0, 0.5, t).map(|e| e.e_p / t)
        })
        .collect::<Result<_>>()?;
    let finite_from = ratios.iter().position(|r| r.is_finite() && *r < 1e300);
    let passed = match finite_from {
        Some(s) => {
            ratios[s..].windows(2).skip(4).all(|w| w[1] < w[0]) && *ratios.last().unwrap() < 0.1
        }
        None => false,
    };
    Ok(vec![check(
        Suite::Decay,
        "e_p_over_t_to_zero",
        passed,
        format!("e_p/t at k=10: {:.3e}, k=20: {:.3e}", ratios[9], ratios[19]),
    )])
}

/// A model whose density is scaled by `1 + delta`; used to confirm the
/// suites detect a broken implementation.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedModel<M> {
    pub inner: M,
    pub delta: f64,
}

impl<M: LevyModel> LevyModel for PerturbedModel<M> {
    fn levy_density(&self, x: f64) -> Result<f64> {
        self.inner.levy_density(x)
    }
    fn density(&self, t: f64, x: f64) -> f64 {
        self.inner.density(t, x) * (1.0 + self.delta)
    }
    fn sample_increment<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> f64 {
        self.inner.sample_increment(t, rng)
    }
    fn characteristic_exponent(&self, u: f64) -> f64 {
        self.inner.characteristic_exponent(u)
    }
    fn truncation_quantities(&self, epsilon: f64) -> Result<TruncationQuantities> {
        self.inner.truncation_quantities(epsilon)
    }
    fn incomplete_convolution(&self, b: f64, y: f64) -> Result<f64> {
        Ok(self.inner.incomplete_convolution(b, y)? * (1.0 + self.delta))
    }
    fn is_symmetric(&self) -> bool {
        self.inner.is_symmetric()
    }
    fn one_sided_error_bound(&self, b: f64, y: f64, t: f64) -> Option<f64> {
        self.inner.one_sided_error_bound(b, y, t)
    }
}
