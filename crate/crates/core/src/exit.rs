//! First-order approximation of the bridge exit probability and its
//! computable error bound.
//!
//! For a bridge from `x` to `y` over a time span `t` the approximation is
//!
//! ```text
//! p̆(x, y, t) = t²/2 · ∫_{(a,b)ᶜ} s(u - x) s(y - u) du / f_t(y - x),
//! p̃ = clamp(p̆, 0, 1)
//! ```
//!
//! and `|p - p̃| ≤ e_p(x, y, t)`. All bounds are evaluated at start point 0
//! after translating the domain by `-x`.

use std::f64::consts::{E, PI};

use crate::error::{Error, Result};
use crate::model::{LevyModel, LevyModelSpec};

/// The interval `(a, b)` the process must stay in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub a: f64,
    pub b: f64,
}

impl Domain {
    /// Requires `a < 0 < b` with at least one finite barrier; `±∞` is allowed
    /// for the other one.
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if a.is_nan() || b.is_nan() || !(a < 0.0) || !(b > 0.0) {
            return Err(Error::domain("domain", format!("need a < 0 < b, got ({a}, {b})")));
        }
        if a == f64::NEG_INFINITY && b == f64::INFINITY {
            return Err(Error::domain("domain", "at least one barrier must be finite"));
        }
        Ok(Self { a, b })
    }

    pub fn upper(b: f64) -> Result<Self> {
        Self::new(f64::NEG_INFINITY, b)
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.a < x && x < self.b
    }

    /// Distance from the origin to the nearest barrier, `b ∧ |a|`.
    pub fn inner_radius(&self) -> f64 {
        self.b.min(-self.a)
    }

    /// `(b - y) ∧ (y - a)`.
    pub fn gap(&self, y: f64) -> f64 {
        (self.b - y).min(y - self.a)
    }
}

/// Approximate conditional exit probability with its error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitEstimate {
    pub p_tilde: f64,
    pub e_p: f64,
    /// Unclamped first-order value, kept for diagnostics.
    pub p_raw: f64,
}

impl ExitEstimate {
    const EXITED: ExitEstimate = ExitEstimate {
        p_tilde: 1.0,
        e_p: 0.0,
        p_raw: 1.0,
    };
}

/// Constants entering the small-jump tail and density bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBoundConstants {
    /// `C(η, ε) = (e σ²_ε / (ε η))^{η/ε}`.
    pub c_eta_eps: f64,
    /// Largest time for which the drift of the small-jump part is negligible.
    pub t0: f64,
    /// Largest time for which the small-jump mode stays within `η`.
    pub t1: f64,
}

pub fn error_bound_constants<M: LevyModel>(model: &M, eta: f64, epsilon: f64) -> Result<ErrorBoundConstants> {
    if !(eta > 0.0) {
        return Err(Error::domain("error_bound_constants", format!("eta must be positive, got {eta}")));
    }
    let q = model.truncation_quantities(epsilon)?;
    let c_eta_eps = (E * q.sigma2_eps / (epsilon * eta)).powf(eta / epsilon);
    Ok(ErrorBoundConstants {
        c_eta_eps,
        t0: drift_horizon(q.mu_eps, eta),
        t1: mode_horizon(model, q.mu_eps, q.sigma2_eps, eta),
    })
}

fn drift_horizon(mu_eps: f64, eta: f64) -> f64 {
    if mu_eps > 0.0 {
        eta / (2.0 * mu_eps)
    } else {
        f64::INFINITY
    }
}

// Solves t|μ| + √(3 t σ²) = η for t; infinite when the law is symmetric.
fn mode_horizon<M: LevyModel>(model: &M, mu_eps: f64, sigma2_eps: f64, eta: f64) -> f64 {
    if model.is_symmetric() {
        return f64::INFINITY;
    }
    let m = mu_eps.abs();
    let s = (3.0 * sigma2_eps).sqrt();
    let root = if m == 0.0 {
        if s == 0.0 {
            return f64::INFINITY;
        }
        eta / s
    } else {
        (-s + (s * s + 4.0 * m * eta).sqrt()) / (2.0 * m)
    };
    root * root
}

/// First-order exit probability for the bridge from `x` to `y` over time `t`.
/// `e_p` is left at 0; see [`exit_estimate`].
pub fn p_tilde<M: LevyModel>(model: &M, domain: &Domain, x: f64, y: f64, t: f64) -> Result<ExitEstimate> {
    check_time("p_tilde", t)?;
    let Some((a, b, y)) = shift(domain, x, y) else {
        return Ok(ExitEstimate::EXITED);
    };
    let p_raw = shifted_p_raw(model, a, b, y, t)?;
    Ok(ExitEstimate {
        p_tilde: p_raw.clamp(0.0, 1.0),
        e_p: 0.0,
        p_raw,
    })
}

/// Translates the domain by `-x`; `None` when either endpoint lies outside.
/// Membership is decided on the shifted values so that translating the
/// inputs first gives bit-identical results.
fn shift(domain: &Domain, x: f64, y: f64) -> Option<(f64, f64, f64)> {
    let (a, b, y) = (domain.a - x, domain.b - x, y - x);
    (a < 0.0 && 0.0 < b && a < y && y < b).then_some((a, b, y))
}

fn shifted_p_raw<M: LevyModel>(model: &M, a: f64, b: f64, y: f64, t: f64) -> Result<f64> {
    let mut mass = 0.0;
    if b.is_finite() {
        mass += model.incomplete_convolution(b, y)?;
    }
    if a.is_finite() {
        // ∫_{-∞}^{a} s(v) s(y - v) dv = ∫_{|a|}^{∞} s(-w) s(y + w) dw
        mass += model.incomplete_convolution(-a, -y)?;
    }
    Ok(0.5 * t * t * mass / model.density(t, y))
}

fn check_time(op: &'static str, t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(op, format!("t must be positive and finite, got {t}")))
    }
}

/// `log( C(η, ε) t^{η/ε} )` with `C(η, ε) = (κ / η)^{η/ε}`; `κ = e σ²_ε / ε`.
#[inline]
fn ln_tail(kappa: f64, eta: f64, eps: f64, ln_t: f64) -> f64 {
    (eta / eps) * ((kappa / eta).ln() + ln_t)
}

/// `1 - e^{-x}(1 + x + x²/2)` without cancellation for small `x`.
pub(crate) fn poisson_tail3(x: f64) -> f64 {
    if x < 1.0 {
        let mut term = x * x * x / 6.0;
        let mut sum = 0.0;
        let mut k = 3.0;
        while term > 1e-18 * sum || sum == 0.0 {
            sum += term;
            k += 1.0;
            term *= x / k;
            if term == 0.0 {
                break;
            }
        }
        (-x).exp() * sum
    } else {
        1.0 - (-x).exp() * (1.0 + x + 0.5 * x * x)
    }
}

/// The seven error components for the Cauchy process on `(-∞, b)`,
/// before division by `f_t(y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchyErrorTerms {
    pub epsilon: f64,
    pub epsilon0: f64,
    pub e0: f64,
    pub e11: f64,
    pub e12: f64,
    pub e21: f64,
    pub e22: f64,
    pub e23: f64,
    pub e3: f64,
}

impl CauchyErrorTerms {
    pub fn total(&self) -> f64 {
        self.e0 + self.e11 + self.e12 + self.e21 + self.e22 + self.e23 + self.e3
    }
}

/// Jump cutoffs `(ε, ε₀)` used by the one-sided Cauchy bound.
pub fn cauchy_cutoffs(b: f64, y: f64) -> (f64, f64) {
    let eps = ((b - y) / 8.0).min(b / 2.0);
    (eps, cauchy_eps0(b, y, eps))
}

/// `ε₀ = (b-y)/4 ∧ b/2`, shrunk to `0.99×` the admissible bound if needed.
fn cauchy_eps0(b: f64, y: f64, eps: f64) -> f64 {
    let gap = b - y;
    let eps0 = (gap / 4.0).min(b / 2.0);
    let admissible = ((gap - eps) / 2.0).min(b - eps);
    if eps0 >= admissible {
        0.99 * admissible
    } else {
        eps0
    }
}

/// Term-by-term one-sided Cauchy bound for a bounded Lipschitz `φ`, with
/// the default cutoffs from [`cauchy_cutoffs`].
pub fn cauchy_error_terms(
    model: &LevyModelSpec,
    b: f64,
    y: f64,
    t: f64,
    phi_sup: f64,
    phi_lip: f64,
) -> Result<CauchyErrorTerms> {
    check_cauchy_args(b, y, t)?;
    let (eps, eps0) = cauchy_cutoffs(b, y);
    cauchy_error_terms_with(model, b, y, t, eps, eps0, phi_sup, phi_lip)
}

fn check_cauchy_args(b: f64, y: f64, t: f64) -> Result<()> {
    check_time("error_bound_cauchy", t)?;
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::domain("error_bound_cauchy", format!("barrier must be positive and finite, got {b}")));
    }
    if !(y < b) {
        return Err(Error::domain("error_bound_cauchy", format!("target {y} is not below barrier {b}")));
    }
    Ok(())
}

/// As [`cauchy_error_terms`] with explicit cutoffs. Requires
/// `ε < (b-y)/4 ∧ b` and `ε₀ < (b-y-ε)/2 ∧ (b-ε)`.
#[allow(clippy::too_many_arguments)]
pub fn cauchy_error_terms_with(
    model: &LevyModelSpec,
    b: f64,
    y: f64,
    t: f64,
    eps: f64,
    eps0: f64,
    phi_sup: f64,
    phi_lip: f64,
) -> Result<CauchyErrorTerms> {
    check_cauchy_args(b, y, t)?;
    let gap = b - y;
    if !(eps > 0.0 && eps < (gap / 4.0).min(b)) {
        return Err(Error::domain("error_bound_cauchy", format!("cutoff {eps} outside (0, {})", (gap / 4.0).min(b))));
    }
    if !(eps0 > 0.0 && eps0 < ((gap - eps) / 2.0).min(b - eps)) {
        return Err(Error::domain("error_bound_cauchy", format!("cutoff {eps0} violates the admissibility constraint")));
    }
    let c = model.c;
    let q = model.truncation_quantities(eps)?;
    let (lambda, a) = (q.lambda_eps, q.a_eps);
    let sigma = q.sigma2_eps.sqrt();
    let half_gap = 0.5 * gap;

    // C(η, ε) = (2ce/η)^{η/ε}
    let kappa = 2.0 * c * E;
    let ln_t = t.ln();
    let kill = -lambda * t;
    let tail_b = ln_tail(kappa, b, eps, ln_t);
    let tail_gap = ln_tail(kappa, half_gap, eps, ln_t);
    let tail_eps0 = ln_tail(kappa, eps0, eps, ln_t);

    let e0 = phi_sup * 4.0 / gap * (kill + tail_gap).exp();
    let e11 = phi_sup * a * (kill + tail_b + ln_t).exp();
    let e12 = phi_sup * 2.0 * a * (kill + tail_gap + ln_t).exp();
    let e21 = phi_sup * 0.5 * a * lambda * (kill + tail_b + 2.0 * ln_t).exp();
    let e23 = phi_sup * a * lambda * (kill + tail_gap + 2.0 * ln_t).exp();

    // The sharp cutoff would zero s_ε below ε; the untruncated density is
    // used for both factors, which can only enlarge the bound.
    let s = |x: f64| c / (x * x);
    let e22 = phi_sup * 2.0 * a * lambda * (kill + tail_eps0 + 2.0 * ln_t).exp()
        + 2.0
            * (kill + 2.5 * ln_t).exp()
            * sigma
            * (s(b - eps0) * s(gap - 2.0 * eps0) * phi_sup + a * lambda * phi_lip);

    let t3 = t * t * t;
    let e3 = phi_sup / 6.0 * a * lambda * lambda * t3 * (tail_b.exp() + 2.0 * tail_gap.exp() + 2.0 * tail_eps0.exp())
        + 16.0 * PI * c * c * c * t3 * phi_sup / (3.0 * eps * (b - eps0).powi(2) * (gap - 2.0 * eps0))
            * (2.0 * PI * c * t / eps + kill).exp();

    Ok(CauchyErrorTerms {
        epsilon: eps,
        epsilon0: eps0,
        e0,
        e11,
        e12,
        e21,
        e22,
        e23,
        e3,
    })
}

/// One-sided Cauchy error bound `e_p(0, y, t)` on `(-∞, b)` for `φ ≡ 1`.
/// Zero when `y ≥ b`, where `p̃ = 1` exactly.
pub fn error_bound_cauchy(model: &LevyModelSpec, b: f64, y: f64, t: f64) -> Result<f64> {
    if y >= b {
        check_time("error_bound_cauchy", t)?;
        return Ok(0.0);
    }
    let terms = cauchy_error_terms(model, b, y, t, 1.0, 0.0)?;
    Ok(terms.total() / model.density(t, y))
}

/// Ratio between consecutive cutoffs in [`error_bound_cauchy_refined`].
pub const CUTOFF_LADDER_RATIO: f64 = 4.0;
/// Largest number of cutoffs tried below the default one.
pub const CUTOFF_LADDER_STEPS: u32 = 12;

/// Minimum of the one-sided Cauchy bound over admissible cutoff pairs.
///
/// `ε` runs over `ε_default·4^{-k}` while `ε ≥ 8t`; for each, `ε₀` is either
/// its default, `4ε` or `16ε` (the latter two when smaller). Every pair satisfies the
/// admissibility constraints, so the minimum is itself a valid bound. Small
/// cutoffs pay off on short intervals carrying a large increment.
pub fn error_bound_cauchy_refined(model: &LevyModelSpec, b: f64, y: f64, t: f64) -> Result<f64> {
    if y >= b {
        check_time("error_bound_cauchy", t)?;
        return Ok(0.0);
    }
    check_cauchy_args(b, y, t)?;
    let f = model.density(t, y);
    let (mut eps, _) = cauchy_cutoffs(b, y);
    let mut best = f64::INFINITY;
    for k in 0..=CUTOFF_LADDER_STEPS {
        if k > 0 && eps < 8.0 * t {
            break;
        }
        let eps0 = cauchy_eps0(b, y, eps);
        best = best.min(cauchy_error_terms_with(model, b, y, t, eps, eps0, 1.0, 0.0)?.total() / f);
        for mult in [4.0, 16.0] {
            if mult * eps < eps0 {
                best = best.min(cauchy_error_terms_with(model, b, y, t, eps, mult * eps, 1.0, 0.0)?.total() / f);
            }
        }
        eps /= CUTOFF_LADDER_RATIO;
    }
    Ok(best)
}

/// General remainder bound `e_R(0, y, t) / f_t(y)` on `domain` for a
/// bounded Lipschitz `φ`. Returns `+∞` outside its time range of validity.
pub fn error_bound_general<M: LevyModel>(
    model: &M,
    domain: &Domain,
    y: f64,
    t: f64,
    phi_sup: f64,
    phi_lip: f64,
    epsilon: f64,
) -> Result<f64> {
    shifted_general_bound(model, domain.a, domain.b, y, t, phi_sup, phi_lip, epsilon)
}

#[allow(clippy::too_many_arguments)]
fn shifted_general_bound<M: LevyModel>(
    model: &M,
    a: f64,
    b: f64,
    y: f64,
    t: f64,
    phi_sup: f64,
    phi_lip: f64,
    epsilon: f64,
) -> Result<f64> {
    check_time("error_bound_general", t)?;
    if !(a < y && y < b) {
        return Err(Error::domain("error_bound_general", format!("y={y} outside ({a}, {b})")));
    }
    let radius = b.min(-a);
    let gap = (b - y).min(y - a);
    if !(epsilon > 0.0 && epsilon < (gap / 8.0).min(radius / 2.0)) {
        return Err(Error::domain(
            "error_bound_general",
            format!("epsilon={epsilon} must lie in (0, {})", (gap / 8.0).min(radius / 2.0)),
        ));
    }
    let q = model.truncation_quantities(epsilon)?;
    let t0 = drift_horizon(q.mu_eps, (gap / 2.0).min(radius));
    let t1 = mode_horizon(model, q.mu_eps, q.sigma2_eps, gap / 2.0);
    if !(t < t0.min(t1)) {
        return Ok(f64::INFINITY);
    }

    let (lambda, a_eps, ap_eps) = (q.lambda_eps, q.a_eps, q.aprime_eps);
    let sigma = q.sigma2_eps.sqrt();
    let kappa = E * q.sigma2_eps / epsilon;
    let ln_t = t.ln();
    let kill = -lambda * t;

    let r1 = phi_sup
        * (kill + ln_tail(kappa, gap / 4.0, epsilon, ln_t)).exp()
        * (8.0 / gap + 2.0 * a_eps * t + a_eps * lambda * t * t);
    let r2 = 2.0 * phi_sup * a_eps * (kill + ln_tail(kappa, radius / 2.0, epsilon, ln_t) + ln_t).exp() * (1.0 + t * lambda);
    let r3 = 0.5 * phi_sup * lambda * lambda * a_eps * t * t * t;
    let r4 = phi_sup * a_eps / lambda * poisson_tail3(lambda * t);
    let r5 = (kill + 2.0 * ln_t).exp()
        * (a_eps * lambda * phi_lip + 2.0 * phi_sup * a_eps * a_eps + phi_sup * lambda * ap_eps)
        * (sigma * t.sqrt() + 0.5 * q.mu_eps.abs() * t);

    Ok((r1 + r2 + r3 + r4 + r5) / model.density(t, y))
}

/// `(p̃, e_p)` for the bridge from `x` to `y` over time `t`.
pub fn exit_estimate<M: LevyModel>(model: &M, domain: &Domain, x: f64, y: f64, t: f64) -> Result<ExitEstimate> {
    check_time("exit_estimate", t)?;
    let Some((a, b, y)) = shift(domain, x, y) else {
        return Ok(ExitEstimate::EXITED);
    };
    let p_raw = shifted_p_raw(model, a, b, y, t)?;
    let e_p = shifted_error_bound(model, a, b, y, t)?;
    Ok(ExitEstimate {
        p_tilde: p_raw.clamp(0.0, 1.0),
        e_p,
        p_raw,
    })
}

fn shifted_error_bound<M: LevyModel>(model: &M, a: f64, b: f64, y: f64, t: f64) -> Result<f64> {
    // For a symmetric model the time-reversed bridge runs from y to x with
    // the same exit probability and the same p̃, so both orientations bound
    // the error.
    let one_sided = |b: f64, y: f64| {
        let forward = model.one_sided_error_bound(b, y, t)?;
        if model.is_symmetric() {
            let backward = model.one_sided_error_bound(b - y, -y, t)?;
            Some(forward.min(backward))
        } else {
            Some(forward)
        }
    };
    if a == f64::NEG_INFINITY {
        if let Some(e) = one_sided(b, y) {
            return Ok(e);
        }
    } else if b == f64::INFINITY && model.is_symmetric() {
        if let Some(e) = one_sided(-a, -y) {
            return Ok(e);
        }
    }
    let radius = b.min(-a);
    let gap = (b - y).min(y - a);
    let epsilon = 0.99 * (gap / 8.0).min(radius / 2.0);
    shifted_general_bound(model, a, b, y, t, 1.0, 0.0, epsilon)
}
