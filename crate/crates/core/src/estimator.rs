//! Monte Carlo drivers for `E[F(X_1) 1{τ > 1}]`.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exit::Domain;
use crate::model::LevyModel;
use crate::rng::path_rng;
use crate::skeleton::{evaluate_skeleton, generate_skeleton, EngineConfig};

/// Terminal payoff `F(X_1)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Payoff {
    /// `F ≡ 1`: the survival probability.
    Indicator,
    Constant(f64),
    /// `Σ coeffs[k] x^k` evaluated at `x` clamped to `[-cap, cap]`.
    CappedPolynomial { coeffs: Vec<f64>, cap: f64 },
    /// `(K - e^x)^+`.
    Put { strike: f64 },
    /// `min((e^x - K)^+, cap)`.
    CappedCall { strike: f64, cap: f64 },
}

impl Payoff {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Payoff::Indicator => 1.0,
            Payoff::Constant(k) => *k,
            Payoff::CappedPolynomial { coeffs, cap } => {
                let z = x.clamp(-cap, *cap);
                coeffs.iter().rev().fold(0.0, |acc, c| acc * z + c)
            }
            Payoff::Put { strike } => (strike - x.exp()).max(0.0),
            Payoff::CappedCall { strike, cap } => (x.exp() - strike).max(0.0).min(*cap),
        }
    }

    /// An upper bound on `sup |F|`.
    pub fn sup_abs(&self) -> f64 {
        match self {
            Payoff::Indicator => 1.0,
            Payoff::Constant(k) => k.abs(),
            Payoff::CappedPolynomial { coeffs, cap } => {
                coeffs.iter().enumerate().map(|(k, c)| c.abs() * cap.powi(k as i32)).sum()
            }
            Payoff::Put { strike } => strike.max(0.0),
            Payoff::CappedCall { cap, .. } => *cap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Payoff::Indicator => true,
            Payoff::Constant(k) => k.is_finite(),
            Payoff::CappedPolynomial { coeffs, cap } => {
                !coeffs.is_empty() && coeffs.iter().all(|c| c.is_finite()) && cap.is_finite() && *cap >= 0.0
            }
            Payoff::Put { strike } => strike.is_finite() && *strike >= 0.0,
            Payoff::CappedCall { strike, cap } => strike.is_finite() && cap.is_finite() && *cap >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("payoff parameters invalid: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McResult {
    pub estimate: f64,
    pub stderr: f64,
    /// Mean of `|F| · Σ e_p`; NaN for the uniform baseline.
    pub bias_bound: f64,
    pub paths: u64,
    pub mean_skeleton_points: f64,
    pub depth_breaches: u64,
    pub wall_seconds: f64,
    /// Summed per-path time spent generating skeletons / grid paths.
    pub skeleton_seconds: f64,
    /// Summed per-path time spent evaluating weights and bias.
    pub weight_seconds: f64,
    pub seed: u64,
}

impl McResult {
    /// Fields that must be bit-identical across runs with the same seed.
    pub fn deterministic_fields(&self) -> (u64, u64, u64, u64, u64, u64) {
        (
            self.estimate.to_bits(),
            self.stderr.to_bits(),
            self.bias_bound.to_bits(),
            self.paths,
            self.mean_skeleton_points.to_bits(),
            self.depth_breaches,
        )
    }
}

/// Pairwise summation, deterministic for a given slice order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let (l, r) = xs.split_at(xs.len() / 2);
    pairwise_sum(l) + pairwise_sum(r)
}

/// Mean and standard error of the mean.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

struct PathOutcome {
    value: f64,
    bias: f64,
    points: usize,
    breaches: usize,
    gen_secs: f64,
    eval_secs: f64,
}

/// Runs `job` on a pool of `workers` threads (0 = one per logical core).
pub fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(job))
}

fn check_paths(n_paths: u64) -> Result<()> {
    if n_paths < 2 {
        return Err(Error::Config(format!("need at least 2 paths, got {n_paths}")));
    }
    Ok(())
}

/// Adaptive bridge estimator with a-posteriori bias bound.
pub fn estimate_adaptive<M: LevyModel>(
    cfg: &EngineConfig<M>,
    payoff: &Payoff,
    n_paths: u64,
    seed: u64,
    workers: usize,
) -> Result<McResult> {
    cfg.validate()?;
    payoff.validate()?;
    check_paths(n_paths)?;
    let start = Instant::now();
    let outcomes: Vec<Result<PathOutcome>> = with_workers(workers, || {
        (0..n_paths)
            .into_par_iter()
            .map(|k| {
                let mut rng = path_rng(seed, k);
                let t0 = Instant::now();
                let skel = generate_skeleton(cfg, &mut rng)?;
                let t1 = Instant::now();
                let (weight, bias) = evaluate_skeleton(&skel, cfg)?;
                let f = payoff.eval(skel.terminal_value());
                Ok(PathOutcome {
                    value: f * weight,
                    bias: f.abs() * bias,
                    points: skel.points.len(),
                    breaches: skel.breaches(),
                    gen_secs: (t1 - t0).as_secs_f64(),
                    eval_secs: t1.elapsed().as_secs_f64(),
                })
            })
            .collect()
    })?;
    let outcomes: Vec<PathOutcome> = outcomes.into_iter().collect::<Result<_>>()?;
    Ok(summarize(&outcomes, seed, start, true))
}

fn summarize(outcomes: &[PathOutcome], seed: u64, start: Instant, with_bias: bool) -> McResult {
    let values: Vec<f64> = outcomes.iter().map(|o| o.value).collect();
    let (estimate, stderr) = mean_and_stderr(&values);
    let n = outcomes.len() as f64;
    let bias_bound = if with_bias {
        pairwise_sum(&outcomes.iter().map(|o| o.bias).collect::<Vec<_>>()) / n
    } else {
        f64::NAN
    };
    McResult {
        estimate,
        stderr,
        bias_bound,
        paths: outcomes.len() as u64,
        mean_skeleton_points: outcomes.iter().map(|o| o.points as u64).sum::<u64>() as f64 / n,
        depth_breaches: outcomes.iter().map(|o| o.breaches as u64).sum(),
        wall_seconds: start.elapsed().as_secs_f64(),
        skeleton_seconds: outcomes.iter().map(|o| o.gen_secs).sum(),
        weight_seconds: outcomes.iter().map(|o| o.eval_secs).sum(),
        seed,
    }
}

/// Plain discretization on the even grid `k / n_grid`; a path is killed only
/// when a grid value leaves the domain.
#[allow(clippy::too_many_arguments)]
pub fn estimate_uniform<M: LevyModel>(
    model: &M,
    domain: &Domain,
    payoff: &Payoff,
    n_grid: usize,
    n_paths: u64,
    seed: u64,
    workers: usize,
) -> Result<McResult> {
    payoff.validate()?;
    check_paths(n_paths)?;
    if n_grid == 0 {
        return Err(Error::Config("n_grid must be at least 1".into()));
    }
    let h = 1.0 / n_grid as f64;
    let start = Instant::now();
    let outcomes: Vec<PathOutcome> = with_workers(workers, || {
        (0..n_paths)
            .into_par_iter()
            .map(|k| {
                let mut rng = path_rng(seed, k);
                let t0 = Instant::now();
                let mut x = 0.0;
                let mut alive = true;
                for _ in 0..n_grid {
                    x += model.sample_increment(h, &mut rng);
                    if !domain.contains(x) {
                        alive = false;
                        break;
                    }
                }
                let value = if alive { payoff.eval(x) } else { 0.0 };
                PathOutcome {
                    value,
                    bias: 0.0,
                    points: n_grid + 1,
                    breaches: 0,
                    gen_secs: t0.elapsed().as_secs_f64(),
                    eval_secs: 0.0,
                }
            })
            .collect()
    })?;
    Ok(summarize(&outcomes, seed, start, false))
}

/// Uniform estimates on nested grids evaluated on the same paths.
///
/// Paths are simulated on the finest grid; every entry of `grids` must
/// divide it. Returns one `(estimate, stderr)` per grid, in input order.
pub fn estimate_uniform_coupled<M: LevyModel>(
    model: &M,
    domain: &Domain,
    payoff: &Payoff,
    grids: &[usize],
    n_paths: u64,
    seed: u64,
    workers: usize,
) -> Result<Vec<(f64, f64)>> {
    payoff.validate()?;
    check_paths(n_paths)?;
    let finest = grids.iter().copied().max().ok_or_else(|| Error::Config("empty grid list".into()))?;
    if grids.iter().any(|&g| g == 0 || finest % g != 0) {
        return Err(Error::Config(format!("grids {grids:?} do not nest")));
    }
    let strides: Vec<usize> = grids.iter().map(|g| finest / g).collect();
    let h = 1.0 / finest as f64;
    let rows: Vec<Vec<f64>> = with_workers(workers, || {
        (0..n_paths)
            .into_par_iter()
            .map(|k| {
                let mut rng = path_rng(seed, k);
                let mut alive = vec![true; grids.len()];
                let mut x = 0.0;
                for step in 1..=finest {
                    x += model.sample_increment(h, &mut rng);
                    if !domain.contains(x) {
                        for (a, s) in alive.iter_mut().zip(&strides) {
                            if step % s == 0 {
                                *a = false;
                            }
                        }
                        // the finest grid always sees the exit; stop once
                        // every grid has
                        if alive.iter().all(|a| !a) {
                            break;
                        }
                    }
                }
                let f = payoff.eval(x);
                alive.iter().map(|&a| if a { f } else { 0.0 }).collect()
            })
            .collect()
    })?;
    Ok((0..grids.len())
        .map(|j| {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            mean_and_stderr(&col)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    Tolerances(Vec<f64>),
    Grids(Vec<usize>),
}

impl Schedule {
    pub fn len(&self) -> usize {
        match self {
            Schedule::Tolerances(v) => v.len(),
            Schedule::Grids(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// `γ` or the grid size.
    pub parameter: f64,
    pub result: McResult,
    /// Theoretical bias (adaptive) or distance to the reference (uniform).
    pub error_proxy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `log(error_proxy)` against `log(wall_seconds)`.
    pub slope: f64,
    /// Reference used for the uniform error proxy.
    pub reference: Option<f64>,
}

/// Refinement factor of the same-path reference grid for uniform sweeps.
pub const UNIFORM_REFERENCE_FACTOR: usize = 8;

/// One result per schedule entry plus the fitted error/time slope.
///
/// For grid schedules without an explicit `reference`, the error proxy of
/// grid `n` is `|Ê_n - Ê_ref|`, both estimated on the same paths, where the
/// reference grid is `UNIFORM_REFERENCE_FACTOR` times finer than the finest
/// scheduled grid. With an explicit reference it is `|Ê_n - reference|`.
pub fn convergence_sweep<M: LevyModel + Clone>(
    cfg: &EngineConfig<M>,
    payoff: &Payoff,
    schedule: &Schedule,
    n_paths: u64,
    seed: u64,
    workers: usize,
    reference: Option<f64>,
) -> Result<SweepTable> {
    if schedule.is_empty() {
        return Err(Error::Config("sweep schedule is empty".into()));
    }
    let mut rows = Vec::with_capacity(schedule.len());
    let mut used_reference = reference;
    match schedule {
        Schedule::Tolerances(gammas) => {
            for &gamma in gammas {
                let run_cfg = EngineConfig {
                    gamma,
                    ..cfg.clone()
                };
                let result = estimate_adaptive(&run_cfg, payoff, n_paths, seed, workers)?;
                rows.push(SweepRow {
                    parameter: gamma,
                    error_proxy: result.bias_bound,
                    result,
                });
            }
        }
        Schedule::Grids(grids) => {
            // errors come from one coupled pass so that sampling noise
            // largely cancels; timings from independent runs per grid
            let mut all = grids.clone();
            let coupled_errors: Vec<f64> = match reference {
                Some(_) => Vec::new(),
                None => {
                    let finest = grids.iter().copied().max().unwrap_or(1);
                    all.push(finest * UNIFORM_REFERENCE_FACTOR);
                    let coupled = estimate_uniform_coupled(&cfg.model, &cfg.domain, payoff, &all, n_paths, seed, workers)?;
                    let reference = coupled[coupled.len() - 1].0;
                    used_reference = Some(reference);
                    coupled[..grids.len()].iter().map(|(e, _)| (e - reference).abs()).collect()
                }
            };
            for (i, &n) in grids.iter().enumerate() {
                let result = estimate_uniform(&cfg.model, &cfg.domain, payoff, n, n_paths, seed, workers)?;
                let error_proxy = match reference {
                    Some(r) => (result.estimate - r).abs(),
                    None => coupled_errors[i],
                };
                rows.push(SweepRow {
                    parameter: n as f64,
                    error_proxy,
                    result,
                });
            }
        }
    }
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.error_proxy > 0.0 && r.result.wall_seconds > 0.0)
        .map(|r| (r.result.wall_seconds.ln(), r.error_proxy.ln()))
        .collect();
    Ok(SweepTable {
        rows,
        slope: fit_slope(&points),
        reference: used_reference,
    })
}

/// Ordinary least-squares slope; NaN with fewer than two distinct abscissae.
pub fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return f64::NAN;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        f64::NAN
    } else {
        sxy / sxx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LevyModelSpec;

    fn cfg(b: f64, gamma: f64) -> EngineConfig {
        EngineConfig::new(LevyModelSpec::cauchy(1.0).unwrap(), Domain::upper(b).unwrap(), gamma).unwrap()
    }

    #[test]
    fn payoffs() {
        assert_eq!(Payoff::Indicator.eval(3.0), 1.0);
        let p = Payoff::CappedPolynomial {
            coeffs: vec![1.0, 0.0, 2.0],
            cap: 1.0,
        };
        assert_eq!(p.eval(0.5), 1.5);
        assert_eq!(p.eval(10.0), 3.0);
        assert_eq!(p.sup_abs(), 3.0);
        assert_eq!(Payoff::Put { strike: 1.0 }.eval(0.0), 0.0);
        assert!((Payoff::Put { strike: 2.0 }.eval(0.0) - 1.0).abs() < 1e-15);
        assert_eq!(Payoff::CappedCall { strike: 1.0, cap: 5.0 }.eval(10.0), 5.0);
        assert!(Payoff::Constant(f64::NAN).validate().is_err());
        assert!(Payoff::CappedPolynomial { coeffs: vec![], cap: 1.0 }.validate().is_err());
    }

    #[test]
    fn pairwise_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        assert!((pairwise_sum(&xs) - xs.iter().sum::<f64>()).abs() < 1e-10);
        let (m, s) = mean_and_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn no_barrier_means_survival() {
        let c = cfg(1e9, 0.01);
        let r = estimate_adaptive(&c, &Payoff::Indicator, 2000, 1, 2).unwrap();
        assert!((r.estimate - 1.0).abs() < 1e-6, "{r:?}");
        assert!(r.bias_bound <= 0.01);
    }

    #[test]
    fn path_count_checked() {
        let c = cfg(1.0, 0.01);
        assert!(estimate_adaptive(&c, &Payoff::Indicator, 1, 1, 1).is_err());
        let d = Domain::upper(1.0).unwrap();
        assert!(estimate_uniform(&c.model, &d, &Payoff::Indicator, 0, 10, 1, 1).is_err());
    }

    #[test]
    fn single_grid_point_sees_only_terminal_value() {
        let m = LevyModelSpec::cauchy(1.0).unwrap();
        let d = Domain::upper(1.0).unwrap();
        let r = estimate_uniform(&m, &d, &Payoff::Indicator, 1, 100_000, 3, 0).unwrap();
        let exact_terminal = m.cdf(1.0, 1.0);
        assert!((r.estimate - exact_terminal).abs() < 4.0 * r.stderr);
        assert!(r.bias_bound.is_nan());
    }

    #[test]
    fn coupled_grids_are_monotone() {
        let m = LevyModelSpec::cauchy(1.0).unwrap();
        let d = Domain::upper(0.1).unwrap();
        let est = estimate_uniform_coupled(&m, &d, &Payoff::Indicator, &[1, 4, 16, 64], 20_000, 4, 0).unwrap();
        for w in est.windows(2) {
            assert!(w[1].0 <= w[0].0, "{est:?}");
        }
        assert!(estimate_uniform_coupled(&m, &d, &Payoff::Indicator, &[3, 4], 10, 4, 0).is_err());
    }

    #[test]
    fn sweep_shapes() {
        let c = cfg(1.0, 0.1);
        let t = convergence_sweep(&c, &Payoff::Indicator, &Schedule::Tolerances(vec![0.5]), 200, 1, 1, None).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert!(t.slope.is_nan());
        assert!(convergence_sweep(&c, &Payoff::Indicator, &Schedule::Grids(vec![]), 200, 1, 1, None).is_err());
        let t = convergence_sweep(&c, &Payoff::Indicator, &Schedule::Grids(vec![2, 4]), 200, 1, 1, None).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert!(t.reference.is_some());
    }

    #[test]
    fn slope_fit() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 1.0 - 2.0 * i as f64)).collect();
        assert!((fit_slope(&pts) + 2.0).abs() < 1e-12);
        assert!(fit_slope(&pts[..1]).is_nan());
    }
}
