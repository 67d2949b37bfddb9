//! Adaptive dyadic path skeletons.
//!
//! Starting from the terminal value `X_1`, every interval whose exit-bound
//! `e_p` exceeds `γ·ΔT` is split at its midpoint, with the midpoint drawn
//! from the bridge law of its bracketing pair. Sweeps run left to right until
//! one adds nothing or a point leaves the domain.

use std::cmp::Ordering;
use std::io::{self, Write};

use rand::Rng;

use crate::bridge::sample_bridge_midpoint;
use crate::error::{Error, Result};
use crate::exit::{exit_estimate, Domain};
use crate::model::{LevyModel, LevyModelSpec};

pub const DEFAULT_MAX_DEPTH: u32 = 40;

/// A time `num / 2^depth` in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DyadicTime {
    num: u64,
    depth: u32,
}

impl DyadicTime {
    pub const ZERO: DyadicTime = DyadicTime { num: 0, depth: 0 };
    pub const ONE: DyadicTime = DyadicTime { num: 1, depth: 0 };

    pub fn new(num: u64, depth: u32) -> Self {
        assert!(depth <= 62, "dyadic depth {depth} too large");
        if num == 0 {
            return Self::ZERO;
        }
        let shift = num.trailing_zeros().min(depth);
        Self {
            num: num >> shift,
            depth: depth - shift,
        }
    }

    pub fn numerator(&self) -> u64 {
        self.num
    }

    pub fn denominator(&self) -> u64 {
        1u64 << self.depth
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Exact for every depth up to 52.
    pub fn as_f64(&self) -> f64 {
        self.num as f64 * (-(self.depth as f64)).exp2()
    }

    pub fn midpoint(lo: DyadicTime, hi: DyadicTime) -> DyadicTime {
        let d = lo.depth.max(hi.depth);
        let l = lo.num << (d - lo.depth);
        let h = hi.num << (d - hi.depth);
        DyadicTime::new(l + h, d + 1)
    }
}

impl Ord for DyadicTime {
    fn cmp(&self, other: &Self) -> Ordering {
        let l = (self.num as u128) << other.depth;
        let r = (other.num as u128) << self.depth;
        l.cmp(&r)
    }
}

impl PartialOrd for DyadicTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkeletonPoint {
    pub time: DyadicTime,
    pub value: f64,
    /// The interval to the right of this point hit the depth cap with its
    /// error bound still above `γ·ΔT`.
    pub breached: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub points: Vec<SkeletonPoint>,
    /// Some value lies outside the domain.
    pub exited: bool,
}

impl Skeleton {
    pub fn breaches(&self) -> usize {
        self.points.iter().filter(|p| p.breached).count()
    }

    pub fn times(&self) -> impl Iterator<Item = DyadicTime> + '_ {
        self.points.iter().map(|p| p.time)
    }

    pub fn terminal_value(&self) -> f64 {
        self.points.last().map(|p| p.value).unwrap_or(0.0)
    }

    /// Consecutive `(x, y, Δt)` triples.
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.points
            .windows(2)
            .map(|w| (w[0].value, w[1].value, w[1].time.as_f64() - w[0].time.as_f64()))
    }

    /// Debug dump: rows `path_id,time_num,time_den,value`.
    pub fn write_csv<W: Write>(&self, path_id: u64, out: &mut W) -> io::Result<()> {
        for p in &self.points {
            writeln!(out, "{},{},{},{:e}", path_id, p.time.numerator(), p.time.denominator(), p.value)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig<M = LevyModelSpec> {
    /// Bias tolerance `γ`.
    pub gamma: f64,
    pub max_depth: u32,
    pub domain: Domain,
    pub model: M,
}

impl<M: LevyModel> EngineConfig<M> {
    pub fn new(model: M, domain: Domain, gamma: f64) -> Result<Self> {
        let cfg = Self {
            gamma,
            max_depth: DEFAULT_MAX_DEPTH,
            domain,
            model,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_max_depth(mut self, max_depth: u32) -> Result<Self> {
        self.max_depth = max_depth;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::Config(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.max_depth == 0 || self.max_depth > 52 {
            return Err(Error::Config(format!("max_depth must lie in 1..=52, got {}", self.max_depth)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
struct Node {
    point: SkeletonPoint,
    // interval to the right already accepted
    settled: bool,
}

/// Generates one skeleton. Draw order: `X_1` first, then midpoints in sweep order.
pub fn generate_skeleton<M: LevyModel, R: Rng + ?Sized>(cfg: &EngineConfig<M>, rng: &mut R) -> Result<Skeleton> {
    let domain = &cfg.domain;
    let x1 = cfg.model.sample_increment(1.0, rng);
    let node = |time, value| Node {
        point: SkeletonPoint {
            time,
            value,
            breached: false,
        },
        settled: false,
    };
    let mut nodes = vec![node(DyadicTime::ZERO, 0.0), node(DyadicTime::ONE, x1)];
    let mut exited = !domain.contains(x1);

    while !exited {
        let mut next = Vec::with_capacity(2 * nodes.len());
        let mut added = false;
        let mut i = 0;
        while i + 1 < nodes.len() {
            let mut left = nodes[i];
            let right = nodes[i + 1];
            i += 1;
            if left.settled {
                next.push(left);
                continue;
            }
            let (t0, t1) = (left.point.time, right.point.time);
            let dt = t1.as_f64() - t0.as_f64();
            let est = exit_estimate(&cfg.model, domain, left.point.value, right.point.value, dt)?;
            if est.e_p <= cfg.gamma * dt {
                left.settled = true;
                next.push(left);
                continue;
            }
            if t0.depth().max(t1.depth()) >= cfg.max_depth {
                left.settled = true;
                left.point.breached = true;
                next.push(left);
                continue;
            }
            next.push(left);
            let drawn = sample_bridge_midpoint(&cfg.model, dt, right.point.value - left.point.value, rng)?;
            let value = left.point.value + drawn.value;
            next.push(node(DyadicTime::midpoint(t0, t1), value));
            added = true;
            if !domain.contains(value) {
                exited = true;
                break;
            }
        }
        next.extend_from_slice(&nodes[i..]);
        nodes = next;
        if !added {
            break;
        }
    }

    Ok(Skeleton {
        points: nodes.into_iter().map(|n| n.point).collect(),
        exited,
    })
}

/// `∏ (1 - p̃)` over consecutive pairs; 0 for exited skeletons.
pub fn survival_weight<M: LevyModel>(skel: &Skeleton, cfg: &EngineConfig<M>) -> Result<f64> {
    if skel.exited {
        return Ok(0.0);
    }
    let mut w = 1.0;
    for (x, y, dt) in skel.intervals() {
        w *= 1.0 - exit_estimate(&cfg.model, &cfg.domain, x, y, dt)?.p_tilde;
    }
    Ok(w)
}

/// A-posteriori bias of one path: `Σ e_p` over its intervals; 0 when exited.
pub fn bias_contribution<M: LevyModel>(skel: &Skeleton, cfg: &EngineConfig<M>) -> Result<f64> {
    sum_interval_bounds(skel, |x, y, dt| Ok(exit_estimate(&cfg.model, &cfg.domain, x, y, dt)?.e_p))
}

pub(crate) fn sum_interval_bounds<F>(skel: &Skeleton, mut bound: F) -> Result<f64>
where
    F: FnMut(f64, f64, f64) -> Result<f64>,
{
    if skel.exited {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (x, y, dt) in skel.intervals() {
        total += bound(x, y, dt)?;
    }
    Ok(total)
}

/// Weight and bias together, one exit estimate per interval.
pub fn evaluate_skeleton<M: LevyModel>(skel: &Skeleton, cfg: &EngineConfig<M>) -> Result<(f64, f64)> {
    if skel.exited {
        return Ok((0.0, 0.0));
    }
    let mut weight = 1.0;
    let mut bias = 0.0;
    for (x, y, dt) in skel.intervals() {
        let est = exit_estimate(&cfg.model, &cfg.domain, x, y, dt)?;
        weight *= 1.0 - est.p_tilde;
        bias += est.e_p;
    }
    Ok((weight, bias))
}

/// Independent post-hoc check of the skeleton invariants.
pub fn verify_skeleton<M: LevyModel>(skel: &Skeleton, cfg: &EngineConfig<M>) -> std::result::Result<(), String> {
    let pts = &skel.points;
    if pts.len() < 2 {
        return Err("fewer than two points".into());
    }
    if pts[0].time != DyadicTime::ZERO || pts[0].value != 0.0 {
        return Err("skeleton does not start at (0, 0)".into());
    }
    if pts[pts.len() - 1].time != DyadicTime::ONE {
        return Err("skeleton does not end at time 1".into());
    }
    for p in pts {
        let t = p.time;
        if t.depth() > cfg.max_depth {
            return Err(format!("time {}/{} deeper than max_depth", t.numerator(), t.denominator()));
        }
        if t.depth() > 0 && t.numerator() % 2 == 0 {
            return Err("time not in lowest terms".into());
        }
        if (t.as_f64() * t.denominator() as f64) != t.numerator() as f64 {
            return Err("time not exactly representable".into());
        }
    }
    for w in pts.windows(2) {
        if w[0].time >= w[1].time || w[0].time.as_f64() >= w[1].time.as_f64() {
            return Err("times not strictly increasing".into());
        }
    }
    let outside = pts.iter().any(|p| !cfg.domain.contains(p.value));
    if outside != skel.exited {
        return Err(format!("exit flag {} disagrees with values", skel.exited));
    }
    if skel.exited {
        return Ok(());
    }
    for w in pts.windows(2) {
        let dt = w[1].time.as_f64() - w[0].time.as_f64();
        let e = exit_estimate(&cfg.model, &cfg.domain, w[0].value, w[1].value, dt).map_err(|e| e.to_string())?;
        if e.e_p > cfg.gamma * dt && !w[0].breached {
            return Err(format!("interval at {} violates e_p ≤ γΔT ({} > {})", w[0].time.as_f64(), e.e_p, cfg.gamma * dt));
        }
    }
    Ok(())
}
