//! BER-minimizing placement optimizers.
//!
//! The uplink cost oscillates on the wavelength scale because the two UE
//! channels superimpose with position-dependent phases, so the minimizer
//! works in four stages: dense sampling, a sliding-window minimum (lower
//! envelope / morphological erosion), projected descent on the smooth
//! envelope, and a fine grid search of the true cost around the envelope
//! minimizer. The downlink cost depends on the channels only through their
//! magnitudes and is smooth, so a multi-start projected descent over
//! `(x, α)` suffices.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::SystemGeometry;
use crate::dl_ber::{dl_cost, DlLinkConfig};
use crate::ul_ber::{ul_cost, UlLinkConfig};
use crate::{Error, Result};

/// Number of best grid samples used to multi-start the envelope descent.
pub const DEFAULT_ENVELOPE_STARTS: usize = 5;

/// Default number of random restarts for the downlink joint optimizer.
pub const DEFAULT_DL_RESTARTS: u32 = 16;

/// A function sampled uniformly on `[0, step·(len−1)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledCurve {
    pub step: f64,
    pub values: Vec<f64>,
}

impl SampledCurve {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x_at(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    /// Index of the smallest sample, ties toward smaller x.
    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v < self.values[best] {
                best = i;
            }
        }
        best
    }

    /// Piecewise-linear interpolation, clamped to the domain.
    pub fn interpolate(&self, x: f64) -> f64 {
        let last = self.len() - 1;
        let t = (x / self.step).clamp(0.0, last as f64);
        let i = (t.floor() as usize).min(last - 1.min(last));
        if i + 1 > last {
            return self.values[last];
        }
        let frac = t - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }
}

/// Sliding-window specification for the lower envelope.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnvelopeSpec {
    /// Window half-width in samples; the centered window spans
    /// `2·half_width + 1` samples.
    pub half_width: usize,
}

impl EnvelopeSpec {
    /// Window width in meters for a grid of spacing `step`.
    pub fn width_m(&self, step: f64) -> f64 {
        (2 * self.half_width + 1) as f64 * step
    }
}

/// Fine-tuning grid: `2·half_count + 1` points spaced `delta` around the
/// envelope minimizer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FineTuneSpec {
    pub half_count: usize,
    pub delta: f64,
}

impl FineTuneSpec {
    /// Half-span `Δ = N·δ` in meters.
    pub fn span(&self) -> f64 {
        self.half_count as f64 * self.delta
    }
}

/// One accepted optimizer step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePoint {
    pub x: f64,
    pub alpha: Option<f64>,
    pub cost: f64,
}

/// Outcome of a placement optimization.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimResult {
    pub x_star: f64,
    pub alpha_star: Option<f64>,
    /// True cost at the optimum, in dB.
    pub cost_db: f64,
    /// Iterates of the winning descent run.
    pub trace: Vec<TracePoint>,
    pub restarts: u32,
    /// Envelope minimizer before fine-tuning (uplink only).
    pub x_smooth: Option<f64>,
    /// Raw cost samples (uplink only).
    pub samples: Option<SampledCurve>,
    /// Lower envelope of the samples (uplink only).
    pub envelope: Option<SampledCurve>,
}

/// Samples `cost` on the uniform grid `{0, T, 2T, …} ∩ [0, length]`.
/// Non-finite cost values are rejected.
pub fn sample_cost<F>(cost: F, step: f64, length: f64) -> Result<SampledCurve>
where
    F: Fn(f64) -> f64 + Sync,
{
    if !(step > 0.0 && step.is_finite() && length > 0.0 && length.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "sampling needs positive step and length, got ({step}, {length})"
        )));
    }
    let n = (length / step).floor() as usize + 1;
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| cost(i as f64 * step))
        .collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteCost(i as f64 * step));
    }
    Ok(SampledCurve { step, values })
}

/// Windowed minimum (morphological erosion) with a centered window,
/// truncated at the domain edges; linear time via a monotone deque.
pub fn moving_min(curve: &SampledCurve, env: &EnvelopeSpec) -> SampledCurve {
    let n = curve.len();
    let h = env.half_width;
    let v = &curve.values;
    let mut out = Vec::with_capacity(n);
    // Deque of indices with non-decreasing values; front is the window min.
    let mut deque: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    let mut filled = 0usize; // next index to push
    for i in 0..n {
        let hi = (i + h).min(n - 1);
        while filled <= hi {
            while deque.back().is_some_and(|&b| v[b] >= v[filled]) {
                deque.pop_back();
            }
            deque.push_back(filled);
            filled += 1;
        }
        while deque.front().is_some_and(|&f| f + h < i) {
            deque.pop_front();
        }
        out.push(v[*deque.front().expect("window never empty")]);
    }
    SampledCurve {
        step: curve.step,
        values: out,
    }
}

/// Minimizes the piecewise-linear interpolation of an envelope over its
/// domain: projected descent with a central finite difference, multi-started
/// from the `starts` best grid samples; the global grid argmin is always a
/// candidate. Returns the winning abscissa.
pub fn minimize_envelope(envelope: &SampledCurve, starts: usize) -> f64 {
    let length = envelope.x_at(envelope.len() - 1);
    let f = |x: f64| envelope.interpolate(x);

    // The `starts` smallest samples, ties toward smaller x.
    let mut order: Vec<usize> = (0..envelope.len()).collect();
    order.sort_by(|&a, &b| {
        envelope.values[a]
            .partial_cmp(&envelope.values[b])
            .unwrap()
            .then(a.cmp(&b))
    });

    let grid_best = envelope.argmin();
    let mut best_x = envelope.x_at(grid_best);
    let mut best_cost = envelope.values[grid_best];

    for &idx in order.iter().take(starts.max(1)) {
        let (x, cost) = descend_1d(&f, envelope.x_at(idx), envelope.step, length);
        if cost < best_cost - 1e-15 || (cost <= best_cost + 1e-15 && x < best_x) {
            best_x = x;
            best_cost = cost;
        }
    }
    best_x
}

/// Projected gradient descent on `[0, length]` with backtracking line
/// search; the finite-difference step is a quarter grid cell.
fn descend_1d<F>(f: &F, start: f64, step: f64, length: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let fd = step / 4.0;
    let mut x = start.clamp(0.0, length);
    let mut fx = f(x);
    for _ in 0..200 {
        let xp = (x + fd).min(length);
        let xm = (x - fd).max(0.0);
        let g = (f(xp) - f(xm)) / (xp - xm).max(f64::MIN_POSITIVE);
        if g == 0.0 {
            break;
        }
        let mut t = step;
        let mut advanced = false;
        while t > step * 1e-6 {
            let cand = (x - t * g).clamp(0.0, length);
            let fc = f(cand);
            if fc < fx - 1e-4 * t * g * g {
                x = cand;
                fx = fc;
                advanced = true;
                break;
            }
            t *= 0.5;
        }
        if !advanced {
            break;
        }
    }
    (x, fx)
}

/// Evaluates the true cost at `2N+1` uniformly spaced points centered on
/// `x_smooth` (clipped to `[0, length]`) and returns the argmin and its
/// cost. Ties go to the smaller abscissa.
pub fn fine_tune<F>(cost: F, x_smooth: f64, spec: &FineTuneSpec, length: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64 + Sync,
{
    let n = spec.half_count as i64;
    let points: Vec<f64> = (-n..=n)
        .map(|i| (x_smooth + i as f64 * spec.delta).clamp(0.0, length))
        .collect();
    let costs: Vec<f64> = points.par_iter().map(|&x| cost(x)).collect();
    let mut best = 0;
    for i in 1..points.len() {
        if costs[i] < costs[best] || (costs[i] == costs[best] && points[i] < points[best]) {
            best = i;
        }
    }
    (points[best], costs[best])
}

/// Uplink PA-position optimizer: sample, erode, descend, fine-tune.
pub fn optimize_ul(
    geom: &SystemGeometry,
    cfg: &UlLinkConfig,
    step: f64,
    env: &EnvelopeSpec,
    ft: &FineTuneSpec,
) -> Result<OptimResult> {
    let lambda = geom.wavelength();
    if step.is_nan() || step >= lambda {
        return Err(Error::InvalidConfig(format!(
            "sampling period {step} m must be below the wavelength {lambda} m"
        )));
    }
    if env.width_m(step) < 5.0 * lambda {
        return Err(Error::InvalidConfig(format!(
            "envelope window {} m must span at least 5 wavelengths",
            env.width_m(step)
        )));
    }
    if ft.delta.is_nan() || ft.delta <= 0.0 || ft.delta > lambda / 10.0 {
        return Err(Error::InvalidConfig(format!(
            "fine-tune spacing {} m must be positive and at most lambda/10",
            ft.delta
        )));
    }

    let cost = |x: f64| ul_cost(x, geom, cfg).expect("x within domain");
    let samples = sample_cost(cost, step, geom.length)?;
    let envelope = moving_min(&samples, env);
    let x_smooth = minimize_envelope(&envelope, DEFAULT_ENVELOPE_STARTS);
    let (ft_x, ft_cost) = fine_tune(cost, x_smooth, ft, geom.length);

    // The raw grid argmin is always a fallback candidate.
    let grid_idx = samples.argmin();
    let (grid_x, grid_cost) = (samples.x_at(grid_idx), samples.values[grid_idx]);
    let (x_star, cost_db) = if grid_cost < ft_cost {
        (grid_x, grid_cost)
    } else {
        (ft_x, ft_cost)
    };

    let trace = vec![
        TracePoint {
            x: x_smooth,
            alpha: None,
            cost: envelope.interpolate(x_smooth),
        },
        TracePoint {
            x: x_star,
            alpha: None,
            cost: cost_db,
        },
    ];
    Ok(OptimResult {
        x_star,
        alpha_star: None,
        cost_db,
        trace,
        restarts: 0,
        x_smooth: Some(x_smooth),
        samples: Some(samples),
        envelope: Some(envelope),
    })
}

/// Downlink joint `(x, α)` optimizer: projected descent with backtracking
/// line search from a coarse-grid warm start plus `restarts` seeded random
/// starts. Deterministic for a given seed; more restarts can only improve
/// the returned cost.
pub fn optimize_dl(
    geom: &SystemGeometry,
    cfg: &DlLinkConfig,
    restarts: u32,
    seed: u64,
) -> Result<OptimResult> {
    optimize_dl_inner(geom, cfg, None, restarts, seed)
}

/// Downlink optimizer with the power-allocation coefficient frozen.
pub fn optimize_dl_fixed_alpha(
    geom: &SystemGeometry,
    cfg: &DlLinkConfig,
    alpha: f64,
    restarts: u32,
    seed: u64,
) -> Result<OptimResult> {
    optimize_dl_inner(geom, cfg, Some(alpha), restarts, seed)
}

fn optimize_dl_inner(
    geom: &SystemGeometry,
    cfg: &DlLinkConfig,
    fixed_alpha: Option<f64>,
    restarts: u32,
    seed: u64,
) -> Result<OptimResult> {
    if let Some(a) = fixed_alpha {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::InvalidConfig(format!(
                "fixed alpha {a} outside [0, 1]"
            )));
        }
    }
    let length = geom.length;
    let cost = |x: f64, alpha: f64| dl_cost(x, alpha, geom, cfg).expect("point within box");

    // Coarse warm start.
    let nx = 41;
    let na = 21;
    let mut starts: Vec<(f64, f64)> = Vec::with_capacity(restarts as usize + 1);
    let mut warm = (0.0, fixed_alpha.unwrap_or(0.5));
    let mut warm_cost = f64::INFINITY;
    for i in 0..nx {
        let x = length * i as f64 / (nx - 1) as f64;
        match fixed_alpha {
            Some(a) => {
                let c = cost(x, a);
                if c < warm_cost {
                    warm_cost = c;
                    warm = (x, a);
                }
            }
            None => {
                for j in 0..na {
                    let a = j as f64 / (na - 1) as f64;
                    let c = cost(x, a);
                    if c < warm_cost {
                        warm_cost = c;
                        warm = (x, a);
                    }
                }
            }
        }
    }
    starts.push(warm);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = || (rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0);
    for _ in 0..restarts {
        let x = unit() * length;
        let a = match fixed_alpha {
            Some(a) => a,
            None => unit(),
        };
        starts.push((x, a));
    }

    let fd_x = geom.wavelength() / 100.0;
    let fd_a = 1e-4;
    let mut best: Option<(f64, f64, f64, Vec<TracePoint>)> = None;
    for &(x0, a0) in &starts {
        let (x, a, c, trace) = descend_2d(&cost, x0, a0, length, fd_x, fd_a, fixed_alpha);
        let better = match &best {
            None => true,
            Some((bx, ba, bc, _)) => {
                c < bc - 1e-15 || (c <= bc + 1e-15 && (x, a) < (*bx, *ba))
            }
        };
        if better {
            best = Some((x, a, c, trace));
        }
    }
    let (x_star, alpha_star, cost_db, trace) = best.expect("at least the warm start ran");
    Ok(OptimResult {
        x_star,
        alpha_star: Some(alpha_star),
        cost_db,
        trace,
        restarts,
        x_smooth: None,
        samples: None,
        envelope: None,
    })
}

/// Projected descent over the box `[0, length] × [0, 1]`.
fn descend_2d<F>(
    cost: &F,
    mut x: f64,
    mut alpha: f64,
    length: f64,
    fd_x: f64,
    fd_a: f64,
    fixed_alpha: Option<f64>,
) -> (f64, f64, f64, Vec<TracePoint>)
where
    F: Fn(f64, f64) -> f64,
{
    x = x.clamp(0.0, length);
    alpha = alpha.clamp(0.0, 1.0);
    let mut fx = cost(x, alpha);
    let mut trace = vec![TracePoint {
        x,
        alpha: Some(alpha),
        cost: fx,
    }];
    let mut step = length / 10.0;
    for _ in 0..200 {
        let xp = (x + fd_x).min(length);
        let xm = (x - fd_x).max(0.0);
        let gx = (cost(xp, alpha) - cost(xm, alpha)) / (xp - xm).max(f64::MIN_POSITIVE);
        let ga = if fixed_alpha.is_some() {
            0.0
        } else {
            let ap = (alpha + fd_a).min(1.0);
            let am = (alpha - fd_a).max(0.0);
            (cost(x, ap) - cost(x, am)) / (ap - am).max(f64::MIN_POSITIVE)
        };
        let norm2 = gx * gx + ga * ga;
        if norm2 == 0.0 {
            break;
        }
        // Scale so the first trial step moves a bounded distance.
        let gmax = gx.abs().max(ga.abs());
        let mut t = step / gmax;
        let mut advanced = false;
        for _ in 0..40 {
            let cx = (x - t * gx).clamp(0.0, length);
            let ca = if fixed_alpha.is_some() {
                alpha
            } else {
                (alpha - t * ga).clamp(0.0, 1.0)
            };
            let fc = cost(cx, ca);
            if fc < fx - 1e-4 * t * norm2 {
                let moved = (cx - x).abs().max((ca - alpha).abs());
                x = cx;
                alpha = ca;
                fx = fc;
                trace.push(TracePoint {
                    x,
                    alpha: Some(alpha),
                    cost: fx,
                });
                advanced = true;
                step = (t * gmax * 2.0).min(length / 10.0);
                if moved < 1e-10 {
                    return (x, alpha, fx, trace);
                }
                break;
            }
            t *= 0.5;
        }
        if !advanced {
            break;
        }
    }
    (x, alpha, fx, trace)
}
