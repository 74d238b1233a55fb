//! Shared helpers for the integration and acceptance suites: the reference
//! deployment, statistical bounds, a quadrature-based Gaussian oracle that
//! avoids the production erfc path, and exact-rational phase reduction.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pass_noma::channel::{SystemGeometry, Ue, UePosition};
use pass_noma::constellation::{axis_label, bits_per_symbol, Axis};
use pass_noma::dl_ber::{DlAxisReceiver, DlLinkConfig};

/// Per-dimension noise standard deviation for a −90 dBm per-dimension
/// variance.
pub const SIGMA: f64 = 1e-6;

/// 20 m waveguide at 3 m height, 28 GHz, 0.1 dB/m, n_eff = 1.4, UEs at
/// (3, −1) and (18, 3).
pub fn reference_geometry() -> SystemGeometry {
    SystemGeometry::new(
        20.0,
        3.0,
        [
            UePosition { x: 3.0, y: -1.0 },
            UePosition { x: 18.0, y: 3.0 },
        ],
        28.0e9,
        0.1,
        1.4,
    )
    .unwrap()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Binomial three-sigma agreement bound with the standard error taken from
/// the analytic probability (the null hypothesis).
pub fn within_3_se(analytic: f64, sim_errors: u64, sim_bits: u64) -> Option<f64> {
    let n = sim_bits as f64;
    let se = (analytic * (1.0 - analytic) / n).sqrt();
    let sim = sim_errors as f64 / n;
    let diff = (analytic - sim).abs();
    if diff <= 3.0 * se + 1e-15 {
        None
    } else {
        Some(diff / se.max(1e-300))
    }
}

// ---------------------------------------------------------------------------
// Seeded uniform/Gaussian draws for test-side mini simulations
// ---------------------------------------------------------------------------

pub struct TestRng(pub ChaCha8Rng);

impl TestRng {
    pub fn new(seed: u64) -> TestRng {
        TestRng(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// One circular Gaussian sample with per-dimension std `sigma`.
    pub fn gaussian_pair(&mut self, sigma: f64) -> (f64, f64) {
        let u1 = ((self.0.next_u64() >> 11) + 1) as f64 * (1.0 / 9007199254740992.0);
        let u2 = self.uniform();
        let r = sigma * (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        (r * c, r * s)
    }
}

// ---------------------------------------------------------------------------
// Quadrature oracle for Gaussian interval masses (no erfc anywhere)
// ---------------------------------------------------------------------------

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn simpson_step(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// One panel: endpoints, their values, and the midpoint value.
#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    fm: f64,
}

fn adaptive_simpson_rec(f: &dyn Fn(f64) -> f64, p: Panel, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (p.a + p.b);
    let flm = f(0.5 * (p.a + m));
    let frm = f(0.5 * (m + p.b));
    let left_panel = Panel { a: p.a, fa: p.fa, b: m, fb: p.fm, fm: flm };
    let right_panel = Panel { a: m, fa: p.fm, b: p.b, fb: p.fb, fm: frm };
    let left = simpson_step(p.a, p.fa, m, p.fm, flm);
    let right = simpson_step(m, p.fm, p.b, p.fb, frm);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        left + right + (left + right - whole) / 15.0
    } else {
        adaptive_simpson_rec(f, left_panel, left, tol / 2.0, depth - 1)
            + adaptive_simpson_rec(f, right_panel, right, tol / 2.0, depth - 1)
    }
}

pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    let panel = Panel {
        a,
        fa: f(a),
        b,
        fb: f(b),
        fm: f(0.5 * (a + b)),
    };
    let whole = simpson_step(panel.a, panel.fa, panel.b, panel.fb, panel.fm);
    adaptive_simpson_rec(f, panel, whole, tol, 48)
}

/// Standard normal mass of [a, b] by quadrature; tails beyond ±14 are below
/// 1e−43 and dropped.
pub fn normal_mass(a: f64, b: f64) -> f64 {
    let lo = a.max(-14.0);
    let hi = b.min(14.0);
    if lo >= hi {
        return 0.0;
    }
    adaptive_simpson(&std_normal_pdf, lo, hi, 1e-14)
}

fn side(m: u32) -> i64 {
    1i64 << (bits_per_symbol(m) / 2)
}

fn axis_levels(m: u32) -> Vec<i32> {
    let s = side(m);
    (0..s).map(|i| (2 * i - (s - 1)) as i32).collect()
}

fn interior_thresholds(m: u32) -> Vec<i64> {
    let s = side(m);
    (1..s).map(|i| 2 * i - s).collect()
}

/// Decision boundaries of the reference receiver of `ue`, derived here from
/// first principles (independent of the production enumeration).
pub fn oracle_thresholds(cfg: &DlLinkConfig, ue: Ue, mag: f64) -> Vec<f64> {
    let (u1, u2) = cfg.unit_amplitudes();
    let amp = |u: Ue| match u {
        Ue::Ue1 => u1 * mag,
        Ue::Ue2 => u2 * mag,
    };
    let mut out: Vec<f64> = Vec::new();
    if ue == cfg.direct_ue() {
        for t in interior_thresholds(cfg.order(ue)) {
            out.push(amp(ue) * t as f64);
        }
    } else {
        let first = cfg.direct_ue();
        let a_first = amp(first);
        for t in interior_thresholds(cfg.order(first)) {
            out.push(a_first * t as f64);
        }
        let s_first = side(cfg.order(first));
        for head in axis_levels(cfg.order(first)) {
            let lo = if head as i64 == -(s_first - 1) {
                f64::NEG_INFINITY
            } else {
                a_first * (head - 1) as f64
            };
            let hi = if head as i64 == s_first - 1 {
                f64::INFINITY
            } else {
                a_first * (head + 1) as f64
            };
            for t in interior_thresholds(cfg.order(ue)) {
                let v = a_first * head as f64 + amp(ue) * t as f64;
                if v > lo && v < hi {
                    out.push(v);
                }
            }
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup();
    out
}

/// Per-bit conditional error probability of the reference receiver by
/// Gaussian quadrature over its enumerated decision intervals.
pub fn dl_bit_error_quadrature(
    cfg: &DlLinkConfig,
    ue: Ue,
    mag: f64,
    axis: Axis,
    bit: u32,
    s1_level: i32,
    s2_level: i32,
) -> f64 {
    let thresholds = oracle_thresholds(cfg, ue, mag);
    let receiver = DlAxisReceiver::new(cfg, ue, mag);
    let (u1, u2) = cfg.unit_amplitudes();
    let m0 = mag * (u1 * s1_level as f64 + u2 * s2_level as f64);
    let m_own = cfg.order(ue);
    let true_level = match ue {
        Ue::Ue1 => s1_level,
        Ue::Ue2 => s2_level,
    };
    let true_bit = (axis_label(true_level, m_own, axis) >> bit) & 1;

    let mut total = 0.0;
    let n = thresholds.len();
    for k in 0..=n {
        let lo = if k == 0 {
            f64::NEG_INFINITY
        } else {
            thresholds[k - 1]
        };
        let hi = if k == n { f64::INFINITY } else { thresholds[k] };
        let rep = if lo.is_infinite() {
            hi - 1.0 - hi.abs()
        } else if hi.is_infinite() {
            lo + 1.0 + lo.abs()
        } else {
            0.5 * (lo + hi)
        };
        let det = receiver.detect(rep);
        if (axis_label(det, m_own, axis) >> bit) & 1 != true_bit {
            total += normal_mass((lo - m0) / cfg.sigma, (hi - m0) / cfg.sigma);
        }
    }
    total
}

/// Average BER of `ue` by quadrature over all symbols, axes, and bits.
pub fn dl_ber_quadrature(cfg: &DlLinkConfig, ue: Ue, mag: f64) -> f64 {
    let l1 = axis_levels(cfg.m1);
    let l2 = axis_levels(cfg.m2);
    let m_own = cfg.order(ue);
    let per_axis_bits = bits_per_symbol(m_own) / 2;
    let mut total = 0.0;
    let mut count = 0u64;
    for axis in [Axis::I, Axis::Q] {
        for &u in &l1 {
            for &v in &l2 {
                for bit in 0..per_axis_bits {
                    total += dl_bit_error_quadrature(cfg, ue, mag, axis, bit, u, v);
                    count += 1;
                }
            }
        }
    }
    total / count as f64
}

// ---------------------------------------------------------------------------
// Exact-rational phase reduction (independent of the compensated path)
// ---------------------------------------------------------------------------

fn decompose(x: f64) -> (BigInt, i64) {
    assert!(x > 0.0 && x.is_finite());
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    assert!(exp > 0, "subnormals not handled");
    (BigInt::from(frac | (1u64 << 52)), exp - 1075)
}

/// Exact `frac(a/b + c/d)` in [0, 1) for positive finite doubles, using
/// integer arithmetic on the IEEE-754 representations.
pub fn exact_frac_of_ratio_sum(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let (ma, ea) = decompose(a);
    let (mb, eb) = decompose(b);
    let (mc, ec) = decompose(c);
    let (md, ed) = decompose(d);
    // a/b = ma/mb * 2^(ea-eb), c/d = mc/md * 2^(ec-ed)
    // Put both over the denominator mb*md with a common power of two.
    let e1 = ea - eb;
    let e2 = ec - ed;
    let shift = (-e1).max(-e2).max(0);
    let num1 = (&ma * &md) << ((e1 + shift) as usize);
    let num2 = (&mc * &mb) << ((e2 + shift) as usize);
    let den = (&mb * &md) << (shift as usize);
    let num = num1 + num2;
    let rem = ((num % &den) + &den) % &den;
    // rem/den in [0,1) to ~2^-80 precision
    let scaled: BigInt = (rem << 80u32) / den;
    scaled.to_f64().unwrap() / 2f64.powi(80)
}
