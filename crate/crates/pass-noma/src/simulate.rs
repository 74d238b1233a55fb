//! Seeded Monte Carlo link-level simulator for the uplink and downlink
//! chains; the independent oracle for every analytic BER expression.
//!
//! Reproducibility contract: trials are split into fixed-size chunks and each
//! chunk draws from its own ChaCha stream keyed by `(seed, chunk index)`, so
//! serial and parallel runs produce bit-identical integer error counts. The
//! Gaussian sampler is Box–Muller over raw 53-bit uniforms, which keeps the
//! output independent of RNG-library distribution changes.

use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{effective_channel, ComplexAmp, SystemGeometry, Ue};
use crate::constellation::{axis_label, bits_per_symbol, qpsk_sign_detect_values, Axis, GraySymbol};
use crate::dl_ber::{DlAxisReceiver, DlLinkConfig};
use crate::ul_ber::{Residual, UlLinkConfig};
use crate::{Error, Result};

/// Name of the Gaussian sampling scheme, recorded in every [`SimResult`].
pub const NOISE_SAMPLER: &str = "box-muller";

/// What to simulate: a placement on a configured geometry, or explicit
/// channel coefficients.
#[derive(Clone, Copy, Debug)]
pub enum Scenario<'a> {
    UlPosition {
        geom: &'a SystemGeometry,
        cfg: &'a UlLinkConfig,
        x: f64,
    },
    UlChannels {
        h1: ComplexAmp,
        h2: ComplexAmp,
        cfg: &'a UlLinkConfig,
    },
    DlPosition {
        geom: &'a SystemGeometry,
        cfg: &'a DlLinkConfig,
        x: f64,
        alpha: f64,
    },
    DlChannels {
        h1: ComplexAmp,
        h2: ComplexAmp,
        cfg: &'a DlLinkConfig,
        alpha: f64,
    },
}

/// A complete, reproducible simulation request.
#[derive(Clone, Copy, Debug)]
pub struct SimSpec<'a> {
    pub scenario: Scenario<'a>,
    pub n_symbols: u64,
    pub seed: u64,
    /// Symbols per deterministic sub-stream.
    pub chunk: u64,
}

impl SimSpec<'_> {
    fn validate(&self) -> Result<()> {
        if self.n_symbols == 0 || self.chunk == 0 {
            return Err(Error::InvalidConfig(
                "n_symbols and chunk must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-UE bit error tallies of one simulation run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimResult {
    pub bit_errors: [u64; 2],
    pub bits: [u64; 2],
    /// Trials generated (for conditional runs this exceeds `counted`).
    pub attempted: u64,
    /// Trials that entered the tallies.
    pub counted: u64,
    pub noise_sampler: &'static str,
}

impl SimResult {
    /// Point estimate of the bit error rate of `ue`.
    pub fn ber(&self, ue: Ue) -> f64 {
        let n = self.bits[ue.slot()];
        if n == 0 {
            f64::NAN
        } else {
            self.bit_errors[ue.slot()] as f64 / n as f64
        }
    }

    /// Binomial standard error `√(p̂(1−p̂)/n)` of the estimate.
    pub fn std_err(&self, ue: Ue) -> f64 {
        let n = self.bits[ue.slot()];
        if n == 0 {
            f64::NAN
        } else {
            let p = self.ber(ue);
            (p * (1.0 - p) / n as f64).sqrt()
        }
    }
}

#[derive(Clone, Copy, Default)]
struct Tally {
    errors: [u64; 2],
    bits: [u64; 2],
    counted: u64,
}

impl Tally {
    fn merge(self, other: Tally) -> Tally {
        Tally {
            errors: [
                self.errors[0] + other.errors[0],
                self.errors[1] + other.errors[1],
            ],
            bits: [self.bits[0] + other.bits[0], self.bits[1] + other.bits[1]],
            counted: self.counted + other.counted,
        }
    }
}

/// Runs `body` over per-chunk sub-streams and merges the integer tallies;
/// the reduction is associative so thread count cannot change the result.
fn run_chunks<F>(n_symbols: u64, seed: u64, chunk: u64, body: F) -> Tally
where
    F: Fn(&mut ChaCha8Rng, u64) -> Tally + Sync,
{
    let n_chunks = n_symbols.div_ceil(chunk);
    (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(ci);
            let count = chunk.min(n_symbols - ci * chunk);
            body(&mut rng, count)
        })
        .reduce(Tally::default, Tally::merge)
}

/// Uniform double in (0, 1] from 53 random bits.
#[inline]
fn uniform_open(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / 9007199254740992.0)
}

/// One circular Gaussian sample with per-dimension standard deviation
/// `sigma`, via Box–Muller.
#[inline]
fn gaussian_pair(rng: &mut ChaCha8Rng, sigma: f64) -> (f64, f64) {
    let u1 = uniform_open(rng);
    let u2 = (rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0);
    let r = sigma * (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}

#[inline]
fn qpsk_level(bit: u64) -> f64 {
    if bit & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn ul_channels(spec: &SimSpec) -> Result<(ComplexAmp, ComplexAmp, UlLinkConfig)> {
    match spec.scenario {
        Scenario::UlPosition { geom, cfg, x } => Ok((
            effective_channel(geom, Ue::Ue1, x)?,
            effective_channel(geom, Ue::Ue2, x)?,
            *cfg,
        )),
        Scenario::UlChannels { h1, h2, cfg } => Ok((h1, h2, *cfg)),
        _ => Err(Error::ScenarioMismatch("expected an uplink scenario")),
    }
}

/// Simulates the literal uplink SIC chain: derotate by `arg(h̃₁)`,
/// sign-detect ŝ₁, subtract `√P₁·h̃₁·ŝ₁` from the received signal, derotate
/// by `arg(h̃₂)`, sign-detect ŝ₂; bit errors are counted per UE.
pub fn simulate_ul(spec: &SimSpec) -> Result<SimResult> {
    spec.validate()?;
    let (h1, h2, cfg) = ul_channels(spec)?;
    if h1.abs() == 0.0 || h2.abs() == 0.0 {
        return Err(Error::ZeroChannel);
    }
    let h1c = Complex64::from_polar(h1.abs(), h1.arg());
    let h2c = Complex64::from_polar(h2.abs(), h2.arg());
    let derot1 = Complex64::from_polar(1.0, -h1.arg());
    let derot2 = Complex64::from_polar(1.0, -h2.arg());
    let a1 = cfg.p1.sqrt();
    let a2 = cfg.p2.sqrt();

    let tally = run_chunks(spec.n_symbols, spec.seed, spec.chunk, |rng, count| {
        let mut t = Tally::default();
        for _ in 0..count {
            let bits = rng.next_u64();
            let s1 = Complex64::new(qpsk_level(bits), qpsk_level(bits >> 1));
            let s2 = Complex64::new(qpsk_level(bits >> 2), qpsk_level(bits >> 3));
            let (nr, ni) = gaussian_pair(rng, cfg.sigma);
            let y = a1 * h1c * s1 + a2 * h2c * s2 + Complex64::new(nr, ni);

            let y1 = y * derot1;
            let d1 = qpsk_sign_detect_values(y1.re, y1.im);
            let s1_hat = Complex64::new(d1.i_level() as f64, d1.q_level() as f64);

            let y2 = (y - a1 * h1c * s1_hat) * derot2;
            let d2 = qpsk_sign_detect_values(y2.re, y2.im);

            t.errors[0] += u64::from(d1.i_level() as f64 != s1.re)
                + u64::from(d1.q_level() as f64 != s1.im);
            t.errors[1] += u64::from(d2.i_level() as f64 != s2.re)
                + u64::from(d2.q_level() as f64 != s2.im);
        }
        t.bits = [2 * count, 2 * count];
        t.counted = count;
        t
    });

    Ok(SimResult {
        bit_errors: tally.errors,
        bits: tally.bits,
        attempted: spec.n_symbols,
        counted: tally.counted,
        noise_sampler: NOISE_SAMPLER,
    })
}

/// Rejection-sampled uplink trials conditioned on the transmitted `s₂` and a
/// realized residual `R = r`; estimates the conditional UE 2 BER. Trials
/// whose first stage produces a different residual are discarded.
pub fn simulate_ul_conditional(
    spec: &SimSpec,
    s2: &GraySymbol,
    r: &Residual,
) -> Result<SimResult> {
    spec.validate()?;
    if s2.order() != 4 {
        return Err(Error::InvalidModulation(s2.order()));
    }
    let (h1, h2, cfg) = ul_channels(spec)?;
    if h1.abs() == 0.0 || h2.abs() == 0.0 {
        return Err(Error::ZeroChannel);
    }
    let h1c = Complex64::from_polar(h1.abs(), h1.arg());
    let h2c = Complex64::from_polar(h2.abs(), h2.arg());
    let derot1 = Complex64::from_polar(1.0, -h1.arg());
    let derot2 = Complex64::from_polar(1.0, -h2.arg());
    let a1 = cfg.p1.sqrt();
    let a2 = cfg.p2.sqrt();
    let s2c = Complex64::new(s2.i_level() as f64, s2.q_level() as f64);
    let (r_re, r_im) = (r.re(), r.im());

    let tally = run_chunks(spec.n_symbols, spec.seed, spec.chunk, |rng, count| {
        let mut t = Tally::default();
        for _ in 0..count {
            let bits = rng.next_u64();
            let s1 = Complex64::new(qpsk_level(bits), qpsk_level(bits >> 1));
            let (nr, ni) = gaussian_pair(rng, cfg.sigma);
            let y = a1 * h1c * s1 + a2 * h2c * s2c + Complex64::new(nr, ni);

            let y1 = y * derot1;
            let d1 = qpsk_sign_detect_values(y1.re, y1.im);
            let realized_re = s1.re as i32 - d1.i_level();
            let realized_im = s1.im as i32 - d1.q_level();
            if realized_re != r_re || realized_im != r_im {
                continue;
            }

            let s1_hat = Complex64::new(d1.i_level() as f64, d1.q_level() as f64);
            let y2 = (y - a1 * h1c * s1_hat) * derot2;
            let d2 = qpsk_sign_detect_values(y2.re, y2.im);

            t.errors[1] += u64::from(d2.i_level() != s2.i_level())
                + u64::from(d2.q_level() != s2.q_level());
            t.bits[1] += 2;
            t.counted += 1;
        }
        t
    });

    Ok(SimResult {
        bit_errors: tally.errors,
        bits: tally.bits,
        attempted: spec.n_symbols,
        counted: tally.counted,
        noise_sampler: NOISE_SAMPLER,
    })
}

/// Simulates the downlink: superimposes both symbol streams with shares
/// `(α, 1−α)`, adds independent noise per UE, and runs each UE's reference
/// receiver per axis.
pub fn simulate_dl(spec: &SimSpec) -> Result<SimResult> {
    spec.validate()?;
    let (h1, h2, cfg, alpha) = match spec.scenario {
        Scenario::DlPosition {
            geom,
            cfg,
            x,
            alpha,
        } => (
            effective_channel(geom, Ue::Ue1, x)?,
            effective_channel(geom, Ue::Ue2, x)?,
            *cfg,
            alpha,
        ),
        Scenario::DlChannels { h1, h2, cfg, alpha } => (h1, h2, *cfg, alpha),
        _ => return Err(Error::ScenarioMismatch("expected a downlink scenario")),
    };
    if h1.abs() == 0.0 || h2.abs() == 0.0 {
        return Err(Error::ZeroChannel);
    }
    let cfg = cfg.with_alpha(alpha)?;
    // Each symbol draw packs four axis indices into 6-bit fields.
    for m in [cfg.m1, cfg.m2] {
        if bits_per_symbol(m) / 2 > 6 {
            return Err(Error::InvalidModulation(m));
        }
    }
    let (u1, u2) = cfg.unit_amplitudes();
    let mags = [h1.abs(), h2.abs()];
    let receivers = [
        DlAxisReceiver::new(&cfg, Ue::Ue1, mags[0]),
        DlAxisReceiver::new(&cfg, Ue::Ue2, mags[1]),
    ];
    let channels = [
        Complex64::from_polar(h1.abs(), h1.arg()),
        Complex64::from_polar(h2.abs(), h2.arg()),
    ];
    let derot = [
        Complex64::from_polar(1.0, -h1.arg()),
        Complex64::from_polar(1.0, -h2.arg()),
    ];
    let sides = [
        1u64 << (bits_per_symbol(cfg.m1) / 2),
        1u64 << (bits_per_symbol(cfg.m2) / 2),
    ];
    let level = |idx: u64, side: u64| (2 * idx as i64 - (side as i64 - 1)) as i32;
    let bits_per_ue = [
        bits_per_symbol(cfg.m1) as u64,
        bits_per_symbol(cfg.m2) as u64,
    ];
    let orders = [cfg.m1, cfg.m2];

    let tally = run_chunks(spec.n_symbols, spec.seed, spec.chunk, |rng, count| {
        let mut t = Tally::default();
        for _ in 0..count {
            let mut draw = rng.next_u64();
            let mut levels = [[0i32; 2]; 2]; // [ue][axis]
            for (ue, pair) in levels.iter_mut().enumerate() {
                for slot in pair.iter_mut() {
                    *slot = level(draw & (sides[ue] - 1), sides[ue]);
                    draw >>= 6;
                }
            }
            let s = Complex64::new(
                u1 * levels[0][0] as f64 + u2 * levels[1][0] as f64,
                u1 * levels[0][1] as f64 + u2 * levels[1][1] as f64,
            );
            for ue in 0..2 {
                let (nr, ni) = gaussian_pair(rng, cfg.sigma);
                let y = (channels[ue] * s + Complex64::new(nr, ni)) * derot[ue];
                let det_i = receivers[ue].detect(y.re);
                let det_q = receivers[ue].detect(y.im);
                let m = orders[ue];
                t.errors[ue] += u64::from(
                    (axis_label(det_i, m, Axis::I) ^ axis_label(levels[ue][0], m, Axis::I))
                        .count_ones(),
                ) + u64::from(
                    (axis_label(det_q, m, Axis::Q) ^ axis_label(levels[ue][1], m, Axis::Q))
                        .count_ones(),
                );
            }
            t.bits[0] += bits_per_ue[0];
            t.bits[1] += bits_per_ue[1];
        }
        t.counted = count;
        t
    });

    Ok(SimResult {
        bit_errors: tally.errors,
        bits: tally.bits,
        attempted: spec.n_symbols,
        counted: tally.counted,
        noise_sampler: NOISE_SAMPLER,
    })
}

/// Sample moments of the Gaussian noise source, for self-tests.
#[derive(Clone, Copy, Debug)]
pub struct NoiseMoments {
    pub n: u64,
    pub mean_re: f64,
    pub mean_im: f64,
    pub var_re: f64,
    pub var_im: f64,
}

/// Draws `n` circular Gaussian samples exactly as the simulator does and
/// reports per-dimension sample moments.
pub fn noise_moments(sigma: f64, n: u64, seed: u64, chunk: u64) -> Result<NoiseMoments> {
    if sigma.is_nan() || sigma <= 0.0 || n == 0 || chunk == 0 {
        return Err(Error::InvalidConfig(
            "noise self-test requires sigma > 0, n >= 1, chunk >= 1".into(),
        ));
    }
    let n_chunks = n.div_ceil(chunk);
    // Chunk sums are collected in order so the floating reduction is
    // identical no matter how many threads ran.
    let partials: Vec<[f64; 4]> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(ci);
            let count = chunk.min(n - ci * chunk);
            let mut s = [0.0f64; 4];
            for _ in 0..count {
                let (re, im) = gaussian_pair(&mut rng, sigma);
                s[0] += re;
                s[1] += im;
                s[2] += re * re;
                s[3] += im * im;
            }
            s
        })
        .collect();
    let mut total = [0.0f64; 4];
    for p in partials {
        for (acc, v) in total.iter_mut().zip(p) {
            *acc += v;
        }
    }
    let nf = n as f64;
    Ok(NoiseMoments {
        n,
        mean_re: total[0] / nf,
        mean_im: total[1] / nf,
        var_re: total[2] / nf - (total[0] / nf).powi(2),
        var_im: total[3] / nf - (total[1] / nf).powi(2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::reference_geometry;

    fn ul_spec<'a>(
        h1: &'a ComplexAmp,
        h2: &'a ComplexAmp,
        cfg: &'a UlLinkConfig,
        n: u64,
        seed: u64,
    ) -> SimSpec<'a> {
        SimSpec {
            scenario: Scenario::UlChannels {
                h1: *h1,
                h2: *h2,
                cfg,
            },
            n_symbols: n,
            seed,
            chunk: 1 << 14,
        }
    }

    #[test]
    fn noise_free_chain_makes_no_errors() {
        let h1 = ComplexAmp::from_polar(1.0, 0.7);
        let h2 = ComplexAmp::from_polar(0.25, -2.1);
        let cfg = UlLinkConfig::new(4.0, 0.25, 1e-12).unwrap();
        let res = simulate_ul(&ul_spec(&h1, &h2, &cfg, 100_000, 3)).unwrap();
        assert_eq!(res.bit_errors, [0, 0]);
        assert_eq!(res.bits, [200_000, 200_000]);
        assert_eq!(res.noise_sampler, "box-muller");
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let geom = reference_geometry();
        let cfg = UlLinkConfig::new(1e-3, 1e-3, 1e-6).unwrap();
        let spec = SimSpec {
            scenario: Scenario::UlPosition {
                geom: &geom,
                cfg: &cfg,
                x: 10.5,
            },
            n_symbols: 200_000,
            seed: 99,
            chunk: 4096,
        };
        let a = simulate_ul(&spec).unwrap();
        let b = simulate_ul(&spec).unwrap();
        assert_eq!(a, b);
        assert!(a.bit_errors[0] > 0, "midpoint placement should show errors");

        let dcfg = DlLinkConfig::new(1e-2, 0.9, 4, 16, 1e-6).unwrap();
        let dspec = SimSpec {
            scenario: Scenario::DlPosition {
                geom: &geom,
                cfg: &dcfg,
                x: 10.0,
                alpha: 0.9,
            },
            n_symbols: 100_000,
            seed: 7,
            chunk: 1000,
        };
        assert_eq!(simulate_dl(&dspec).unwrap(), simulate_dl(&dspec).unwrap());
    }

    #[test]
    fn scenario_mismatch_is_rejected() {
        let geom = reference_geometry();
        let dcfg = DlLinkConfig::new(1e-2, 0.9, 4, 16, 1e-6).unwrap();
        let spec = SimSpec {
            scenario: Scenario::DlPosition {
                geom: &geom,
                cfg: &dcfg,
                x: 10.0,
                alpha: 0.9,
            },
            n_symbols: 10,
            seed: 1,
            chunk: 10,
        };
        assert!(matches!(
            simulate_ul(&spec),
            Err(Error::ScenarioMismatch(_))
        ));
    }

    #[test]
    fn dl_noise_free_chain_is_clean_at_streamable_alpha() {
        let h1 = ComplexAmp::from_polar(2e-4, 0.3);
        let h2 = ComplexAmp::from_polar(1e-4, 1.1);
        let cfg = DlLinkConfig::new(1.0, 0.9, 4, 16, 1e-15).unwrap();
        let spec = SimSpec {
            scenario: Scenario::DlChannels {
                h1,
                h2,
                cfg: &cfg,
                alpha: 0.9,
            },
            n_symbols: 50_000,
            seed: 5,
            chunk: 10_000,
        };
        let res = simulate_dl(&spec).unwrap();
        assert_eq!(res.bit_errors, [0, 0]);
        assert_eq!(res.bits, [100_000, 200_000]);
    }

    #[test]
    fn conditional_zero_residual_matches_unconditional_rate_shape() {
        let h1 = ComplexAmp::from_polar(1.0, 0.2);
        let h2 = ComplexAmp::from_polar(0.4, -0.9);
        let cfg = UlLinkConfig::new(1.0, 0.3, 0.35).unwrap();
        let s2 = GraySymbol::new(1, -1, 4).unwrap();
        let spec = ul_spec(&h1, &h2, &cfg, 400_000, 11);
        let res = simulate_ul_conditional(&spec, &s2, &Residual::ZERO).unwrap();
        assert!(res.counted > 0 && res.counted < res.attempted);
        assert_eq!(res.bits[1], 2 * res.counted);
        assert!(res.ber(Ue::Ue2) > 0.0);
        assert!(res.ber(Ue::Ue1).is_nan(), "UE1 is not tallied");
    }

    #[test]
    fn standard_error_halves_when_n_quadruples() {
        let h1 = ComplexAmp::from_polar(1.0, 0.0);
        let h2 = ComplexAmp::from_polar(0.5, 1.0);
        let cfg = UlLinkConfig::new(1.0, 0.4, 0.5).unwrap();
        let small = simulate_ul(&ul_spec(&h1, &h2, &cfg, 100_000, 21)).unwrap();
        let large = simulate_ul(&ul_spec(&h1, &h2, &cfg, 400_000, 22)).unwrap();
        let ratio = large.std_err(Ue::Ue1) / small.std_err(Ue::Ue1);
        assert!((ratio - 0.5).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn noise_moments_match_configuration() {
        let m = noise_moments(2.0, 10_000_000, 42, 1 << 16).unwrap();
        let se_mean = 2.0 / (m.n as f64).sqrt();
        assert!(m.mean_re.abs() < 4.0 * se_mean, "{}", m.mean_re);
        assert!(m.mean_im.abs() < 4.0 * se_mean, "{}", m.mean_im);
        assert!((m.var_re - 4.0).abs() / 4.0 < 0.01, "{}", m.var_re);
        assert!((m.var_im - 4.0).abs() / 4.0 < 0.01, "{}", m.var_im);
    }
}
