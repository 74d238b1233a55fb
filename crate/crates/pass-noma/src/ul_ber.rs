//! Exact analytic uplink BER of both users under imperfect SIC.
//!
//! Both users transmit Gray-coded QPSK at the same time; the base station
//! decodes UE 1 first (treating UE 2 as noise), subtracts the *detected*
//! UE 1 signal, and then decodes UE 2. A wrong first-stage decision leaves a
//! residual interference `R = s₁ − ŝ₁` drawn from a 9-element set, and the
//! UE 2 BER is obtained by total probability over `R`.
//!
//! The decoding order is fixed: callers that want the opposite order swap
//! the channel/power arguments themselves.

use crate::channel::{effective_channel, ComplexAmp, SystemGeometry, Ue};
use crate::constellation::GraySymbol;
use crate::summation::pairwise_sum;
use crate::{Error, Result};

/// Uplink link budget: linear transmit powers and the per-dimension noise
/// standard deviation (total complex noise power is `2σ²`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UlLinkConfig {
    pub p1: f64,
    pub p2: f64,
    pub sigma: f64,
}

impl UlLinkConfig {
    pub fn new(p1: f64, p2: f64, sigma: f64) -> Result<UlLinkConfig> {
        if !(p1 >= 0.0 && p1.is_finite()) || !(p2 >= 0.0 && p2.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "transmit powers must be non-negative and finite, got ({p1}, {p2})"
            )));
        }
        if sigma.is_nan() || sigma <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "noise standard deviation must be positive, got {sigma}"
            )));
        }
        Ok(UlLinkConfig { p1, p2, sigma })
    }
}

/// Residual interference `s₁ − ŝ₁` after the SIC subtraction; components are
/// restricted to {−2, 0, +2}, giving the 9-element set
/// {0, ±2, ±2j, ±2±2j}.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Residual {
    re: i8,
    im: i8,
}

impl Residual {
    pub const ZERO: Residual = Residual { re: 0, im: 0 };

    /// All nine residual values.
    pub const ALL: [Residual; 9] = {
        let mut all = [Residual::ZERO; 9];
        let vals = [-2i8, 0, 2];
        let mut i = 0;
        while i < 3 {
            let mut j = 0;
            while j < 3 {
                all[3 * i + j] = Residual {
                    re: vals[i],
                    im: vals[j],
                };
                j += 1;
            }
            i += 1;
        }
        all
    };

    pub fn new(re: i32, im: i32) -> Result<Residual> {
        if matches!(re, -2 | 0 | 2) && matches!(im, -2 | 0 | 2) {
            Ok(Residual {
                re: re as i8,
                im: im as i8,
            })
        } else {
            Err(Error::InvalidConfig(format!(
                "residual ({re}, {im}) outside {{0, ±2, ±2j, ±2±2j}}"
            )))
        }
    }

    /// Residual of a detected QPSK symbol: `s₁ − ŝ₁`.
    pub fn between(sent: &GraySymbol, detected: &GraySymbol) -> Residual {
        Residual {
            re: (sent.i_level() - detected.i_level()) as i8,
            im: (sent.q_level() - detected.q_level()) as i8,
        }
    }

    pub fn re(&self) -> i32 {
        self.re as i32
    }

    pub fn im(&self) -> i32 {
        self.im as i32
    }
}

/// Gaussian tail probability `Q(t) = ½·erfc(t/√2)`.
pub fn q_function(t: f64) -> f64 {
    0.5 * libm::erfc(t / std::f64::consts::SQRT_2)
}

fn require_qpsk(s: &GraySymbol) -> Result<()> {
    if s.order() == 4 {
        Ok(())
    } else {
        Err(Error::InvalidModulation(s.order()))
    }
}

fn require_nonzero(h: &ComplexAmp) -> Result<()> {
    if h.abs() > 0.0 {
        Ok(())
    } else {
        Err(Error::ZeroChannel)
    }
}

/// Components of `h_rot · z` where `h_rot = h · e^{−j·arg(reference)}` and
/// `z = z_re + j·z_im`.
fn rotated_product(
    h: &ComplexAmp,
    reference: &ComplexAmp,
    z_re: f64,
    z_im: f64,
) -> (f64, f64) {
    let theta = h.arg_relative_to(reference);
    let (sin, cos) = theta.sin_cos();
    let a = h.abs() * cos;
    let b = h.abs() * sin;
    (a * z_re - b * z_im, b * z_re + a * z_im)
}

/// BER of UE 1 conditioned on the transmitted pair `(s1, s2)`: the average of
/// the two per-bit tail probabilities `Q(μ/σ)`, where `μ` is the noise-free
/// decision margin of each quadrature component after derotating by
/// `arg(h̃₁)`.
pub fn ber1_conditional(
    s1: &GraySymbol,
    s2: &GraySymbol,
    h1: &ComplexAmp,
    h2: &ComplexAmp,
    cfg: &UlLinkConfig,
) -> Result<f64> {
    require_qpsk(s1)?;
    require_qpsk(s2)?;
    require_nonzero(h1)?;
    let (int_re, int_im) =
        rotated_product(h2, h1, s2.i_level() as f64, s2.q_level() as f64);
    let a = cfg.p1.sqrt() * h1.abs();
    let mu_i = a + cfg.p2.sqrt() * s1.i_level() as f64 * int_re;
    let mu_q = a + cfg.p2.sqrt() * s1.q_level() as f64 * int_im;
    Ok(0.5 * (q_function(mu_i / cfg.sigma) + q_function(mu_q / cfg.sigma)))
}

/// Unconditional BER of UE 1: the average of [`ber1_conditional`] over the 16
/// equiprobable QPSK pairs.
pub fn ber1(h1: &ComplexAmp, h2: &ComplexAmp, cfg: &UlLinkConfig) -> Result<f64> {
    let alphabet = GraySymbol::alphabet(4).expect("QPSK alphabet");
    let mut terms = Vec::with_capacity(16);
    for s1 in &alphabet {
        for s2 in &alphabet {
            terms.push(ber1_conditional(s1, s2, h1, h2, cfg)?);
        }
    }
    Ok(pairwise_sum(&terms) / 16.0)
}

/// Probability that the first detection stage outputs `ŝ₁ = c` given the
/// transmitted pair: the product of the per-axis probabilities
/// `Q(−c_axis · μ_axis / σ)`.
pub fn s1hat_detection_prob(
    c: &GraySymbol,
    s1: &GraySymbol,
    s2: &GraySymbol,
    h1: &ComplexAmp,
    h2: &ComplexAmp,
    cfg: &UlLinkConfig,
) -> Result<f64> {
    require_qpsk(c)?;
    require_qpsk(s1)?;
    require_qpsk(s2)?;
    require_nonzero(h1)?;
    let (int_re, int_im) =
        rotated_product(h2, h1, s2.i_level() as f64, s2.q_level() as f64);
    let a = cfg.p1.sqrt() * h1.abs();
    let mu_i = a * s1.i_level() as f64 + cfg.p2.sqrt() * int_re;
    let mu_q = a * s1.q_level() as f64 + cfg.p2.sqrt() * int_im;
    Ok(q_function(-(c.i_level() as f64) * mu_i / cfg.sigma)
        * q_function(-(c.q_level() as f64) * mu_q / cfg.sigma))
}

/// Probability of the residual `R = r` given the transmitted `s₂`, averaged
/// over the equiprobable `s₁`.
pub fn residual_prob(
    r: &Residual,
    s2: &GraySymbol,
    h1: &ComplexAmp,
    h2: &ComplexAmp,
    cfg: &UlLinkConfig,
) -> Result<f64> {
    let alphabet = GraySymbol::alphabet(4).expect("QPSK alphabet");
    let mut terms = Vec::with_capacity(4);
    for s1 in &alphabet {
        // At most one detected symbol produces this residual: c = s1 - r.
        let ci = s1.i_level() - r.re();
        let cq = s1.q_level() - r.im();
        if ci.abs() == 1 && cq.abs() == 1 {
            let c = GraySymbol::new(ci, cq, 4).expect("QPSK symbol");
            terms.push(s1hat_detection_prob(&c, s1, s2, h1, h2, cfg)?);
        }
    }
    Ok(pairwise_sum(&terms) / 4.0)
}

/// BER of UE 2 conditioned on its transmitted symbol and the SIC residual:
/// the average of the two per-bit tail probabilities after derotating by
/// `arg(h̃₂)`.
pub fn ber2_conditional(
    s2: &GraySymbol,
    r: &Residual,
    h1: &ComplexAmp,
    h2: &ComplexAmp,
    cfg: &UlLinkConfig,
) -> Result<f64> {
    require_qpsk(s2)?;
    require_nonzero(h2)?;
    let (res_re, res_im) = rotated_product(h1, h2, r.re() as f64, r.im() as f64);
    let b = cfg.p2.sqrt() * h2.abs();
    let mu_i = b + cfg.p1.sqrt() * s2.i_level() as f64 * res_re;
    let mu_q = b + cfg.p1.sqrt() * s2.q_level() as f64 * res_im;
    Ok(0.5 * (q_function(mu_i / cfg.sigma) + q_function(mu_q / cfg.sigma)))
}

/// Unconditional BER of UE 2 by total probability over the residual set,
/// averaged over the equiprobable `s₂`.
pub fn ber2(h1: &ComplexAmp, h2: &ComplexAmp, cfg: &UlLinkConfig) -> Result<f64> {
    require_nonzero(h1)?;
    require_nonzero(h2)?;
    let alphabet = GraySymbol::alphabet(4).expect("QPSK alphabet");
    let mut terms = Vec::with_capacity(36);
    for s2 in &alphabet {
        for r in &Residual::ALL {
            let w = residual_prob(r, s2, h1, h2, cfg)?;
            terms.push(w * ber2_conditional(s2, r, h1, h2, cfg)?);
        }
    }
    Ok(pairwise_sum(&terms) / 4.0)
}

/// Analytic BERs of both users at PA position `x`.
pub fn ul_ber_pair(
    geom: &SystemGeometry,
    x: f64,
    cfg: &UlLinkConfig,
) -> Result<(f64, f64)> {
    let h1 = effective_channel(geom, Ue::Ue1, x)?;
    let h2 = effective_channel(geom, Ue::Ue2, x)?;
    Ok((ber1(&h1, &h2, cfg)?, ber2(&h1, &h2, cfg)?))
}

/// Uplink placement cost `10·log₁₀(BER₁ + BER₂)` in dB.
///
/// The BER sum is floored at the smallest positive double so the logarithm
/// stays finite when both tail probabilities underflow.
pub fn ul_cost(x: f64, geom: &SystemGeometry, cfg: &UlLinkConfig) -> Result<f64> {
    let (b1, b2) = ul_ber_pair(geom, x, cfg)?;
    Ok(10.0 * (b1 + b2).max(f64::MIN_POSITIVE).log10())
}
