//! Exact analytic downlink BER for Gray square-QAM superposition coding with
//! imperfect SIC, expressed as a signed sum of Q-functions.
//!
//! The base station superimposes both users' symbols with power shares `α`
//! and `1−α`; each UE derotates its observation, which turns detection into
//! two independent per-axis problems. The reference receiver is:
//!
//! * the UE with the **larger** power share slices its own symbol directly,
//!   treating the other signal as noise;
//! * the UE with the smaller share first slices the high-power symbol,
//!   subtracts its reconstruction, and then slices its own (imperfect SIC —
//!   the subtracted symbol may be wrong).
//!
//! Per axis this receiver is a piecewise-constant map of one
//! Gaussian-contaminated real observation, so every bit-decision region is a
//! finite union of intervals and the exact bit error probability is a signed
//! sum of `Q((boundary − noiseless)/σ)` terms. [`QCoefficients::generate`]
//! enumerates those regions and merges duplicate terms with exact integer
//! weights; no closed-form table is copied in.

use std::collections::BTreeMap;

use crate::channel::{effective_channel, SystemGeometry, Ue};
use crate::constellation::{
    axis_label, bits_per_symbol, slice_axis, validate_order, Axis, NormFactor,
};
use crate::summation::pairwise_sum;
use crate::ul_ber::q_function;
use crate::{Error, Result};

/// Downlink link budget: total PA power, power-allocation coefficient `α`
/// (UE 1's share), per-user modulation orders, and per-dimension noise std.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DlLinkConfig {
    pub p_t: f64,
    pub alpha: f64,
    pub m1: u32,
    pub m2: u32,
    pub sigma: f64,
    nu1: NormFactor,
    nu2: NormFactor,
}

impl DlLinkConfig {
    pub fn new(p_t: f64, alpha: f64, m1: u32, m2: u32, sigma: f64) -> Result<DlLinkConfig> {
        if !(p_t >= 0.0 && p_t.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "total power must be non-negative and finite, got {p_t}"
            )));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidConfig(format!(
                "power allocation coefficient must lie in [0, 1], got {alpha}"
            )));
        }
        if sigma.is_nan() || sigma <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "noise standard deviation must be positive, got {sigma}"
            )));
        }
        Ok(DlLinkConfig {
            p_t,
            alpha,
            m1,
            m2,
            sigma,
            nu1: NormFactor::for_order(m1)?,
            nu2: NormFactor::for_order(m2)?,
        })
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<DlLinkConfig> {
        DlLinkConfig::new(self.p_t, alpha, self.m1, self.m2, self.sigma)
    }

    pub fn with_power(&self, p_t: f64) -> Result<DlLinkConfig> {
        DlLinkConfig::new(p_t, self.alpha, self.m1, self.m2, self.sigma)
    }

    pub fn nu(&self, ue: Ue) -> f64 {
        match ue {
            Ue::Ue1 => self.nu1.value(),
            Ue::Ue2 => self.nu2.value(),
        }
    }

    pub fn order(&self, ue: Ue) -> u32 {
        match ue {
            Ue::Ue1 => self.m1,
            Ue::Ue2 => self.m2,
        }
    }

    /// The UE whose allocated share is larger decodes directly; ties go to
    /// UE 1, matching the convention that `α` is UE 1's share.
    pub fn direct_ue(&self) -> Ue {
        if self.alpha >= 0.5 {
            Ue::Ue1
        } else {
            Ue::Ue2
        }
    }

    /// The other UE performs SIC.
    pub fn sic_ue(&self) -> Ue {
        self.direct_ue().other()
    }

    /// Per-unit-level amplitudes `√(P_T·α/ν₁)` and `√(P_T·(1−α)/ν₂)` at unit
    /// channel gain.
    pub fn unit_amplitudes(&self) -> (f64, f64) {
        (
            (self.p_t * self.alpha / self.nu1.value()).sqrt(),
            (self.p_t * (1.0 - self.alpha) / self.nu2.value()).sqrt(),
        )
    }
}

/// Per-axis reference receiver of one UE, shared verbatim by the analytic
/// coefficient generator and the Monte Carlo simulator.
#[derive(Clone, Copy, Debug)]
pub struct DlAxisReceiver {
    owner: Ue,
    direct: Ue,
    /// Axis amplitude per unit level of s₁/s₂ as seen by `owner`.
    amp: [f64; 2],
    order: [u32; 2],
}

impl DlAxisReceiver {
    /// Receiver of `owner` whose channel has magnitude `channel_mag`.
    pub fn new(cfg: &DlLinkConfig, owner: Ue, channel_mag: f64) -> DlAxisReceiver {
        let (u1, u2) = cfg.unit_amplitudes();
        DlAxisReceiver {
            owner,
            direct: cfg.direct_ue(),
            amp: [u1 * channel_mag, u2 * channel_mag],
            order: [cfg.m1, cfg.m2],
        }
    }

    fn amp_of(&self, ue: Ue) -> f64 {
        self.amp[ue.slot()]
    }

    fn order_of(&self, ue: Ue) -> u32 {
        self.order[ue.slot()]
    }

    /// Detected axis level of the owner's own symbol from one quadrature
    /// component of the derotated observation.
    pub fn detect(&self, y: f64) -> i32 {
        let own = self.owner;
        if own == self.direct {
            slice_axis(y, self.order_of(own), self.amp_of(own))
        } else {
            let first = self.direct;
            let head = slice_axis(y, self.order_of(first), self.amp_of(first));
            let residual = y - self.amp_of(first) * head as f64;
            slice_axis(residual, self.order_of(own), self.amp_of(own))
        }
    }
}

/// One term of the Q-sum: weight `c` (an exact rational
/// `weight_num / weight_den` of the parent expansion) applied to
/// `Q(√P_T·|h̃|·(a1·√(α/ν₁) + a2·√((1−α)/ν₂))/σ)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QTerm {
    pub a1: i64,
    pub a2: i64,
    pub weight_num: i64,
}

/// Signed Q-function expansion of one UE's downlink BER.
#[derive(Clone, Debug, PartialEq)]
pub struct QCoefficients {
    pub ue: Ue,
    pub terms: Vec<QTerm>,
    pub weight_den: i64,
}

/// A decision boundary together with its integer identity
/// `value = amp1·g1 + amp2·g2`.
#[derive(Clone, Copy, Debug)]
struct Breakpoint {
    value: f64,
    g1: i64,
    g2: i64,
}

fn axis_levels(m: u32) -> Vec<i32> {
    let side = 1i32 << (bits_per_symbol(m) / 2);
    (0..side).map(|i| 2 * i - (side - 1)).collect()
}

/// Interior slicer thresholds in level units: even integers between the
/// outermost levels.
fn slicer_thresholds(m: u32) -> Vec<i64> {
    let side = 1i64 << (bits_per_symbol(m) / 2);
    (1..side).map(|i| 2 * i - side).collect()
}

impl QCoefficients {
    /// Enumerates the reference receiver's per-axis decision regions and
    /// collapses the per-bit error probabilities into a merged Q-sum with
    /// exact rational weights.
    pub fn generate(cfg: &DlLinkConfig, ue: Ue) -> Result<QCoefficients> {
        validate_order(cfg.m1)?;
        validate_order(cfg.m2)?;
        let (amp1, amp2) = cfg.unit_amplitudes();
        let receiver = DlAxisReceiver::new(cfg, ue, 1.0);
        let levels1 = axis_levels(cfg.m1);
        let levels2 = axis_levels(cfg.m2);
        let m_own = cfg.order(ue);
        let bits_per_axis = bits_per_symbol(m_own) / 2;

        let breakpoints = Self::breakpoints(cfg, ue, amp1, amp2);
        let reps = representatives(&breakpoints);
        let detected: Vec<i32> = reps.iter().map(|&y| receiver.detect(y)).collect();

        // Key normalization: a coefficient multiplying a zero amplitude is
        // reported as zero so degenerate shares (alpha = 0 or 1) collapse to
        // the single-user expansion.
        let key = |a1: i64, a2: i64| -> (i64, i64) {
            (
                if amp1 == 0.0 { 0 } else { a1 },
                if amp2 == 0.0 { 0 } else { a2 },
            )
        };

        let mut acc: BTreeMap<(i64, i64), i64> = BTreeMap::new();
        for axis in [Axis::I, Axis::Q] {
            for &u in &levels1 {
                for &v in &levels2 {
                    let true_level = match ue {
                        Ue::Ue1 => u,
                        Ue::Ue2 => v,
                    };
                    let true_label = axis_label(true_level, m_own, axis);
                    for bit in 0..bits_per_axis {
                        let true_bit = (true_label >> bit) & 1;
                        for (k, &det) in detected.iter().enumerate() {
                            let det_bit = (axis_label(det, m_own, axis) >> bit) & 1;
                            if det_bit == true_bit {
                                continue;
                            }
                            // Error interval k spans (bp[k-1], bp[k]).
                            let left = k.checked_sub(1).map(|i| breakpoints[i]);
                            let right = breakpoints.get(k).copied();
                            match (left, right) {
                                (Some(l), _) => {
                                    *acc.entry(key(l.g1 - u as i64, l.g2 - v as i64))
                                        .or_insert(0) += 1;
                                    if let Some(r) = right {
                                        *acc.entry(key(r.g1 - u as i64, r.g2 - v as i64))
                                            .or_insert(0) -= 1;
                                    }
                                }
                                // Left tail: P(y < t) = Q((m0 − t)/σ).
                                (None, Some(r)) => {
                                    *acc.entry(key(u as i64 - r.g1, v as i64 - r.g2))
                                        .or_insert(0) += 1;
                                }
                                (None, None) => unreachable!("alphabet has no thresholds"),
                            }
                        }
                    }
                }
            }
        }

        let weight_den =
            (levels1.len() * levels2.len() * bits_per_symbol(m_own) as usize) as i64;
        let terms: Vec<QTerm> = acc
            .into_iter()
            .filter(|&(_, w)| w != 0)
            .map(|((a1, a2), weight_num)| QTerm { a1, a2, weight_num })
            .collect();
        let coeffs = QCoefficients {
            ue,
            terms,
            weight_den,
        };
        debug_assert_eq!(
            coeffs.weight_sum_exact(),
            (coeffs.weight_den, coeffs.weight_den),
            "weights must sum to exactly one"
        );
        Ok(coeffs)
    }

    /// Decision boundaries of the reference receiver for the analyzed UE, in
    /// `(amp1, amp2)` units, sorted and deduplicated.
    fn breakpoints(cfg: &DlLinkConfig, ue: Ue, amp1: f64, amp2: f64) -> Vec<Breakpoint> {
        let direct = cfg.direct_ue();
        let amp_of = |u: Ue| if u == Ue::Ue1 { amp1 } else { amp2 };
        let ident = |u: Ue, g: i64| if u == Ue::Ue1 { (g, 0) } else { (0, g) };

        let mut bps: Vec<Breakpoint> = Vec::new();
        if ue == direct {
            for t in slicer_thresholds(cfg.order(ue)) {
                let (g1, g2) = ident(ue, t);
                bps.push(Breakpoint {
                    value: amp_of(ue) * t as f64,
                    g1,
                    g2,
                });
            }
        } else {
            let first = direct;
            let m_first = cfg.order(first);
            let a_first = amp_of(first);
            for t in slicer_thresholds(m_first) {
                let (g1, g2) = ident(first, t);
                bps.push(Breakpoint {
                    value: a_first * t as f64,
                    g1,
                    g2,
                });
            }
            // Second-stage thresholds inside each first-stage cell.
            let side_first = 1i64 << (bits_per_symbol(m_first) / 2);
            for head in axis_levels(m_first) {
                let lo = if head as i64 == -(side_first - 1) {
                    f64::NEG_INFINITY
                } else {
                    a_first * (head - 1) as f64
                };
                let hi = if head as i64 == side_first - 1 {
                    f64::INFINITY
                } else {
                    a_first * (head + 1) as f64
                };
                for t in slicer_thresholds(cfg.order(ue)) {
                    let value = a_first * head as f64 + amp_of(ue) * t as f64;
                    if value > lo && value < hi {
                        let (f1, f2) = ident(first, head as i64);
                        let (o1, o2) = ident(ue, t);
                        bps.push(Breakpoint {
                            value,
                            g1: f1 + o1,
                            g2: f2 + o2,
                        });
                    }
                }
            }
        }
        bps.sort_by(|a, b| {
            a.value
                .partial_cmp(&b.value)
                .unwrap()
                .then(a.g1.cmp(&b.g1))
                .then(a.g2.cmp(&b.g2))
        });
        // Coinciding boundaries carry interchangeable identities at this
        // configuration; keep the first.
        bps.dedup_by(|a, b| a.value == b.value);
        bps
    }

    /// Exact rational sum of the weights, as `(numerator, denominator)`.
    pub fn weight_sum_exact(&self) -> (i64, i64) {
        (
            self.terms.iter().map(|t| t.weight_num).sum(),
            self.weight_den,
        )
    }

    /// Evaluates the expansion at channel magnitude `|h̃|`.
    pub fn evaluate(&self, cfg: &DlLinkConfig, channel_mag: f64) -> f64 {
        let (u1, u2) = cfg.unit_amplitudes();
        let den = self.weight_den as f64;
        let terms: Vec<f64> = self
            .terms
            .iter()
            .map(|t| {
                let k = t.a1 as f64 * u1 + t.a2 as f64 * u2;
                t.weight_num as f64 / den * q_function(channel_mag * k / cfg.sigma)
            })
            .collect();
        pairwise_sum(&terms)
    }
}

/// Free-function form of [`QCoefficients::generate`].
pub fn generate_q_coefficients(cfg: &DlLinkConfig, ue: Ue) -> Result<QCoefficients> {
    QCoefficients::generate(cfg, ue)
}

/// Representative points, one inside each interval of the partition.
fn representatives(bps: &[Breakpoint]) -> Vec<f64> {
    if bps.is_empty() {
        return vec![0.0];
    }
    let first = bps[0].value;
    let last = bps[bps.len() - 1].value;
    let pad = 1.0 + 0.5 * (last - first).abs();
    let mut reps = Vec::with_capacity(bps.len() + 1);
    reps.push(first - pad);
    for w in bps.windows(2) {
        reps.push(0.5 * (w[0].value + w[1].value));
    }
    reps.push(last + pad);
    reps
}

/// Exact downlink BER of UE `k` with the PA at `x` and UE 1 share `alpha`
/// (overriding the value carried in `cfg`).
pub fn dl_ber(
    k: Ue,
    x: f64,
    alpha: f64,
    geom: &SystemGeometry,
    cfg: &DlLinkConfig,
) -> Result<f64> {
    let cfg = cfg.with_alpha(alpha)?;
    let h = effective_channel(geom, k, x)?;
    Ok(dl_ber_for_magnitude(&cfg, k, h.abs()))
}

/// Downlink BER as a function of the channel magnitude alone.
pub fn dl_ber_for_magnitude(cfg: &DlLinkConfig, k: Ue, channel_mag: f64) -> f64 {
    let coeffs = QCoefficients::generate(cfg, k).expect("validated config");
    coeffs.evaluate(cfg, channel_mag)
}

/// Downlink placement/allocation cost `10·log₁₀(BER₁ + BER₂)` in dB.
///
/// The BER sum is floored at the smallest positive double so the logarithm
/// stays finite when both tail probabilities underflow.
pub fn dl_cost(
    x: f64,
    alpha: f64,
    geom: &SystemGeometry,
    cfg: &DlLinkConfig,
) -> Result<f64> {
    let b1 = dl_ber(Ue::Ue1, x, alpha, geom, cfg)?;
    let b2 = dl_ber(Ue::Ue2, x, alpha, geom, cfg)?;
    Ok(10.0 * (b1 + b2).max(f64::MIN_POSITIVE).log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(p_t: f64, alpha: f64, m1: u32, m2: u32, sigma: f64) -> DlLinkConfig {
        DlLinkConfig::new(p_t, alpha, m1, m2, sigma).unwrap()
    }

    #[test]
    fn validation() {
        assert!(DlLinkConfig::new(1.0, 1.1, 4, 16, 1.0).is_err());
        assert!(DlLinkConfig::new(1.0, 0.5, 8, 16, 1.0).is_err());
        assert!(DlLinkConfig::new(-1.0, 0.5, 4, 16, 1.0).is_err());
        assert!(DlLinkConfig::new(1.0, 0.5, 4, 16, 0.0).is_err());
        assert!(DlLinkConfig::new(0.0, 0.0, 4, 4, 1.0).is_ok());
    }

    #[test]
    fn sic_side_assignment() {
        assert_eq!(cfg(1.0, 0.9, 4, 16, 1.0).direct_ue(), Ue::Ue1);
        assert_eq!(cfg(1.0, 0.9, 4, 16, 1.0).sic_ue(), Ue::Ue2);
        assert_eq!(cfg(1.0, 0.1, 4, 16, 1.0).direct_ue(), Ue::Ue2);
        // tie resolves to UE 1 as the high-power side
        assert_eq!(cfg(1.0, 0.5, 4, 16, 1.0).direct_ue(), Ue::Ue1);
    }

    #[test]
    fn receiver_decodes_noise_free_composite() {
        // alpha = 0.9, M1 = 4, M2 = 16: all 8 x 8 per-axis composites are
        // uniquely decodable for any positive channel gain.
        let c = cfg(2.0, 0.9, 4, 16, 1.0);
        for mag in [1.0, 0.0371, 250.0] {
            let rx1 = DlAxisReceiver::new(&c, Ue::Ue1, mag);
            let rx2 = DlAxisReceiver::new(&c, Ue::Ue2, mag);
            let (u1, u2) = c.unit_amplitudes();
            for s1 in axis_levels(4) {
                for s2 in axis_levels(16) {
                    let y = mag * (u1 * s1 as f64 + u2 * s2 as f64);
                    assert_eq!(rx1.detect(y), s1, "UE1 at ({s1}, {s2})");
                    assert_eq!(rx2.detect(y), s2, "UE2 at ({s1}, {s2})");
                }
            }
        }
    }

    #[test]
    fn degenerate_shares_reduce_to_plain_slicing() {
        // alpha = 1: UE 1 sees plain QPSK slicing
        let c = cfg(1.0, 1.0, 4, 16, 1.0);
        let rx = DlAxisReceiver::new(&c, Ue::Ue1, 1.0);
        let (u1, _) = c.unit_amplitudes();
        for s1 in axis_levels(4) {
            assert_eq!(rx.detect(u1 * s1 as f64), s1);
        }
        // alpha = 0: UE 2 sees plain 16-QAM slicing
        let c = cfg(1.0, 0.0, 4, 16, 1.0);
        let rx = DlAxisReceiver::new(&c, Ue::Ue2, 1.0);
        let (_, u2) = c.unit_amplitudes();
        for s2 in axis_levels(16) {
            assert_eq!(rx.detect(u2 * s2 as f64), s2);
        }
    }

    #[test]
    fn full_share_is_single_qpsk_term() {
        let c = cfg(3.0, 1.0, 4, 16, 0.5);
        let q = QCoefficients::generate(&c, Ue::Ue1).unwrap();
        assert_eq!(q.terms.len(), 1);
        assert_eq!(q.terms[0], QTerm { a1: 1, a2: 0, weight_num: q.weight_den });
        // evaluates to Q(sqrt(P_T / nu1) |h| / sigma) with nu1 = 2
        let mag = 0.8;
        let expect = q_function((3.0f64 / 2.0).sqrt() * mag / 0.5);
        assert!((q.evaluate(&c, mag) - expect).abs() < 1e-15);
    }

    #[test]
    fn weights_sum_to_one_exactly() {
        for (m1, m2) in [(4u32, 4u32), (4, 16), (16, 4), (16, 16), (4, 64)] {
            for alpha in [0.0, 0.17, 0.5, 0.62, 0.9, 1.0] {
                let c = cfg(1.7, alpha, m1, m2, 0.3);
                for ue in Ue::BOTH {
                    let q = QCoefficients::generate(&c, ue).unwrap();
                    assert_eq!(
                        q.weight_sum_exact(),
                        (q.weight_den, q.weight_den),
                        "M=({m1},{m2}) alpha={alpha} {ue:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn infinite_noise_gives_half() {
        let c = cfg(5.0, 0.8, 4, 16, 1e300);
        for ue in Ue::BOTH {
            let b = dl_ber_for_magnitude(&c, ue, 1e-4);
            assert!((b - 0.5).abs() < 1e-12, "{ue:?}: {b}");
        }
    }

    #[test]
    fn ber_monotone_in_power_at_streamable_alpha() {
        let mut prev = [1.0, 1.0];
        for p_dbm in [0, 5, 10, 15, 20, 25, 30] {
            let p = 10f64.powf((p_dbm as f64 - 30.0) / 10.0);
            let c = cfg(p, 0.9, 4, 16, 1e-6);
            for ue in Ue::BOTH {
                let b = dl_ber_for_magnitude(&c, ue, 1e-4);
                assert!(b > 0.0 && b <= 0.5 + 1e-12);
                assert!(
                    b <= prev[ue.slot()] + 1e-15,
                    "{ue:?} at {p_dbm} dBm: {b} vs {}",
                    prev[ue.slot()]
                );
                prev[ue.slot()] = b;
            }
        }
    }

    #[test]
    fn cost_is_log_sum() {
        let geom = crate::channel::reference_geometry();
        let c = cfg(0.1, 0.9, 4, 16, 1e-6);
        let b1 = dl_ber(Ue::Ue1, 10.0, 0.9, &geom, &c).unwrap();
        let b2 = dl_ber(Ue::Ue2, 10.0, 0.9, &geom, &c).unwrap();
        let cost = dl_cost(10.0, 0.9, &geom, &c).unwrap();
        assert!((cost - 10.0 * (b1 + b2).log10()).abs() < 1e-12);
    }
}
