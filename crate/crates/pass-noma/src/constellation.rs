//! Gray-coded QPSK and square M-QAM mapping, normalization, and hard
//! per-axis detection, shared by the analytic and simulation paths.
//!
//! Levels on each quadrature axis are the odd integers
//! `{±1, ±3, …, ±(√M−1)}` labeled with a binary-reflected Gray code, so
//! neighboring levels differ in exactly one bit. For QPSK the bit pairs map
//! as `(0,1) ↦ 1+j`, `(0,0) ↦ 1−j`, `(1,0) ↦ −1−j`, `(1,1) ↦ −1+j`; the
//! general mapping keeps that convention (I labels count down from the top
//! level, Q labels count up from the bottom).

use crate::channel::ComplexAmp;
use crate::{Error, Result};

/// Quadrature axis selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    I,
    Q,
}

/// One symbol of a Gray-labeled square QAM alphabet.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GraySymbol {
    i_level: i32,
    q_level: i32,
    m: u32,
}

/// Average-energy normalizer ν = 2(M−1)/3 of the unit-spaced alphabet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormFactor(f64);

impl NormFactor {
    pub fn for_order(m: u32) -> Result<NormFactor> {
        validate_order(m)?;
        Ok(NormFactor(2.0 * (m as f64 - 1.0) / 3.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Checks that `m` is a square power of two, at least 4.
pub fn validate_order(m: u32) -> Result<()> {
    if m >= 4 && m.is_power_of_two() && m.trailing_zeros().is_multiple_of(2) {
        Ok(())
    } else {
        Err(Error::InvalidModulation(m))
    }
}

/// Bits carried per symbol, log₂(M).
pub fn bits_per_symbol(m: u32) -> u32 {
    m.trailing_zeros()
}

fn side(m: u32) -> u32 {
    1 << (m.trailing_zeros() / 2)
}

fn brgc(i: u32) -> u32 {
    i ^ (i >> 1)
}

fn brgc_inverse(mut g: u32) -> u32 {
    let mut i = g;
    while g > 0 {
        g >>= 1;
        i ^= g;
    }
    i
}

/// Gray label of an axis level (ascending index 0 at the most negative
/// level; the I axis reverses the order so the QPSK table comes out right).
pub fn axis_label(level: i32, m: u32, axis: Axis) -> u32 {
    let side = side(m);
    let idx = ((level + side as i32 - 1) / 2) as u32;
    debug_assert!(idx < side);
    match axis {
        Axis::I => brgc(side - 1 - idx),
        Axis::Q => brgc(idx),
    }
}

/// Inverse of [`axis_label`].
pub fn axis_level(label: u32, m: u32, axis: Axis) -> i32 {
    let side = side(m);
    let idx = match axis {
        Axis::I => side - 1 - brgc_inverse(label),
        Axis::Q => brgc_inverse(label),
    };
    2 * idx as i32 - (side as i32 - 1)
}

/// Nearest odd level to `value/scale`, with thresholds at even multiples of
/// `scale`, ties broken toward the more positive level, and the result
/// clipped to the outermost level.
pub(crate) fn slice_axis(value: f64, m: u32, scale: f64) -> i32 {
    let top = side(m) as i32 - 1; // outermost level
    if scale.is_nan() || scale <= 0.0 {
        // Degenerate slicer: every level coincides, fall back to the sign.
        return if value >= 0.0 { 1.min(top) } else { -1.max(-top) };
    }
    let cell = (value / (2.0 * scale)).floor();
    let level = 2.0 * cell + 1.0;
    (level.max(-top as f64).min(top as f64)) as i32
}

impl GraySymbol {
    pub fn new(i_level: i32, q_level: i32, m: u32) -> Result<GraySymbol> {
        validate_order(m)?;
        let top = side(m) as i32 - 1;
        let valid = |l: i32| l.abs() <= top && l.rem_euclid(2) == 1;
        if !valid(i_level) || !valid(q_level) {
            return Err(Error::InvalidConfig(format!(
                "levels ({i_level}, {q_level}) not in the order-{m} alphabet"
            )));
        }
        Ok(GraySymbol { i_level, q_level, m })
    }

    pub fn order(&self) -> u32 {
        self.m
    }

    pub fn i_level(&self) -> i32 {
        self.i_level
    }

    pub fn q_level(&self) -> i32 {
        self.q_level
    }

    /// Gray label of the I-axis level.
    pub fn i_label(&self) -> u32 {
        axis_label(self.i_level, self.m, Axis::I)
    }

    /// Gray label of the Q-axis level.
    pub fn q_label(&self) -> u32 {
        axis_label(self.q_level, self.m, Axis::Q)
    }

    /// Bit pattern, I-axis bits first (MSB first), then Q-axis bits.
    pub fn bits(&self) -> Vec<u8> {
        let half = bits_per_symbol(self.m) / 2;
        let mut out = Vec::with_capacity(2 * half as usize);
        for k in (0..half).rev() {
            out.push(((self.i_label() >> k) & 1) as u8);
        }
        for k in (0..half).rev() {
            out.push(((self.q_label() >> k) & 1) as u8);
        }
        out
    }

    /// Bit positions that differ from `other` (same order required).
    pub fn bit_errors_against(&self, other: &GraySymbol) -> u32 {
        debug_assert_eq!(self.m, other.m);
        (self.i_label() ^ other.i_label()).count_ones()
            + (self.q_label() ^ other.q_label()).count_ones()
    }

    /// Symbol energy |s|² on the unit-spaced grid.
    pub fn energy(&self) -> f64 {
        (self.i_level * self.i_level + self.q_level * self.q_level) as f64
    }

    /// Every symbol of the order-`m` alphabet, I varying slowest.
    pub fn alphabet(m: u32) -> Result<Vec<GraySymbol>> {
        validate_order(m)?;
        let side = side(m) as i32;
        let mut out = Vec::with_capacity(m as usize);
        for i in 0..side {
            for q in 0..side {
                out.push(GraySymbol {
                    i_level: 2 * i - (side - 1),
                    q_level: 2 * q - (side - 1),
                    m,
                });
            }
        }
        Ok(out)
    }
}

/// Maps `log₂(M)` bits onto a Gray symbol; the first half of the bits drives
/// the I axis, the second half the Q axis.
pub fn modulate(bits: &[u8], m: u32) -> Result<GraySymbol> {
    validate_order(m)?;
    let n = bits_per_symbol(m) as usize;
    if bits.len() != n {
        return Err(Error::BitCount {
            expected: n,
            got: bits.len(),
            m,
        });
    }
    let half = n / 2;
    let pack = |chunk: &[u8]| -> u32 {
        chunk.iter().fold(0u32, |acc, &b| (acc << 1) | (b as u32 & 1))
    };
    let i_label = pack(&bits[..half]);
    let q_label = pack(&bits[half..]);
    Ok(GraySymbol {
        i_level: axis_level(i_label, m, Axis::I),
        q_level: axis_level(q_label, m, Axis::Q),
        m,
    })
}

/// Minimum-distance hard decision of `y` against the order-`m` alphabet with
/// per-level amplitude `scale`.
pub fn demodulate_hard(y: ComplexAmp, m: u32, scale: f64) -> Result<GraySymbol> {
    validate_order(m)?;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "slicer scale must be positive, got {scale}"
        )));
    }
    Ok(GraySymbol {
        i_level: slice_axis(y.re(), m, scale),
        q_level: slice_axis(y.im(), m, scale),
        m,
    })
}

/// QPSK decision by quadrant: `sgn(Re) + j·sgn(Im)` with `sgn(0) = +1`.
pub fn qpsk_sign_detect(y: ComplexAmp) -> GraySymbol {
    qpsk_sign_detect_values(y.re(), y.im())
}

/// Same decision applied to raw quadrature components.
pub fn qpsk_sign_detect_values(re: f64, im: f64) -> GraySymbol {
    GraySymbol {
        i_level: if re >= 0.0 { 1 } else { -1 },
        q_level: if im >= 0.0 { 1 } else { -1 },
        m: 4,
    }
}
