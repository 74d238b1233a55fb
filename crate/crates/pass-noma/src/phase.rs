//! Compensated phase bookkeeping in units of carrier cycles.
//!
//! At tens of GHz a propagation path spans thousands of wavelengths, so a
//! phase accumulated in raw radians loses exactly the fractional part that
//! decides between constructive and destructive interference. Phases are
//! therefore carried as cycle counts in double-double precision and turned
//! into radians only after reduction.

use std::f64::consts::TAU;

/// Phase in cycles (1 cycle = 2π rad), stored as an unevaluated `hi + lo`
/// sum with `|lo|` below one ulp of `hi`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct Cycles {
    hi: f64,
    lo: f64,
}

impl Cycles {
    pub const ZERO: Cycles = Cycles { hi: 0.0, lo: 0.0 };

    /// Cycle count of a path of `length` at the given `wavelength`, with the
    /// division error recovered through an FMA residual.
    pub fn from_path(length: f64, wavelength: f64) -> Cycles {
        let hi = length / wavelength;
        let residual = (-hi).mul_add(wavelength, length);
        renorm(hi, residual / wavelength)
    }

    /// Conversion from a plain radian angle (already small, e.g. from atan2).
    pub fn from_radians(theta: f64) -> Cycles {
        renorm(theta / TAU, 0.0)
    }

    pub fn neg(self) -> Cycles {
        Cycles {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    pub fn add(self, other: Cycles) -> Cycles {
        let (s, e) = two_sum(self.hi, other.hi);
        renorm(s, e + self.lo + other.lo)
    }

    pub fn sub(self, other: Cycles) -> Cycles {
        self.add(other.neg())
    }

    /// Phase reduced to (−π, π] radians.
    pub fn reduced_radians(self) -> f64 {
        // `hi - round(hi)` is exact (Sterbenz); fold the compensation in and
        // wrap once more in case it pushed the value across a half cycle.
        let (mut frac, mut err) = two_sum(self.hi - self.hi.round(), self.lo);
        if frac > 0.5 || (frac == 0.5 && err > 0.0) {
            let (f, e) = two_sum(frac - 1.0, err);
            frac = f;
            err = e;
        } else if frac < -0.5 || (frac == -0.5 && err <= 0.0) {
            let (f, e) = two_sum(frac + 1.0, err);
            frac = f;
            err = e;
        }
        frac.mul_add(TAU, err * TAU)
    }
}

/// Knuth's branch-free exact addition.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Fast renormalization; valid because every call site has `|lo| << |hi|`.
fn renorm(hi: f64, lo: f64) -> Cycles {
    let s = hi + lo;
    let e = lo - (s - hi);
    Cycles { hi: s, lo: e }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn integer_cycles_reduce_to_zero() {
        // Power-of-two wavelength keeps n·λ exactly representable.
        let wl = 0.0078125;
        for n in [1u32, 7, 1234, 999_983] {
            let c = Cycles::from_path(n as f64 * wl, wl);
            assert!(
                c.reduced_radians().abs() < 1e-12,
                "n={n}: {}",
                c.reduced_radians()
            );
        }
    }

    #[test]
    fn half_cycle_maps_to_pi_not_minus_pi() {
        let c = Cycles::from_path(1.5, 1.0);
        assert_eq!(c.reduced_radians(), PI);
        let m = Cycles::from_path(1.5, 1.0).neg();
        assert_eq!(m.reduced_radians(), PI);
    }

    #[test]
    fn difference_of_large_counts_keeps_small_phase() {
        // 2500.25 - 2500.0 cycles = quarter cycle
        let a = Cycles::from_path(2500.25, 1.0);
        let b = Cycles::from_path(2500.0, 1.0);
        let d = a.sub(b).reduced_radians();
        assert!((d - PI / 2.0).abs() < 1e-13, "{d}");
    }

    #[test]
    fn matches_exact_rational_reduction() {
        // Cross-check the compensated reduction against exact integer
        // arithmetic on the bit patterns of the operands.
        let wavelength = 299_792_458.0 / 28.0e9;
        for k in 1..200u32 {
            let length = 0.137 * k as f64 + 3.0;
            let got = Cycles::from_path(length, wavelength).reduced_radians();
            let want = exact_reduced(length, wavelength);
            let mut diff = (got - want).abs();
            if diff > PI {
                diff = TAU - diff;
            }
            assert!(diff < 1e-12, "k={k}: got {got}, want {want}");
        }
    }

    /// Exact `2π · frac(length/wavelength)` via integer arithmetic on the
    /// IEEE-754 representations, independent of the compensated path.
    fn exact_reduced(length: f64, wavelength: f64) -> f64 {
        let (ma, ea) = decompose(length);
        let (mb, eb) = decompose(wavelength);
        // length/wavelength = (ma/mb) * 2^(ea-eb)
        let shift = ea - eb;
        let (num, den) = if shift >= 0 {
            ((ma as u128) << shift, mb as u128)
        } else {
            (ma as u128, (mb as u128) << (-shift))
        };
        let rem = num % den;
        let frac = rem as f64 / den as f64; // in [0, 1)
        let wrapped = if frac > 0.5 { frac - 1.0 } else { frac };
        wrapped * TAU
    }

    fn decompose(x: f64) -> (u64, i32) {
        assert!(x > 0.0 && x.is_finite());
        let bits = x.to_bits();
        let exp = ((bits >> 52) & 0x7ff) as i32;
        let frac = bits & ((1u64 << 52) - 1);
        assert!(exp > 0, "subnormals not handled");
        (frac | (1u64 << 52), exp - 1075)
    }
}
