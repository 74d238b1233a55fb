//! Geometric channel model: spherical-wave UE↔PA link, in-waveguide
//! propagation loss, and their product.
//!
//! The base station feeds a dielectric waveguide of length `L` mounted `d`
//! meters above the user plane; the pinching antenna (PA) radiates at a
//! configurable point `x` along it. The UE↔PA segment follows the
//! spherical-wave model (amplitude `η / distance`, phase set by the path
//! length in carrier wavelengths) and the in-waveguide segment attenuates by
//! `κ` dB/m with phase set by the guided wavelength `λ/n_eff`.

use crate::phase::Cycles;
use crate::{Error, Result};

/// Speed of light in vacuum (m/s), fixed for reproducibility.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// One of the two served users.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ue {
    Ue1,
    Ue2,
}

impl Ue {
    pub const BOTH: [Ue; 2] = [Ue::Ue1, Ue::Ue2];

    /// One-based user index as used in configuration files.
    pub fn from_index(k: usize) -> Result<Ue> {
        match k {
            1 => Ok(Ue::Ue1),
            2 => Ok(Ue::Ue2),
            other => Err(Error::InvalidUser(other)),
        }
    }

    pub fn index(self) -> usize {
        match self {
            Ue::Ue1 => 1,
            Ue::Ue2 => 2,
        }
    }

    /// Zero-based position for array storage.
    pub fn slot(self) -> usize {
        self.index() - 1
    }

    pub fn other(self) -> Ue {
        match self {
            Ue::Ue1 => Ue::Ue2,
            Ue::Ue2 => Ue::Ue1,
        }
    }
}

/// Planar UE coordinates in meters; the user plane sits at z = 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UePosition {
    pub x: f64,
    pub y: f64,
}

/// Waveguide and deployment geometry shared by every link calculation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemGeometry {
    /// Waveguide length (m). The PA activation point lives in `[0, length]`.
    pub length: f64,
    /// Waveguide height above the user plane (m).
    pub height: f64,
    /// UE positions, indexed by [`Ue`].
    pub ue: [UePosition; 2],
    /// Carrier frequency (Hz).
    pub carrier_hz: f64,
    /// Average in-waveguide attenuation (dB/m).
    pub attenuation_db_per_m: f64,
    /// Effective refractive index of the dielectric (≥ 1).
    pub n_eff: f64,
}

impl SystemGeometry {
    pub fn new(
        length: f64,
        height: f64,
        ue: [UePosition; 2],
        carrier_hz: f64,
        attenuation_db_per_m: f64,
        n_eff: f64,
    ) -> Result<SystemGeometry> {
        let geom = SystemGeometry {
            length,
            height,
            ue,
            carrier_hz,
            attenuation_db_per_m,
            n_eff,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidGeometry(msg));
        if !(self.length > 0.0 && self.length.is_finite()) {
            return fail(format!("waveguide length must be positive, got {}", self.length));
        }
        if !(self.height >= 0.0 && self.height.is_finite()) {
            return fail(format!("height must be non-negative, got {}", self.height));
        }
        if !(self.carrier_hz > 0.0 && self.carrier_hz.is_finite()) {
            return fail(format!("carrier frequency must be positive, got {}", self.carrier_hz));
        }
        if !(self.attenuation_db_per_m >= 0.0 && self.attenuation_db_per_m.is_finite()) {
            return fail(format!(
                "attenuation must be non-negative, got {}",
                self.attenuation_db_per_m
            ));
        }
        if !(self.n_eff >= 1.0 && self.n_eff.is_finite()) {
            return fail(format!("effective refractive index must be >= 1, got {}", self.n_eff));
        }
        for (k, pos) in self.ue.iter().enumerate() {
            if !(pos.x.is_finite() && pos.y.is_finite()) {
                return fail(format!("UE {} coordinates must be finite", k + 1));
            }
            // With d = 0 and y_k = 0 the PA could coincide with the UE and the
            // spherical model would blow up.
            if self.height == 0.0 && pos.y == 0.0 {
                return fail(format!(
                    "UE {} lies on the waveguide axis (d = 0 and y = 0)",
                    k + 1
                ));
            }
        }
        Ok(())
    }

    /// Free-space wavelength λ = c / f_c (m).
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Guided wavelength λ_g = λ / n_eff (m).
    pub fn guided_wavelength(&self) -> f64 {
        self.wavelength() / self.n_eff
    }

    /// Spherical-wave amplitude constant η = c / (4π f_c) (m).
    pub fn eta(&self) -> f64 {
        SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * self.carrier_hz)
    }
}

/// Dimensionless complex baseband coefficient.
///
/// Stored in polar form with the phase kept as an unreduced cycle count, so
/// products of long-path factors never lose the fractional cycle; the angle
/// is reduced to (−π, π] only in the accessors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexAmp {
    mag: f64,
    cycles: Cycles,
}

impl ComplexAmp {
    pub const ONE: ComplexAmp = ComplexAmp {
        mag: 1.0,
        cycles: Cycles::ZERO,
    };

    pub fn from_re_im(re: f64, im: f64) -> ComplexAmp {
        ComplexAmp {
            mag: re.hypot(im),
            cycles: Cycles::from_radians(im.atan2(re)),
        }
    }

    pub fn from_polar(mag: f64, angle_rad: f64) -> ComplexAmp {
        debug_assert!(mag >= 0.0);
        ComplexAmp {
            mag,
            cycles: Cycles::from_radians(angle_rad),
        }
    }

    pub(crate) fn from_polar_cycles(mag: f64, cycles: Cycles) -> ComplexAmp {
        ComplexAmp { mag, cycles }
    }

    /// Magnitude |z| ≥ 0.
    pub fn abs(&self) -> f64 {
        self.mag
    }

    /// Principal angle in (−π, π].
    pub fn arg(&self) -> f64 {
        self.cycles.reduced_radians()
    }

    /// Angle of `self · e^{−j·arg(other)}`, reduced to (−π, π], computed from
    /// the unreduced cycle counts so that nearby long paths cancel exactly.
    pub fn arg_relative_to(&self, other: &ComplexAmp) -> f64 {
        self.cycles.sub(other.cycles).reduced_radians()
    }

    pub fn re(&self) -> f64 {
        self.mag * self.arg().cos()
    }

    pub fn im(&self) -> f64 {
        self.mag * self.arg().sin()
    }
}

impl std::ops::Mul for ComplexAmp {
    type Output = ComplexAmp;

    fn mul(self, rhs: ComplexAmp) -> ComplexAmp {
        ComplexAmp {
            mag: self.mag * rhs.mag,
            cycles: self.cycles.add(rhs.cycles),
        }
    }
}

/// Straight-line distance between UE `k` and the PA activated at `x`.
pub fn ue_pa_distance(geom: &SystemGeometry, k: Ue, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite("PA position"));
    }
    let pos = geom.ue[k.slot()];
    let dx = pos.x - x;
    Ok((dx * dx + pos.y * pos.y + geom.height * geom.height).sqrt())
}

/// Spherical-wave channel between UE `k` and a PA at `x`: magnitude
/// `η / distance`, phase `−2π · distance / λ`.
pub fn spherical_channel(geom: &SystemGeometry, k: Ue, x: f64) -> Result<ComplexAmp> {
    let distance = ue_pa_distance(geom, k, x)?;
    let cycles = Cycles::from_path(distance, geom.wavelength()).neg();
    Ok(ComplexAmp::from_polar_cycles(geom.eta() / distance, cycles))
}

/// In-waveguide propagation factor from the feed at `x = 0` to the PA at `x`:
/// magnitude `10^(−κ·x/20)`, phase `−2π · x / λ_g`.
pub fn waveguide_loss(geom: &SystemGeometry, x: f64) -> Result<ComplexAmp> {
    if !x.is_finite() {
        return Err(Error::NonFinite("PA position"));
    }
    if x < 0.0 || x > geom.length {
        return Err(Error::OutsideWaveguide {
            x,
            length: geom.length,
        });
    }
    let mag = 10f64.powf(-geom.attenuation_db_per_m * x / 20.0);
    let cycles = Cycles::from_path(x, geom.guided_wavelength()).neg();
    Ok(ComplexAmp::from_polar_cycles(mag, cycles))
}

/// End-to-end channel between UE `k` and the BS via a PA at `x`.
pub fn effective_channel(geom: &SystemGeometry, k: Ue, x: f64) -> Result<ComplexAmp> {
    Ok(waveguide_loss(geom, x)? * spherical_channel(geom, k, x)?)
}

/// Deployment used throughout the test suite: 20 m waveguide at 3 m height,
/// 28 GHz carrier, 0.1 dB/m attenuation, n_eff = 1.4, users at (3, −1) and
/// (18, 3).
#[cfg(test)]
pub(crate) fn reference_geometry() -> SystemGeometry {
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_examples() {
        let geom = reference_geometry();
        // sqrt((3-3)^2 + 1 + 9) = sqrt(10)
        let d = ue_pa_distance(&geom, Ue::Ue1, 3.0).unwrap();
        assert!((d - 10f64.sqrt()).abs() < 1e-12);
        // sqrt(18^2 + 9 + 9) = sqrt(342)
        let d = ue_pa_distance(&geom, Ue::Ue2, 0.0).unwrap();
        assert!((d - 342f64.sqrt()).abs() < 1e-12);
        // y = 0: only the height term survives
        let mut flat = geom;
        flat.ue[0].y = 0.0;
        let d = ue_pa_distance(&flat, Ue::Ue1, 3.0).unwrap();
        assert!((d - 3.0).abs() < 1e-15);
    }

    #[test]
    fn distance_rejects_bad_input() {
        let geom = reference_geometry();
        assert!(matches!(
            ue_pa_distance(&geom, Ue::Ue1, f64::NAN),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(Ue::from_index(3), Err(Error::InvalidUser(3))));
        assert!(matches!(Ue::from_index(0), Err(Error::InvalidUser(0))));
        assert_eq!(Ue::from_index(2).unwrap(), Ue::Ue2);
    }

    #[test]
    fn spherical_channel_magnitude_and_eta() {
        let geom = reference_geometry();
        // eta = c / (4 pi f_c), evaluated directly
        let eta = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * 28.0e9);
        assert!((geom.eta() - eta).abs() < 1e-18);
        assert!((eta - 8.520_259_212_923e-4).abs() < 1e-15);

        // unit distance => magnitude eta
        let mut g = geom;
        g.height = 1.0;
        g.ue[0] = UePosition { x: 5.0, y: 0.0 };
        let h = spherical_channel(&g, Ue::Ue1, 5.0).unwrap();
        assert!((h.abs() - eta).abs() < 1e-18);
    }

    #[test]
    fn full_wavelength_has_zero_phase() {
        let geom = reference_geometry();
        let mut g = geom;
        g.height = geom.wavelength();
        g.ue[0] = UePosition { x: 5.0, y: 0.0 };
        let h = spherical_channel(&g, Ue::Ue1, 5.0).unwrap();
        assert!(h.arg().abs() < 1e-12, "{}", h.arg());

        let wl = waveguide_loss(&g, g.guided_wavelength()).unwrap();
        assert!(wl.arg().abs() < 1e-12, "{}", wl.arg());
    }

    #[test]
    fn waveguide_loss_examples() {
        let geom = reference_geometry();
        let at_feed = waveguide_loss(&geom, 0.0).unwrap();
        assert_eq!(at_feed.abs(), 1.0);
        assert_eq!(at_feed.arg(), 0.0);

        let ten = waveguide_loss(&geom, 10.0).unwrap();
        assert!((ten.abs() - 10f64.powf(-0.05)).abs() < 1e-15);
        assert!((ten.abs() - 0.891_250_938_133_745_6).abs() < 1e-15);

        assert!(matches!(
            waveguide_loss(&geom, -0.1),
            Err(Error::OutsideWaveguide { .. })
        ));
        assert!(matches!(
            waveguide_loss(&geom, 20.1),
            Err(Error::OutsideWaveguide { .. })
        ));
    }

    #[test]
    fn effective_channel_is_product() {
        let geom = reference_geometry();
        let x = 10.0;
        let h = effective_channel(&geom, Ue::Ue1, x).unwrap();
        let sph = spherical_channel(&geom, Ue::Ue1, x).unwrap();
        let wl = waveguide_loss(&geom, x).unwrap();
        assert!((h.abs() - sph.abs() * wl.abs()).abs() < 1e-20);
        // |h| = 0.89125 * eta / dist for the x = 10 UE1 case
        let dist = ue_pa_distance(&geom, Ue::Ue1, x).unwrap();
        let expect = 10f64.powf(-0.05) * geom.eta() / dist;
        assert!((h.abs() - expect).abs() < 1e-18);
        // phases add modulo 2 pi
        let sum = sph.arg() + wl.arg();
        let wrapped = (sum - h.arg()).rem_euclid(std::f64::consts::TAU);
        assert!(
            wrapped < 1e-9 || (std::f64::consts::TAU - wrapped) < 1e-9,
            "{wrapped}"
        );
    }

    #[test]
    fn waveguide_magnitude_monotone_in_x() {
        let geom = reference_geometry();
        let mut prev = f64::INFINITY;
        for i in 0..=200 {
            let x = geom.length * i as f64 / 200.0;
            let m = waveguide_loss(&geom, x).unwrap().abs();
            assert!(m <= prev + 1e-18);
            prev = m;
        }
    }

    #[test]
    fn geometry_validation() {
        let good = reference_geometry();
        assert!(good.validate().is_ok());

        let mut bad = good;
        bad.length = 0.0;
        assert!(bad.validate().is_err());

        let mut bad = good;
        bad.n_eff = 0.9;
        assert!(bad.validate().is_err());

        let mut bad = good;
        bad.height = 0.0;
        bad.ue[1].y = 0.0;
        assert!(bad.validate().is_err());

        // UEs may lie outside [0, L] along x
        let mut ok = good;
        ok.ue[0].x = -5.0;
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn from_re_im_round_trips() {
        let z = ComplexAmp::from_re_im(0.9, -0.3);
        assert!((z.re() - 0.9).abs() < 1e-15);
        assert!((z.im() + 0.3).abs() < 1e-15);
        assert!(z.arg() > -std::f64::consts::PI && z.arg() <= std::f64::consts::PI);
    }
}
