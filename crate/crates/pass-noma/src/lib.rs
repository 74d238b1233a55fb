//! Bit error rate analysis and optimization for a two-user pinching-antenna
//! NOMA link.
//!
//! A single pinching antenna (PA) can be activated anywhere along a dielectric
//! waveguide, which makes the uplink/downlink channel of each user a function
//! of the activation point `x`. This crate provides:
//!
//! * [`channel`] — spherical-wave UE↔PA channels and in-waveguide loss,
//! * [`constellation`] — Gray-coded QPSK / square-QAM mapping and slicing,
//! * [`ul_ber`] — exact analytic uplink BER of both users under imperfect SIC,
//! * [`dl_ber`] — exact analytic downlink BER as a weighted Q-function sum,
//! * [`simulate`] — a seeded, chunk-deterministic Monte Carlo link simulator
//!   used as the independent oracle for the analytic expressions,
//! * [`optimize`] — PA-position (uplink) and joint position/power-allocation
//!   (downlink) BER minimizers.

pub mod channel;
pub mod constellation;
pub mod dl_ber;
pub mod optimize;
mod phase;
pub mod simulate;
pub mod ul_ber;

mod summation;

pub use channel::{ComplexAmp, SystemGeometry, Ue, UePosition};
pub use constellation::GraySymbol;

/// Errors reported by the analysis and simulation routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid link configuration: {0}")]
    InvalidConfig(String),
    #[error("{0} must be finite")]
    NonFinite(&'static str),
    #[error("position {x} m lies outside the waveguide [0, {length} m]")]
    OutsideWaveguide { x: f64, length: f64 },
    #[error("modulation order {0} is not a square power of two >= 4")]
    InvalidModulation(u32),
    #[error("expected {expected} bits for order {m}, got {got}")]
    BitCount { expected: usize, got: usize, m: u32 },
    #[error("user index {0} is outside {{1, 2}}")]
    InvalidUser(usize),
    #[error("channel magnitude must be positive")]
    ZeroChannel,
    #[error("scenario mismatch: {0}")]
    ScenarioMismatch(&'static str),
    #[error("cost is not finite at {0}")]
    NonFiniteCost(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
