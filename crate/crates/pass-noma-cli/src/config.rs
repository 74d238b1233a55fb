//! Experiment configuration: a sectioned TOML file validated against the
//! same invariants the library enforces. Unknown keys are rejected with a
//! diagnostic naming the key.

use serde::Deserialize;
use sha2::{Digest, Sha256};

use pass_noma::channel::{SystemGeometry, UePosition};
use pass_noma::dl_ber::DlLinkConfig;
use pass_noma::optimize::{EnvelopeSpec, FineTuneSpec};
use pass_noma::ul_ber::UlLinkConfig;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometrySection,
    pub ul: UlSection,
    pub dl: DlSection,
    pub sim: SimSection,
    pub optimize: OptimizeSection,
    pub output: OutputSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub length_m: f64,
    pub height_m: f64,
    pub carrier_hz: f64,
    pub attenuation_db_per_m: f64,
    pub n_eff: f64,
    pub ue1: [f64; 2],
    pub ue2: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerUnit {
    /// Referenced to 1 mW: W = 10^((value − 30)/10).
    Dbm,
    /// Referenced to 1 W: W = 10^(value/10).
    Db,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum NoiseInterpretation {
    /// The quoted noise figure is the per-dimension variance σ².
    #[serde(rename = "per-dimension")]
    PerDimension,
    /// The quoted figure is the total complex noise power 2σ².
    #[serde(rename = "total")]
    Total,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UlSection {
    /// Per-UE transmit powers (P1 = P2), in `power_unit`.
    pub powers: Vec<f64>,
    /// Required: resolves the dB-vs-dBm ambiguity explicitly.
    pub power_unit: PowerUnit,
    pub noise_dbm: f64,
    #[serde(default = "default_noise_interpretation")]
    pub noise_interpretation: NoiseInterpretation,
    /// Decode UE 2 first instead of UE 1.
    #[serde(default)]
    pub swap_sic_order: bool,
}

fn default_noise_interpretation() -> NoiseInterpretation {
    NoiseInterpretation::PerDimension
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DlSection {
    pub powers_dbm: Vec<f64>,
    pub alpha: f64,
    pub mod_order_ue1: u32,
    pub mod_order_ue2: u32,
    /// Non-optimized comparison placement.
    #[serde(default = "default_fixed_x")]
    pub fixed_x: f64,
    #[serde(default = "default_fixed_alpha")]
    pub fixed_alpha: f64,
    #[serde(default = "default_surface_power")]
    pub surface_power_dbm: f64,
    #[serde(default = "default_surface_x_points")]
    pub surface_x_points: usize,
    #[serde(default = "default_surface_alpha_points")]
    pub surface_alpha_points: usize,
}

fn default_fixed_x() -> f64 {
    10.0
}
fn default_fixed_alpha() -> f64 {
    0.9
}
fn default_surface_power() -> f64 {
    20.0
}
fn default_surface_x_points() -> usize {
    201
}
fn default_surface_alpha_points() -> usize {
    51
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub symbols: u64,
    pub seed: u64,
    #[serde(default = "default_chunk")]
    pub chunk: u64,
}

fn default_chunk() -> u64 {
    65_536
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    pub sample_step_m: f64,
    /// Total sliding-window width in samples; rounded up to the nearest odd
    /// count for centering.
    pub window_samples: usize,
    /// Fine-tuning half-count N (2N+1 evaluations).
    pub fine_tune_points: usize,
    /// Fine-tuning spacing δ in meters; defaults to λ/20.
    pub fine_tune_step_m: Option<f64>,
    #[serde(default = "default_restarts")]
    pub restarts: u32,
}

fn default_restarts() -> u32 {
    16
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: String,
}

/// A parsed configuration together with the hash of its raw bytes.
pub struct Loaded {
    pub config: ExperimentConfig,
    pub sha256: String,
}

impl Loaded {
    pub fn from_path(path: &std::path::Path) -> Result<Loaded, CliError> {
        let bytes = std::fs::read(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| CliError::Config(format!("config is not UTF-8: {e}")))?;
        // One-line diagnostic: keep the parser message (it names unknown
        // keys) and the location, drop the multi-line snippet.
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let place = e
                .span()
                .map(|s| format!(" (config bytes {}..{})", s.start, s.end))
                .unwrap_or_default();
            CliError::Config(format!("config: {}{place}", e.message()))
        })?;
        config.validate()?;
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        Ok(Loaded {
            config,
            sha256: hex_string(&hasher.finalize()),
        })
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.geometry()?;
        if self.ul.powers.is_empty() {
            return Err(CliError::Config("ul.powers must not be empty".into()));
        }
        if self.dl.powers_dbm.is_empty() {
            return Err(CliError::Config("dl.powers_dbm must not be empty".into()));
        }
        let sigma = self.ul_sigma();
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(CliError::Config(format!(
                "ul.noise_dbm yields a non-positive noise std ({sigma})"
            )));
        }
        // Reuses the library validation for the DL block.
        self.dl_link(dbm_to_watts(self.dl.powers_dbm[0]))?;
        for &p in &self.ul.powers {
            self.ul_link(self.ul_power_watts(p))?;
        }
        if self.sim.symbols == 0 || self.sim.chunk == 0 {
            return Err(CliError::Config(
                "sim.symbols and sim.chunk must be at least 1".into(),
            ));
        }
        if self.optimize.window_samples < 2 {
            return Err(CliError::Config(
                "optimize.window_samples must be at least 2".into(),
            ));
        }
        if self.dl.surface_x_points < 2 || self.dl.surface_alpha_points < 2 {
            return Err(CliError::Config(
                "dl surface grids need at least 2 points per axis".into(),
            ));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<SystemGeometry, CliError> {
        SystemGeometry::new(
            self.geometry.length_m,
            self.geometry.height_m,
            [
                UePosition {
                    x: self.geometry.ue1[0],
                    y: self.geometry.ue1[1],
                },
                UePosition {
                    x: self.geometry.ue2[0],
                    y: self.geometry.ue2[1],
                },
            ],
            self.geometry.carrier_hz,
            self.geometry.attenuation_db_per_m,
            self.geometry.n_eff,
        )
        .map_err(CliError::from)
    }

    /// Per-dimension noise standard deviation from the configured figure.
    pub fn ul_sigma(&self) -> f64 {
        let quoted_w = dbm_to_watts(self.ul.noise_dbm);
        match self.ul.noise_interpretation {
            NoiseInterpretation::PerDimension => quoted_w.sqrt(),
            NoiseInterpretation::Total => (quoted_w / 2.0).sqrt(),
        }
    }

    pub fn ul_power_watts(&self, value: f64) -> f64 {
        match self.ul.power_unit {
            PowerUnit::Dbm => dbm_to_watts(value),
            PowerUnit::Db => 10f64.powf(value / 10.0),
        }
    }

    pub fn ul_link(&self, p_watts: f64) -> Result<UlLinkConfig, CliError> {
        UlLinkConfig::new(p_watts, p_watts, self.ul_sigma()).map_err(CliError::from)
    }

    pub fn dl_link(&self, p_t_watts: f64) -> Result<DlLinkConfig, CliError> {
        DlLinkConfig::new(
            p_t_watts,
            self.dl.alpha,
            self.dl.mod_order_ue1,
            self.dl.mod_order_ue2,
            self.ul_sigma(),
        )
        .map_err(CliError::from)
    }

    pub fn envelope_spec(&self) -> EnvelopeSpec {
        EnvelopeSpec {
            half_width: self.optimize.window_samples / 2,
        }
    }

    pub fn fine_tune_spec(&self, wavelength: f64) -> FineTuneSpec {
        FineTuneSpec {
            half_count: self.optimize.fine_tune_points,
            delta: self
                .optimize
                .fine_tune_step_m
                .unwrap_or(wavelength / 20.0),
        }
    }
}
