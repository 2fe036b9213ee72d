//! System configuration: every scalar of the simulated MIMO-OFDM link, the
//! sensing region, and the solver hyperparameters.
//!
//! Configs are read from a TOML file with explicit units in the key names.
//! Decibel-denominated keys carry a `_db` / `_dbm` suffix and are converted
//! to linear once at load; everything downstream works in linear units and
//! radians. Unknown keys are a hard error.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::physics::{db_to_linear, dbm_to_watts, SPEED_OF_LIGHT};

/// Resolved system configuration. All fields are in linear units, radians,
/// seconds, meters, and watts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemConfig {
    pub carrier_freq_hz: f64,
    pub subcarrier_spacing_hz: f64,
    /// Number of OFDM subcarriers.
    pub subcarrier_count: usize,
    /// OFDM symbol duration, equal to `1 / subcarrier_spacing_hz`.
    pub symbol_duration_s: f64,
    pub cp_duration_s: f64,
    /// Total symbol duration including the cyclic prefix.
    pub total_symbol_duration_s: f64,
    /// Symbols per coherent processing interval.
    pub symbols_per_cpi: usize,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    pub tx_spacing_m: f64,
    pub rx_spacing_m: f64,
    pub ref_distance_m: f64,
    /// Linear path-loss gain at the reference distance.
    pub ref_gain: f64,
    pub path_loss_exponent: f64,
    /// Mean reflected power of a target (linear).
    pub reflection_power: f64,
    pub comm_noise_power_w: f64,
    pub sensing_noise_power_w: f64,
    pub qam_order: usize,
    /// DFT size along the spatial dimension (at least `rx_antennas`).
    pub spatial_dft_size: usize,
    /// DFT size along the delay dimension (at least `subcarrier_count`).
    pub delay_dft_size: usize,
    /// DFT size along the Doppler dimension (at least `symbols_per_cpi`).
    pub doppler_dft_size: usize,
    pub power_budget_w: f64,
    /// Sensing received-SNR threshold (linear).
    pub snr_threshold: f64,
    pub angle_min_rad: f64,
    pub angle_max_rad: f64,
    /// Maximum sensing range of interest.
    pub max_range_m: f64,
    /// Number of grid angles covering the sensed region.
    pub angle_grid_count: usize,
    /// Downlink user count.
    pub user_count: usize,
    /// Subcarriers selected for sensing.
    pub selected_subcarriers: usize,
    /// Penalty weight on the consensus split (w = x).
    pub rho_consensus: f64,
    /// Penalty weight on the power split (|x|^2 = p).
    pub rho_power: f64,
    /// Penalty weight on the beampattern split.
    pub rho_pattern: f64,
    /// Targets drawn per random scene.
    pub scene_target_count: usize,
    /// Scene velocities are drawn uniformly from +/- this value.
    pub scene_velocity_max_mps: f64,
    pub seed: u64,
}

impl SystemConfig {
    /// Full-scale profile mirroring the reference system settings
    /// (28 GHz / 256 subcarriers / 24x24 antennas / 5 users).
    pub fn paper() -> Self {
        let delta_f = 120.0e3;
        let t_d = 1.0 / delta_f;
        let t_cp = 0.59e-6;
        let f_c = 28.0e9;
        let half_wavelength = 0.5 * SPEED_OF_LIGHT / f_c;
        SystemConfig {
            carrier_freq_hz: f_c,
            subcarrier_spacing_hz: delta_f,
            subcarrier_count: 256,
            symbol_duration_s: t_d,
            cp_duration_s: t_cp,
            total_symbol_duration_s: t_d + t_cp,
            symbols_per_cpi: 128,
            tx_antennas: 24,
            rx_antennas: 24,
            tx_spacing_m: half_wavelength,
            rx_spacing_m: half_wavelength,
            ref_distance_m: 1.0,
            ref_gain: db_to_linear(-30.0),
            path_loss_exponent: 2.6,
            reflection_power: db_to_linear(0.0),
            comm_noise_power_w: dbm_to_watts(-60.0),
            sensing_noise_power_w: dbm_to_watts(-60.0),
            qam_order: 16,
            spatial_dft_size: 24,
            delay_dft_size: 256,
            doppler_dft_size: 128,
            power_budget_w: 10.0,
            snr_threshold: db_to_linear(-5.0),
            angle_min_rad: (-10.0f64).to_radians(),
            angle_max_rad: 10.0f64.to_radians(),
            max_range_m: 75.0,
            angle_grid_count: 10,
            user_count: 5,
            selected_subcarriers: 64,
            rho_consensus: 500.0,
            rho_power: 500.0,
            rho_pattern: 50.0,
            scene_target_count: 1,
            scene_velocity_max_mps: 20.0,
            seed: 0,
        }
    }

    /// Reduced desk-scale profile for fast experiments and the acceptance
    /// suite. Same carrier and channel laws as the full profile, with
    /// 8x8 antennas, 16 subcarriers, 16 slots, 2 users, and a sensing noise
    /// floor chosen so that the sensing constraint is binding across the
    /// default threshold sweep. The spatial and delay transforms are
    /// twofold oversampled: the zero-padding rows of the delay selection
    /// operator regularize the sparse recovery, and the finer grids halve
    /// the scalloping loss that the small arrays would otherwise pay.
    pub fn desk() -> Self {
        let mut cfg = Self::paper();
        cfg.subcarrier_count = 16;
        cfg.symbols_per_cpi = 16;
        cfg.tx_antennas = 8;
        cfg.rx_antennas = 8;
        cfg.spatial_dft_size = 16;
        cfg.delay_dft_size = 32;
        cfg.doppler_dft_size = 32;
        cfg.user_count = 2;
        cfg.angle_grid_count = 4;
        cfg.selected_subcarriers = 8;
        cfg.sensing_noise_power_w = dbm_to_watts(-49.2);
        cfg
    }

    /// Parse a TOML configuration string. Unknown keys are rejected.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        let cfg = raw.resolve()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load and validate a TOML configuration file.
    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Check every configuration invariant, returning the first violation.
    pub fn validate(&self) -> Result<()> {
        let rel = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300);
        if !(self.carrier_freq_hz > 0.0 && self.subcarrier_spacing_hz > 0.0) {
            return Err(Error::Config("carrier and spacing must be positive".into()));
        }
        if !rel(self.symbol_duration_s, 1.0 / self.subcarrier_spacing_hz) {
            return Err(Error::Config(
                "symbol duration must equal 1/subcarrier_spacing within 1e-12".into(),
            ));
        }
        if !rel(
            self.total_symbol_duration_s,
            self.symbol_duration_s + self.cp_duration_s,
        ) {
            return Err(Error::Config(
                "total symbol duration must equal symbol + CP duration within 1e-12".into(),
            ));
        }
        if self.subcarrier_count == 0 || self.symbols_per_cpi == 0 {
            return Err(Error::Config("subcarriers and slots must be positive".into()));
        }
        if self.tx_antennas == 0 || self.rx_antennas == 0 {
            return Err(Error::Config("antenna counts must be positive".into()));
        }
        if self.spatial_dft_size < self.rx_antennas {
            return Err(Error::Config(
                "spatial DFT size must be at least the receive antenna count".into(),
            ));
        }
        if self.delay_dft_size < self.subcarrier_count {
            return Err(Error::Config(
                "delay DFT size must be at least the subcarrier count".into(),
            ));
        }
        if self.doppler_dft_size < self.symbols_per_cpi {
            return Err(Error::Config(
                "Doppler DFT size must be at least the CPI length".into(),
            ));
        }
        if self.user_count == 0 || self.user_count > self.tx_antennas {
            return Err(Error::Config(
                "user count must satisfy 1 <= K <= transmit antennas".into(),
            ));
        }
        if self.selected_subcarriers == 0 || self.selected_subcarriers > self.subcarrier_count {
            return Err(Error::Config(
                "selected subcarriers must satisfy 0 < N_sel <= subcarrier count".into(),
            ));
        }
        if !(self.rho_consensus > 0.0 && self.rho_power > 0.0 && self.rho_pattern > 0.0) {
            return Err(Error::Config("penalty weights must be positive".into()));
        }
        if !(self.ref_distance_m > 0.0 && self.ref_gain > 0.0) {
            return Err(Error::Config("path-loss reference must be positive".into()));
        }
        if !(self.reflection_power > 0.0
            && self.comm_noise_power_w > 0.0
            && self.sensing_noise_power_w > 0.0)
        {
            return Err(Error::Config("powers must be positive".into()));
        }
        let m = (self.qam_order as f64).sqrt() as usize;
        if m * m != self.qam_order || !self.qam_order.is_power_of_two() || self.qam_order < 4 {
            return Err(Error::Config(
                "QAM order must be a perfect-square power of two (4, 16, 64, ...)".into(),
            ));
        }
        if self.angle_min_rad >= self.angle_max_rad {
            return Err(Error::Config("angle range must be non-empty".into()));
        }
        if self.angle_grid_count < 2 {
            return Err(Error::Config("angle grid needs at least two points".into()));
        }
        if self.max_range_m < self.ref_distance_m {
            return Err(Error::Config(
                "max sensing range must be at least the path-loss reference distance".into(),
            ));
        }
        if self.max_range_m >= self.unambiguous_range_m() {
            return Err(Error::Config(
                "max sensing range exceeds the unambiguous range".into(),
            ));
        }
        if self.power_budget_w <= 0.0 || self.snr_threshold <= 0.0 {
            return Err(Error::Config("budget and threshold must be positive".into()));
        }
        if self.scene_velocity_max_mps < 0.0
            || self.scene_velocity_max_mps > self.unambiguous_velocity_mps()
        {
            return Err(Error::Config(
                "scene velocity range exceeds the unambiguous velocity".into(),
            ));
        }
        Ok(())
    }

    /// Carrier wavelength in meters.
    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq_hz
    }

    /// Maximum unambiguous range `c / (2 delta_f)`.
    pub fn unambiguous_range_m(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.subcarrier_spacing_hz)
    }

    /// Maximum unambiguous radial speed `c / (4 T f_c)`.
    pub fn unambiguous_velocity_mps(&self) -> f64 {
        SPEED_OF_LIGHT / (4.0 * self.total_symbol_duration_s * self.carrier_freq_hz)
    }

    /// Canonical TOML rendering of the resolved configuration.
    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Hex digest identifying the resolved configuration.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml_string().as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A single point target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub angle_rad: f64,
    pub range_m: f64,
    pub velocity_mps: f64,
    /// Complex reflection coefficient.
    pub reflection: Complex64,
}

/// A set of point targets to synthesize echoes from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TargetScene {
    pub targets: Vec<Target>,
}

impl TargetScene {
    pub fn new(targets: Vec<Target>) -> Self {
        Self { targets }
    }

    /// Verify all targets sit inside the model's validity region.
    pub fn validate(&self, cfg: &SystemConfig) -> Result<()> {
        for (q, t) in self.targets.iter().enumerate() {
            if t.range_m < cfg.ref_distance_m {
                return Err(Error::Domain(format!(
                    "target {q} closer than the path-loss reference distance"
                )));
            }
            if t.range_m >= cfg.unambiguous_range_m() {
                return Err(Error::Domain(format!("target {q} beyond unambiguous range")));
            }
            if t.velocity_mps.abs() > cfg.unambiguous_velocity_mps() {
                return Err(Error::Domain(format!(
                    "target {q} faster than unambiguous velocity"
                )));
            }
            if !t.angle_rad.is_finite() || t.angle_rad.abs() > std::f64::consts::FRAC_PI_2 {
                return Err(Error::Domain(format!("target {q} angle outside +/-90 deg")));
            }
        }
        Ok(())
    }
}

// --- TOML file schema -------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    ofdm: RawOfdm,
    array: RawArray,
    path_loss: RawPathLoss,
    noise: RawNoise,
    modulation: RawModulation,
    processing: RawProcessing,
    sensing: RawSensing,
    beamforming: RawBeamforming,
    scene: RawScene,
    run: RawRun,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOfdm {
    carrier_frequency_hz: f64,
    subcarrier_spacing_hz: f64,
    subcarrier_count: usize,
    cp_duration_s: f64,
    /// Optional; derived from the spacing when absent, validated when given.
    symbol_duration_s: Option<f64>,
    /// Optional; derived as symbol + CP duration when absent.
    total_symbol_duration_s: Option<f64>,
    symbols_per_cpi: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArray {
    tx_antennas: usize,
    rx_antennas: usize,
    /// Optional; half a carrier wavelength when absent.
    tx_spacing_m: Option<f64>,
    rx_spacing_m: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPathLoss {
    reference_distance_m: f64,
    reference_gain_db: f64,
    exponent: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    reflection_power_db: f64,
    communication_noise_dbm: f64,
    sensing_noise_dbm: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModulation {
    qam_order: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProcessing {
    spatial_dft_size: usize,
    delay_dft_size: usize,
    doppler_dft_size: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSensing {
    angle_min_deg: f64,
    angle_max_deg: f64,
    max_range_m: f64,
    angle_grid_count: usize,
    selected_subcarriers: usize,
    snr_threshold_db: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBeamforming {
    power_budget_w: f64,
    user_count: usize,
    rho_consensus: f64,
    rho_power: f64,
    rho_pattern: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScene {
    target_count: usize,
    velocity_max_mps: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    seed: u64,
}

impl RawConfig {
    fn resolve(self) -> Result<SystemConfig> {
        let derived_td = 1.0 / self.ofdm.subcarrier_spacing_hz;
        let symbol_duration_s = self.ofdm.symbol_duration_s.unwrap_or(derived_td);
        let total_symbol_duration_s = self
            .ofdm
            .total_symbol_duration_s
            .unwrap_or(symbol_duration_s + self.ofdm.cp_duration_s);
        let half_wavelength = 0.5 * SPEED_OF_LIGHT / self.ofdm.carrier_frequency_hz;
        Ok(SystemConfig {
            carrier_freq_hz: self.ofdm.carrier_frequency_hz,
            subcarrier_spacing_hz: self.ofdm.subcarrier_spacing_hz,
            subcarrier_count: self.ofdm.subcarrier_count,
            symbol_duration_s,
            cp_duration_s: self.ofdm.cp_duration_s,
            total_symbol_duration_s,
            symbols_per_cpi: self.ofdm.symbols_per_cpi,
            tx_antennas: self.array.tx_antennas,
            rx_antennas: self.array.rx_antennas,
            tx_spacing_m: self.array.tx_spacing_m.unwrap_or(half_wavelength),
            rx_spacing_m: self.array.rx_spacing_m.unwrap_or(half_wavelength),
            ref_distance_m: self.path_loss.reference_distance_m,
            ref_gain: db_to_linear(self.path_loss.reference_gain_db),
            path_loss_exponent: self.path_loss.exponent,
            reflection_power: db_to_linear(self.noise.reflection_power_db),
            comm_noise_power_w: dbm_to_watts(self.noise.communication_noise_dbm),
            sensing_noise_power_w: dbm_to_watts(self.noise.sensing_noise_dbm),
            qam_order: self.modulation.qam_order,
            spatial_dft_size: self.processing.spatial_dft_size,
            delay_dft_size: self.processing.delay_dft_size,
            doppler_dft_size: self.processing.doppler_dft_size,
            power_budget_w: self.beamforming.power_budget_w,
            snr_threshold: db_to_linear(self.sensing.snr_threshold_db),
            angle_min_rad: self.sensing.angle_min_deg.to_radians(),
            angle_max_rad: self.sensing.angle_max_deg.to_radians(),
            max_range_m: self.sensing.max_range_m,
            angle_grid_count: self.sensing.angle_grid_count,
            user_count: self.beamforming.user_count,
            selected_subcarriers: self.sensing.selected_subcarriers,
            rho_consensus: self.beamforming.rho_consensus,
            rho_power: self.beamforming.rho_power,
            rho_pattern: self.beamforming.rho_pattern,
            scene_target_count: self.scene.target_count,
            scene_velocity_max_mps: self.scene.velocity_max_mps,
            seed: self.run.seed,
        })
    }
}
