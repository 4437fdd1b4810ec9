//! Scenario configuration: one human-editable JSON document, strictly
//! validated. Unknown keys are rejected so typos cannot silently change a
//! study.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::GeometryConfig;
use crate::metrics::{crc, FrameOverhead, Scheme};
use crate::ofdm::FrameLayout;
use crate::pnc::LikelihoodVariant;

/// Efficiency pinned by the `paper-match` frame preset: the error-free relay
/// exchange then saturates at exactly 3.869 bps/Hz (77.38 Mbps at 20 MHz).
pub const PAPER_MATCH_ETA: f64 = 3.869 / 4.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid config: {field}: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// SNR grid in dB: `start_db, start_db + step_db, ..` up to `stop_db`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrSweep {
    pub start_db: f64,
    pub stop_db: f64,
    pub step_db: f64,
}

impl SnrSweep {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop_db - self.start_db) / self.step_db + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.start_db + i as f64 * self.step_db).collect()
    }
}

/// Geometry of the four relay links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct LinkGeometry {
    pub a_to_r: GeometryConfig,
    pub b_to_r: GeometryConfig,
    pub r_to_a: GeometryConfig,
    pub r_to_b: GeometryConfig,
}

/// Throughput-accounting preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FramePreset {
    /// Overhead computed from the physical frame layout.
    Conventional,
    /// Efficiency pinned to [`PAPER_MATCH_ETA`]; the physical frame is
    /// unchanged, only the rate normalization moves.
    PaperMatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrameConfig {
    pub preset: FramePreset,
    pub fft_size: usize,
    pub cp_len: usize,
    pub pilot_root_a: u32,
    pub pilot_root_b: u32,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            preset: FramePreset::Conventional,
            fft_size: 64,
            cp_len: 16,
            pilot_root_a: 1,
            pilot_root_b: 3,
        }
    }
}

fn default_schemes() -> Vec<Scheme> {
    vec![Scheme::Pnc, Scheme::StoreForward, Scheme::Pt2Pt]
}

fn default_packet_bits() -> usize {
    832
}

fn default_frames_per_point() -> u64 {
    50
}

fn default_min_bits_per_point() -> u64 {
    100_000
}

fn default_sampling_rate_hz() -> f64 {
    2e7
}

/// A full sweep description. Only `name` and `snr_sweep` are required; every
/// other field defaults to the conventional desk-scale setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub snr_sweep: SnrSweep,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    #[serde(default)]
    pub geometry: LinkGeometry,
    /// Source packet length in bits, CRC-32 tail included; must fill a whole
    /// number of OFDM payload symbols.
    #[serde(default = "default_packet_bits")]
    pub packet_bits: usize,
    #[serde(default = "default_frames_per_point")]
    pub frames_per_point: u64,
    #[serde(default = "default_min_bits_per_point")]
    pub min_bits_per_point: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_sampling_rate_hz")]
    pub sampling_rate_hz: f64,
    #[serde(default)]
    pub frame: FrameConfig,
    /// Replace pilot-based estimates with the true channel state.
    #[serde(default)]
    pub genie_csi: bool,
    #[serde(default)]
    pub likelihood: LikelihoodVariant,
}

impl ScenarioConfig {
    /// The physical frame layout this scenario runs on.
    pub fn layout(&self) -> Result<FrameLayout, ConfigError> {
        let probe = FrameLayout::conventional(self.frame.fft_size, self.frame.cp_len, 1)
            .map_err(|e| invalid("frame", e.to_string()))?;
        let k_data = probe.data_subcarriers();
        if self.packet_bits % (2 * k_data) != 0 || self.packet_bits == 0 {
            return Err(invalid(
                "packet_bits",
                format!(
                    "{} does not fill a whole number of OFDM symbols over {} data subcarriers",
                    self.packet_bits, k_data
                ),
            ));
        }
        let n_symbols = self.packet_bits / (2 * k_data);
        let mut layout = FrameLayout::conventional(self.frame.fft_size, self.frame.cp_len, n_symbols)
            .map_err(|e| invalid("frame", e.to_string()))?;
        layout.pilot_root_a = self.frame.pilot_root_a;
        layout.pilot_root_b = self.frame.pilot_root_b;
        Ok(layout)
    }

    /// Throughput-accounting constants for the configured preset.
    pub fn overhead(&self, layout: &FrameLayout) -> FrameOverhead {
        match self.frame.preset {
            FramePreset::Conventional => FrameOverhead::physical(layout),
            FramePreset::PaperMatch => FrameOverhead::with_eta(layout, PAPER_MATCH_ETA),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.is_empty() {
            return Err(invalid("name", "must not be empty"));
        }
        if self.name.contains(',') || self.name.contains('\n') {
            return Err(invalid("name", "must not contain commas or newlines"));
        }
        if !(self.snr_sweep.step_db > 0.0) {
            return Err(invalid("snr_sweep.step_db", "must be positive"));
        }
        if self.snr_sweep.stop_db < self.snr_sweep.start_db {
            return Err(invalid("snr_sweep.stop_db", "must be >= start_db"));
        }
        if !self.snr_sweep.start_db.is_finite() || !self.snr_sweep.stop_db.is_finite() {
            return Err(invalid("snr_sweep", "bounds must be finite"));
        }
        if self.schemes.is_empty() {
            return Err(invalid("schemes", "must list at least one scheme"));
        }
        for (i, s) in self.schemes.iter().enumerate() {
            if self.schemes[..i].contains(s) {
                return Err(invalid("schemes", format!("{s} listed twice")));
            }
        }
        if self.frames_per_point == 0 {
            return Err(invalid("frames_per_point", "must be at least 1"));
        }
        if self.packet_bits <= crc::CRC_BITS || self.packet_bits % 2 != 0 {
            return Err(invalid(
                "packet_bits",
                format!("must be even and larger than the {}-bit integrity tail", crc::CRC_BITS),
            ));
        }
        if !(self.sampling_rate_hz.is_finite() && self.sampling_rate_hz > 0.0) {
            return Err(invalid("sampling_rate_hz", "must be positive"));
        }
        self.layout()?;

        let links = [
            ("geometry.a_to_r", &self.geometry.a_to_r),
            ("geometry.b_to_r", &self.geometry.b_to_r),
            ("geometry.r_to_a", &self.geometry.r_to_a),
            ("geometry.r_to_b", &self.geometry.r_to_b),
        ];
        for (field, geom) in links {
            geom.validate().map_err(|e| invalid(field, e.to_string()))?;
            let tau_samples = geom.rms_delay_spread_ns * 1e-9 * self.sampling_rate_hz;
            if tau_samples > self.frame.cp_len as f64 {
                return Err(invalid(
                    field,
                    format!(
                        "rms delay spread of {tau_samples:.2} samples exceeds the {}-sample cyclic prefix",
                        self.frame.cp_len
                    ),
                ));
            }
        }
        Ok(())
    }
}

/// Reads, parses, and validates a scenario file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let cfg: ScenarioConfig =
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> &'static str {
        r#"{
            "name": "smoke",
            "snr_sweep": { "start_db": 0.0, "stop_db": 24.0, "step_db": 2.0 }
        }"#
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg: ScenarioConfig = serde_json::from_str(minimal_json()).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.frame.fft_size, 64);
        assert_eq!(cfg.frame.cp_len, 16);
        assert_eq!(cfg.master_seed, 0);
        assert_eq!(cfg.packet_bits, 832);
        assert_eq!(cfg.sampling_rate_hz, 2e7);
        let layout = cfg.layout().unwrap();
        assert_eq!(layout.n_data_symbols, 8);
    }

    #[test]
    fn sweep_points_cover_the_grid() {
        let sweep = SnrSweep {
            start_db: 0.0,
            stop_db: 24.0,
            step_db: 2.0,
        };
        let pts = sweep.points();
        assert_eq!(pts.len(), 13);
        assert_eq!(pts[0], 0.0);
        assert_eq!(*pts.last().unwrap(), 24.0);
    }

    #[test]
    fn zero_step_is_rejected_by_field_name() {
        let mut cfg: ScenarioConfig = serde_json::from_str(minimal_json()).unwrap();
        cfg.snr_sweep.step_db = 0.0;
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("snr_sweep.step_db"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{
            "name": "x",
            "snr_sweep": { "start_db": 0.0, "stop_db": 1.0, "step_db": 1.0 },
            "snr_sweeep_typo": 3
        }"#;
        let err = serde_json::from_str::<ScenarioConfig>(text).unwrap_err();
        assert!(err.to_string().contains("snr_sweeep_typo"), "{err}");
    }

    #[test]
    fn serialization_round_trips() {
        let cfg: ScenarioConfig = serde_json::from_str(minimal_json()).unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ScenarioConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn packet_bits_must_fill_symbols() {
        let mut cfg: ScenarioConfig = serde_json::from_str(minimal_json()).unwrap();
        cfg.packet_bits = 830; // not a multiple of 2 * 52
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("packet_bits"), "{err}");
    }

    #[test]
    fn duplicate_schemes_are_rejected() {
        let mut cfg: ScenarioConfig = serde_json::from_str(minimal_json()).unwrap();
        cfg.schemes = vec![Scheme::Pnc, Scheme::Pnc];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn excessive_delay_spread_is_rejected() {
        let mut cfg: ScenarioConfig = serde_json::from_str(minimal_json()).unwrap();
        cfg.geometry.a_to_r.scenario = crate::channel::Propagation::NLoS;
        cfg.geometry.a_to_r.rms_delay_spread_ns = 2000.0; // 40 samples at 20 MHz
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("a_to_r"), "{err}");
    }

    #[test]
    fn paper_match_overhead_pins_eta() {
        let mut cfg: ScenarioConfig = serde_json::from_str(minimal_json()).unwrap();
        cfg.frame.preset = FramePreset::PaperMatch;
        let layout = cfg.layout().unwrap();
        let overhead = cfg.overhead(&layout);
        assert!((overhead.eta - PAPER_MATCH_ETA).abs() < 1e-12);
    }
}
