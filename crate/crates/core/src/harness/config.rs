use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bff::AngleQuantizer;
use crate::estimator::SearchConfig;
use crate::scene::ScenarioConfig;
use crate::{Error, Result};

/// Methods run when the configuration does not list any.
pub const DEFAULT_METHODS: [&str; 4] = ["hybrid_as", "ndp_as", "music_bff", "music_ndp"];

fn default_snr() -> Vec<f64> {
    (0..=8).map(|i| -10.0 + 5.0 * i as f64).collect()
}
fn default_trials() -> usize {
    1000
}
fn default_methods() -> Vec<String> {
    DEFAULT_METHODS.iter().map(|s| s.to_string()).collect()
}
fn default_seed() -> u64 {
    1
}
fn default_hit_radius() -> f64 {
    2.0
}
fn default_gate() -> f64 {
    10.0
}
fn default_phi_bits() -> u8 {
    9
}
fn default_psi_bits() -> u8 {
    7
}

/// Position search settings; the region is always the coverage rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSettings {
    pub coarse_step: f64,
    pub fine_step: Option<f64>,
    pub fine_half_width: f64,
    pub tolerance: f64,
    pub max_passes: usize,
    pub single_pass: bool,
    pub polish: bool,
}

impl Default for SearchSettings {
    fn default() -> Self {
        SearchSettings {
            coarse_step: 0.25,
            fine_step: Some(0.05),
            fine_half_width: 0.5,
            tolerance: 0.05,
            max_passes: 5,
            single_pass: false,
            polish: true,
        }
    }
}

/// Monte-Carlo experiment description, loadable from TOML. The scenario
/// lives in a nested `[scenario]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_snr")]
    pub snr_db: Vec<f64>,
    /// Replaces the sweep by a single noiseless point.
    #[serde(default)]
    pub noiseless: bool,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_hit_radius")]
    pub hit_radius: f64,
    #[serde(default = "default_gate")]
    pub association_gate_deg: f64,
    #[serde(default = "default_phi_bits")]
    pub phi_bits: u8,
    #[serde(default = "default_psi_bits")]
    pub psi_bits: u8,
    #[serde(default)]
    pub search: SearchSettings,
    #[serde(default)]
    pub scenario: ScenarioConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            snr_db: default_snr(),
            noiseless: false,
            trials: default_trials(),
            methods: default_methods(),
            seed: default_seed(),
            output: None,
            hit_radius: default_hit_radius(),
            association_gate_deg: default_gate(),
            phi_bits: default_phi_bits(),
            psi_bits: default_psi_bits(),
            search: SearchSettings::default(),
            scenario: ScenarioConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if !self.noiseless && self.snr_db.is_empty() {
            return Err(Error::config("the SNR list is empty"));
        }
        if let Some(bad) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return Err(Error::config(format!("SNR values must be finite, got {bad}; use the noiseless flag")));
        }
        if !(self.hit_radius > 0.0 && self.hit_radius.is_finite()) {
            return Err(Error::config(format!("hit radius must be positive, got {}", self.hit_radius)));
        }
        if !(self.association_gate_deg >= 0.0) {
            return Err(Error::config("association gate must be non-negative"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("no methods selected"));
        }
        self.quantizer()?;
        self.scenario.validate()?;
        self.search_config()?.validate()
    }

    /// SNR points actually simulated.
    pub fn snr_points(&self) -> Vec<f64> {
        if self.noiseless {
            vec![f64::INFINITY]
        } else {
            self.snr_db.clone()
        }
    }

    pub fn quantizer(&self) -> Result<AngleQuantizer> {
        AngleQuantizer::new(self.phi_bits as i32, self.psi_bits as i32)
    }

    pub fn gate(&self) -> f64 {
        self.association_gate_deg.to_radians()
    }

    pub fn search_config(&self) -> Result<SearchConfig> {
        let s = &self.search;
        Ok(SearchConfig {
            region: self.scenario.coverage_rect()?,
            coarse_step: s.coarse_step,
            fine_step: s.fine_step,
            fine_half_width: s.fine_half_width,
            tolerance: s.tolerance,
            max_passes: s.max_passes,
            single_pass: s.single_pass,
            polish: s.polish,
        })
    }
}

/// Parses `"0,10,20"` or `"start:stop:step"` (inclusive) into SNR values.
pub fn parse_snr_list(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::config(format!("cannot parse SNR list {s:?}"));
    let s = s.trim();
    if s.contains(':') {
        let parts: Vec<f64> = s.split(':').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
        let [start, stop, step] = parts[..] else { return Err(bad()) };
        if !(step > 0.0) || stop < start || !start.is_finite() || !stop.is_finite() {
            return Err(bad());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| start + step * i as f64).collect());
    }
    let out: Vec<f64> = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.snr_points().len(), 9);
    }

    #[test]
    fn partial_toml_uses_defaults() {
        let cfg = ExperimentConfig::from_toml_str("trials = 5\nsnr_db = [0, 10]\n[scenario]\nk_targets = 1\nc_clients = 1\nap_position = [0, 0]\npwr_position = [10, 0]\nn_ap = 4\nn_pwr = 4\nn_ue = 4\nq = 64\ncoverage = [0, 10, 5, 15]\nmin_separation = 1.0\nseed = 3\n").unwrap();
        assert_eq!(cfg.trials, 5);
        assert_eq!(cfg.snr_db, vec![0.0, 10.0]);
        assert_eq!(cfg.scenario.q, 64);
        assert_eq!(cfg.hit_radius, 2.0);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::from_toml_str("trials = 0").is_err());
        assert!(ExperimentConfig::from_toml_str("hit_radius = -1.0").is_err());
        assert!(ExperimentConfig::from_toml_str("snr_db = []").is_err());
        assert!(ExperimentConfig::from_toml_str("bogus = 1").is_err());
        assert!(ExperimentConfig::from_toml_str("phi_bits = 0").is_err());
    }

    #[test]
    fn snr_list_forms() {
        assert_eq!(parse_snr_list("0,10,20").unwrap(), vec![0.0, 10.0, 20.0]);
        assert_eq!(parse_snr_list("-10:30:5").unwrap().len(), 9);
        assert!(parse_snr_list("a,b").is_err());
        assert!(parse_snr_list("0:1").is_err());
    }
}
