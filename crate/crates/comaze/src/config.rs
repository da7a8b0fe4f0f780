use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use comaze_core::partner::PartnerSpec;
use comaze_core::physics::{PhysicsConfig, TrayGeometry, TraySim};
use comaze_core::sac::SacConfig;
use comaze_core::session::SessionConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    #[default]
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    /// How long a live run waits for its first player.
    pub client_timeout_secs: f64,
    /// Playback speed multiplier for `replay`.
    pub replay_speed: f64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8765,
            client_timeout_secs: 120.0,
            replay_speed: 1.0,
        }
    }
}

/// Model documents referenced by a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelPaths {
    /// Seed agent for `train`; built from scratch when absent.
    pub premodel: Option<PathBuf>,
    /// The subject's own agent for `evaluate`.
    pub own: Option<PathBuf>,
    pub foreign: Vec<PathBuf>,
}

/// Everything a run needs. Written back into the artifact directory so the
/// run can be repeated from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AppConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub dtype: Dtype,
    pub physics: PhysicsConfig,
    pub geometry: TrayGeometry,
    pub agent: SacConfig,
    pub session: SessionConfig,
    pub partner: PartnerSpec,
    pub service: ServiceConfig,
    pub models: ModelPaths,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("runs/latest"),
            dtype: Dtype::default(),
            physics: PhysicsConfig::default(),
            geometry: TrayGeometry::default(),
            agent: SacConfig::default(),
            session: SessionConfig::default(),
            partner: PartnerSpec::default(),
            service: ServiceConfig::default(),
            models: ModelPaths::default(),
        }
    }
}

impl AppConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        TraySim::<f64>::new(self.geometry.clone(), self.physics.clone())?;
        self.agent.validate()?;
        self.session.validate()?;
        self.partner.validate()?;
        if !(self.service.client_timeout_secs.is_finite() && self.service.client_timeout_secs > 0.0) {
            bail!("service.client_timeout_secs must be positive");
        }
        if !(self.service.replay_speed.is_finite() && self.service.replay_speed > 0.0) {
            bail!("service.replay_speed must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = AppConfig::default();
        let text = cfg.to_toml();
        assert_eq!(AppConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_files_fill_defaults() {
        let cfg = AppConfig::parse("seed = 9\n[partner]\nkind = \"noisy\"\nnoise_std = 0.1\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.partner.noise_std, 0.1);
        assert_eq!(cfg.session.frames_per_trial, 200);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = AppConfig::parse("[physics]\ngravity = 9.81\nfriction = 0.2\n").unwrap_err();
        assert!(format!("{err:#}").contains("friction"), "{err:#}");
        assert!(AppConfig::parse("sede = 3\n").is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(AppConfig::parse("[physics]\nsubsteps_per_frame = 10\n").is_err());
        assert!(AppConfig::parse("[session]\nframes_per_trial = 100\n").is_err());
        assert!(AppConfig::parse("[partner]\nnoise_std = -1.0\n").is_err());
    }
}
