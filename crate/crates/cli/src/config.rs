//! Run configuration read from a TOML file; command-line flags take
//! precedence over every value set here.
//!
//! ```toml
//! version = 1
//! domain = "triangle"
//! h = 0.02
//! levels = 3
//! out = "out"
//! threads = 0          # 0: all available cores
//!
//! [tolerances]
//! audit = 0.005
//!
//! [study]
//! rectangle_n = [5.0, 10.0, 50.0]
//! league = ["triangle", "square", "disk"]
//!
//! [optimize]
//! seed = "rect:3"
//! max_iters = 30
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub version: u32,
    pub domain: Option<String>,
    pub h: Option<f64>,
    pub levels: Option<usize>,
    pub out: PathBuf,
    pub threads: usize,
    pub assert: bool,
    pub tolerances: Tolerances,
    pub study: StudyConfig,
    pub optimize: OptimizeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            domain: None,
            h: None,
            levels: None,
            out: PathBuf::from("out"),
            threads: 0,
            assert: false,
            tolerances: Tolerances::default(),
            study: StudyConfig::default(),
            optimize: OptimizeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative allowance on every audited bound.
    pub audit: f64,
    /// Green flux total must be `-1` to this accuracy.
    pub green_flux: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            audit: 5e-3,
            green_flux: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    pub rectangle_n: Vec<f64>,
    pub cluster_n: Vec<usize>,
    pub cluster_segments: usize,
    pub homog_base: String,
    pub homog_a: Vec<f64>,
    pub homog_eigen_h: f64,
    pub perforated_eps: Vec<f64>,
    pub perforated_c0: f64,
    pub league: Vec<String>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            rectangle_n: vec![5.0, 10.0, 50.0],
            cluster_n: vec![1, 16, 81],
            cluster_segments: 128,
            homog_base: "square".into(),
            homog_a: vec![1e2, 1e3, 1e4],
            homog_eigen_h: 0.05,
            perforated_eps: vec![0.125, 0.1],
            perforated_c0: 0.05,
            league: vec!["triangle".into(), "square".into(), "disk".into()],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeConfig {
    pub seed: String,
    pub max_iters: usize,
    pub initial_move: f64,
    pub rng_seed: u64,
    pub fd_probes: usize,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            seed: "rect:3".into(),
            max_iters: 30,
            initial_move: 0.05,
            rng_seed: 7,
            fd_probes: 3,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Input(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.version != CONFIG_VERSION {
            return Err(CliError::Input(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if let Some(h) = self.h {
            if !(h > 0.0 && h.is_finite()) {
                return Err(CliError::Input(format!("h = {h} must be positive")));
            }
        }
        if let Some(l) = self.levels {
            if l < 2 {
                return Err(CliError::Input(format!("levels = {l} (need at least 2)")));
            }
        }
        let t = &self.tolerances;
        if !(t.audit > 0.0 && t.green_flux > 0.0) {
            return Err(CliError::Input("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg =
            RunConfig::from_toml("version = 1\nh = 0.02\n[study]\ncluster_n = [16]\n").unwrap();
        assert_eq!(cfg.h, Some(0.02));
        assert_eq!(cfg.study.cluster_n, vec![16]);
        assert_eq!(cfg.study.rectangle_n, vec![5.0, 10.0, 50.0]);
        assert_eq!(cfg.tolerances.audit, 5e-3);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(RunConfig::from_toml("version = 2").is_err());
        assert!(RunConfig::from_toml("colour = 3").is_err());
        assert!(RunConfig::from_toml("levels = 1").is_err());
        assert!(RunConfig::from_toml("h = -1.0").is_err());
        assert!(RunConfig::from_toml("[tolerances]\naudit = 0.0").is_err());
        assert!(RunConfig::from_toml("h = ").is_err());
    }
}
