//! Run configuration as one TOML document.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalx::EvalConfig;
use crate::grammar::GrammarConfig;
use crate::placer::PlacerConfig;
use crate::scene::SceneConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for the synthetic generator.
    pub seed: u64,
    /// Radius used for buffers that do not state one.
    pub buffer_radius_m: f64,
    pub scene: SceneConfig,
    pub grammar: GrammarConfig,
    pub placer: PlacerConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            buffer_radius_m: 50.0,
            scene: SceneConfig::default(),
            grammar: GrammarConfig::default(),
            placer: PlacerConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("serializable")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.buffer_radius_m > 0.0 && self.buffer_radius_m.is_finite()) {
            return Err(Error::Config("buffer_radius_m must be > 0".into()));
        }
        self.scene.validate()?;
        self.grammar.validate()?;
        self.placer.validate()?;
        self.eval.validate()
    }
}
