use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{ModelParams, UtilitySpec};
use crate::strategy::StrategyOrder;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub alpha: f64,
    pub horizon: f64,
    pub j_count: usize,
    pub safety: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { alpha: 0.5, horizon: 1.0, j_count: 200, safety: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyConfig {
    pub m: f64,
    pub order: StrategyOrder,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig { m: 1.0, order: StrategyOrder::FirstOrder }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McSettings {
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub initial_xi: f64,
    pub initial_m: f64,
    pub freeze_volatility: bool,
    pub antithetic: bool,
}

impl Default for McSettings {
    fn default() -> Self {
        McSettings {
            paths: 100_000,
            steps: 500,
            seed: 42,
            initial_xi: 0.75,
            initial_m: 1.0,
            freeze_volatility: true,
            antithetic: false,
        }
    }
}

/// Full run configuration. Every section is optional in the TOML file and
/// falls back to the calibrated defaults; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Vec<f64>,
    pub output_dir: Option<String>,
    pub model: ModelParams,
    pub utility: UtilitySpec,
    pub grid: GridConfig,
    pub strategy: StrategyConfig,
    pub mc: McSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: vec![1.0, 1.05, 0.95],
            output_dir: None,
            model: ModelParams::default_calibration(),
            utility: UtilitySpec::Power { gamma: 3.0 },
            grid: GridConfig::default(),
            strategy: StrategyConfig::default(),
            mc: McSettings::default(),
        }
    }
}

/// Command-line overrides for individual configuration keys.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub horizon: Option<f64>,
    pub j_count: Option<usize>,
    pub y_mult: Option<f64>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = toml::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(a) = o.alpha {
            self.grid.alpha = a;
        }
        if let Some(h) = o.horizon {
            self.grid.horizon = h;
        }
        if let Some(j) = o.j_count {
            self.grid.j_count = j;
        }
        if let Some(m) = o.y_mult {
            self.scenario = vec![m];
        }
        if let Some(p) = o.paths {
            self.mc.paths = p;
        }
        if let Some(s) = o.seed {
            self.mc.seed = s;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.utility.validate()?;
        let g = &self.grid;
        if !(g.alpha > 0.0 && g.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", g.alpha)));
        }
        if !(g.horizon > 0.0) {
            return Err(Error::Config(format!("horizon must be > 0, got {}", g.horizon)));
        }
        if g.j_count < 4 {
            return Err(Error::Config(format!("j_count must be >= 4, got {}", g.j_count)));
        }
        if !(g.safety > 0.0 && g.safety <= 1.0) {
            return Err(Error::Config(format!("safety must lie in (0, 1], got {}", g.safety)));
        }
        if self.scenario.is_empty() {
            return Err(Error::Config("scenario list must not be empty".into()));
        }
        if self.scenario.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::Config("scenario multipliers must be > 0".into()));
        }
        if !(self.strategy.m > 0.0) {
            return Err(Error::Config(format!("strategy m must be > 0, got {}", self.strategy.m)));
        }
        if self.mc.paths == 0 || self.mc.steps == 0 {
            return Err(Error::Config("mc paths and steps must be >= 1".into()));
        }
        if !(self.mc.initial_xi > g.alpha && self.mc.initial_xi <= 1.0) {
            return Err(Error::Config(format!(
                "mc initial_xi {} outside ({}, 1]",
                self.mc.initial_xi, g.alpha
            )));
        }
        if !(self.mc.initial_m > 0.0) {
            return Err(Error::Config(format!(
                "mc initial_m must be > 0, got {}",
                self.mc.initial_m
            )));
        }
        Ok(())
    }

    /// Effective configuration rendered as TOML, used verbatim in output-file
    /// comment headers so every artifact records how it was produced.
    pub fn echo_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("config echo failed: {e}")))
    }
}
