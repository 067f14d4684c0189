//! `key = value` run configuration.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::model::{ModelParams, ObjectiveWeights, State};

pub const WEIGHT_KEYS: [&str; 4] = ["A1", "A2", "B1", "B2"];
pub const STATE_KEYS: [&str; 4] = ["X0", "S0", "I0", "A0"];
pub const GRID_KEYS: [&str; 2] = ["tf", "dt"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{0}` given twice")]
    Duplicate(String),
    #[error("value for `{key}` is not a number: `{value}`")]
    BadNumber { key: String, value: String },
    #[error("{0}")]
    Invalid(String),
}

/// Everything a command needs besides its own flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub weights: ObjectiveWeights,
    pub initial: State,
    /// Horizon; each command has its own default.
    pub tf: Option<f64>,
    pub dt: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::reference(),
            weights: ObjectiveWeights::default(),
            initial: State::reference_initial(),
            tf: None,
            dt: None,
        }
    }
}

fn parse_number(key: &str, value: &str) -> Result<f64, ConfigError> {
    value
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ConfigError::BadNumber {
            key: key.to_string(),
            value: value.trim().to_string(),
        })
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), ConfigError> {
        if self.params.set(key, value) {
            return Ok(());
        }
        let slot = match key {
            "A1" => &mut self.weights.pest_penalty,
            "A2" => &mut self.weights.awareness_reward,
            "B1" => &mut self.weights.pesticide_cost,
            "B2" => &mut self.weights.campaign_cost,
            "X0" => &mut self.initial.crop,
            "S0" => &mut self.initial.susceptible,
            "I0" => &mut self.initial.infected,
            "A0" => &mut self.initial.awareness,
            "tf" => {
                self.tf = Some(value);
                return Ok(());
            }
            "dt" => {
                self.dt = Some(value);
                return Ok(());
            }
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        };
        *slot = value;
        Ok(())
    }

    /// Applies a `key=value` override as given on the command line.
    pub fn apply_assignment(&mut self, text: &str) -> Result<(), ConfigError> {
        let (key, value) = text.split_once('=').ok_or_else(|| {
            ConfigError::Invalid(format!("override `{text}` is not of the form key=value"))
        })?;
        let key = key.trim();
        self.set(key, parse_number(key, value)?)
    }

    /// Applies the assignments of a configuration file on top of `self`.
    pub fn merge_str(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: idx + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::Duplicate(key.to_string()));
            }
            self.set(key, parse_number(key, value)?)?;
        }
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.merge_str(text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: crate::Error| ConfigError::Invalid(e.to_string());
        self.params.validate().map_err(invalid)?;
        self.weights.validate().map_err(invalid)?;
        State::new(
            self.initial.crop,
            self.initial.susceptible,
            self.initial.infected,
            self.initial.awareness,
        )
        .map_err(invalid)?;
        for (name, v) in [("tf", self.tf), ("dt", self.dt)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(ConfigError::Invalid(format!("{name} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }

    /// Full configuration text with the given effective horizon and step;
    /// reading it back yields the same run.
    pub fn emit(&self, tf: f64, dt: f64) -> String {
        let mut out = String::new();
        let w = &self.weights;
        let s = &self.initial;
        for (k, v) in self.params.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        for (k, v) in WEIGHT_KEYS.iter().zip([
            w.pest_penalty,
            w.awareness_reward,
            w.pesticide_cost,
            w.campaign_cost,
        ]) {
            let _ = writeln!(out, "{k} = {v}");
        }
        for (k, v) in STATE_KEYS
            .iter()
            .zip([s.crop, s.susceptible, s.infected, s.awareness])
        {
            let _ = writeln!(out, "{k} = {v}");
        }
        let _ = writeln!(out, "tf = {tf}");
        let _ = writeln!(out, "dt = {dt}");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = RunConfig::parse_str("# comment\n\nalpha = 0.06 # trailing\nA0=0.4\ntf = 50\n").unwrap();
        assert_eq!(cfg.params.attack_rate, 0.06);
        assert_eq!(cfg.initial.awareness, 0.4);
        assert_eq!(cfg.tf, Some(50.0));
        assert_eq!(cfg.dt, None);
        assert_eq!(cfg.params.growth_rate, 0.1);
    }

    #[test]
    fn errors() {
        assert!(matches!(RunConfig::parse_str("beta = 1"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(RunConfig::parse_str("r = x"), Err(ConfigError::BadNumber { .. })));
        assert!(matches!(RunConfig::parse_str("r 1"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(RunConfig::parse_str("r = 1\nr = 2"), Err(ConfigError::Duplicate(_))));
        assert!(matches!(RunConfig::parse_str("r = inf"), Err(ConfigError::BadNumber { .. })));
        let cfg = RunConfig::parse_str("phi = 1.5").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn emitted_text_round_trips() {
        let mut cfg = RunConfig::parse_str("alpha = 0.0612345678901234\nS0 = 0.1").unwrap();
        cfg.apply_assignment("lambda=0.03").unwrap();
        let text = cfg.emit(123.0, 0.02);
        let back = RunConfig::parse_str(&text).unwrap();
        assert_eq!(back.params, cfg.params);
        assert_eq!(back.weights, cfg.weights);
        assert_eq!(back.initial, cfg.initial);
        assert_eq!((back.tf, back.dt), (Some(123.0), Some(0.02)));
        assert_eq!(back.emit(123.0, 0.02), text);
    }
}
