//! Loss configuration document.
//!
//! ```toml
//! format = "fdist-weights"
//! version = 1
//! beta = 0.001
//! gamma = 0.01
//! tau = 0.85
//! epsilon_frac = 0.5
//! alpha = 1.0
//! c = 0.01
//! sigma1 = 1.0
//! sigma2 = 1.0
//! ```
//!
//! Every value except the header is optional and falls back to the library
//! default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{LossWeights, RobustParams, UncertaintyParams};

pub const WEIGHTS_FORMAT: &str = "fdist-weights";
pub const WEIGHTS_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsDoc {
    pub format: String,
    pub version: u32,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub tau: Option<f64>,
    pub epsilon_frac: Option<f64>,
    pub alpha: Option<f64>,
    pub c: Option<f64>,
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
}

/// Fully resolved loss settings.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossSettings {
    pub weights: LossWeights<f64>,
    pub robust: RobustParams<f64>,
    pub uncertainty: UncertaintyParams<f64>,
}

impl WeightsDoc {
    pub fn resolve(&self) -> Result<LossSettings> {
        if self.format != WEIGHTS_FORMAT {
            return Err(Error::schema("format", format!("expected \"{WEIGHTS_FORMAT}\", found \"{}\"", self.format)));
        }
        if self.version != WEIGHTS_VERSION {
            return Err(Error::Version {
                found: self.version,
                expected: WEIGHTS_VERSION,
            });
        }
        let d = LossSettings::default();
        let weights = LossWeights {
            beta: self.beta.unwrap_or(d.weights.beta),
            gamma: self.gamma.unwrap_or(d.weights.gamma),
            tau: self.tau.unwrap_or(d.weights.tau),
            epsilon_frac: self.epsilon_frac.unwrap_or(d.weights.epsilon_frac),
        };
        weights.validate()?;
        let robust = RobustParams::new(self.alpha.unwrap_or(d.robust.alpha()), self.c.unwrap_or(d.robust.c()))?;
        let uncertainty = UncertaintyParams::new(
            self.sigma1.unwrap_or(d.uncertainty.sigma1()),
            self.sigma2.unwrap_or(d.uncertainty.sigma2()),
        )?;
        Ok(LossSettings {
            weights,
            robust,
            uncertainty,
        })
    }
}

pub fn parse_weights(text: &str) -> Result<LossSettings> {
    let doc: WeightsDoc = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    doc.resolve()
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<LossSettings> {
    parse_weights(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_gaps() {
        let s = parse_weights("format = \"fdist-weights\"\nversion = 1\nbeta = 0.5\n").unwrap();
        assert_eq!(s.weights.beta, 0.5);
        assert_eq!(s.weights.tau, 0.85);
        assert_eq!(s.robust, RobustParams::default());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(parse_weights("format = \"fdist-weights\"\nversion = 1\nc = 0.0\n").is_err());
        assert!(parse_weights("format = \"fdist-weights\"\nversion = 1\ntau = 1.5\n").is_err());
        assert!(parse_weights("format = \"fdist-weights\"\nversion = 1\nlambda = 1\n").is_err());
        assert!(parse_weights("format = \"fdist-weights\"\nversion = 3\n").is_err());
    }
}
