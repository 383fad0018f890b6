use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypotheses::check_p;
use crate::requirements::{parse_rules, Requirement};

/// Every experiment is a pure function of this configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    /// Sample size.
    pub m: usize,
    /// Monte Carlo trials for complexity estimates.
    pub trials: usize,
    pub rho: f64,
    pub delta: f64,
    pub p: f64,
    #[serde(rename = "K")]
    pub label_count: usize,
    pub d: usize,
    /// Sequence length for structured experiments.
    pub l: usize,
    /// Optional rule file replacing the generated requirement.
    pub requirement: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Independent sample draws (bound checks) or instances (sandwich).
    pub draws: usize,
    /// Size of the finite input support.
    pub support: usize,
    /// Candidate hypotheses drawn from the unit ball.
    pub candidates: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: "bound-multiclass".into(),
            seed: 0,
            m: 200,
            trials: crate::complexity::DEFAULT_TRIALS,
            rho: crate::losses::DEFAULT_RHO,
            delta: crate::losses::DEFAULT_DELTA,
            p: 2.0,
            label_count: 3,
            d: 5,
            l: 3,
            requirement: None,
            out: None,
            draws: 200,
            support: 64,
            candidates: 4096,
        }
    }
}

impl ExperimentConfig {
    /// Defaults tuned per experiment.
    pub fn for_experiment(name: &str) -> Self {
        let base = Self {
            experiment: name.to_string(),
            ..Self::default()
        };
        match name {
            "itv" => Self {
                m: 10,
                draws: 100,
                support: 8,
                ..base
            },
            "counterexample" => Self {
                m: 20,
                draws: 1,
                label_count: 2,
                support: 2,
                ..base
            },
            "bound-structured" => Self {
                label_count: 2,
                d: 3,
                support: 48,
                ..base
            },
            "complexity" => Self {
                m: 30,
                trials: 10_000,
                draws: 20,
                ..base
            },
            _ => base,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(Error::from_json)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m", self.m),
            ("trials", self.trials),
            ("K", self.label_count),
            ("d", self.d),
            ("l", self.l),
            ("draws", self.draws),
            ("support", self.support),
            ("candidates", self.candidates),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be positive")));
        }
        if !(self.rho > 0.0) {
            return Err(Error::NonpositiveRho(self.rho));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        check_p(self.p)
    }

    /// The rule file named by the config, if any.
    pub fn load_requirement(&self) -> Result<Option<Requirement>> {
        match &self.requirement {
            Some(path) => Ok(Some(parse_rules(&fs::read_to_string(path)?)?)),
            None => Ok(None),
        }
    }

    /// `3σ` binomial slack above `δ` for `draws` independent trials.
    pub fn violation_threshold(&self) -> f64 {
        self.delta + 3.0 * (self.delta * (1.0 - self.delta) / self.draws as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_defaults() {
        let cfg =
            ExperimentConfig::from_json(r#"{"experiment": "itv", "seed": 9, "K": 4}"#).unwrap();
        assert_eq!(cfg.label_count, 4);
        assert_eq!(cfg.m, 200);
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        assert!(ExperimentConfig::from_json(r#"{"rho": 0}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn slack_matches_hand_value() {
        let cfg = ExperimentConfig::default();
        assert!(
            (cfg.violation_threshold() - (0.05 + 3.0 * (0.05f64 * 0.95 / 200.0).sqrt())).abs()
                < 1e-15
        );
    }
}
