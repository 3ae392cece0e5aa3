//! Run configuration.
//!
//! The on-disk format is a flat TOML table. Skill and difficulty figures are
//! written in percentage points (`normal_skill_mean = 60`) and converted to
//! probabilities when loaded; everything downstream works in `[0, 1]` units.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::WorkerClass;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub mean: f64,
    pub std_dev: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolCounts {
    pub adversarial: usize,
    pub normal: usize,
    pub expert: usize,
}

impl PoolCounts {
    pub fn get(&self, class: WorkerClass) -> usize {
        match class {
            WorkerClass::Adversarial => self.adversarial,
            WorkerClass::Normal => self.normal,
            WorkerClass::Expert => self.expert,
        }
    }

    pub fn total(&self) -> usize {
        self.adversarial + self.normal + self.expert
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub pool_counts: PoolCounts,
    pub adversarial_skill: Gaussian,
    pub normal_skill: Gaussian,
    pub expert_skill: Gaussian,
    pub difficulty: Gaussian,
    pub availability_prob: f64,
    pub confidence_threshold: f64,
    pub prior_mean: f64,
    /// `alpha + beta` of the initial Beta belief about every crowd worker.
    pub prior_strength: f64,
    pub initial_query_count: usize,
    pub worker_cost: f64,
    pub expert_cost: f64,
    /// Fixed skill the system assumes for known experts.
    pub expert_belief_mean: f64,
    pub expert_belief_strength: f64,
    pub epsilon: f64,
    /// Questions per simulated session.
    pub questions: usize,
    pub runs: usize,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config::from_file_repr(ConfigFile::default())
    }
}

impl Config {
    pub fn skill(&self, class: WorkerClass) -> Gaussian {
        match class {
            WorkerClass::Adversarial => self.adversarial_skill,
            WorkerClass::Normal => self.normal_skill,
            WorkerClass::Expert => self.expert_skill,
        }
    }

    pub fn prior_alpha(&self) -> f64 {
        self.prior_mean * self.prior_strength
    }

    pub fn prior_beta(&self) -> f64 {
        (1.0 - self.prior_mean) * self.prior_strength
    }

    pub fn from_toml_str(text: &str) -> Result<Config> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let config = Config::from_file_repr(file);
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::from_toml_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&ConfigFile::from(self)).expect("flat config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        for g in [
            self.adversarial_skill,
            self.normal_skill,
            self.expert_skill,
            self.difficulty,
        ] {
            if !g.mean.is_finite() || !g.std_dev.is_finite() || g.std_dev < 0.0 {
                return bad("Gaussian parameters must be finite with non-negative std");
            }
        }
        if !(self.availability_prob > 0.0 && self.availability_prob <= 1.0) {
            return bad("availability_prob must lie in (0, 1]");
        }
        if !(self.confidence_threshold >= 0.5 && self.confidence_threshold < 1.0) {
            return bad("confidence_threshold must lie in [0.5, 1)");
        }
        if !(self.prior_mean > 0.0 && self.prior_mean < 1.0) {
            return bad("prior_mean must lie in (0, 1)");
        }
        if !(self.prior_strength > 0.0 && self.prior_strength.is_finite()) {
            return bad("prior_strength must be positive");
        }
        if self.initial_query_count == 0 {
            return bad("initial_query_count must be at least 1");
        }
        if !(self.worker_cost > 0.0 && self.expert_cost > 0.0) {
            return bad("costs must be positive");
        }
        if !(self.expert_belief_mean > 0.0 && self.expert_belief_mean < 1.0) {
            return bad("expert_belief_mean must lie in (0, 1)");
        }
        if self.expert_belief_strength.is_nan() || self.expert_belief_strength <= 0.0 {
            return bad("expert_belief_strength must be positive");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return bad("epsilon must lie in (0, 0.5)");
        }
        if self.runs == 0 {
            return bad("runs must be at least 1");
        }
        Ok(())
    }

    fn from_file_repr(f: ConfigFile) -> Config {
        let pct = |mean: f64, std_dev: f64| Gaussian {
            mean: mean / 100.0,
            std_dev: std_dev / 100.0,
        };
        Config {
            pool_counts: PoolCounts {
                adversarial: f.adversarial_workers,
                normal: f.normal_workers,
                expert: f.expert_workers,
            },
            adversarial_skill: pct(f.adversarial_skill_mean, f.adversarial_skill_std),
            normal_skill: pct(f.normal_skill_mean, f.normal_skill_std),
            expert_skill: pct(f.expert_skill_mean, f.expert_skill_std),
            difficulty: pct(f.difficulty_mean, f.difficulty_std),
            availability_prob: f.availability_prob,
            confidence_threshold: f.confidence_threshold,
            prior_mean: f.prior_mean,
            prior_strength: f.prior_strength,
            initial_query_count: f.initial_query_count,
            worker_cost: f.worker_cost,
            expert_cost: f.expert_cost,
            expert_belief_mean: f.expert_belief_mean,
            expert_belief_strength: f.expert_belief_strength,
            epsilon: f.epsilon,
            questions: f.questions,
            runs: f.runs,
            seed: f.seed,
        }
    }
}

/// Flat file representation; percentages where the field name says so.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    adversarial_workers: usize,
    normal_workers: usize,
    expert_workers: usize,
    adversarial_skill_mean: f64,
    adversarial_skill_std: f64,
    normal_skill_mean: f64,
    normal_skill_std: f64,
    expert_skill_mean: f64,
    expert_skill_std: f64,
    difficulty_mean: f64,
    difficulty_std: f64,
    availability_prob: f64,
    confidence_threshold: f64,
    prior_mean: f64,
    prior_strength: f64,
    initial_query_count: usize,
    worker_cost: f64,
    expert_cost: f64,
    expert_belief_mean: f64,
    expert_belief_strength: f64,
    epsilon: f64,
    questions: usize,
    runs: usize,
    seed: u64,
}

impl Default for ConfigFile {
    fn default() -> Self {
        ConfigFile {
            adversarial_workers: 5,
            normal_workers: 25,
            expert_workers: 5,
            adversarial_skill_mean: 15.0,
            adversarial_skill_std: 5.0,
            normal_skill_mean: 60.0,
            normal_skill_std: 15.0,
            expert_skill_mean: 85.0,
            expert_skill_std: 5.0,
            difficulty_mean: 0.0,
            difficulty_std: 15.0,
            availability_prob: 0.6,
            confidence_threshold: 0.9,
            prior_mean: 0.6,
            prior_strength: 2.0,
            initial_query_count: 3,
            worker_cost: 1.0,
            expert_cost: 5.0,
            expert_belief_mean: 0.85,
            expert_belief_strength: 20.0,
            epsilon: 1e-6,
            questions: 2000,
            runs: 10,
            seed: 42,
        }
    }
}

impl From<&Config> for ConfigFile {
    fn from(c: &Config) -> Self {
        ConfigFile {
            adversarial_workers: c.pool_counts.adversarial,
            normal_workers: c.pool_counts.normal,
            expert_workers: c.pool_counts.expert,
            adversarial_skill_mean: c.adversarial_skill.mean * 100.0,
            adversarial_skill_std: c.adversarial_skill.std_dev * 100.0,
            normal_skill_mean: c.normal_skill.mean * 100.0,
            normal_skill_std: c.normal_skill.std_dev * 100.0,
            expert_skill_mean: c.expert_skill.mean * 100.0,
            expert_skill_std: c.expert_skill.std_dev * 100.0,
            difficulty_mean: c.difficulty.mean * 100.0,
            difficulty_std: c.difficulty.std_dev * 100.0,
            availability_prob: c.availability_prob,
            confidence_threshold: c.confidence_threshold,
            prior_mean: c.prior_mean,
            prior_strength: c.prior_strength,
            initial_query_count: c.initial_query_count,
            worker_cost: c.worker_cost,
            expert_cost: c.expert_cost,
            expert_belief_mean: c.expert_belief_mean,
            expert_belief_strength: c.expert_belief_strength,
            epsilon: c.epsilon,
            questions: c.questions,
            runs: c.runs,
            seed: c.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_baseline_setup() {
        let c = Config::default();
        c.validate().unwrap();
        assert_eq!(c.pool_counts.total(), 35);
        assert_eq!(c.confidence_threshold, 0.9);
        assert_eq!(c.prior_mean, 0.6);
        assert_eq!(c.expert_cost, 5.0 * c.worker_cost);
        assert!((c.normal_skill.mean - 0.60).abs() < 1e-12);
        assert!((c.adversarial_skill.std_dev - 0.05).abs() < 1e-12);
        assert!(c.prior_alpha() > 0.0 && c.prior_beta() > 0.0);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = Config::from_toml_str("difficulty_mean = -15\nruns = 3\n").unwrap();
        assert!((c.difficulty.mean + 0.15).abs() < 1e-12);
        assert_eq!(c.runs, 3);
        assert_eq!(c.pool_counts.normal, 25);
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(Config::from_toml_str("bogus = 1\n").is_err());
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        for text in [
            "confidence_threshold = 1.0",
            "confidence_threshold = 0.4",
            "prior_mean = 0.0",
            "prior_strength = 0",
            "initial_query_count = 0",
            "epsilon = 0.5",
            "availability_prob = 0",
            "normal_skill_std = -1",
        ] {
            assert!(Config::from_toml_str(text).is_err(), "{text} accepted");
        }
    }

    #[test]
    fn file_round_trip() {
        let c = Config::from_toml_str("seed = 7\nnormal_workers = 40\n").unwrap();
        let back = Config::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back.seed, 7);
        assert_eq!(back.pool_counts, c.pool_counts);
        assert!((back.normal_skill.mean - c.normal_skill.mean).abs() < 1e-12);
    }

    #[test]
    fn missing_file_names_path() {
        let err = Config::load(Path::new("/nonexistent/crowd.toml")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/crowd.toml"));
    }
}
