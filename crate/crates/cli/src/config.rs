//! Experiment configuration (TOML, schema version 1).
//!
//! ```toml
//! version = 1
//! horizon = 10000
//! delta = 0.05
//! seeds = [1, 2, 3, 4, 5]
//! output = "out/two-state"
//!
//! [environment]
//! kind = "two-state"      # or: kind = "file", path = "model.json"
//! theta = 0.8
//! c_ub = 0.45
//!
//! [learner]
//! name = "ucrl-cmdp"      # see LearnerSpec for per-learner keys
//!
//! [checkpoints]           # optional
//! geometric_ratio = 1.5   # 0 disables the geometric grid
//! points = [10000]
//! ```

use std::path::{Path, PathBuf};

use cmdplab::harness::{CheckpointSchedule, RunSpec};
use cmdplab::learners::LearnerSpec;
use cmdplab::model::Cmdp;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvironmentConfig {
    TwoState { theta: f64, c_ub: f64 },
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointConfig {
    #[serde(default = "default_ratio")]
    pub geometric_ratio: f64,
    #[serde(default)]
    pub points: Vec<u64>,
}

fn default_ratio() -> f64 {
    1.5
}

impl Default for CheckpointConfig {
    fn default() -> Self {
        Self {
            geometric_ratio: default_ratio(),
            points: Vec::new(),
        }
    }
}

impl CheckpointConfig {
    pub fn schedule(&self) -> CheckpointSchedule {
        CheckpointSchedule {
            geometric_ratio: (self.geometric_ratio != 0.0).then_some(self.geometric_ratio),
            points: self.points.clone(),
        }
    }
}

fn default_delta() -> f64 {
    0.05
}

fn default_output() -> PathBuf {
    PathBuf::from("cmdplab-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub horizon: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub initial_state: usize,
    pub environment: EnvironmentConfig,
    pub learner: LearnerSpec,
    #[serde(default)]
    pub checkpoints: CheckpointConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse(m) => ConfigError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })?;
        // Model files are resolved relative to the config's directory.
        if let EnvironmentConfig::File { path: model } = &mut cfg.environment {
            if model.is_relative() {
                if let Some(dir) = path.parent() {
                    *model = dir.join(&*model);
                }
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(with_learner_names(e.to_string())))?;
        cfg.validate(Some(text))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Checks value ranges. With the source text, messages point at the
    /// offending key's line.
    pub fn validate(&self, source: Option<&str>) -> Result<(), ConfigError> {
        let fail = |key: &str, msg: String| {
            let at = source
                .and_then(|s| line_of(s, key))
                .map(|l| format!("line {l}: "))
                .unwrap_or_default();
            Err(ConfigError::Invalid(format!("{at}{msg}")))
        };
        if self.version != SCHEMA_VERSION {
            return fail(
                "version",
                format!("unsupported config version {} (expected {SCHEMA_VERSION})", self.version),
            );
        }
        if self.horizon == 0 {
            return fail("horizon", "horizon must be at least 1".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return fail("delta", format!("delta = {} must lie in (0, 1)", self.delta));
        }
        if self.seeds.is_empty() {
            return fail("seeds", "seed list is empty".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return fail("seeds", "seeds must be distinct".into());
        }
        if let EnvironmentConfig::TwoState { theta, c_ub } = self.environment {
            if !(0.0..=1.0).contains(&theta) {
                return fail("theta", format!("theta = {theta} outside [0, 1]"));
            }
            if !c_ub.is_finite() {
                return fail("c_ub", format!("c_ub = {c_ub} is not finite"));
            }
        }
        let r = self.checkpoints.geometric_ratio;
        if r != 0.0 && !(r > 1.0 && r.is_finite()) {
            return fail(
                "geometric_ratio",
                format!("geometric_ratio = {r} must exceed 1 (or be 0 to disable)"),
            );
        }
        Ok(())
    }

    pub fn build_cmdp(&self) -> Result<Cmdp, ConfigError> {
        match &self.environment {
            EnvironmentConfig::TwoState { theta, c_ub } => {
                Cmdp::two_state(*theta, *c_ub).map_err(|e| ConfigError::Invalid(e.to_string()))
            }
            EnvironmentConfig::File { path } => {
                Cmdp::load(path).map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))
            }
        }
    }

    pub fn run_spec(&self, cmdp: Cmdp) -> Result<RunSpec, ConfigError> {
        if self.initial_state >= cmdp.n_states {
            return Err(ConfigError::Invalid(format!(
                "initial_state {} out of range for {} states",
                self.initial_state, cmdp.n_states
            )));
        }
        Ok(RunSpec {
            cmdp,
            learner: self.learner.clone(),
            horizon: self.horizon,
            delta: self.delta,
            seed: self.seeds[0],
            schedule: self.checkpoints.schedule(),
            initial_state: self.initial_state,
        })
    }
}

/// Serde reports unknown tags as "unknown variant"; make sure the valid
/// learner names are spelled out.
fn with_learner_names(msg: String) -> String {
    if msg.contains("unknown variant") && !msg.contains("ucrl-cmdp") {
        format!("{msg}\nvalid learners: {}", LearnerSpec::NAMES.join(", "))
    } else {
        msg
    }
}

/// One-based line of the first `key = ...` assignment.
fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        l.trim_start()
            .strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}
