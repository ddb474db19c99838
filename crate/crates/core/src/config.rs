//! Run configuration: a TOML document with one table per subsystem plus an
//! optional `[sweep]` table of axes.
//!
//! Every key has a default, so a file holding only `[learning] learner = "mab"`
//! is a complete configuration. [`RunConfig::effective`] resolves the
//! remaining implicit choices and is what gets echoed next to the results.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::EngineConfig;
use crate::error::ConfigError;
use crate::handover::HandoverConfig;
use crate::learning::{Learner, LearningConfig};
use crate::radio::RadioConfig;
use crate::scenario::ScenarioConfig;
use crate::scheduler::{SchedulerConfig, SchedulerMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Seeds to sweep over; empty means just `seed`.
    pub seeds: Vec<u64>,
    pub duration_ms: u64,
    pub output_dir: PathBuf,
    pub scenario: ScenarioConfig,
    pub radio: RadioConfig,
    pub handover: HandoverConfig,
    pub scheduler: SchedulerConfig,
    pub learning: LearningConfig,
    pub engine: EngineConfig,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            seeds: Vec::new(),
            duration_ms: 10_000,
            output_dir: PathBuf::from("results"),
            scenario: ScenarioConfig::default(),
            radio: RadioConfig::default(),
            handover: HandoverConfig::default(),
            scheduler: SchedulerConfig::default(),
            learning: LearningConfig::default(),
            engine: EngineConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

/// Axes of the experiment grid. Empty axes are not swept.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub learner: Vec<Learner>,
    pub pico_count: Vec<usize>,
    pub ue_count: Vec<usize>,
    pub ttt_ms: Vec<u64>,
    pub fixed_velocity_kmh: Vec<f64>,
}

impl SweepConfig {
    pub fn is_empty(&self) -> bool {
        self.learner.is_empty()
            && self.pico_count.is_empty()
            && self.ue_count.is_empty()
            && self.ttt_ms.is_empty()
            && self.fixed_velocity_kmh.is_empty()
    }
}

impl RunConfig {
    pub fn from_toml_str(src: &str) -> Result<Self, ConfigError> {
        toml::from_str(src).map_err(|e| ConfigError::Parse(e.to_string().trim_end().to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Scheduler mode in force: explicit setting, else classical PF for the
    /// baseline and context-aware for the learners.
    pub fn scheduler_mode(&self) -> SchedulerMode {
        self.scheduler.scheduler_mode.unwrap_or(match self.learning.learner {
            Learner::None => SchedulerMode::ClassicalPf,
            _ => SchedulerMode::ContextAware,
        })
    }

    pub fn history_transfer(&self) -> bool {
        self.scheduler
            .history_transfer
            .unwrap_or(self.scheduler_mode() == SchedulerMode::ContextAware)
    }

    /// Copy with every implicit choice spelled out.
    pub fn effective(&self) -> RunConfig {
        let mut c = self.clone();
        c.scheduler.scheduler_mode = Some(self.scheduler_mode());
        c.scheduler.history_transfer = Some(self.history_transfer());
        c
    }

    pub fn seed_list(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.seed]
        } else {
            self.seeds.clone()
        }
    }

    /// Checks every section. Returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>, ConfigError> {
        if self.duration_ms == 0 {
            return Err(ConfigError::invalid("duration_ms", "must be > 0"));
        }
        if self.engine.warmup_ms >= self.duration_ms {
            return Err(ConfigError::invalid(
                "engine.warmup_ms",
                format!("warm-up {} ms leaves nothing of the {} ms run", self.engine.warmup_ms, self.duration_ms),
            ));
        }
        self.scenario.validate()?;
        self.radio.validate()?;
        let mut warnings = self.handover.validate()?;
        self.scheduler.validate()?;
        self.learning.validate()?;
        if self.scenario.ues_per_sector == 0 {
            return Err(ConfigError::invalid("scenario.ues_per_sector", "must be > 0"));
        }
        for &t in &self.sweep.ttt_ms {
            if t == 0 {
                return Err(ConfigError::invalid("sweep.ttt_ms", "values must be > 0"));
            }
            if t != 40 && t != 480 {
                warnings.push(format!("sweep.ttt_ms value {t} differs from the reference values 40 and 480"));
            }
        }
        if self.sweep.ue_count.contains(&0) {
            return Err(ConfigError::invalid("sweep.ue_count", "values must be > 0"));
        }
        if self.sweep.fixed_velocity_kmh.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(ConfigError::invalid("sweep.fixed_velocity_kmh", "values must be finite and >= 0"));
        }
        Ok(warnings)
    }
}

/// Reads, parses and validates a config file.
///
/// Semantic errors get the line of the offending key attached when it can
/// be located in the source.
pub fn parse_config(path: &Path) -> Result<(RunConfig, Vec<String>), ConfigError> {
    let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&src)
}

pub fn parse_config_str(src: &str) -> Result<(RunConfig, Vec<String>), ConfigError> {
    let cfg = RunConfig::from_toml_str(src)?;
    match cfg.validate() {
        Ok(w) => Ok((cfg, w)),
        Err(ConfigError::Invalid { key, line: None, reason }) => Err(ConfigError::Invalid {
            line: locate_key(src, &key),
            key,
            reason,
        }),
        Err(e) => Err(e),
    }
}

/// 1-based line of `section.key` (or a top-level `key`) in a TOML source.
pub fn locate_key(src: &str, path: &str) -> Option<usize> {
    let (section, key) = match path.rsplit_once('.') {
        Some((s, k)) => (s, k),
        None => ("", path),
    };
    let mut current = String::new();
    for (i, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            continue;
        }
        let Some((k, _)) = line.split_once('=') else { continue };
        let k = k.trim();
        if (current == section && k == key) || (current.is_empty() && k == path) {
            return Some(i + 1);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let (c, w) = parse_config_str("[learning]\nlearner = \"mab\"\n").unwrap();
        assert!(w.is_empty());
        assert_eq!(c.learning.learner, Learner::Mab);
        assert_eq!(c.handover.ttt_ms, 480);
        assert_eq!(c.scenario.ues_per_sector, 30);
        let eff = c.effective();
        assert_eq!(eff.scheduler.scheduler_mode, Some(SchedulerMode::ContextAware));
        assert_eq!(eff.scheduler.history_transfer, Some(true));
    }

    #[test]
    fn off_reference_ttt_warns() {
        let (c, w) = parse_config_str("[handover]\nttt_ms = 100\n").unwrap();
        assert_eq!(c.handover.ttt_ms, 100);
        assert_eq!(w.len(), 1);
        assert!(w[0].contains("ttt_ms"));
    }

    #[test]
    fn malformed_file_names_line() {
        let err = parse_config_str("seed = 3\n[scenario]\nisd_m = = 5\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn unknown_key_rejected() {
        let err = parse_config_str("[radio]\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn type_mismatch_rejected() {
        let err = parse_config_str("[handover]\nttt_ms = \"long\"\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn constraint_violation_has_key_and_line() {
        let err = parse_config_str("seed = 1\n\n[scenario]\nisd_m = -5.0\n").unwrap_err();
        match err {
            ConfigError::Invalid { key, line, .. } => {
                assert_eq!(key, "scenario.isd_m");
                assert_eq!(line, Some(4));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn effective_echo_round_trips() {
        let (c, _) = parse_config_str(
            "seeds = [1, 2]\n[scenario]\nfixed_velocity_kmh = 60.0\n[sweep]\nlearner = [\"none\", \"mab\"]\nttt_ms = [40, 480]\n",
        )
        .unwrap();
        let eff = c.effective();
        let text = eff.to_toml_string();
        let (back, _) = parse_config_str(&text).unwrap();
        assert_eq!(back, eff);
        assert_eq!(back.effective(), eff);
    }
}
