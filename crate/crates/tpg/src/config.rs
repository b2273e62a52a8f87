//! Run configuration: flat key-value text with the published parameter
//! names, plus `TPG_`-prefixed environment overrides.

use crate::env::TaskId;
use crate::graph::TeamParams;
use crate::lgp::ProgramParams;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    pub r_size: usize,
    pub n_elite: usize,
    pub tasks: Vec<TaskId>,
    pub generations: u64,
    pub seed: u64,
    pub p_x: f64,
    pub team: TeamParams,
    pub program: ProgramParams,
    pub episodes_per_task: u32,
    /// Checkpoint every this many generations; 0 writes only the final one.
    pub checkpoint_interval: u64,
    /// Champion test interval in generations.
    pub test_interval: u64,
    pub test_episodes: u32,
    pub no_crossover: bool,
    pub no_memory: bool,
    pub no_hierarchy: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            r_size: 1000,
            n_elite: 50,
            tasks: TaskId::ALL.to_vec(),
            generations: 100,
            seed: 1,
            p_x: 0.2,
            team: TeamParams::default(),
            program: ProgramParams::default(),
            episodes_per_task: 5,
            checkpoint_interval: 0,
            test_interval: 5,
            test_episodes: 100,
            no_crossover: false,
            no_memory: false,
            no_hierarchy: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {0}: expected `key = value`")]
    Syntax(usize),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {value}")]
    InvalidValue { key: String, value: String },
    #[error("`{0}` must be a probability in [0, 1]")]
    ProbabilityRange(&'static str),
    #[error("task list must not be empty")]
    EmptyTasks,
    #[error("{0}")]
    Constraint(String),
}

impl RunConfig {
    /// Parses the flat key-value format. Unknown keys are rejected.
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or(ConfigError::Syntax(lineno + 1))?;
            if value.is_empty() {
                return Err(ConfigError::Syntax(lineno + 1));
            }
            cfg.apply(key, value)?;
        }
        cfg.apply_env_overrides(std::env::vars())?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `TPG_<KEY>` environment overrides (key names case-insensitive).
    fn apply_env_overrides(
        &mut self,
        vars: impl Iterator<Item = (String, String)>,
    ) -> Result<(), ConfigError> {
        let mut overrides: BTreeMap<String, String> = BTreeMap::new();
        for (k, v) in vars {
            if let Some(key) = k.strip_prefix("TPG_") {
                overrides.insert(key.to_ascii_lowercase(), v);
            }
        }
        for (key, value) in overrides {
            self.apply(&key, &value)?;
        }
        Ok(())
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
            value.parse().map_err(|_| ConfigError::InvalidValue {
                key: key.to_string(),
                value: value.to_string(),
            })
        }
        match key.to_ascii_lowercase().as_str() {
            "r_size" => self.r_size = num(key, value)?,
            "n_elite" => self.n_elite = num(key, value)?,
            "generations" => self.generations = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "p_x" => self.p_x = num(key, value)?,
            "tmsize_init" => self.team.tm_size_init = num(key, value)?,
            "p_md" => self.team.p_md = num(key, value)?,
            "p_ma" => self.team.p_ma = num(key, value)?,
            "p_mm" => self.team.p_mm = num(key, value)?,
            "p_mn" => self.team.p_mn = num(key, value)?,
            "p_ms" => self.team.p_ms = num(key, value)?,
            "p_atomic" => self.team.p_atomic = num(key, value)?,
            "p_action" => self.team.p_action_mutate = num(key, value)?,
            "progsize_init" => self.program.prog_size_init = num(key, value)?,
            "p_delete" => self.program.p_delete = num(key, value)?,
            "p_add" => self.program.p_add = num(key, value)?,
            "p_mutate" => self.program.p_mutate = num(key, value)?,
            "p_swap" => self.program.p_swap = num(key, value)?,
            "episodes_per_task" => self.episodes_per_task = num(key, value)?,
            "checkpoint_interval" => self.checkpoint_interval = num(key, value)?,
            "test_interval" => self.test_interval = num(key, value)?,
            "test_episodes" => self.test_episodes = num(key, value)?,
            "no_crossover" => self.no_crossover = num(key, value)?,
            "no_memory" => self.no_memory = num(key, value)?,
            "no_hierarchy" => self.no_hierarchy = num(key, value)?,
            "tasks" => {
                let mut tasks = Vec::new();
                for name in value.split(',') {
                    let task = TaskId::parse(name).ok_or_else(|| ConfigError::InvalidValue {
                        key: key.to_string(),
                        value: name.trim().to_string(),
                    })?;
                    if !tasks.contains(&task) {
                        tasks.push(task);
                    }
                }
                tasks.sort();
                self.tasks = tasks;
            }
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let probs: [(&'static str, f64); 13] = [
            ("p_x", self.p_x),
            ("p_md", self.team.p_md),
            ("p_ma", self.team.p_ma),
            ("p_mm", self.team.p_mm),
            ("p_mn", self.team.p_mn),
            ("p_ms", self.team.p_ms),
            ("p_atomic", self.team.p_atomic),
            ("p_action", self.team.p_action_mutate),
            ("p_delete", self.program.p_delete),
            ("p_add", self.program.p_add),
            ("p_mutate", self.program.p_mutate),
            ("p_swap", self.program.p_swap),
            ("p_x", self.p_x),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(ConfigError::ProbabilityRange(name));
            }
        }
        if self.tasks.is_empty() {
            return Err(ConfigError::EmptyTasks);
        }
        if self.r_size < 2 {
            return Err(ConfigError::Constraint("R_size must be >= 2".into()));
        }
        if self.n_elite < 1 {
            return Err(ConfigError::Constraint("n_elite must be >= 1".into()));
        }
        if self.team.tm_size_init < 2 {
            return Err(ConfigError::Constraint("tmSize_init must be >= 2".into()));
        }
        if self.episodes_per_task < 1 {
            return Err(ConfigError::Constraint(
                "episodes_per_task must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Writes the config back in its text form; `parse(to_text(c)) == c`
    /// when no environment overrides are active.
    pub fn to_text(&self) -> String {
        let tasks = self
            .tasks
            .iter()
            .map(|t| t.name())
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "R_size = {}\n\
             n_elite = {}\n\
             tasks = {}\n\
             generations = {}\n\
             seed = {}\n\
             p_x = {}\n\
             tmSize_init = {}\n\
             p_md = {}\n\
             p_ma = {}\n\
             p_mm = {}\n\
             p_mn = {}\n\
             p_ms = {}\n\
             p_atomic = {}\n\
             p_action = {}\n\
             progSize_init = {}\n\
             p_delete = {}\n\
             p_add = {}\n\
             p_mutate = {}\n\
             p_swap = {}\n\
             episodes_per_task = {}\n\
             checkpoint_interval = {}\n\
             test_interval = {}\n\
             test_episodes = {}\n\
             no_crossover = {}\n\
             no_memory = {}\n\
             no_hierarchy = {}\n",
            self.r_size,
            self.n_elite,
            tasks,
            self.generations,
            self.seed,
            self.p_x,
            self.team.tm_size_init,
            self.team.p_md,
            self.team.p_ma,
            self.team.p_mm,
            self.team.p_mn,
            self.team.p_ms,
            self.team.p_atomic,
            self.team.p_action_mutate,
            self.program.prog_size_init,
            self.program.p_delete,
            self.program.p_add,
            self.program.p_mutate,
            self.program.p_swap,
            self.episodes_per_task,
            self.checkpoint_interval,
            self.test_interval,
            self.test_episodes,
            self.no_crossover,
            self.no_memory,
            self.no_hierarchy,
        )
    }
}
