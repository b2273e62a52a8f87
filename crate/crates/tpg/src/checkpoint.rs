//! Versioned JSON checkpoints. A checkpoint plus the master seed fully
//! determines the rest of a run: every random stream is derived from
//! (seed, generation, context), so no generator state needs saving.

use crate::config::RunConfig;
use crate::evolve::{ChampionRecord, Engine, ProgramRecord, TaskScores};
use crate::graph::Team;
use crate::ids::{BankId, IdGen, TeamId};
use crate::lgp::ProgramAction;
use crate::population::Population;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported checkpoint version {0} (expected {CHECKPOINT_VERSION})")]
    Version(u32),
    #[error("inconsistent checkpoint: {0}")]
    Integrity(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: RunConfig,
    pub generation: u64,
    pub ids: IdGen,
    pub banks: Vec<BankId>,
    pub programs: Vec<ProgramRecord>,
    pub teams: Vec<Team>,
    pub scores: Vec<(TeamId, TaskScores)>,
    pub archive: Vec<ChampionRecord>,
}

impl Checkpoint {
    pub fn of(engine: &Engine) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: engine.config.clone(),
            generation: engine.generation,
            ids: engine.pop.ids.clone(),
            banks: engine.pop.banks.iter().copied().collect(),
            programs: engine.pop.programs.values().map(ProgramRecord::of).collect(),
            teams: engine.pop.teams.values().cloned().collect(),
            scores: engine.scores.iter().map(|(&t, &s)| (t, s)).collect(),
            archive: engine.archive.clone(),
        }
    }

    /// Rebuilds the engine, re-deriving intron masks and indegrees and
    /// rejecting dangling references or broken team invariants.
    pub fn into_engine(self) -> Result<Engine, CheckpointError> {
        if self.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version(self.version));
        }
        self.config
            .validate()
            .map_err(|e| CheckpointError::Integrity(e.to_string()))?;
        let mut pop = Population::new();
        pop.ids = self.ids;
        pop.banks = self.banks.into_iter().collect();
        for rec in self.programs {
            if !pop.banks.contains(&rec.memory_ref) {
                return Err(CheckpointError::Integrity(format!(
                    "program {} references unknown bank {}",
                    rec.id, rec.memory_ref
                )));
            }
            if rec.instructions.is_empty() {
                return Err(CheckpointError::Integrity(format!(
                    "program {} holds no instructions",
                    rec.id
                )));
            }
            pop.ids.observe(Some(rec.id), None, Some(rec.memory_ref));
            if pop.programs.insert(rec.id, rec.clone().instantiate()).is_some() {
                return Err(CheckpointError::Integrity(format!(
                    "duplicate program id {}",
                    rec.id
                )));
            }
        }
        for prog in pop.programs.values() {
            if let ProgramAction::Team(t) = prog.action {
                if !self.teams.iter().any(|team| team.id == t) {
                    return Err(CheckpointError::Integrity(format!(
                        "program {} points at unknown team {t}",
                        prog.id
                    )));
                }
            }
        }
        for team in self.teams {
            if team.programs.len() < 2 {
                return Err(CheckpointError::Integrity(format!(
                    "team {} holds fewer than two programs",
                    team.id
                )));
            }
            let mut has_leaf = false;
            for pid in &team.programs {
                match pop.programs.get(pid) {
                    Some(p) => has_leaf |= p.action.is_leaf(),
                    None => {
                        return Err(CheckpointError::Integrity(format!(
                            "team {} references unknown program {pid}",
                            team.id
                        )))
                    }
                }
            }
            if !has_leaf {
                return Err(CheckpointError::Integrity(format!(
                    "team {} holds no leaf program",
                    team.id
                )));
            }
            pop.ids.observe(None, Some(team.id), None);
            if pop.teams.insert(team.id, team.clone()).is_some() {
                return Err(CheckpointError::Integrity(format!(
                    "duplicate team id {}",
                    team.id
                )));
            }
        }
        pop.recount_indegrees();
        let mut scores: BTreeMap<TeamId, TaskScores> = BTreeMap::new();
        for (team, row) in self.scores {
            if !pop.teams.contains_key(&team) {
                return Err(CheckpointError::Integrity(format!(
                    "score row for unknown team {team}"
                )));
            }
            for v in row.iter().flatten() {
                if !v.is_finite() {
                    return Err(CheckpointError::Integrity(format!(
                        "non-finite score for team {team}"
                    )));
                }
            }
            scores.insert(team, row);
        }
        Ok(Engine {
            config: self.config,
            pop,
            scores,
            generation: self.generation,
            archive: self.archive,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Checkpoint, CheckpointError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Engine, CheckpointError> {
        Checkpoint::from_json(&std::fs::read_to_string(path)?)?.into_engine()
    }
}
