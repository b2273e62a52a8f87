//! Episode recording: a flat CSV of observable quantities per step, and a
//! richer JSON replay trace carrying traversal records and memory-bank
//! snapshots for the analysis reducers.

use crate::env::TaskId;
use crate::evolve::run_graph_episode;
use crate::graph::{EvalBanks, TraversalTrace};
use crate::ids::{BankId, TeamId};
use crate::lgp::MEM_SLOTS;
use crate::population::Population;
use crate::rng::Stream;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed trace: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid trace: {0}")]
    Invalid(String),
}

/// One timestep of a replayed episode. `banks` is the post-step snapshot of
/// every reachable shared bank.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplayStep {
    pub t: u32,
    pub s0: f64,
    pub s1: f64,
    pub a_d: u8,
    pub a_c: f64,
    pub reward: f64,
    pub done: bool,
    pub hidden: Vec<f64>,
    pub traversal: TraversalTrace,
    pub banks: BTreeMap<BankId, [f64; MEM_SLOTS]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplayTrace {
    pub task: TaskId,
    pub root: TeamId,
    pub episode: u64,
    pub total_reward: f64,
    pub steps: Vec<ReplayStep>,
}

impl ReplayTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }

    pub fn from_json(text: &str) -> Result<ReplayTrace, TraceError> {
        let trace: ReplayTrace = serde_json::from_str(text)?;
        trace.validate()?;
        Ok(trace)
    }

    /// Structural checks shared by the loader and the fuzz harness.
    pub fn validate(&self) -> Result<(), TraceError> {
        let hidden = self.task.hidden_vars();
        for (i, step) in self.steps.iter().enumerate() {
            if step.t as usize != i {
                return Err(TraceError::Invalid(format!(
                    "step {i} carries timestep {}",
                    step.t
                )));
            }
            if step.hidden.len() != hidden {
                return Err(TraceError::Invalid(format!(
                    "step {i} holds {} hidden vars, task has {hidden}",
                    step.hidden.len()
                )));
            }
            for &(bank, slot, written_at) in &step.traversal.memory_reads {
                if slot as usize >= MEM_SLOTS {
                    return Err(TraceError::Invalid(format!("read of slot {slot}")));
                }
                if written_at > step.t {
                    return Err(TraceError::Invalid(format!(
                        "step {i} read of {bank}[{slot}] written in the future"
                    )));
                }
            }
            for &(_, slot) in &step.traversal.memory_writes {
                if slot as usize >= MEM_SLOTS {
                    return Err(TraceError::Invalid(format!("write of slot {slot}")));
                }
            }
        }
        if let Some(last) = self.steps.last() {
            if !last.done {
                return Err(TraceError::Invalid("episode does not terminate".into()));
            }
        }
        Ok(())
    }
}

/// Runs one episode and captures the full replay trace.
pub fn record_episode(
    pop: &Population,
    root: TeamId,
    task: TaskId,
    banks: &mut EvalBanks,
    rng: &mut Stream,
    episode: u64,
) -> ReplayTrace {
    let mut steps: Vec<ReplayStep> = Vec::new();
    let mut sink = |step: &crate::env::EpisodeStep, trav: &TraversalTrace, banks: &EvalBanks| {
        steps.push(ReplayStep {
            t: step.t,
            s0: step.obs.s0,
            s1: step.obs.s1,
            a_d: step.action.a_d,
            a_c: step.action.a_c,
            reward: step.reward,
            done: step.done,
            hidden: step.hidden[..task.hidden_vars()].to_vec(),
            traversal: trav.clone(),
            banks: banks
                .bank_ids()
                .map(|id| (id, *banks.bank_values(id)))
                .collect(),
        });
    };
    let total_reward = run_graph_episode(pop, root, task, banks, rng, Some(&mut sink));
    ReplayTrace {
        task,
        root,
        episode,
        total_reward,
        steps,
    }
}

fn csv_header(task: TaskId) -> Vec<&'static str> {
    let mut h = vec!["t", "s0", "s1", "a_d", "a_c", "reward", "done", "hidden_v0"];
    if task.hidden_vars() == 2 {
        h.push("hidden_v1");
    }
    h
}

/// Writes the observable per-step record of one episode as CSV.
pub fn write_episode_csv<W: io::Write>(w: W, trace: &ReplayTrace) -> Result<(), TraceError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(csv_header(trace.task))?;
    for step in &trace.steps {
        let mut rec = vec![
            step.t.to_string(),
            step.s0.to_string(),
            step.s1.to_string(),
            step.a_d.to_string(),
            step.a_c.to_string(),
            step.reward.to_string(),
            step.done.to_string(),
        ];
        for h in &step.hidden {
            rec.push(h.to_string());
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// One parsed row of the episode CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRow {
    pub t: u32,
    pub s0: f64,
    pub s1: f64,
    pub a_d: u8,
    pub a_c: f64,
    pub reward: f64,
    pub done: bool,
    pub hidden: Vec<f64>,
}

/// Parses an episode CSV written for `task`, validating the header.
pub fn read_episode_csv<R: io::Read>(r: R, task: TaskId) -> Result<Vec<EpisodeRow>, TraceError> {
    let mut rdr = csv::Reader::from_reader(r);
    let expect = csv_header(task);
    let header: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if header != expect {
        return Err(TraceError::Invalid(format!(
            "unexpected header {header:?}"
        )));
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        if record.len() != expect.len() {
            return Err(TraceError::Invalid(format!(
                "row holds {} fields, expected {}",
                record.len(),
                expect.len()
            )));
        }
        let field = |i: usize| -> &str { record.get(i).unwrap_or("") };
        let parse_f64 = |i: usize| -> Result<f64, TraceError> {
            field(i)
                .parse()
                .map_err(|_| TraceError::Invalid(format!("bad number `{}`", field(i))))
        };
        let mut hidden = vec![parse_f64(7)?];
        if expect.len() == 9 {
            hidden.push(parse_f64(8)?);
        }
        rows.push(EpisodeRow {
            t: field(0)
                .parse()
                .map_err(|_| TraceError::Invalid(format!("bad timestep `{}`", field(0))))?,
            s0: parse_f64(1)?,
            s1: parse_f64(2)?,
            a_d: field(3)
                .parse()
                .map_err(|_| TraceError::Invalid(format!("bad action `{}`", field(3))))?,
            a_c: parse_f64(4)?,
            reward: parse_f64(5)?,
            done: field(6)
                .parse()
                .map_err(|_| TraceError::Invalid(format!("bad flag `{}`", field(6))))?,
            hidden,
        });
    }
    Ok(rows)
}
