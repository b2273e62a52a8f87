//! Replay-trace reducers: decision cost per timestep, temporal memory
//! windows, correlation of memory contents with unobservable velocities,
//! per-team task decomposition, and baseline-normalized score comparison.

use crate::ids::{BankId, TeamId};
use crate::lgp::MEM_SLOTS;
use crate::trace::ReplayTrace;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("need at least two data points")]
    InsufficientData,
    #[error("reference and random baseline coincide; normalization undefined")]
    DegenerateBaseline,
}

/// Decision cost of one timestep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityRow {
    pub t: u32,
    pub teams_visited: usize,
    pub programs_executed: usize,
    pub instructions_executed: usize,
}

pub fn runtime_complexity(trace: &ReplayTrace) -> Vec<ComplexityRow> {
    trace
        .steps
        .iter()
        .map(|s| ComplexityRow {
            t: s.t,
            teams_visited: s.traversal.visited_team_ids.len(),
            programs_executed: s.traversal.executed_program_count,
            instructions_executed: s.traversal.executed_instruction_count,
        })
        .collect()
}

/// How far back the oldest stateful value read at step `t` was written.
/// Zero when the step reads no shared memory (or only same-step values).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryWindowRow {
    pub t: u32,
    pub width: u32,
}

pub fn memory_window(trace: &ReplayTrace) -> Vec<MemoryWindowRow> {
    trace
        .steps
        .iter()
        .map(|s| {
            let width = s
                .traversal
                .memory_reads
                .iter()
                .map(|&(_, _, written_at)| s.t - written_at)
                .max()
                .unwrap_or(0);
            MemoryWindowRow { t: s.t, width }
        })
        .collect()
}

/// Two-pass Pearson correlation. Either series being constant yields 0.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    assert_eq!(x.len(), y.len(), "series must be paired");
    let n = x.len();
    if n < 2 {
        return Err(AnalysisError::InsufficientData);
    }
    let mean_x = x.iter().sum::<f64>() / n as f64;
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        cov += (a - mean_x) * (b - mean_y);
        var_x += (a - mean_x) * (a - mean_x);
        var_y += (b - mean_y) * (b - mean_y);
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Ok(0.0);
    }
    // rounding can push a perfect correlation a ulp past +/-1
    Ok((cov / (var_x.sqrt() * var_y.sqrt())).clamp(-1.0, 1.0))
}

/// Min-max rescale into [-1, 1]; a constant series maps to all zeros.
fn normalize_pm1(series: &[f64]) -> Vec<f64> {
    let min = series.iter().copied().fold(f64::INFINITY, f64::min);
    let max = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return vec![0.0; series.len()];
    }
    series
        .iter()
        .map(|&v| 2.0 * (v - min) / (max - min) - 1.0)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotCorrelation {
    pub bank: BankId,
    pub slot: usize,
    pub r: f64,
}

/// Correlation of every shared-memory slot with one hidden velocity
/// variable, plus the slot with the largest magnitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityCorrelation {
    pub hidden_var: usize,
    pub slots: Vec<SlotCorrelation>,
    pub best: SlotCorrelation,
}

/// Concatenates the per-step bank snapshots of all traces and correlates
/// each slot's time series with each hidden velocity series. Both series
/// are rescaled into [-1, 1] first.
pub fn velocity_correlation(
    traces: &[ReplayTrace],
) -> Result<Vec<VelocityCorrelation>, AnalysisError> {
    let steps: Vec<&crate::trace::ReplayStep> =
        traces.iter().flat_map(|t| t.steps.iter()).collect();
    if steps.len() < 2 {
        return Err(AnalysisError::InsufficientData);
    }
    let hidden_vars = traces[0].task.hidden_vars();
    let banks: Vec<BankId> = steps[0].banks.keys().copied().collect();
    let mut out = Vec::new();
    for var in 0..hidden_vars {
        let hidden: Vec<f64> = steps.iter().map(|s| s.hidden[var]).collect();
        let hidden_n = normalize_pm1(&hidden);
        let mut slots = Vec::new();
        for &bank in &banks {
            for slot in 0..MEM_SLOTS {
                let series: Vec<f64> = steps.iter().map(|s| s.banks[&bank][slot]).collect();
                let r = pearson(&normalize_pm1(&series), &hidden_n)?;
                slots.push(SlotCorrelation { bank, slot, r });
            }
        }
        let best = slots
            .iter()
            .max_by(|a, b| a.r.abs().total_cmp(&b.r.abs()))
            .expect("at least one bank slot")
            .clone();
        out.push(VelocityCorrelation {
            hidden_var: var,
            slots,
            best,
        });
    }
    Ok(out)
}

/// One decision attributed to the team that emitted it: the observable and
/// first hidden state dimensions against the acting (last-visited) team.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRow {
    pub episode: u64,
    pub t: u32,
    pub s0: f64,
    pub hidden_v0: f64,
    pub team: TeamId,
    pub a_d: u8,
    pub a_c: f64,
}

pub fn task_decomposition(traces: &[ReplayTrace]) -> Vec<DecompositionRow> {
    let mut rows = Vec::new();
    for trace in traces {
        for step in &trace.steps {
            rows.push(DecompositionRow {
                episode: trace.episode,
                t: step.t,
                s0: step.s0,
                hidden_v0: step.hidden.first().copied().unwrap_or(0.0),
                team: *step
                    .traversal
                    .visited_team_ids
                    .last()
                    .expect("traversal visits the root"),
                a_d: step.a_d,
                a_c: step.a_c,
            });
        }
    }
    rows
}

/// Distinct teams that acted at least once across the traces.
pub fn acting_teams(rows: &[DecompositionRow]) -> BTreeMap<TeamId, usize> {
    let mut counts = BTreeMap::new();
    for row in rows {
        *counts.entry(row.team).or_insert(0) += 1;
    }
    counts
}

/// Score rescaled so a random agent sits at 0 and the reference at 1.
pub fn normalized_comparison(
    score: f64,
    random_baseline: f64,
    reference: f64,
) -> Result<f64, AnalysisError> {
    let range = reference - random_baseline;
    if range == 0.0 {
        return Err(AnalysisError::DegenerateBaseline);
    }
    Ok((score - random_baseline) / range)
}
