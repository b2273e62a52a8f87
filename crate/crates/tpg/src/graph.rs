//! Teams as graph vertices, programs as dynamically weighted edges.
//!
//! Traversal starts at a root team, executes every program of each visited
//! team in order (all memory side effects persist, winners and losers alike),
//! and follows the highest-weighted program whose action is a leaf or an
//! unvisited team. The one-leaf-per-team invariant guarantees an action is
//! always produced.

use crate::env::ActionPair;
use crate::ids::{BankId, ProgramId, TeamId};
use crate::lgp::{
    self, MemEvent, MemEvents, ProgramAction, ProgramParams, MEM_SLOTS, OBS_SLOTS,
};
use crate::population::Population;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// One graph vertex: an ordered, duplicate-free list of program references.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Team {
    pub id: TeamId,
    pub programs: Vec<ProgramId>,
    /// Number of live programs whose action points at this team. Zero means
    /// this team is a root and therefore an independent agent.
    #[serde(default)]
    pub indegree: usize,
}

impl Team {
    pub fn new(id: TeamId, programs: Vec<ProgramId>) -> Self {
        Team {
            id,
            programs,
            indegree: 0,
        }
    }
}

/// Evaluation-local copies of every shared bank reachable from a root,
/// zeroed at episode start. `last_write` tracks, per slot, the step index of
/// the most recent write (episode-start zeroing counts as step 0).
#[derive(Clone, Debug)]
pub struct EvalBanks {
    values: BTreeMap<BankId, [f64; MEM_SLOTS]>,
    last_write: BTreeMap<BankId, [u32; MEM_SLOTS]>,
    /// Ablation: zero each bank before every program execution, removing all
    /// state carried between executions and timesteps.
    pub no_memory: bool,
}

impl EvalBanks {
    pub fn for_banks(ids: impl IntoIterator<Item = BankId>, no_memory: bool) -> Self {
        let mut values = BTreeMap::new();
        let mut last_write = BTreeMap::new();
        for id in ids {
            values.insert(id, [0.0; MEM_SLOTS]);
            last_write.insert(id, [0; MEM_SLOTS]);
        }
        EvalBanks {
            values,
            last_write,
            no_memory,
        }
    }

    /// Zeroes every bank; call at episode start.
    pub fn reset(&mut self) {
        for bank in self.values.values_mut() {
            *bank = [0.0; MEM_SLOTS];
        }
        for lw in self.last_write.values_mut() {
            *lw = [0; MEM_SLOTS];
        }
    }

    pub fn value(&self, bank: BankId, slot: usize) -> f64 {
        self.values[&bank][slot]
    }

    pub fn bank_ids(&self) -> impl Iterator<Item = BankId> + '_ {
        self.values.keys().copied()
    }

    pub fn bank_values(&self, bank: BankId) -> &[f64; MEM_SLOTS] {
        &self.values[&bank]
    }
}

/// Record of one root-to-leaf traversal.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TraversalTrace {
    pub visited_team_ids: Vec<TeamId>,
    pub executed_program_count: usize,
    pub executed_instruction_count: usize,
    /// (bank, slot, step of that slot's most recent write at read time)
    pub memory_reads: Vec<(BankId, u8, u32)>,
    pub memory_writes: Vec<(BankId, u8)>,
}

fn rank_weight(w: f64) -> f64 {
    if w.is_nan() {
        f64::NEG_INFINITY
    } else {
        w
    }
}

/// Executes the program graph rooted at `root` for one timestep.
pub fn traverse(
    pop: &Population,
    root: TeamId,
    obs: [f64; OBS_SLOTS],
    banks: &mut EvalBanks,
    step_index: u32,
) -> (ActionPair, TraversalTrace) {
    let mut trace = TraversalTrace::default();
    let mut visited: BTreeSet<TeamId> = BTreeSet::new();
    let mut current = root;
    loop {
        visited.insert(current);
        trace.visited_team_ids.push(current);
        let team = pop.team(current);

        let mut bids: Vec<(f64, ProgramId)> = Vec::with_capacity(team.programs.len());
        for &pid in &team.programs {
            let prog = pop.program(pid);
            let bank_id = prog.memory_ref;
            if banks.no_memory {
                *banks.values.get_mut(&bank_id).expect("bank reachable") = [0.0; MEM_SLOTS];
                *banks.last_write.get_mut(&bank_id).expect("bank reachable") =
                    [step_index; MEM_SLOTS];
            }
            let mut events = MemEvents::default();
            let result = {
                let bank = banks.values.get_mut(&bank_id).expect("bank reachable");
                lgp::execute_recorded(prog, obs, bank, &mut events)
            };
            let lw = banks.last_write.get_mut(&bank_id).expect("bank reachable");
            for ev in events.events {
                match ev {
                    MemEvent::Read(slot) => {
                        trace.memory_reads.push((bank_id, slot as u8, lw[slot]));
                    }
                    MemEvent::Write(slot) => {
                        lw[slot] = step_index;
                        trace.memory_writes.push((bank_id, slot as u8));
                    }
                }
            }
            trace.executed_program_count += 1;
            trace.executed_instruction_count += prog.effective_len();
            bids.push((result.weight, pid));
        }

        // Stable descending sort: ties and NaNs resolve to the earlier
        // program in team order.
        let mut order: Vec<usize> = (0..bids.len()).collect();
        order.sort_by(|&a, &b| {
            rank_weight(bids[b].0)
                .partial_cmp(&rank_weight(bids[a].0))
                .expect("rank_weight is never NaN")
        });

        let mut next_team = None;
        let mut leaf = None;
        for &i in &order {
            let prog = pop.program(bids[i].1);
            match prog.action {
                ProgramAction::Discrete(a_d) => {
                    leaf = Some((a_d, prog.memory_ref));
                    break;
                }
                ProgramAction::Team(t) => {
                    if !visited.contains(&t) {
                        next_team = Some(t);
                        break;
                    }
                    // already visited: the edge is ignored
                }
            }
        }

        if let Some((a_d, bank)) = leaf {
            let a_c = banks.value(bank, 0);
            return (ActionPair { a_d, a_c }, trace);
        }
        current = next_team.expect("every team holds a leaf program");
    }
}

/// Deep-copies the team record under a fresh id. Programs are immutable and
/// shared, so the clone references the same program ids.
pub fn clone_team(pop: &mut Population, source: TeamId) -> TeamId {
    let programs = pop.team(source).programs.clone();
    pop.add_team(programs)
}

/// Order-preserving crossover: each parent program is kept with probability
/// one half and kept programs are interleaved without disturbing either
/// parent's internal order.
pub fn team_crossover<R: Rng>(
    pop: &Population,
    parent1: TeamId,
    parent2: TeamId,
    rng: &mut R,
) -> Vec<ProgramId> {
    let p1 = &pop.team(parent1).programs;
    let p2 = &pop.team(parent2).programs;
    let mask1: Vec<bool> = p1.iter().map(|_| rng.gen_bool(0.5)).collect();
    let mask2: Vec<bool> = p2.iter().map(|_| rng.gen_bool(0.5)).collect();
    let mut child = crossover_with_masks(p1, p2, &mask1, &mask2);
    repair_team(pop, &mut child, parent1, rng);
    child
}

/// The deterministic core of crossover, exposed so tests can force masks.
pub fn crossover_with_masks(
    p1: &[ProgramId],
    p2: &[ProgramId],
    mask1: &[bool],
    mask2: &[bool],
) -> Vec<ProgramId> {
    let mut kept1 = p1
        .iter()
        .zip(mask1)
        .filter(|(_, &k)| k)
        .map(|(&p, _)| p)
        .collect::<Vec<_>>()
        .into_iter();
    let mut kept2 = p2
        .iter()
        .zip(mask2)
        .filter(|(_, &k)| k)
        .map(|(&p, _)| p)
        .collect::<Vec<_>>()
        .into_iter();
    let mut child = Vec::new();
    let push = |child: &mut Vec<ProgramId>, p: ProgramId| {
        if !child.contains(&p) {
            child.push(p);
        }
    };
    loop {
        match (kept1.next(), kept2.next()) {
            (Some(a), Some(b)) => {
                push(&mut child, a);
                push(&mut child, b);
            }
            (Some(a), None) => push(&mut child, a),
            (None, Some(b)) => push(&mut child, b),
            (None, None) => break,
        }
    }
    child
}

/// Restores the team invariants (>= 2 programs, >= 1 leaf) by copying
/// programs from `parent1`, which always satisfies them. Donors are spliced
/// in at a position that keeps the donor parent's relative order intact.
fn repair_team<R: Rng>(
    pop: &Population,
    child: &mut Vec<ProgramId>,
    parent1: TeamId,
    rng: &mut R,
) {
    let donor = &pop.team(parent1).programs;
    // Inserts `pick` before the first child member that follows it in the
    // donor's order, so the donor-relative order stays a subsequence.
    let splice = |child: &mut Vec<ProgramId>, pick: ProgramId| {
        let pick_pos = donor.iter().position(|&p| p == pick).expect("pick is a donor");
        let at = child
            .iter()
            .position(|c| donor.iter().position(|p| p == c).is_some_and(|i| i > pick_pos))
            .unwrap_or(child.len());
        child.insert(at, pick);
    };
    while child.len() < 2 {
        let candidates: Vec<ProgramId> = donor
            .iter()
            .copied()
            .filter(|p| !child.contains(p))
            .collect();
        if candidates.is_empty() {
            break;
        }
        let pick = candidates[rng.gen_range(0..candidates.len())];
        splice(child, pick);
    }
    let has_leaf = child.iter().any(|&p| pop.program(p).action.is_leaf());
    if !has_leaf {
        let leaves: Vec<ProgramId> = donor
            .iter()
            .copied()
            .filter(|&p| pop.program(p).action.is_leaf() && !child.contains(&p))
            .collect();
        let pick = leaves[rng.gen_range(0..leaves.len())];
        splice(child, pick);
    }
}

/// Team-level variation probabilities (team population half of the
/// parameter table).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TeamParams {
    pub tm_size_init: usize,
    pub p_md: f64,
    pub p_ma: f64,
    pub p_mm: f64,
    pub p_mn: f64,
    pub p_ms: f64,
    pub p_atomic: f64,
    /// Probability that a program-modification also re-draws the action
    /// pointer (the hierarchy-forming mutation).
    pub p_action_mutate: f64,
}

impl Default for TeamParams {
    fn default() -> Self {
        TeamParams {
            tm_size_init: 10,
            p_md: 0.7,
            p_ma: 0.6,
            p_mm: 0.2,
            p_mn: 0.1,
            p_ms: 0.1,
            p_atomic: 0.95,
            p_action_mutate: 0.1,
        }
    }
}

/// Draws a fresh action pointer: a leaf with `p_atomic`, otherwise a
/// uniformly chosen live team (self excluded). Referencing a root first
/// clones it so the root's stand-alone behaviour survives independently.
fn sample_action<R: Rng>(
    pop: &mut Population,
    rng: &mut R,
    params: &TeamParams,
    exclude: TeamId,
    force_leaf: bool,
) -> ProgramAction {
    if force_leaf || rng.gen_bool(params.p_atomic) {
        return ProgramAction::Discrete(rng.gen_range(0..3));
    }
    let candidates: Vec<TeamId> = pop
        .teams
        .keys()
        .copied()
        .filter(|&t| t != exclude)
        .collect();
    if candidates.is_empty() {
        return ProgramAction::Discrete(rng.gen_range(0..3));
    }
    let mut target = candidates[rng.gen_range(0..candidates.len())];
    if pop.is_root(target) {
        target = clone_team(pop, target);
    }
    pop.teams.get_mut(&target).expect("live team").indegree += 1;
    ProgramAction::Team(target)
}

/// Applies the team mutation operators to `team_id` in place: delete, add,
/// modify, introduce, and memory-re-point, each an independent Bernoulli
/// trial. Modified programs get fresh ids so teams sharing the original are
/// untouched.
pub fn mutate_team<R: Rng>(
    pop: &mut Population,
    team_id: TeamId,
    rng: &mut R,
    tp: &TeamParams,
    pp: &ProgramParams,
) {
    let mut members = pop.team(team_id).programs.clone();

    if rng.gen_bool(tp.p_md) && members.len() > 2 {
        let deletable: Vec<usize> = (0..members.len())
            .filter(|&i| {
                members
                    .iter()
                    .enumerate()
                    .any(|(j, &p)| j != i && pop.program(p).action.is_leaf())
            })
            .collect();
        if !deletable.is_empty() {
            let at = deletable[rng.gen_range(0..deletable.len())];
            members.remove(at);
        }
    }

    if rng.gen_bool(tp.p_ma) {
        let candidates: Vec<ProgramId> = pop
            .programs
            .keys()
            .copied()
            .filter(|p| !members.contains(p))
            .collect();
        if !candidates.is_empty() {
            let pick = candidates[rng.gen_range(0..candidates.len())];
            let at = rng.gen_range(0..=members.len());
            members.insert(at, pick);
        }
    }

    if rng.gen_bool(tp.p_mm) {
        let at = rng.gen_range(0..members.len());
        let source = pop.program(members[at]).clone();
        let instructions = lgp::mutate_instructions(&source.instructions, rng, pp);
        let leaf_count = members
            .iter()
            .filter(|&&p| pop.program(p).action.is_leaf())
            .count();
        let action = if rng.gen_bool(tp.p_action_mutate) {
            // never convert a team's last leaf into an internal edge
            let force_leaf = source.action.is_leaf() && leaf_count == 1;
            sample_action(pop, rng, tp, team_id, force_leaf)
        } else {
            source.action
        };
        let variant = pop.add_program(instructions, action, source.memory_ref);
        members[at] = variant;
    }

    if rng.gen_bool(tp.p_mn) {
        let bank = pop.fresh_bank();
        let instructions = lgp::random_instructions(rng, pp);
        let action = ProgramAction::Discrete(rng.gen_range(0..3));
        let fresh = pop.add_program(instructions, action, bank);
        members.push(fresh);
    }

    if rng.gen_bool(tp.p_ms) {
        let at = rng.gen_range(0..members.len());
        let source = pop.program(members[at]).clone();
        let bank_pool: Vec<BankId> = pop.banks.iter().copied().collect();
        let bank = bank_pool[rng.gen_range(0..bank_pool.len())];
        if bank != source.memory_ref {
            // pointer changes get a fresh id too: the original may be shared
            if let ProgramAction::Team(t) = source.action {
                pop.teams.get_mut(&t).expect("live team").indegree += 1;
            }
            let variant = pop.add_program(source.instructions.clone(), source.action, bank);
            members[at] = variant;
        }
    }

    pop.teams.get_mut(&team_id).expect("live team").programs = members;
}
