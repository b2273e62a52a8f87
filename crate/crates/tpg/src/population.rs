//! Coevolving stores for teams, programs, and shared memory banks.
//!
//! Programs are immutable once inserted; teams reference programs by id and
//! programs reference banks by id, so structure is shared freely. All maps
//! are ordered so iteration (and therefore every downstream random draw) is
//! deterministic.

use crate::graph::Team;
use crate::ids::{BankId, IdGen, ProgramId, TeamId};
use crate::lgp::{Instruction, Program, ProgramAction};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Debug, Default)]
pub struct Population {
    pub teams: BTreeMap<TeamId, Team>,
    pub programs: BTreeMap<ProgramId, Program>,
    pub banks: BTreeSet<BankId>,
    pub ids: IdGen,
}

/// Closure of entities reachable from one root team.
#[derive(Clone, Debug, Default)]
pub struct Reachable {
    pub teams: BTreeSet<TeamId>,
    pub programs: BTreeSet<ProgramId>,
    pub banks: BTreeSet<BankId>,
}

impl Population {
    pub fn new() -> Self {
        Population::default()
    }

    pub fn fresh_bank(&mut self) -> BankId {
        let id = self.ids.bank();
        self.banks.insert(id);
        id
    }

    pub fn add_program(
        &mut self,
        instructions: Vec<Instruction>,
        action: ProgramAction,
        memory_ref: BankId,
    ) -> ProgramId {
        let id = self.ids.program();
        self.programs
            .insert(id, Program::new(id, instructions, action, memory_ref));
        id
    }

    pub fn add_team(&mut self, programs: Vec<ProgramId>) -> TeamId {
        let id = self.ids.team();
        self.teams.insert(id, Team::new(id, programs));
        id
    }

    pub fn program(&self, id: ProgramId) -> &Program {
        &self.programs[&id]
    }

    pub fn team(&self, id: TeamId) -> &Team {
        &self.teams[&id]
    }

    pub fn is_root(&self, id: TeamId) -> bool {
        self.teams[&id].indegree == 0
    }

    pub fn root_ids(&self) -> Vec<TeamId> {
        self.teams
            .values()
            .filter(|t| t.indegree == 0)
            .map(|t| t.id)
            .collect()
    }

    /// Recomputes every team's indegree as the number of live programs whose
    /// action points at it.
    pub fn recount_indegrees(&mut self) {
        let mut counts: BTreeMap<TeamId, usize> = BTreeMap::new();
        for prog in self.programs.values() {
            if let ProgramAction::Team(t) = prog.action {
                *counts.entry(t).or_default() += 1;
            }
        }
        for team in self.teams.values_mut() {
            team.indegree = counts.get(&team.id).copied().unwrap_or(0);
        }
    }

    /// Depth-first closure over team membership and program action pointers.
    pub fn collect_reachable(&self, root: TeamId) -> Reachable {
        let mut out = Reachable::default();
        let mut stack = vec![root];
        while let Some(tid) = stack.pop() {
            if !out.teams.insert(tid) {
                continue;
            }
            for &pid in &self.teams[&tid].programs {
                if out.programs.insert(pid) {
                    let prog = &self.programs[&pid];
                    out.banks.insert(prog.memory_ref);
                    if let ProgramAction::Team(next) = prog.action {
                        stack.push(next);
                    }
                }
            }
        }
        out
    }

    /// Deletes every team not reachable from `keep_roots`, then orphan
    /// programs, then orphan banks, and refreshes indegrees.
    pub fn prune_unreachable(&mut self, keep_roots: &BTreeSet<TeamId>) {
        let mut live = Reachable::default();
        for &root in keep_roots {
            let r = self.collect_reachable(root);
            live.teams.extend(r.teams);
            live.programs.extend(r.programs);
            live.banks.extend(r.banks);
        }
        self.teams.retain(|id, _| live.teams.contains(id));
        self.programs.retain(|id, _| live.programs.contains(id));
        self.banks.retain(|id| live.banks.contains(id));
        self.recount_indegrees();
    }

    /// Reachability audit: every live program belongs to a team and every
    /// live bank to a program. Returns the violations for test assertions.
    pub fn audit_references(&self) -> (Vec<ProgramId>, Vec<BankId>) {
        let mut used_programs = BTreeSet::new();
        for team in self.teams.values() {
            used_programs.extend(team.programs.iter().copied());
        }
        let orphan_programs: Vec<_> = self
            .programs
            .keys()
            .filter(|id| !used_programs.contains(id))
            .copied()
            .collect();
        let used_banks: BTreeSet<_> = self.programs.values().map(|p| p.memory_ref).collect();
        let orphan_banks: Vec<_> = self
            .banks
            .iter()
            .filter(|id| !used_banks.contains(id))
            .copied()
            .collect();
        (orphan_programs, orphan_banks)
    }
}
