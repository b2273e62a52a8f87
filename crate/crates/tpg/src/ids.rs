//! Entity identifiers for the coevolving stores.

use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($name:ident) => {
        #[derive(
            Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        pub struct $name(pub u64);

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(ProgramId);
id_type!(TeamId);
id_type!(BankId);

/// Monotonic id allocator. Serialized with checkpoints so resumed runs
/// continue the same id sequence.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct IdGen {
    next_program: u64,
    next_team: u64,
    next_bank: u64,
}

impl IdGen {
    pub fn program(&mut self) -> ProgramId {
        let id = ProgramId(self.next_program);
        self.next_program += 1;
        id
    }

    pub fn team(&mut self) -> TeamId {
        let id = TeamId(self.next_team);
        self.next_team += 1;
        id
    }

    pub fn bank(&mut self) -> BankId {
        let id = BankId(self.next_bank);
        self.next_bank += 1;
        id
    }

    /// Raises each counter past an id already in use, so rebuilding a store
    /// from serialized entities never reissues a live id.
    pub fn observe(&mut self, program: Option<ProgramId>, team: Option<TeamId>, bank: Option<BankId>) {
        if let Some(p) = program {
            self.next_program = self.next_program.max(p.0 + 1);
        }
        if let Some(t) = team {
            self.next_team = self.next_team.max(t.0 + 1);
        }
        if let Some(b) = bank {
            self.next_bank = self.next_bank.max(b.0 + 1);
        }
    }
}
