//! Linear register-machine programs.
//!
//! A program is an ordered list of instructions over three register files:
//! a private stateless bank `r` (zeroed before every execution, with 18
//! read-only constants appended), a shared stateful bank `m` (zeroed only at
//! episode start), and the read-only observation `s`. Execution returns
//! `(r[0], m[0])`: the program's bid weight and the continuous-action slot.
//!
//! Instructions that cannot influence `r[0]` or the shared bank are introns.
//! They are kept in the genome (they matter for search) but identified once
//! at construction and skipped during execution.

use crate::ids::{BankId, ProgramId, TeamId};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Writable slots in the private bank.
pub const WRITABLE_REGS: usize = 8;
/// Read-only constants appended to the private bank.
pub const CONSTANT_REGS: usize = 18;
/// Readable size of the private bank (writables + constants).
pub const READABLE_REGS: usize = WRITABLE_REGS + CONSTANT_REGS;
/// Slots in a shared stateful bank.
pub const MEM_SLOTS: usize = 8;
/// Observation inputs.
pub const OBS_SLOTS: usize = 2;

/// Result clamp bound: anything larger is treated as overflow.
const VALUE_BOUND: f64 = 1e15;
const DIV_EPSILON: f64 = 1e-9;
const EXP_CLAMP: f64 = 88.0;

/// The 16 operations, encodable in a 4-bit op-code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Opcode {
    Add = 0,
    Sub = 1,
    Mul = 2,
    Div = 3,
    Pow = 4,
    Cos = 5,
    Ln = 6,
    Exp = 7,
    Sqrt = 8,
    Sin = 9,
    Tanh = 10,
    Square = 11,
    Abs = 12,
    Cube = 13,
    IfLt = 14,
    IfGt = 15,
}

pub const OPCODE_COUNT: usize = 16;

impl Opcode {
    pub const ALL: [Opcode; OPCODE_COUNT] = [
        Opcode::Add,
        Opcode::Sub,
        Opcode::Mul,
        Opcode::Div,
        Opcode::Pow,
        Opcode::Cos,
        Opcode::Ln,
        Opcode::Exp,
        Opcode::Sqrt,
        Opcode::Sin,
        Opcode::Tanh,
        Opcode::Square,
        Opcode::Abs,
        Opcode::Cube,
        Opcode::IfLt,
        Opcode::IfGt,
    ];

    pub fn kind(self) -> OpKind {
        match self {
            Opcode::Add | Opcode::Sub | Opcode::Mul | Opcode::Div | Opcode::Pow => OpKind::Binary,
            Opcode::IfLt | Opcode::IfGt => OpKind::Conditional,
            _ => OpKind::Unary,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    /// target <- op1 o op2
    Binary,
    /// target <- f(op2)
    Unary,
    /// if (op1 o op2) then target <- -target
    Conditional,
}

/// Banks a target or first operand may address. The observation is read-only,
/// so `S` never appears here.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WriteBank {
    R,
    M,
}

/// Banks the second operand may address.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReadBank {
    R,
    M,
    S,
}

/// One register-machine operation. Indices are stored unconstrained and
/// reduced modulo the addressed bank size at execution, so arbitrary field
/// mutations always yield a valid instruction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instruction {
    pub opcode: Opcode,
    pub target_bank: WriteBank,
    pub target_idx: u32,
    pub op1_bank: WriteBank,
    pub op1_idx: u32,
    pub op2_bank: ReadBank,
    pub op2_idx: u32,
}

/// A resolved register reference.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    R(usize),
    M(usize),
    S(usize),
}

impl Instruction {
    /// Target resolves into the writable part of `r`, or into `m`.
    pub fn target(&self) -> Slot {
        match self.target_bank {
            WriteBank::R => Slot::R(self.target_idx as usize % WRITABLE_REGS),
            WriteBank::M => Slot::M(self.target_idx as usize % MEM_SLOTS),
        }
    }

    /// First operand reads the writable part of `r`, or `m`.
    pub fn op1(&self) -> Slot {
        match self.op1_bank {
            WriteBank::R => Slot::R(self.op1_idx as usize % WRITABLE_REGS),
            WriteBank::M => Slot::M(self.op1_idx as usize % MEM_SLOTS),
        }
    }

    /// Second operand reads all of `r` (constants included), `m`, or `s`.
    pub fn op2(&self) -> Slot {
        match self.op2_bank {
            ReadBank::R => Slot::R(self.op2_idx as usize % READABLE_REGS),
            ReadBank::M => Slot::M(self.op2_idx as usize % MEM_SLOTS),
            ReadBank::S => Slot::S(self.op2_idx as usize % OBS_SLOTS),
        }
    }
}

/// What a program routes to when it wins the bid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProgramAction {
    /// Leaf: emit this discrete action.
    Discrete(u8),
    /// Internal edge: continue traversal at this team.
    Team(TeamId),
}

impl ProgramAction {
    pub fn is_leaf(&self) -> bool {
        matches!(self, ProgramAction::Discrete(_))
    }
}

/// Immutable program record. The effective-instruction mask is derived from
/// the instruction list at construction and never serialized.
#[derive(Clone, Debug)]
pub struct Program {
    pub id: ProgramId,
    pub instructions: Vec<Instruction>,
    pub action: ProgramAction,
    pub memory_ref: BankId,
    effective: Vec<bool>,
    effective_count: usize,
}

impl Program {
    pub fn new(
        id: ProgramId,
        instructions: Vec<Instruction>,
        action: ProgramAction,
        memory_ref: BankId,
    ) -> Self {
        assert!(!instructions.is_empty(), "program must hold an instruction");
        let effective = mark_introns(&instructions);
        let effective_count = effective.iter().filter(|&&e| e).count();
        Program {
            id,
            instructions,
            action,
            memory_ref,
            effective,
            effective_count,
        }
    }

    pub fn effective_mask(&self) -> &[bool] {
        &self.effective
    }

    pub fn effective_len(&self) -> usize {
        self.effective_count
    }
}

/// Two return values of a program execution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExecResult {
    /// Final `r[0]`: the bid weight. May be NaN; ranking treats NaN as lowest.
    pub weight: f64,
    /// Final `m[0]` of the program's bank: the continuous-action slot.
    pub a_c_slot: f64,
}

/// One shared-bank slot access.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MemEvent {
    Read(usize),
    Write(usize),
}

/// Shared-bank slot accesses observed during one execution, in program order.
/// Ordering matters: a read following a same-step write must see that write.
#[derive(Clone, Debug, Default)]
pub struct MemEvents {
    pub events: Vec<MemEvent>,
}

fn canonical(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-VALUE_BOUND, VALUE_BOUND)
    }
}

/// Total arithmetic: every operation yields a finite value in
/// [-1e15, 1e15]; NaN is replaced by 0 at the instruction level.
pub fn apply_op(opcode: Opcode, x: f64, y: f64) -> f64 {
    let v = match opcode {
        Opcode::Add => x + y,
        Opcode::Sub => x - y,
        Opcode::Mul => x * y,
        Opcode::Div => {
            if y.abs() < DIV_EPSILON {
                x
            } else {
                x / y
            }
        }
        Opcode::Pow => x.abs().powf(y),
        Opcode::Cos => y.cos(),
        Opcode::Ln => {
            if y <= 0.0 {
                (y.abs() + DIV_EPSILON).ln()
            } else {
                y.ln()
            }
        }
        Opcode::Exp => y.clamp(-EXP_CLAMP, EXP_CLAMP).exp(),
        Opcode::Sqrt => y.abs().sqrt(),
        Opcode::Sin => y.sin(),
        Opcode::Tanh => y.tanh(),
        Opcode::Square => y * y,
        Opcode::Abs => y.abs(),
        Opcode::Cube => y * y * y,
        Opcode::IfLt | Opcode::IfGt => unreachable!("conditionals handled by the interpreter"),
    };
    canonical(v)
}

struct Regs<'a> {
    r: [f64; READABLE_REGS],
    m: &'a mut [f64; MEM_SLOTS],
    s: [f64; OBS_SLOTS],
}

impl Regs<'_> {
    fn read(&self, slot: Slot) -> f64 {
        match slot {
            Slot::R(i) => self.r[i],
            Slot::M(i) => self.m[i],
            Slot::S(i) => self.s[i],
        }
    }

    fn write(&mut self, slot: Slot, v: f64) {
        match slot {
            Slot::R(i) => self.r[i] = v,
            Slot::M(i) => self.m[i] = v,
            Slot::S(_) => unreachable!("observation is read-only"),
        }
    }
}

fn fresh_private_bank() -> [f64; READABLE_REGS] {
    let mut r = [0.0; READABLE_REGS];
    // constants -0.9..-0.1, 0.1..0.9 at indices 8..25
    for k in 0..9 {
        r[WRITABLE_REGS + k] = -0.9 + 0.1 * k as f64;
    }
    for k in 0..9 {
        r[WRITABLE_REGS + 9 + k] = 0.1 + 0.1 * k as f64;
    }
    r
}

fn run(
    instructions: &[Instruction],
    mask: Option<&[bool]>,
    obs: [f64; OBS_SLOTS],
    mem: &mut [f64; MEM_SLOTS],
    mut events: Option<&mut MemEvents>,
) -> ExecResult {
    let mut regs = Regs {
        r: fresh_private_bank(),
        m: mem,
        s: obs,
    };
    for (i, instr) in instructions.iter().enumerate() {
        if let Some(mask) = mask {
            if !mask[i] {
                continue;
            }
        }
        let target = instr.target();
        match instr.opcode.kind() {
            OpKind::Binary => {
                let x = regs.read(instr.op1());
                let y = regs.read(instr.op2());
                if let Some(ev) = events.as_deref_mut() {
                    record_read(ev, instr.op1());
                    record_read(ev, instr.op2());
                    record_write(ev, target);
                }
                regs.write(target, apply_op(instr.opcode, x, y));
            }
            OpKind::Unary => {
                let y = regs.read(instr.op2());
                if let Some(ev) = events.as_deref_mut() {
                    record_read(ev, instr.op2());
                    record_write(ev, target);
                }
                regs.write(target, apply_op(instr.opcode, 0.0, y));
            }
            OpKind::Conditional => {
                let x = regs.read(instr.op1());
                let y = regs.read(instr.op2());
                let hold = match instr.opcode {
                    Opcode::IfLt => x < y,
                    Opcode::IfGt => x > y,
                    _ => unreachable!(),
                };
                if let Some(ev) = events.as_deref_mut() {
                    record_read(ev, instr.op1());
                    record_read(ev, instr.op2());
                    if hold {
                        record_read(ev, target);
                        record_write(ev, target);
                    }
                }
                if hold {
                    let t = regs.read(target);
                    regs.write(target, canonical(-t));
                }
            }
        }
    }
    ExecResult {
        weight: regs.r[0],
        a_c_slot: regs.m[0],
    }
}

fn record_read(ev: &mut MemEvents, slot: Slot) {
    if let Slot::M(i) = slot {
        ev.events.push(MemEvent::Read(i));
    }
}

fn record_write(ev: &mut MemEvents, slot: Slot) {
    if let Slot::M(i) = slot {
        ev.events.push(MemEvent::Write(i));
    }
}

/// Executes only the effective instructions of `prog`. Shared-bank writes
/// persist in `mem`.
pub fn execute(prog: &Program, obs: [f64; OBS_SLOTS], mem: &mut [f64; MEM_SLOTS]) -> ExecResult {
    run(&prog.instructions, Some(&prog.effective), obs, mem, None)
}

/// Masked execution that also reports shared-bank slot accesses.
pub fn execute_recorded(
    prog: &Program,
    obs: [f64; OBS_SLOTS],
    mem: &mut [f64; MEM_SLOTS],
    events: &mut MemEvents,
) -> ExecResult {
    run(
        &prog.instructions,
        Some(&prog.effective),
        obs,
        mem,
        Some(events),
    )
}

/// Executes every instruction, introns included. Behaviourally equivalent to
/// [`execute`]; kept as the second route for equivalence checks.
pub fn execute_unmasked(
    prog: &Program,
    obs: [f64; OBS_SLOTS],
    mem: &mut [f64; MEM_SLOTS],
) -> ExecResult {
    run(&prog.instructions, None, obs, mem, None)
}

/// Backward data-flow pass from the outputs {r[0], all m slots}.
///
/// Writes to `m` are always effective because other programs read the bank.
/// Conditionals guard their target conservatively: when the target is live,
/// both comparison operands become live and the target stays live (it is
/// read before being negated).
pub fn mark_introns(instructions: &[Instruction]) -> Vec<bool> {
    let mut live_r = [false; WRITABLE_REGS];
    live_r[0] = true;
    let mut mask = vec![false; instructions.len()];
    for (i, instr) in instructions.iter().enumerate().rev() {
        let target = instr.target();
        let effective = match target {
            Slot::M(_) => true,
            Slot::R(t) => live_r[t],
            Slot::S(_) => unreachable!(),
        };
        if !effective {
            continue;
        }
        mask[i] = true;
        let kind = instr.opcode.kind();
        // Non-conditional writes fully redefine an R target.
        if kind != OpKind::Conditional {
            if let Slot::R(t) = target {
                live_r[t] = false;
            }
        }
        let mut gen = |slot: Slot| {
            if let Slot::R(idx) = slot {
                if idx < WRITABLE_REGS {
                    live_r[idx] = true;
                }
            }
        };
        match kind {
            OpKind::Binary => {
                gen(instr.op1());
                gen(instr.op2());
            }
            OpKind::Unary => {
                gen(instr.op2());
            }
            OpKind::Conditional => {
                gen(target);
                gen(instr.op1());
                gen(instr.op2());
            }
        }
    }
    mask
}

/// Instruction-level variation probabilities (program population half of the
/// parameter table).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgramParams {
    pub prog_size_init: usize,
    pub p_delete: f64,
    pub p_add: f64,
    pub p_mutate: f64,
    pub p_swap: f64,
}

impl Default for ProgramParams {
    fn default() -> Self {
        ProgramParams {
            prog_size_init: 10,
            p_delete: 0.5,
            p_add: 0.4,
            p_mutate: 1.0,
            p_swap: 0.2,
        }
    }
}

const MUTABLE_FIELDS: usize = 7;

/// Index fields are sampled in 0..26; execution reduces them modulo the
/// addressed bank size anyway.
const IDX_RANGE: u32 = READABLE_REGS as u32;

pub fn random_instruction<R: Rng>(rng: &mut R) -> Instruction {
    Instruction {
        opcode: Opcode::ALL[rng.gen_range(0..OPCODE_COUNT)],
        target_bank: random_write_bank(rng),
        target_idx: rng.gen_range(0..IDX_RANGE),
        op1_bank: random_write_bank(rng),
        op1_idx: rng.gen_range(0..IDX_RANGE),
        op2_bank: random_read_bank(rng),
        op2_idx: rng.gen_range(0..IDX_RANGE),
    }
}

fn random_write_bank<R: Rng>(rng: &mut R) -> WriteBank {
    if rng.gen_bool(0.5) {
        WriteBank::R
    } else {
        WriteBank::M
    }
}

fn random_read_bank<R: Rng>(rng: &mut R) -> ReadBank {
    match rng.gen_range(0..3) {
        0 => ReadBank::R,
        1 => ReadBank::M,
        _ => ReadBank::S,
    }
}

/// Fresh instruction list of the configured initial length.
pub fn random_instructions<R: Rng>(rng: &mut R, params: &ProgramParams) -> Vec<Instruction> {
    (0..params.prog_size_init.max(1))
        .map(|_| random_instruction(rng))
        .collect()
}

/// One round of instruction-level variation: delete, add, mutate, swap, each
/// an independent Bernoulli trial applied at most once, in that order.
pub fn mutate_instructions<R: Rng>(
    source: &[Instruction],
    rng: &mut R,
    params: &ProgramParams,
) -> Vec<Instruction> {
    let mut out = source.to_vec();
    if rng.gen_bool(params.p_delete) && out.len() > 1 {
        let at = rng.gen_range(0..out.len());
        out.remove(at);
    }
    if rng.gen_bool(params.p_add) {
        let at = rng.gen_range(0..=out.len());
        out.insert(at, random_instruction(rng));
    }
    if rng.gen_bool(params.p_mutate) {
        let at = rng.gen_range(0..out.len());
        mutate_field(&mut out[at], rng);
    }
    if rng.gen_bool(params.p_swap) && out.len() > 1 {
        let a = rng.gen_range(0..out.len());
        let b = rng.gen_range(0..out.len());
        out.swap(a, b);
    }
    out
}

fn mutate_field<R: Rng>(instr: &mut Instruction, rng: &mut R) {
    match rng.gen_range(0..MUTABLE_FIELDS) {
        0 => instr.opcode = Opcode::ALL[rng.gen_range(0..OPCODE_COUNT)],
        1 => instr.target_bank = random_write_bank(rng),
        2 => instr.target_idx = rng.gen_range(0..IDX_RANGE),
        3 => instr.op1_bank = random_write_bank(rng),
        4 => instr.op1_idx = rng.gen_range(0..IDX_RANGE),
        5 => instr.op2_bank = random_read_bank(rng),
        _ => instr.op2_idx = rng.gen_range(0..IDX_RANGE),
    }
}
