//! Shared oracles and generators for the integration suites.
//!
//! The interpreter and physics references here are written from the
//! documented contracts, on purpose without calling into the library's
//! `apply_op`/`step` internals, so agreement is a real cross-check.

#![allow(dead_code)]

use rand::Rng;
use std::f64::consts::PI;
use tpg::env::{ActionPair, SystemState, TaskId};
use tpg::evolve::{ProgramRecord, Subgraph};
use tpg::graph::Team;
use tpg::ids::{BankId, ProgramId, TeamId};
use tpg::lgp::{Instruction, Opcode, ProgramAction, ReadBank, WriteBank};
use tpg::population::Population;

// ---------------------------------------------------------------------------
// Naive register-machine reference
// ---------------------------------------------------------------------------

pub struct NaiveResult {
    pub weight: f64,
    pub a_c: f64,
    pub mem: [f64; 8],
}

fn squash(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else if v > 1e15 {
        1e15
    } else if v < -1e15 {
        -1e15
    } else {
        v
    }
}

/// Straight-line interpretation of every instruction, introns included,
/// with its own constant table and addressing arithmetic.
pub fn naive_execute(instructions: &[Instruction], obs: [f64; 2], mem_in: [f64; 8]) -> NaiveResult {
    let mut r = [0.0f64; 26];
    for k in 0..9 {
        r[8 + k] = -0.9 + 0.1 * k as f64; // -0.9 .. -0.1
        r[17 + k] = 0.1 + 0.1 * k as f64; // 0.1 .. 0.9
    }
    let mut m = mem_in;

    for ins in instructions {
        let op1 = match ins.op1_bank {
            WriteBank::R => r[ins.op1_idx as usize % 8],
            WriteBank::M => m[ins.op1_idx as usize % 8],
        };
        let op2 = match ins.op2_bank {
            ReadBank::R => r[ins.op2_idx as usize % 26],
            ReadBank::M => m[ins.op2_idx as usize % 8],
            ReadBank::S => obs[ins.op2_idx as usize % 2],
        };
        let tgt = ins.target_idx as usize % 8;
        let read_tgt = match ins.target_bank {
            WriteBank::R => r[tgt],
            WriteBank::M => m[tgt],
        };
        let out = match ins.opcode {
            Opcode::Add => Some(op1 + op2),
            Opcode::Sub => Some(op1 - op2),
            Opcode::Mul => Some(op1 * op2),
            Opcode::Div => Some(if op2.abs() < 1e-9 { op1 } else { op1 / op2 }),
            Opcode::Pow => Some(op1.abs().powf(op2)),
            Opcode::Cos => Some(op2.cos()),
            Opcode::Ln => Some(if op2 <= 0.0 {
                (op2.abs() + 1e-9).ln()
            } else {
                op2.ln()
            }),
            Opcode::Exp => Some(op2.clamp(-88.0, 88.0).exp()),
            Opcode::Sqrt => Some(op2.abs().sqrt()),
            Opcode::Sin => Some(op2.sin()),
            Opcode::Tanh => Some(op2.tanh()),
            Opcode::Square => Some(op2 * op2),
            Opcode::Abs => Some(op2.abs()),
            Opcode::Cube => Some(op2 * op2 * op2),
            Opcode::IfLt => {
                if op1 < op2 {
                    Some(-read_tgt)
                } else {
                    None
                }
            }
            Opcode::IfGt => {
                if op1 > op2 {
                    Some(-read_tgt)
                } else {
                    None
                }
            }
        };
        if let Some(v) = out {
            let v = squash(v);
            match ins.target_bank {
                WriteBank::R => r[tgt] = v,
                WriteBank::M => m[tgt] = v,
            }
        }
    }
    NaiveResult {
        weight: r[0],
        a_c: m[0],
        mem: m,
    }
}

/// Bit-level equality that treats every NaN as equal to every other NaN.
pub fn same_value(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || a.to_bits() == b.to_bits()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    if a.is_nan() || b.is_nan() {
        return false;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

// ---------------------------------------------------------------------------
// Per-task single-step physics references
// ---------------------------------------------------------------------------

pub struct OracleStep {
    pub vars: [f64; 4],
    pub prev_force: f64,
    pub reward: f64,
    pub terminal: bool,
    pub done: bool,
}

fn oracle_wrap(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    if a < -PI {
        a += 2.0 * PI;
    }
    a
}

fn three_way(task: TaskId, a_d: u8, prev: f64) -> f64 {
    match a_d % 3 {
        0 => 1.0,
        2 => -1.0,
        _ => {
            if task == TaskId::MountainCar {
                0.0
            } else {
                prev
            }
        }
    }
}

/// Independent one-step transition, written directly from the published
/// dynamics of each system.
pub fn oracle_step(task: TaskId, s: &SystemState, a: ActionPair) -> OracleStep {
    let a_c = if a.a_c.is_finite() { a.a_c } else { 0.0 };
    let v = s.vars;
    let mut out = OracleStep {
        vars: v,
        prev_force: s.prev_discrete_force,
        reward: 0.0,
        terminal: false,
        done: false,
    };
    match task {
        TaskId::CartPole => {
            let dir = three_way(task, a.a_d, s.prev_discrete_force);
            out.prev_force = dir;
            let f = 10.0 * dir;
            let (x, th, xd, thd) = (v[0], v[1], v[2], v[3]);
            let (st, ct) = (th.sin(), th.cos());
            let pml = 0.1 * 0.5; // pole mass * half length
            let tmp = (f + pml * thd * thd * st) / 1.1;
            let thacc = (9.8 * st - ct * tmp) / (0.5 * (4.0 / 3.0 - 0.1 * ct * ct / 1.1));
            let xacc = tmp - pml * thacc * ct / 1.1;
            out.vars = [
                x + 0.02 * xd,
                th + 0.02 * thd,
                xd + 0.02 * xacc,
                thd + 0.02 * thacc,
            ];
            out.terminal =
                out.vars[0].abs() > 2.4 || out.vars[1].abs() > 15.0 * PI / 180.0;
            out.reward = 1.0;
        }
        TaskId::Acrobot => {
            let tq = a_c.clamp(-1.0, 1.0);
            let (t1, t2, d1v, d2v) = (v[0], v[1], v[2], v[3]);
            // unit masses/lengths, lc = 0.5, inertias 1, g = 9.8
            let d1 = 0.25 + (1.0 + 0.25 + t2.cos()) + 1.0 + 1.0;
            let d2 = 0.25 + 0.5 * t2.cos() + 1.0;
            let phi2 = 0.5 * 9.8 * (t1 + t2 - PI / 2.0).cos();
            let phi1 = -0.5 * d2v * d2v * t2.sin() - 2.0 * 0.5 * d2v * d1v * t2.sin()
                + (0.5 + 1.0) * 9.8 * (t1 - PI / 2.0).cos()
                + phi2;
            let dd2 = (tq + d2 / d1 * phi1 - 0.5 * d1v * d1v * t2.sin() - phi2)
                / (0.25 + 1.0 - d2 * d2 / d1);
            let dd1 = -(d2 * dd2 + phi1) / d1;
            out.vars = [
                oracle_wrap(t1 + 0.2 * d1v),
                oracle_wrap(t2 + 0.2 * d2v),
                (d1v + 0.2 * dd1).clamp(-4.0 * PI, 4.0 * PI),
                (d2v + 0.2 * dd2).clamp(-9.0 * PI, 9.0 * PI),
            ];
            out.terminal = -out.vars[0].cos() - (out.vars[0] + out.vars[1]).cos() > 1.0;
            out.reward = if out.terminal { 0.0 } else { -1.0 };
        }
        TaskId::CartCentering => {
            let f = three_way(task, a.a_d, s.prev_discrete_force);
            out.prev_force = f;
            out.vars[0] = v[0] + 0.02 * v[1];
            out.vars[1] = v[1] + 0.02 * (f / 2.0);
            out.terminal = out.vars[0].abs() < 0.01 && out.vars[1].abs() < 0.01;
            out.reward = if out.terminal { 0.0 } else { -1.0 };
        }
        TaskId::Pendulum => {
            let tq = a_c.clamp(-2.0, 2.0);
            let thw = oracle_wrap(v[0]);
            out.reward = -(thw * thw + 0.1 * v[1] * v[1] + 0.001 * tq * tq);
            let nd = (v[1] + (3.0 * 10.0 / 2.0 * v[0].sin() + 3.0 * tq) * 0.05)
                .clamp(-8.0, 8.0);
            out.vars[0] = v[0] + nd * 0.05;
            out.vars[1] = nd;
        }
        TaskId::MountainCar | TaskId::MountainCarContinuous => {
            let (power, goal) = if task == TaskId::MountainCar {
                (0.001 * three_way(task, a.a_d, s.prev_discrete_force), 0.5)
            } else {
                (0.0015 * a_c.clamp(-1.0, 1.0), 0.45)
            };
            let mut nv = (v[1] + power - 0.0025 * (3.0 * v[0]).cos()).clamp(-0.07, 0.07);
            let nx = (v[0] + nv).clamp(-1.2, 0.6);
            if nx <= -1.2 && nv < 0.0 {
                nv = 0.0;
            }
            out.vars[0] = nx;
            out.vars[1] = nv;
            out.terminal = nx >= goal;
            out.reward = if task == TaskId::MountainCar {
                -1.0
            } else {
                let f = a_c.clamp(-1.0, 1.0);
                -0.1 * f * f + if out.terminal { 100.0 } else { 0.0 }
            };
        }
    }
    out.done = out.terminal || s.steps_elapsed + 1 >= task.step_limit();
    out
}

// ---------------------------------------------------------------------------
// Random structure generators
// ---------------------------------------------------------------------------

pub fn random_program_body<R: Rng>(rng: &mut R, len: usize) -> Vec<Instruction> {
    (0..len.max(1))
        .map(|_| tpg::lgp::random_instruction(rng))
        .collect()
}

/// Random multi-team graph with cycles allowed: internal edges may target any
/// team, including ancestors and the team itself. Every team keeps at least
/// one leaf so traversal always has an exit.
pub fn random_graph<R: Rng>(
    rng: &mut R,
    min_teams: usize,
    max_teams: usize,
) -> (Population, Vec<TeamId>, TeamId) {
    let n_teams = rng.gen_range(min_teams.max(1)..=max_teams.max(min_teams).max(1));
    let n_banks = rng.gen_range(1..=(2 * n_teams));
    let banks: Vec<BankId> = (0..n_banks as u64).map(BankId).collect();
    let mut programs: Vec<ProgramRecord> = Vec::new();
    let mut teams: Vec<Team> = Vec::new();
    let mut next_pid = 0u64;
    for t in 0..n_teams as u64 {
        let n_progs = rng.gen_range(2..=6);
        let mut members = Vec::new();
        for k in 0..n_progs {
            let force_leaf = k == 0; // guarantees an exit from every team
            let action = if force_leaf || rng.gen_bool(0.5) {
                ProgramAction::Discrete(rng.gen_range(0..3))
            } else {
                ProgramAction::Team(TeamId(rng.gen_range(0..n_teams as u64)))
            };
            let id = ProgramId(next_pid);
            next_pid += 1;
            programs.push(ProgramRecord {
                id,
                instructions: {
                    let len = rng.gen_range(1..=12);
                    random_program_body(rng, len)
                },
                action,
                memory_ref: banks[rng.gen_range(0..banks.len())],
            });
            members.push(id);
        }
        teams.push(Team::new(TeamId(t), members));
    }
    let root = TeamId(rng.gen_range(0..n_teams as u64));
    let team_ids: Vec<TeamId> = teams.iter().map(|t| t.id).collect();
    let graph = Subgraph {
        root,
        teams,
        programs,
        banks,
    };
    (graph.instantiate(), team_ids, root)
}
