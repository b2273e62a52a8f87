//! Six partially-observable classic-control tasks behind one episodic
//! interface.
//!
//! Every task exposes two observation variables in [-1, 1] and accepts one
//! discrete and one continuous action per step; each task reads only the
//! channel it responds to. Velocity-like state variables are never observable;
//! they are exported separately for analysis tooling only.

use crate::rng::Stream;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Task ordering is fixed: it is the bit position in task-set masks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum TaskId {
    CartPole = 0,
    Acrobot = 1,
    CartCentering = 2,
    Pendulum = 3,
    MountainCar = 4,
    MountainCarContinuous = 5,
}

pub const TASK_COUNT: usize = 6;

impl TaskId {
    pub const ALL: [TaskId; TASK_COUNT] = [
        TaskId::CartPole,
        TaskId::Acrobot,
        TaskId::CartCentering,
        TaskId::Pendulum,
        TaskId::MountainCar,
        TaskId::MountainCarContinuous,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<TaskId> {
        TaskId::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskId::CartPole => "cartpole",
            TaskId::Acrobot => "acrobot",
            TaskId::CartCentering => "cartcentering",
            TaskId::Pendulum => "pendulum",
            TaskId::MountainCar => "mountaincar",
            TaskId::MountainCarContinuous => "mountaincarcontinuous",
        }
    }

    pub fn parse(s: &str) -> Option<TaskId> {
        let s = s.trim().to_ascii_lowercase();
        TaskId::ALL.iter().copied().find(|t| t.name() == s)
    }

    /// Physical state variables (positions first, velocities after).
    pub fn state_vars(self) -> usize {
        match self {
            TaskId::CartPole | TaskId::Acrobot => 4,
            _ => 2,
        }
    }

    /// Unobservable velocity variables exported for analysis.
    pub fn hidden_vars(self) -> usize {
        match self {
            TaskId::CartPole | TaskId::Acrobot => 2,
            _ => 1,
        }
    }

    pub fn step_limit(self) -> u32 {
        match self {
            TaskId::CartPole => 200,
            TaskId::Acrobot => 500,
            TaskId::CartCentering => 500,
            TaskId::Pendulum => 200,
            TaskId::MountainCar => 200,
            TaskId::MountainCarContinuous => 999,
        }
    }

    /// True when the task responds to the discrete action channel.
    pub fn discrete_action(self) -> bool {
        matches!(
            self,
            TaskId::CartPole | TaskId::CartCentering | TaskId::MountainCar
        )
    }

    /// True when the second observation variable is a fresh uniform draw.
    pub fn random_second_obs(self) -> bool {
        !matches!(self, TaskId::CartPole | TaskId::Acrobot)
    }
}

// CartPole (Barto et al. dynamics, Euler integration)
const CP_GRAVITY: f64 = 9.8;
const CP_MASS_CART: f64 = 1.0;
const CP_MASS_POLE: f64 = 0.1;
const CP_HALF_LENGTH: f64 = 0.5;
const CP_FORCE_MAG: f64 = 10.0;
const CP_TAU: f64 = 0.02;
const CP_X_LIMIT: f64 = 2.4;
/// Failure angle follows the 15-degree description rather than the more
/// common 12 degrees.
const CP_THETA_LIMIT: f64 = 15.0 * PI / 180.0;

// Acrobot (Sutton dynamics, unit masses and lengths)
const AB_TAU: f64 = 0.2;
const AB_M1: f64 = 1.0;
const AB_M2: f64 = 1.0;
const AB_L1: f64 = 1.0;
const AB_LC1: f64 = 0.5;
const AB_LC2: f64 = 0.5;
const AB_I1: f64 = 1.0;
const AB_I2: f64 = 1.0;
const AB_GRAVITY: f64 = 9.8;
const AB_MAX_VEL1: f64 = 4.0 * PI;
const AB_MAX_VEL2: f64 = 9.0 * PI;
const AB_TORQUE_LIMIT: f64 = 1.0;

// CartCentering (Koza 1992)
const CC_MASS: f64 = 2.0;
const CC_TAU: f64 = 0.02;
const CC_SUCCESS: f64 = 0.01;
const CC_INIT: f64 = 0.75;
const CC_X_NORM: f64 = 1.5;

// Pendulum
const PD_GRAVITY: f64 = 10.0;
const PD_MASS: f64 = 1.0;
const PD_LENGTH: f64 = 1.0;
const PD_TAU: f64 = 0.05;
const PD_TORQUE_LIMIT: f64 = 2.0;
const PD_MAX_SPEED: f64 = 8.0;

// MountainCar family
const MC_MIN_POS: f64 = -1.2;
const MC_MAX_POS: f64 = 0.6;
const MC_MAX_SPEED: f64 = 0.07;
const MC_FORCE: f64 = 0.001;
const MC_GRAVITY_TERM: f64 = 0.0025;
const MC_GOAL: f64 = 0.5;
const MCC_POWER: f64 = 0.0015;
const MCC_GOAL: f64 = 0.45;

/// Physical state of one episode. `vars` layout is task specific:
/// CartPole `[x, theta, x_dot, theta_dot]`, Acrobot
/// `[theta1, theta2, dtheta1, dtheta2]`, the rest `[pos, vel]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub vars: [f64; 4],
    pub steps_elapsed: u32,
    pub prev_discrete_force: f64,
    pub done: bool,
}

/// Agent-visible observation; both components clipped to [-1, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub s0: f64,
    pub s1: f64,
}

impl Observation {
    pub fn as_array(self) -> [f64; 2] {
        [self.s0, self.s1]
    }
}

/// One discrete and one continuous action; each task reads only its channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionPair {
    pub a_d: u8,
    pub a_c: f64,
}

/// Outcome of one transition. `hidden` holds the unobservable velocity
/// variables (`TaskId::hidden_vars` of them) for analysis only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepResult {
    pub reward: f64,
    pub done: bool,
    pub hidden: [f64; 2],
}

impl StepResult {
    pub fn hidden_slice(&self, task: TaskId) -> &[f64] {
        &self.hidden[..task.hidden_vars()]
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnvError {
    #[error("step called on a terminated episode")]
    StepAfterDone,
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a < -PI {
        a += 2.0 * PI;
    }
    a
}

/// Samples the task's initial state distribution.
pub fn reset(task: TaskId, rng: &mut Stream) -> SystemState {
    let mut vars = [0.0; 4];
    match task {
        TaskId::CartPole => {
            for v in vars.iter_mut() {
                *v = rng.gen_range(-0.05..0.05);
            }
        }
        TaskId::Acrobot => {
            for v in vars.iter_mut() {
                *v = rng.gen_range(-0.1..0.1);
            }
        }
        TaskId::CartCentering => {
            vars[0] = rng.gen_range(-CC_INIT..CC_INIT);
            vars[1] = rng.gen_range(-CC_INIT..CC_INIT);
        }
        TaskId::Pendulum => {
            vars[0] = rng.gen_range(-PI..PI);
            vars[1] = rng.gen_range(-1.0..1.0);
        }
        TaskId::MountainCar | TaskId::MountainCarContinuous => {
            vars[0] = rng.gen_range(-0.6..-0.4);
            vars[1] = 0.0;
        }
    }
    SystemState {
        vars,
        steps_elapsed: 0,
        prev_discrete_force: 1.0,
        done: false,
    }
}

/// Projects the observable variables per the interface table, normalized by
/// fixed a-priori bounds so magnitude cannot identify the task.
pub fn observe(task: TaskId, state: &SystemState, rng: &mut Stream) -> Observation {
    let v = &state.vars;
    let (s0, s1) = match task {
        TaskId::CartPole => (v[0] / CP_X_LIMIT, v[1] / CP_THETA_LIMIT),
        TaskId::Acrobot => (wrap_angle(v[0]) / PI, wrap_angle(v[1]) / PI),
        TaskId::CartCentering => (v[0] / CC_X_NORM, rng.gen_range(0.0..1.0)),
        TaskId::Pendulum => (v[0].cos(), rng.gen_range(0.0..1.0)),
        TaskId::MountainCar | TaskId::MountainCarContinuous => {
            let mid = (MC_MIN_POS + MC_MAX_POS) / 2.0;
            let half = (MC_MAX_POS - MC_MIN_POS) / 2.0;
            ((v[0] - mid) / half, rng.gen_range(0.0..1.0))
        }
    };
    Observation {
        s0: s0.clamp(-1.0, 1.0),
        s1: s1.clamp(-1.0, 1.0),
    }
}

fn sanitize_continuous(a_c: f64) -> f64 {
    if a_c.is_finite() {
        a_c
    } else {
        0.0
    }
}

/// Force multiplier for a three-way discrete action: `{+1, middle, -1}`.
/// The middle index repeats the previous force for the cart tasks and is a
/// zero force for MountainCar.
fn discrete_force(task: TaskId, a_d: u8, prev: f64) -> f64 {
    match a_d % 3 {
        0 => 1.0,
        1 => {
            if task == TaskId::MountainCar {
                0.0
            } else {
                prev
            }
        }
        _ => -1.0,
    }
}

/// Applies one transition. Discrete tasks read `a_d`, continuous tasks read
/// the clipped `a_c`; the other channel is ignored.
pub fn step(
    task: TaskId,
    state: &SystemState,
    action: ActionPair,
) -> Result<(SystemState, StepResult), EnvError> {
    if state.done {
        return Err(EnvError::StepAfterDone);
    }
    let mut next = state.clone();
    let a_c = sanitize_continuous(action.a_c);
    let reward;
    let mut terminal = false;
    match task {
        TaskId::CartPole => {
            let force_dir = discrete_force(task, action.a_d, state.prev_discrete_force);
            next.prev_discrete_force = force_dir;
            let force = CP_FORCE_MAG * force_dir;
            let [x, theta, x_dot, theta_dot] = state.vars;
            let (sin_t, cos_t) = theta.sin_cos();
            let total_mass = CP_MASS_CART + CP_MASS_POLE;
            let polemass_length = CP_MASS_POLE * CP_HALF_LENGTH;
            let temp = (force + polemass_length * theta_dot * theta_dot * sin_t) / total_mass;
            let theta_acc = (CP_GRAVITY * sin_t - cos_t * temp)
                / (CP_HALF_LENGTH * (4.0 / 3.0 - CP_MASS_POLE * cos_t * cos_t / total_mass));
            let x_acc = temp - polemass_length * theta_acc * cos_t / total_mass;
            next.vars = [
                x + CP_TAU * x_dot,
                theta + CP_TAU * theta_dot,
                x_dot + CP_TAU * x_acc,
                theta_dot + CP_TAU * theta_acc,
            ];
            terminal = next.vars[0].abs() > CP_X_LIMIT || next.vars[1].abs() > CP_THETA_LIMIT;
            reward = 1.0;
        }
        TaskId::Acrobot => {
            let torque = a_c.clamp(-AB_TORQUE_LIMIT, AB_TORQUE_LIMIT);
            let [t1, t2, dt1, dt2] = state.vars;
            let d1 = AB_M1 * AB_LC1 * AB_LC1
                + AB_M2 * (AB_L1 * AB_L1 + AB_LC2 * AB_LC2 + 2.0 * AB_L1 * AB_LC2 * t2.cos())
                + AB_I1
                + AB_I2;
            let d2 = AB_M2 * (AB_LC2 * AB_LC2 + AB_L1 * AB_LC2 * t2.cos()) + AB_I2;
            let phi2 = AB_M2 * AB_LC2 * AB_GRAVITY * (t1 + t2 - PI / 2.0).cos();
            let phi1 = -AB_M2 * AB_L1 * AB_LC2 * dt2 * dt2 * t2.sin()
                - 2.0 * AB_M2 * AB_L1 * AB_LC2 * dt2 * dt1 * t2.sin()
                + (AB_M1 * AB_LC1 + AB_M2 * AB_L1) * AB_GRAVITY * (t1 - PI / 2.0).cos()
                + phi2;
            let ddt2 = (torque + d2 / d1 * phi1 - AB_M2 * AB_L1 * AB_LC2 * dt1 * dt1 * t2.sin()
                - phi2)
                / (AB_M2 * AB_LC2 * AB_LC2 + AB_I2 - d2 * d2 / d1);
            let ddt1 = -(d2 * ddt2 + phi1) / d1;
            next.vars = [
                wrap_angle(t1 + AB_TAU * dt1),
                wrap_angle(t2 + AB_TAU * dt2),
                (dt1 + AB_TAU * ddt1).clamp(-AB_MAX_VEL1, AB_MAX_VEL1),
                (dt2 + AB_TAU * ddt2).clamp(-AB_MAX_VEL2, AB_MAX_VEL2),
            ];
            terminal = -next.vars[0].cos() - (next.vars[0] + next.vars[1]).cos() > 1.0;
            reward = if terminal { 0.0 } else { -1.0 };
        }
        TaskId::CartCentering => {
            let force = discrete_force(task, action.a_d, state.prev_discrete_force);
            next.prev_discrete_force = force;
            let [x, x_dot, ..] = state.vars;
            let x_acc = force / CC_MASS;
            next.vars[0] = x + CC_TAU * x_dot;
            next.vars[1] = x_dot + CC_TAU * x_acc;
            terminal = next.vars[0].abs() < CC_SUCCESS && next.vars[1].abs() < CC_SUCCESS;
            reward = if terminal { 0.0 } else { -1.0 };
        }
        TaskId::Pendulum => {
            let torque = a_c.clamp(-PD_TORQUE_LIMIT, PD_TORQUE_LIMIT);
            let [theta, theta_dot, ..] = state.vars;
            let theta_w = wrap_angle(theta);
            reward = -(theta_w * theta_w
                + 0.1 * theta_dot * theta_dot
                + 0.001 * torque * torque);
            let new_dot = (theta_dot
                + (3.0 * PD_GRAVITY / (2.0 * PD_LENGTH) * theta.sin()
                    + 3.0 / (PD_MASS * PD_LENGTH * PD_LENGTH) * torque)
                    * PD_TAU)
                .clamp(-PD_MAX_SPEED, PD_MAX_SPEED);
            next.vars[0] = theta + new_dot * PD_TAU;
            next.vars[1] = new_dot;
        }
        TaskId::MountainCar => {
            let force = discrete_force(task, action.a_d, state.prev_discrete_force);
            let [x, v, ..] = state.vars;
            let mut new_v =
                (v + MC_FORCE * force - MC_GRAVITY_TERM * (3.0 * x).cos()).clamp(-MC_MAX_SPEED, MC_MAX_SPEED);
            let new_x = (x + new_v).clamp(MC_MIN_POS, MC_MAX_POS);
            if new_x <= MC_MIN_POS && new_v < 0.0 {
                new_v = 0.0;
            }
            next.vars[0] = new_x;
            next.vars[1] = new_v;
            terminal = new_x >= MC_GOAL;
            reward = -1.0;
        }
        TaskId::MountainCarContinuous => {
            let force = a_c.clamp(-1.0, 1.0);
            let [x, v, ..] = state.vars;
            let mut new_v = (v + MCC_POWER * force - MC_GRAVITY_TERM * (3.0 * x).cos())
                .clamp(-MC_MAX_SPEED, MC_MAX_SPEED);
            let new_x = (x + new_v).clamp(MC_MIN_POS, MC_MAX_POS);
            if new_x <= MC_MIN_POS && new_v < 0.0 {
                new_v = 0.0;
            }
            next.vars[0] = new_x;
            next.vars[1] = new_v;
            terminal = new_x >= MCC_GOAL;
            reward = -0.1 * force * force + if terminal { 100.0 } else { 0.0 };
        }
    }
    next.steps_elapsed = state.steps_elapsed + 1;
    next.done = terminal || next.steps_elapsed >= task.step_limit();
    let hidden = hidden_velocities(task, &next);
    Ok((
        next.clone(),
        StepResult {
            reward,
            done: next.done,
            hidden,
        },
    ))
}

fn hidden_velocities(task: TaskId, state: &SystemState) -> [f64; 2] {
    match task {
        TaskId::CartPole | TaskId::Acrobot => [state.vars[2], state.vars[3]],
        _ => [state.vars[1], 0.0],
    }
}

/// Per-step record handed to an optional trace sink.
#[derive(Clone, Debug)]
pub struct EpisodeStep {
    pub t: u32,
    pub obs: Observation,
    pub action: ActionPair,
    pub reward: f64,
    pub done: bool,
    pub hidden: [f64; 2],
}

/// Runs one episode: reset, then observe/act/step until termination or the
/// step limit. Returns the summed reward.
pub fn run_episode<A, E>(
    task: TaskId,
    agent: &mut A,
    rng: &mut Stream,
    mut sink: Option<&mut dyn FnMut(&EpisodeStep)>,
) -> Result<f64, E>
where
    A: FnMut(Observation) -> Result<ActionPair, E>,
{
    let mut state = reset(task, rng);
    let mut total = 0.0;
    let mut t = 0;
    while !state.done {
        let obs = observe(task, &state, rng);
        let action = agent(obs)?;
        let (next, result) = step(task, &state, action).expect("stepped a live episode");
        total += result.reward;
        if let Some(sink) = sink.as_deref_mut() {
            sink(&EpisodeStep {
                t,
                obs,
                action,
                reward: result.reward,
                done: result.done,
                hidden: result.hidden,
            });
        }
        state = next;
        t += 1;
    }
    Ok(total)
}
