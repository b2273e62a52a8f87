//! Generational evolution: offspring per task set, multi-task fitness via
//! population-relative min-normalization, elitist survivor union, and
//! reachability pruning.

use crate::config::RunConfig;
use crate::env::{self, EpisodeStep, TaskId, TASK_COUNT};
use crate::graph::{self, EvalBanks, Team, TeamParams, TraversalTrace};
use crate::ids::{BankId, ProgramId, TeamId};
use crate::lgp::{self, Instruction, Program, ProgramAction};
use crate::population::Population;
use crate::rng::{self, Stream};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Per-team training scores, indexed by `TaskId::index`. `None` until the
/// team has been evaluated on that task.
pub type TaskScores = [Option<f64>; TASK_COUNT];

/// A non-empty subset of tasks, stored as a bitmask over task indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaskSet(pub u8);

impl TaskSet {
    pub fn single(task: TaskId) -> TaskSet {
        TaskSet(1 << task.index())
    }

    pub fn from_tasks(tasks: &[TaskId]) -> TaskSet {
        TaskSet(tasks.iter().fold(0, |m, t| m | (1 << t.index())))
    }

    pub fn contains(self, task: TaskId) -> bool {
        self.0 & (1 << task.index()) != 0
    }

    pub fn tasks(self) -> Vec<TaskId> {
        TaskId::ALL
            .iter()
            .copied()
            .filter(|&t| self.contains(t))
            .collect()
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Comma-joined task indices, e.g. "0,3".
    pub fn label(self) -> String {
        self.tasks()
            .iter()
            .map(|t| t.index().to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Parses the `label` form. Rejects empty sets and unknown indices.
    pub fn parse_label(s: &str) -> Option<TaskSet> {
        let mut mask = 0u8;
        for part in s.split(',') {
            let idx: usize = part.trim().parse().ok()?;
            TaskId::from_index(idx)?;
            mask |= 1 << idx;
        }
        if mask == 0 {
            None
        } else {
            Some(TaskSet(mask))
        }
    }
}

/// Every non-empty subset of `tasks`, in ascending bitmask order.
/// Six tasks yield 63 sets.
pub fn power_set(tasks: &[TaskId]) -> Vec<TaskSet> {
    let full = TaskSet::from_tasks(tasks).0;
    (1..=full)
        .filter(|m| m & !full == 0)
        .map(TaskSet)
        .collect()
}

/// Fitness of one team on one task set: raw mean reward for a singleton
/// set, worst normalized score across member tasks otherwise.
pub fn set_fitness(set: TaskSet, raw: &TaskScores, norm: &TaskScores) -> f64 {
    let tasks = set.tasks();
    if tasks.len() == 1 {
        raw[tasks[0].index()].expect("task evaluated")
    } else {
        tasks
            .iter()
            .map(|t| norm[t.index()].expect("task evaluated"))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Min-max normalizes every evaluated task column over `roots` into [0, 1].
/// A degenerate column (all roots equal) maps to 1.0 everywhere.
pub fn normalize_scores(
    scores: &BTreeMap<TeamId, TaskScores>,
    roots: &[TeamId],
    tasks: &[TaskId],
) -> BTreeMap<TeamId, TaskScores> {
    let mut out: BTreeMap<TeamId, TaskScores> =
        roots.iter().map(|&r| (r, [None; TASK_COUNT])).collect();
    for &task in tasks {
        let i = task.index();
        let column: Vec<f64> = roots
            .iter()
            .map(|r| scores[r][i].expect("task evaluated"))
            .collect();
        let min = column.iter().copied().fold(f64::INFINITY, f64::min);
        let max = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = max - min;
        for (&root, &sc) in roots.iter().zip(&column) {
            out.get_mut(&root).expect("root present")[i] = Some(if range == 0.0 {
                1.0
            } else {
                (sc - min) / range
            });
        }
    }
    out
}

/// Serialized form of a program; the intron mask is recomputed on load.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProgramRecord {
    pub id: ProgramId,
    pub instructions: Vec<Instruction>,
    pub action: ProgramAction,
    pub memory_ref: BankId,
}

impl ProgramRecord {
    pub fn of(p: &Program) -> ProgramRecord {
        ProgramRecord {
            id: p.id,
            instructions: p.instructions.clone(),
            action: p.action,
            memory_ref: p.memory_ref,
        }
    }

    pub fn instantiate(self) -> Program {
        Program::new(self.id, self.instructions, self.action, self.memory_ref)
    }
}

/// Self-contained snapshot of one agent: the root plus everything reachable
/// from it, replayable after the live population has moved on.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Subgraph {
    pub root: TeamId,
    pub teams: Vec<Team>,
    pub programs: Vec<ProgramRecord>,
    pub banks: Vec<BankId>,
}

impl Subgraph {
    pub fn capture(pop: &Population, root: TeamId) -> Subgraph {
        let reach = pop.collect_reachable(root);
        Subgraph {
            root,
            teams: reach.teams.iter().map(|&t| pop.team(t).clone()).collect(),
            programs: reach
                .programs
                .iter()
                .map(|&p| ProgramRecord::of(pop.program(p)))
                .collect(),
            banks: reach.banks.iter().copied().collect(),
        }
    }

    /// Rebuilds a minimal population holding exactly this subgraph.
    pub fn instantiate(&self) -> Population {
        let mut pop = Population::new();
        for team in &self.teams {
            pop.teams.insert(team.id, team.clone());
            pop.ids.observe(None, Some(team.id), None);
        }
        for rec in &self.programs {
            pop.ids.observe(Some(rec.id), None, None);
            pop.programs.insert(rec.id, rec.clone().instantiate());
        }
        for &bank in &self.banks {
            pop.banks.insert(bank);
            pop.ids.observe(None, None, Some(bank));
        }
        pop.recount_indegrees();
        pop
    }
}

/// Archive entry written whenever champions are tested.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChampionRecord {
    pub generation: u64,
    pub set: TaskSet,
    pub root: TeamId,
    /// Training fitness at selection time (set-fitness scale).
    pub train_fitness: f64,
    /// Mean test reward per run task over fresh-seed episodes.
    pub test_means: TaskScores,
    pub snapshot: Subgraph,
}

/// Per-task-set selection summary for one generation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SetStats {
    pub set: TaskSet,
    pub champion: TeamId,
    pub best_fitness: f64,
    pub mean_fitness: f64,
}

#[derive(Clone, Debug)]
pub struct GenerationReport {
    pub generation: u64,
    pub stats: Vec<SetStats>,
    pub tested: bool,
    pub n_roots: usize,
    pub n_teams: usize,
    pub n_programs: usize,
    pub n_banks: usize,
}

/// Runs one episode of `task` under the agent rooted at `root`. Banks are
/// zeroed at episode start; within an episode they carry state across
/// timesteps. The sink sees each step with its traversal record and the
/// post-step bank contents.
pub fn run_graph_episode(
    pop: &Population,
    root: TeamId,
    task: TaskId,
    banks: &mut EvalBanks,
    rng: &mut Stream,
    mut sink: Option<&mut dyn FnMut(&EpisodeStep, &TraversalTrace, &EvalBanks)>,
) -> f64 {
    banks.reset();
    let mut state = env::reset(task, rng);
    let mut total = 0.0;
    let mut t: u32 = 0;
    while !state.done {
        let obs = env::observe(task, &state, rng);
        let (action, trace) = graph::traverse(pop, root, obs.as_array(), banks, t);
        let (next, result) = env::step(task, &state, action).expect("stepped a live episode");
        total += result.reward;
        if let Some(sink) = sink.as_deref_mut() {
            sink(
                &EpisodeStep {
                    t,
                    obs,
                    action,
                    reward: result.reward,
                    done: result.done,
                    hidden: result.hidden,
                },
                &trace,
                banks,
            );
        }
        state = next;
        t += 1;
    }
    total
}

pub struct Engine {
    pub config: RunConfig,
    pub pop: Population,
    pub scores: BTreeMap<TeamId, TaskScores>,
    pub generation: u64,
    pub archive: Vec<ChampionRecord>,
}

impl Engine {
    /// Seeds the initial population: `R_size` root teams of `tmSize_init`
    /// fresh leaf programs, each with a private shared-memory bank.
    pub fn new(config: RunConfig) -> Engine {
        let mut pop = Population::new();
        let mut rng = rng::init_stream(config.seed);
        for _ in 0..config.r_size {
            let mut members = Vec::with_capacity(config.team.tm_size_init);
            for _ in 0..config.team.tm_size_init {
                let bank = pop.fresh_bank();
                let instructions = lgp::random_instructions(&mut rng, &config.program);
                let action = ProgramAction::Discrete(rng.gen_range(0..3));
                members.push(pop.add_program(instructions, action, bank));
            }
            pop.add_team(members);
        }
        Engine {
            config,
            pop,
            scores: BTreeMap::new(),
            generation: 0,
            archive: Vec::new(),
        }
    }

    pub fn sets(&self) -> Vec<TaskSet> {
        power_set(&self.config.tasks)
    }

    fn effective_team_params(&self) -> TeamParams {
        let mut tp = self.config.team;
        if self.config.no_hierarchy {
            tp.p_atomic = 1.0;
        }
        tp
    }

    /// Adds `n_elite` offspring per task set. Parent one is a uniform root,
    /// parent two a uniform team; with `p_x` the child is a crossover of the
    /// two, otherwise a clone of parent one; either way it is then mutated.
    pub fn generate_offspring(&mut self) {
        let mut rng = rng::variation_stream(self.config.seed, self.generation);
        let tp = self.effective_team_params();
        let pp = self.config.program;
        let roots = self.pop.root_ids();
        let teams: Vec<TeamId> = self.pop.teams.keys().copied().collect();
        let n_children = self.sets().len() * self.config.n_elite;
        for _ in 0..n_children {
            let parent1 = roots[rng.gen_range(0..roots.len())];
            let parent2 = teams[rng.gen_range(0..teams.len())];
            let crossed = !self.config.no_crossover && rng.gen_bool(self.config.p_x);
            let programs = if crossed {
                graph::team_crossover(&self.pop, parent1, parent2, &mut rng)
            } else {
                self.pop.team(parent1).programs.clone()
            };
            let child = self.pop.add_team(programs);
            graph::mutate_team(&mut self.pop, child, &mut rng, &tp, &pp);
        }
    }

    fn mean_reward(&self, root: TeamId, task: TaskId) -> f64 {
        let reach = self.pop.collect_reachable(root);
        let mut banks = EvalBanks::for_banks(reach.banks, self.config.no_memory);
        let mut total = 0.0;
        for ep in 0..self.config.episodes_per_task {
            let mut stream = rng::eval_stream(
                self.config.seed,
                self.generation,
                root.0,
                task.index() as u64,
                ep as u64,
            );
            total += run_graph_episode(&self.pop, root, task, &mut banks, &mut stream, None);
        }
        total / self.config.episodes_per_task as f64
    }

    /// Evaluates every root lacking a cached score on any run task.
    /// Jobs run in parallel; each draws an independent stream keyed by
    /// (generation, root, task, episode), so thread count cannot change
    /// any result.
    pub fn evaluate_generation(&mut self) {
        let tasks = self.config.tasks.clone();
        let jobs: Vec<(TeamId, TaskId)> = self
            .pop
            .root_ids()
            .into_iter()
            .flat_map(|root| {
                let cached = self.scores.get(&root);
                tasks
                    .iter()
                    .copied()
                    .filter(move |t| cached.map_or(true, |s| s[t.index()].is_none()))
                    .map(move |t| (root, t))
            })
            .collect();
        let results: Vec<f64> = jobs
            .par_iter()
            .map(|&(root, task)| self.mean_reward(root, task))
            .collect();
        for (&(root, task), &mean) in jobs.iter().zip(&results) {
            self.scores.entry(root).or_insert([None; TASK_COUNT])[task.index()] = Some(mean);
        }
    }

    /// Ranks roots per task set, keeps the union of the per-set top
    /// `n_elite`, and prunes everything unreachable from the survivors.
    pub fn select_survivors(&mut self) -> Vec<SetStats> {
        let roots = self.pop.root_ids();
        let norm = normalize_scores(&self.scores, &roots, &self.config.tasks);
        let mut survivors: BTreeSet<TeamId> = BTreeSet::new();
        let mut stats = Vec::new();
        for set in self.sets() {
            let mut ranked: Vec<(TeamId, f64)> = roots
                .iter()
                .map(|&r| (r, set_fitness(set, &self.scores[&r], &norm[&r])))
                .collect();
            // descending fitness, ties to the older (smaller) id
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let keep = self.config.n_elite.min(ranked.len());
            survivors.extend(ranked[..keep].iter().map(|&(id, _)| id));
            let mean = ranked.iter().map(|&(_, f)| f).sum::<f64>() / ranked.len() as f64;
            stats.push(SetStats {
                set,
                champion: ranked[0].0,
                best_fitness: ranked[0].1,
                mean_fitness: mean,
            });
        }
        self.pop.prune_unreachable(&survivors);
        let live = &self.pop.teams;
        self.scores.retain(|id, _| live.contains_key(id));
        stats
    }

    fn test_mean_reward(&self, set: TaskSet, root: TeamId, task: TaskId) -> f64 {
        let reach = self.pop.collect_reachable(root);
        let mut banks = EvalBanks::for_banks(reach.banks, self.config.no_memory);
        let mut total = 0.0;
        for ep in 0..self.config.test_episodes {
            let mut stream = rng::test_stream(
                self.config.seed,
                self.generation,
                set.0 as u64,
                task.index() as u64,
                ep as u64,
            );
            total += run_graph_episode(&self.pop, root, task, &mut banks, &mut stream, None);
        }
        total / self.config.test_episodes as f64
    }

    /// Tests each set's champion on fresh-seed episodes for every run task
    /// and archives the result with a replayable snapshot.
    pub fn test_champions(&mut self, stats: &[SetStats]) {
        let jobs: Vec<(usize, TaskId)> = stats
            .iter()
            .enumerate()
            .flat_map(|(i, _)| self.config.tasks.iter().map(move |&t| (i, t)))
            .collect();
        let results: Vec<f64> = jobs
            .par_iter()
            .map(|&(i, task)| self.test_mean_reward(stats[i].set, stats[i].champion, task))
            .collect();
        for stat in stats {
            let mut test_means = [None; TASK_COUNT];
            for (&(i, task), &mean) in jobs.iter().zip(&results) {
                if stats[i].set == stat.set {
                    test_means[task.index()] = Some(mean);
                }
            }
            self.archive.push(ChampionRecord {
                generation: self.generation,
                set: stat.set,
                root: stat.champion,
                train_fitness: stat.best_fitness,
                test_means,
                snapshot: Subgraph::capture(&self.pop, stat.champion),
            });
        }
    }

    /// One full generation: variation (skipped for the initial population),
    /// evaluation, selection, periodic champion testing.
    pub fn step_generation(&mut self) -> GenerationReport {
        if self.generation > 0 {
            self.generate_offspring();
        }
        self.evaluate_generation();
        let stats = self.select_survivors();
        let last = self.generation + 1 == self.config.generations;
        let tested = self.config.test_interval > 0
            && (self.generation % self.config.test_interval == 0 || last);
        if tested {
            self.test_champions(&stats);
        }
        let report = GenerationReport {
            generation: self.generation,
            stats,
            tested,
            n_roots: self.pop.root_ids().len(),
            n_teams: self.pop.teams.len(),
            n_programs: self.pop.programs.len(),
            n_banks: self.pop.banks.len(),
        };
        self.generation += 1;
        report
    }
}

/// Order-sensitive structural hash of the whole population, for
/// determinism checks.
pub fn population_checksum(pop: &Population) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let upd = |h: &mut u64, v: u64| {
        *h ^= v;
        *h = h.wrapping_mul(0x0000_0100_0000_01b3);
    };
    for team in pop.teams.values() {
        upd(&mut h, team.id.0);
        upd(&mut h, team.indegree as u64);
        for p in &team.programs {
            upd(&mut h, p.0);
        }
    }
    for prog in pop.programs.values() {
        upd(&mut h, prog.id.0);
        upd(&mut h, prog.memory_ref.0);
        match prog.action {
            ProgramAction::Discrete(a) => upd(&mut h, a as u64),
            ProgramAction::Team(t) => upd(&mut h, (1 << 32) | t.0),
        }
        for ins in &prog.instructions {
            upd(&mut h, ins.opcode as u64);
            upd(&mut h, ins.target_bank as u64);
            upd(&mut h, ins.target_idx as u64);
            upd(&mut h, ins.op1_bank as u64);
            upd(&mut h, ins.op1_idx as u64);
            upd(&mut h, ins.op2_bank as u64);
            upd(&mut h, ins.op2_idx as u64);
        }
    }
    for bank in &pop.banks {
        upd(&mut h, bank.0);
    }
    h
}
