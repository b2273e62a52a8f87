use clap::{Parser, Subcommand};
use rand::Rng;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use tpg::analysis;
use tpg::checkpoint::Checkpoint;
use tpg::config::RunConfig;
use tpg::env::{self, ActionPair, TaskId};
use tpg::evolve::{ChampionRecord, Engine, GenerationReport, TaskSet};
use tpg::graph::EvalBanks;
use tpg::population::Population;
use tpg::rng;
use tpg::trace::{self, ReplayTrace};

/// Exit code for unreadable or inconsistent data files.
const EXIT_DATA: u8 = 3;
/// Exit code for invalid usage (clap uses 2 for argument errors too).
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "tpg", version, about = "Tangled-program-graph evolution over classic-control tasks")]
struct Cli {
    /// Evaluation worker threads; 1 runs the serial reference path.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a fresh population and write metrics plus checkpoints.
    Train {
        /// Key-value config file; omitted means published defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's generation count.
        #[arg(long)]
        generations: Option<u64>,
    },
    /// Continue a run from a checkpoint.
    Resume {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Raises the target generation count before continuing.
        #[arg(long)]
        generations: Option<u64>,
    },
    /// Re-run an archived champion, writing per-episode CSV and JSON traces.
    Replay {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Task-set selector as comma-joined task indices, e.g. "0,3".
        #[arg(long)]
        champion: String,
        #[arg(long)]
        task: String,
        #[arg(long, default_value_t = 5)]
        episodes: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a champion and reduce the traces into measurement CSVs.
    Analyze {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Task-set selector as comma-joined task indices, e.g. "0,3".
        #[arg(long)]
        champion: String,
        #[arg(long)]
        task: String,
        #[arg(long, default_value_t = 20)]
        episodes: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean episode reward of a uniform-random policy, per task.
    Baseline {
        /// Task name or "all".
        #[arg(long, default_value = "all")]
        task: String,
        #[arg(long, default_value_t = 100)]
        episodes: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, thiserror::Error)]
enum AppError {
    #[error("{0}")]
    Config(#[from] tpg::config::ConfigError),
    #[error("{0}")]
    Checkpoint(#[from] tpg::checkpoint::CheckpointError),
    #[error("{0}")]
    Trace(#[from] tpg::trace::TraceError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .expect("thread pool configured once");
    }
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(EXIT_DATA)
        }
    }
}

fn run(cmd: Cmd) -> Result<(), AppError> {
    match cmd {
        Cmd::Train {
            config,
            out,
            seed,
            generations,
        } => {
            let mut cfg = match config {
                Some(path) => RunConfig::parse(&std::fs::read_to_string(path)?)?,
                None => RunConfig::default(),
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(generations) = generations {
                cfg.generations = generations;
            }
            cfg.validate()?;
            train_loop(Engine::new(cfg), &out)
        }
        Cmd::Resume {
            checkpoint,
            out,
            generations,
        } => {
            let mut engine = Checkpoint::load(&checkpoint)?;
            if let Some(generations) = generations {
                if generations < engine.generation {
                    return Err(AppError::Usage(format!(
                        "--generations {generations} is below the checkpoint's generation {}",
                        engine.generation
                    )));
                }
                engine.config.generations = generations;
            }
            train_loop(engine, &out)
        }
        Cmd::Replay {
            checkpoint,
            champion,
            task,
            episodes,
            seed,
            out,
        } => {
            let (record, task) = select_champion(&checkpoint, &champion, &task)?;
            let traces = replay_champion(&record, task, episodes, seed);
            std::fs::create_dir_all(&out)?;
            for trace in &traces {
                let stem = format!("task{}-ep{}", task.index(), trace.episode);
                let csv_file = std::fs::File::create(out.join(format!("episode-{stem}.csv")))?;
                trace::write_episode_csv(csv_file, trace)?;
                std::fs::write(out.join(format!("replay-{stem}.json")), trace.to_json())?;
            }
            let mean: f64 =
                traces.iter().map(|t| t.total_reward).sum::<f64>() / traces.len() as f64;
            println!(
                "replayed champion [{}] from generation {} on {}: mean reward {mean} over {episodes} episodes",
                record.set.label(),
                record.generation,
                task.name()
            );
            Ok(())
        }
        Cmd::Analyze {
            checkpoint,
            champion,
            task,
            episodes,
            seed,
            out,
        } => {
            let (record, task) = select_champion(&checkpoint, &champion, &task)?;
            let traces = replay_champion(&record, task, episodes, seed);
            std::fs::create_dir_all(&out)?;
            write_analyses(&out, task, &traces)?;
            println!(
                "analyzed champion [{}] on {}: {} episodes reduced into {}",
                record.set.label(),
                task.name(),
                traces.len(),
                out.display()
            );
            Ok(())
        }
        Cmd::Baseline {
            task,
            episodes,
            seed,
        } => {
            let tasks: Vec<TaskId> = if task == "all" {
                TaskId::ALL.to_vec()
            } else {
                vec![TaskId::parse(&task)
                    .ok_or_else(|| AppError::Usage(format!("unknown task `{task}`")))?]
            };
            println!("task,mean_reward");
            for task in tasks {
                println!("{},{}", task.name(), random_baseline(task, episodes, seed));
            }
            Ok(())
        }
    }
}

fn train_loop(mut engine: Engine, out: &Path) -> Result<(), AppError> {
    std::fs::create_dir_all(out)?;
    let metrics_path = out.join("metrics.csv");
    let fresh = !metrics_path.exists();
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&metrics_path)?;
    let mut metrics = csv::Writer::from_writer(file);
    if fresh {
        metrics.write_record([
            "gen",
            "task_set",
            "best_fitness",
            "mean_fitness",
            "n_roots",
            "n_teams",
            "n_programs",
            "n_banks",
        ])?;
    }
    let interval = engine.config.checkpoint_interval;
    while engine.generation < engine.config.generations {
        let report = engine.step_generation();
        write_metrics(&mut metrics, &report)?;
        metrics.flush()?;
        if interval > 0 && (report.generation + 1) % interval == 0 {
            Checkpoint::of(&engine)
                .save(&out.join(format!("checkpoint-gen{}.json", report.generation)))?;
        }
    }
    Checkpoint::of(&engine).save(&out.join("checkpoint-final.json"))?;
    println!(
        "finished at generation {}: {} teams, {} programs, {} archived champions",
        engine.generation,
        engine.pop.teams.len(),
        engine.pop.programs.len(),
        engine.archive.len()
    );
    Ok(())
}

fn write_metrics<W: std::io::Write>(
    w: &mut csv::Writer<W>,
    report: &GenerationReport,
) -> Result<(), AppError> {
    for stat in &report.stats {
        w.write_record([
            report.generation.to_string(),
            stat.set.label(),
            stat.best_fitness.to_string(),
            stat.mean_fitness.to_string(),
            report.n_roots.to_string(),
            report.n_teams.to_string(),
            report.n_programs.to_string(),
            report.n_banks.to_string(),
        ])?;
    }
    Ok(())
}

/// Finds the newest archived champion for the selector and resolves the
/// replay task.
fn select_champion(
    checkpoint: &Path,
    selector: &str,
    task: &str,
) -> Result<(ChampionRecord, TaskId), AppError> {
    let set = TaskSet::parse_label(selector)
        .ok_or_else(|| AppError::Usage(format!("invalid champion selector `{selector}`")))?;
    let task =
        TaskId::parse(task).ok_or_else(|| AppError::Usage(format!("unknown task `{task}`")))?;
    let engine = Checkpoint::load(checkpoint)?;
    let record = engine
        .archive
        .iter()
        .rev()
        .find(|r| r.set == set)
        .cloned()
        .ok_or_else(|| {
            AppError::Data(format!(
                "no archived champion for task set [{}]; the run may predate its first test interval",
                set.label()
            ))
        })?;
    Ok((record, task))
}

fn replay_champion(
    record: &ChampionRecord,
    task: TaskId,
    episodes: u64,
    seed: u64,
) -> Vec<ReplayTrace> {
    let pop: Population = record.snapshot.instantiate();
    let reach = pop.collect_reachable(record.root);
    let mut banks = EvalBanks::for_banks(reach.banks, false);
    (0..episodes)
        .map(|ep| {
            let mut stream = rng::derive(seed, &[4, record.set.0 as u64, task.index() as u64, ep]);
            trace::record_episode(&pop, record.root, task, &mut banks, &mut stream, ep)
        })
        .collect()
}

fn write_analyses(out: &Path, task: TaskId, traces: &[ReplayTrace]) -> Result<(), AppError> {
    let idx = task.index();
    let mut complexity =
        csv::Writer::from_path(out.join(format!("runtime-complexity-task{idx}.csv")))?;
    complexity.write_record([
        "episode",
        "t",
        "teams_visited",
        "programs_executed",
        "instructions_executed",
    ])?;
    let mut window = csv::Writer::from_path(out.join(format!("memory-window-task{idx}.csv")))?;
    window.write_record(["episode", "t", "width"])?;
    for trace in traces {
        for row in analysis::runtime_complexity(trace) {
            complexity.write_record([
                trace.episode.to_string(),
                row.t.to_string(),
                row.teams_visited.to_string(),
                row.programs_executed.to_string(),
                row.instructions_executed.to_string(),
            ])?;
        }
        for row in analysis::memory_window(trace) {
            window.write_record([
                trace.episode.to_string(),
                row.t.to_string(),
                row.width.to_string(),
            ])?;
        }
    }
    complexity.flush()?;
    window.flush()?;

    let mut corr =
        csv::Writer::from_path(out.join(format!("velocity-correlation-task{idx}.csv")))?;
    corr.write_record(["hidden_var", "bank", "slot", "r", "best"])?;
    match analysis::velocity_correlation(traces) {
        Ok(per_var) => {
            for var in &per_var {
                for slot in &var.slots {
                    let best = slot.bank == var.best.bank && slot.slot == var.best.slot;
                    corr.write_record([
                        var.hidden_var.to_string(),
                        slot.bank.to_string(),
                        slot.slot.to_string(),
                        slot.r.to_string(),
                        best.to_string(),
                    ])?;
                }
            }
        }
        Err(e) => return Err(AppError::Data(e.to_string())),
    }
    corr.flush()?;

    let mut decomp = csv::Writer::from_path(out.join(format!("decomposition-task{idx}.csv")))?;
    decomp.write_record(["episode", "t", "s0", "hidden_v0", "team", "a_d", "a_c"])?;
    for row in analysis::task_decomposition(traces) {
        decomp.write_record([
            row.episode.to_string(),
            row.t.to_string(),
            row.s0.to_string(),
            row.hidden_v0.to_string(),
            row.team.to_string(),
            row.a_d.to_string(),
            row.a_c.to_string(),
        ])?;
    }
    decomp.flush()?;
    Ok(())
}

/// Mean reward of a policy drawing uniform discrete and continuous actions.
fn random_baseline(task: TaskId, episodes: u64, seed: u64) -> f64 {
    let mut total = 0.0;
    for ep in 0..episodes {
        let mut env_stream = rng::derive(seed, &[5, task.index() as u64, ep, 0]);
        let mut policy_stream = rng::derive(seed, &[5, task.index() as u64, ep, 1]);
        let mut agent = |_obs| -> Result<ActionPair, std::convert::Infallible> {
            Ok(ActionPair {
                a_d: policy_stream.gen_range(0..3),
                a_c: policy_stream.gen_range(-1.0..1.0),
            })
        };
        total += env::run_episode(task, &mut agent, &mut env_stream, None)
            .expect("random policy never fails");
    }
    total / episodes as f64
}
