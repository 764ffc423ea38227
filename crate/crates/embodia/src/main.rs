use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use embodia::config::{BackendKind, RunConfig};
use embodia::harness::{run_trials, RunOptions};
use embodia::{report, rundir};
use embodia_core::orchestrator::Mode;
use embodia_core::world::{SceneConfig, World};

#[derive(Parser)]
#[command(name = "embodia", version, about = "Embodied task agent harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Copy, Clone, ValueEnum)]
enum ModeArg {
    Agent,
    Vanilla,
    Hier,
    HierHitl,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Agent => Mode::Agent,
            ModeArg::Vanilla => Mode::Vanilla,
            ModeArg::Hier => Mode::Hier,
            ModeArg::HierHitl => Mode::HierHitl,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum BackendArg {
    Scripted,
    Remote,
}

#[derive(Copy, Clone, ValueEnum)]
enum Emit {
    Csv,
    Md,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run trials of one mode.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, value_enum)]
        backend: Option<BackendArg>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<u32>,
        #[arg(long)]
        out: PathBuf,
        /// Serve the operator gateway on ADDR while running.
        #[arg(long, value_name = "ADDR")]
        serve: Option<String>,
        #[arg(long)]
        sync: bool,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Compare modes over run directories.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "md")]
        emit: Emit,
    },
    /// Re-simulate an event log.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        until: Option<u64>,
        /// Scene file; defaults to scene.json next to the log.
        #[arg(long)]
        scene: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::Run {
            config,
            mode,
            backend,
            seed,
            trials,
            out,
            serve,
            sync,
            jobs,
        } => {
            let cfg = match RunConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let opts = RunOptions {
                mode: mode.into(),
                backend: backend.map(|b| match b {
                    BackendArg::Scripted => BackendKind::Scripted,
                    BackendArg::Remote => BackendKind::Remote,
                }),
                seed,
                trials,
                out,
                serve,
                sync,
                jobs,
            };
            match run_trials(&cfg, &opts) {
                Ok(records) => {
                    for r in records {
                        println!(
                            "{} stages {}/{} steps {} auc {:.4}",
                            r.dir.display(),
                            r.result.stages_done,
                            r.result.stages_total,
                            r.result.steps_used,
                            r.result.auc_progress
                        );
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Cmd::Report { input, emit } => match report::collect(&input) {
            Ok(rows) => {
                print!(
                    "{}",
                    match emit {
                        Emit::Csv => report::render_csv(&rows),
                        Emit::Md => report::render_md(&rows),
                    }
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
        Cmd::Replay { log, until, scene } => {
            let scene_path = scene.unwrap_or_else(|| log.with_file_name(rundir::SCENE));
            let loaded = rundir::read_json::<SceneConfig>(&scene_path)
                .map_err(|e| e.to_string())
                .and_then(|s| World::new(s).map_err(|e| format!("{}: {e}", scene_path.display())))
                .and_then(|w| rundir::load_events(&log).map(|r| (w, r)).map_err(|e| e.to_string()));
            let (world, records) = match loaded {
                Ok(x) => x,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            match embodia_core::replay::replay(&world, &records, until) {
                Ok(r) => {
                    println!(
                        "replayed {} records, {} frames, {} restores, {} mismatches",
                        r.records, r.frames, r.restores, r.mismatches
                    );
                    ExitCode::SUCCESS
                }
                Err(m) => {
                    eprintln!("error: {m}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
