//! Trial runner behind `embodia run`.

use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use embodia_core::backend::{Backend, ScriptedBackend};
use embodia_core::events::{Clock, EventSink, LogicalClock, NullSink};
use embodia_core::orchestrator::{
    run_task, HumanChannel, LatencySchedule, Mode, Operator, RunAborted, RunEnv, RunOutput, RunResult,
    ScriptedHuman, ScriptedOperator,
};
use embodia_core::vla::{Controller, ScriptedVla};
use serde::{Deserialize, Serialize};

use crate::config::{BackendKind, ConfigError, Resolved, RunConfig};
use crate::gateway::{Gateway, GatewayHuman, GatewayOperator, GatewaySink, RunInfo};
use crate::remote_backend::RemoteBackend;
use crate::remote_controller::RemoteController;
use crate::rundir;
use crate::server::HttpServer;

/// Milliseconds since the Unix epoch.
#[derive(Copy, Clone, Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self, _elapsed: u64) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64)
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub mode: Mode,
    /// Overrides `backend.kind`.
    pub backend: Option<BackendKind>,
    /// Override the config's `seed` and `trials`.
    pub seed: Option<u64>,
    pub trials: Option<u32>,
    pub out: PathBuf,
    pub serve: Option<String>,
    /// Zero latency and logical wall time, for byte-identical logs.
    pub sync: bool,
    pub jobs: usize,
}

impl RunOptions {
    pub fn new(mode: Mode, out: impl Into<PathBuf>) -> Self {
        RunOptions {
            mode,
            backend: None,
            seed: None,
            trials: None,
            out: out.into(),
            serve: None,
            sync: false,
            jobs: 1,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("backend unreachable: {0}")]
    Unreachable(String),
    #[error("trial {dir} aborted: {reason}")]
    Aborted { dir: PathBuf, reason: String },
    #[error("{0}")]
    Io(#[from] io::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Unreachable(_) | HarnessError::Aborted { .. } => 3,
            HarnessError::Io(_) => 1,
        }
    }
}

/// One row of `aggregate.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub task: String,
    pub mode: Mode,
    pub trial: u32,
    pub seed: u64,
    pub stages_done: usize,
    pub steps_used: u64,
    pub auc_progress: f64,
}

pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()
}

pub fn read_aggregate(path: &Path) -> Result<Vec<AggregateRow>, csv::Error> {
    csv::Reader::from_path(path)?.deserialize().collect()
}

#[derive(Clone, Debug)]
pub struct TrialRecord {
    pub trial: u32,
    pub dir: PathBuf,
    pub result: RunResult,
}

struct Shared<'a> {
    cfg: &'a RunConfig,
    resolved: &'a Resolved,
    opts: &'a RunOptions,
    remote: Option<RemoteBackend>,
    gateway: Option<Arc<Gateway>>,
}

/// Where a trial's model backend, operator and events go.
#[derive(Clone, Copy, Default)]
pub struct Wiring<'a> {
    /// Remote model backend; the scripted one otherwise.
    pub remote: Option<&'a RemoteBackend>,
    pub gateway: Option<&'a Arc<Gateway>>,
}

/// One trial in memory. The outer error is a setup failure, the inner one
/// a run the orchestrator aborted.
pub fn run_one(
    cfg: &RunConfig,
    resolved: &Resolved,
    mode: Mode,
    seed: u64,
    sync: bool,
    wiring: Wiring<'_>,
) -> Result<Result<RunOutput, RunAborted>, HarnessError> {
    let world = resolved.world.clone();
    let initial = world.reset(seed);

    let scripted;
    let backend: &dyn Backend = match wiring.remote {
        Some(r) => r,
        None => {
            scripted = ScriptedBackend::new(
                seed,
                cfg.scene.clone(),
                cfg.backend.error_mode_config(),
                cfg.nutrients.clone(),
                cfg.orchestrator.monitor.h,
            );
            &scripted
        }
    };

    let timeout = Duration::from_millis(cfg.backend.timeout_ms);
    let mut local;
    let mut remote_ctl;
    let controller: &mut dyn Controller = match &cfg.backend.controller {
        Some(addr) => {
            remote_ctl = RemoteController::connect(addr, timeout)
                .map_err(|e| HarnessError::Unreachable(format!("controller {addr}: {e}")))?;
            &mut remote_ctl
        }
        None => {
            local = ScriptedVla::new(cfg.skills.clone(), resolved.proficiency.clone(), seed, cfg.vla.step_cap);
            &mut local
        }
    };

    let mut scripted_op = ScriptedOperator::new(&cfg.orchestrator);
    let mut scripted_human = ScriptedHuman::new(cfg.human.answers.clone(), cfg.human.default_answer.clone());
    let mut null_sink = NullSink;
    let (mut gw_human, mut gw_op, mut gw_sink);
    let (human, operator, sink): (&mut dyn HumanChannel, &mut dyn Operator, &mut dyn EventSink) =
        match wiring.gateway {
            Some(gw) => {
                gw.begin_run(RunInfo {
                    task: cfg.task.text.clone(),
                    mode,
                    seed,
                    stages_total: cfg.task.stages.len(),
                });
                gw_human = GatewayHuman {
                    gateway: gw.clone(),
                    timeout: Duration::from_millis(cfg.human.timeout_ms),
                };
                gw_op = GatewayOperator {
                    gateway: gw.clone(),
                    inner: &mut scripted_op,
                };
                gw_sink = GatewaySink(gw.clone());
                (&mut gw_human, &mut gw_op, &mut gw_sink)
            }
            None => (&mut scripted_human, &mut scripted_op, &mut null_sink),
        };

    let (clock, latency): (&dyn Clock, LatencySchedule) = if sync {
        (&LogicalClock, LatencySchedule::Sync)
    } else {
        (&SystemClock, cfg.latency.clone())
    };

    let env = RunEnv {
        world,
        initial,
        registry: cfg.skills.clone(),
        nutrients: cfg.nutrients.clone(),
        controller,
        backend,
        human,
        operator,
        sink,
        clock,
        latency,
    };
    let outcome = run_task(&cfg.task, mode, &cfg.orchestrator, seed, env);
    if let Some(gw) = wiring.gateway {
        gw.finish_run();
    }
    Ok(outcome)
}

fn run_trial(sh: &Shared<'_>, trial: u32, seed: u64) -> Result<TrialRecord, HarnessError> {
    let cfg = sh.cfg;
    let dir = sh
        .opts
        .out
        .join(rundir::trial_dir_name(&cfg.task.text, sh.opts.mode, trial, seed));
    let wiring = Wiring {
        remote: sh.remote.as_ref(),
        gateway: sh.gateway.as_ref(),
    };
    let (out, aborted) = match run_one(cfg, sh.resolved, sh.opts.mode, seed, sh.opts.sync, wiring)? {
        Ok(out) => (out, None),
        Err(a) => (*a.output, Some(a.reason)),
    };
    rundir::write_run(&dir, &out, &cfg.scene)?;
    if let Some(reason) = aborted {
        return Err(HarnessError::Aborted { dir, reason });
    }
    Ok(TrialRecord {
        trial,
        dir,
        result: out.result,
    })
}

/// Run every trial and write the run directories plus `aggregate.csv`.
pub fn run_trials(cfg: &RunConfig, opts: &RunOptions) -> Result<Vec<TrialRecord>, HarnessError> {
    let mut cfg = cfg.clone();
    if let Some(kind) = opts.backend {
        cfg.backend.kind = kind;
    }
    let resolved = cfg.resolve()?;
    let remote = match cfg.backend.kind {
        BackendKind::Scripted => None,
        BackendKind::Remote => {
            let endpoint = cfg.backend.endpoint.as_deref().ok_or_else(|| ConfigError {
                file: "<config>".into(),
                line: 1,
                column: 1,
                message: "remote backend needs `backend.endpoint`".into(),
            })?;
            Some(RemoteBackend::new(endpoint, Duration::from_millis(cfg.backend.timeout_ms)))
        }
    };
    std::fs::create_dir_all(&opts.out)?;

    let gateway = opts.serve.as_ref().map(|_| Gateway::new());
    let _server = match (&opts.serve, &gateway) {
        (Some(addr), Some(gw)) => Some(HttpServer::spawn(addr, crate::gateway::router(gw.clone()))?),
        _ => None,
    };

    let seed0 = opts.seed.unwrap_or(cfg.seed);
    let trials = opts.trials.unwrap_or(cfg.trials);
    let shared = Shared {
        cfg: &cfg,
        resolved: &resolved,
        opts,
        remote,
        gateway,
    };
    // One live view at a time: a gateway forces sequential trials.
    let jobs = if shared.gateway.is_some() { 1 } else { opts.jobs.max(1) };
    let slots: Mutex<Vec<Option<Result<TrialRecord, HarnessError>>>> =
        Mutex::new((0..trials).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..jobs.min(trials as usize) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= trials as usize {
                    break;
                }
                let r = run_trial(&shared, i as u32 + 1, seed0 + i as u64);
                let failed = r.is_err();
                slots.lock().unwrap()[i] = Some(r);
                if failed {
                    next.fetch_add(trials as usize, Ordering::SeqCst);
                }
            });
        }
    });

    let mut records = Vec::new();
    let mut first_err = None;
    for slot in slots.into_inner().unwrap().into_iter().flatten() {
        match slot {
            Ok(r) => records.push(r),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let rows: Vec<AggregateRow> = records
        .iter()
        .map(|r| AggregateRow {
            task: r.result.task.clone(),
            mode: r.result.mode,
            trial: r.trial,
            seed: r.result.seed,
            stages_done: r.result.stages_done,
            steps_used: r.result.steps_used,
            auc_progress: r.result.auc_progress,
        })
        .collect();
    write_aggregate(&opts.out.join(rundir::AGGREGATE), &rows)?;
    match first_err {
        Some(e) => Err(e),
        None => Ok(records),
    }
}
