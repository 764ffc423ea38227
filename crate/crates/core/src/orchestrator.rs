//! Task runs: the closed-loop agent and the three comparison modes.
//!
//! The world advances one step per loop iteration. In agent mode every
//! `h`-aligned step emits a monitor window; its verdict is applied after a
//! scheduled latency, and each applied non-HINDER verdict queues a
//! reflection that lands at most `reflection_lag` verdicts later.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::backend::{self, Backend, ErrorTag, RoleClient, SummarizePayload};
use crate::events::{
    Answer, ConstraintEvent, Disposition, EpisodeCloseEvent, EpisodeOpenEvent, Event, EventLog,
    EventLogRecord, FrameEvent, PlanEvent, PlanSource, Question, StageEvent, VerdictEvent,
};
use crate::memory::{template_summary, EpisodeId, EpisodeOutcome, EpisodeSummary, MemoryStore, ShortMemoryRecord};
use crate::metrics;
use crate::monitor::{FrameWindow, Monitor, MonitorConfig, MonitorVerdict, ProgressFlag};
use crate::planner::{self, PlanError, PlanInputs, Planner, SubInstruction, TaskRequest};
use crate::reflector::{ConstraintBuffer, Reflector, DEFAULT_BUFFER_CAPACITY, DEFAULT_TAIL_CAP};
use crate::rng::{self, Rng};
use crate::toolbox::{self, EmbodiedHost, ToolCall, ToolError, ToolResult, ToolSpec, ToolStatus, Toolbox};
use crate::vla::{Controller, ControllerError, SessionStatus, SkillRegistry};
use crate::planner::NutrientTable;
use crate::world::{
    eval_predicate, CameraId, CheckpointPredicate, FaultDraw, Frame, PrimitiveAction, SceneState, SnapshotId,
    World, ZoneRegion,
};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Agent,
    Vanilla,
    Hier,
    HierHitl,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Vanilla, Mode::Hier, Mode::HierHitl, Mode::Agent];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Agent => "agent",
            Mode::Vanilla => "vanilla",
            Mode::Hier => "hier",
            Mode::HierHitl => "hier_hitl",
        }
    }

    /// Accepts the command-line spelling `hier-hitl` as well.
    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "agent" => Some(Mode::Agent),
            "vanilla" => Some(Mode::Vanilla),
            "hier" => Some(Mode::Hier),
            "hier_hitl" | "hier-hitl" => Some(Mode::HierHitl),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn d_retries() -> u32 {
    2
}
fn d_episode_cap() -> u64 {
    120
}
fn d_task_cap() -> u64 {
    600
}
fn d_lag() -> usize {
    2
}
fn d_ring() -> usize {
    8
}
fn d_buffer() -> usize {
    DEFAULT_BUFFER_CAPACITY
}
fn d_tail() -> usize {
    DEFAULT_TAIL_CAP
}
fn d_retrieval() -> usize {
    planner::DEFAULT_RETRIEVAL_CAP
}
fn d_poll() -> u64 {
    20
}

/// Loop parameters shared by all modes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    #[serde(default)]
    pub monitor: MonitorConfig,
    /// Backtrack retries per episode before replanning.
    #[serde(default = "d_retries")]
    pub retries: u32,
    /// Steps an episode may run before it closes as TIMEOUT.
    #[serde(default = "d_episode_cap")]
    pub episode_cap: u64,
    /// Steps per task run.
    #[serde(default = "d_task_cap")]
    pub task_cap: u64,
    /// Reflections allowed in flight at once.
    #[serde(default = "d_lag")]
    pub reflection_lag: usize,
    #[serde(default = "d_ring")]
    pub snapshot_ring: usize,
    #[serde(default = "d_buffer")]
    pub buffer_capacity: usize,
    #[serde(default = "d_tail")]
    pub tail_cap: usize,
    #[serde(default = "d_retrieval")]
    pub retrieval_cap: usize,
    /// How often the scripted operator looks at the scene.
    #[serde(default = "d_poll")]
    pub operator_poll: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            monitor: MonitorConfig::default(),
            retries: d_retries(),
            episode_cap: d_episode_cap(),
            task_cap: d_task_cap(),
            reflection_lag: d_lag(),
            snapshot_ring: d_ring(),
            buffer_capacity: d_buffer(),
            tail_cap: d_tail(),
            retrieval_cap: d_retrieval(),
            operator_poll: d_poll(),
        }
    }
}

/// Delay, in world steps, between emitting a window (or queueing a
/// reflection) and its result being available.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatencySchedule {
    Sync,
    Fixed { verdict: u64, reflect: u64 },
    Seeded { seed: u64, max_verdict: u64, max_reflect: u64 },
    /// Explicit per-call delays; past the end of a list the delay is 0.
    Table {
        #[serde(default)]
        verdict: Vec<u64>,
        #[serde(default)]
        reflect: Vec<u64>,
    },
}

impl LatencySchedule {
    pub fn verdict_delay(&self, n: u64) -> u64 {
        match self {
            LatencySchedule::Sync => 0,
            LatencySchedule::Fixed { verdict, .. } => *verdict,
            LatencySchedule::Seeded { seed, max_verdict, .. } => {
                rng::stream(*seed, "latency", n).random_range(0..=*max_verdict)
            }
            LatencySchedule::Table { verdict, .. } => verdict.get(n as usize).copied().unwrap_or(0),
        }
    }

    pub fn reflect_delay(&self, n: u64) -> u64 {
        match self {
            LatencySchedule::Sync => 0,
            LatencySchedule::Fixed { reflect, .. } => *reflect,
            LatencySchedule::Seeded { seed, max_reflect, .. } => {
                rng::stream(*seed, "reflect-latency", n).random_range(0..=*max_reflect)
            }
            LatencySchedule::Table { reflect, .. } => reflect.get(n as usize).copied().unwrap_or(0),
        }
    }
}

/// Where operator questions go. `None` means no answer arrived in time.
pub trait HumanChannel {
    fn ask(&mut self, question: &Question) -> Option<String>;
}

/// Answers from a fixed list, then a default.
#[derive(Clone, Debug)]
pub struct ScriptedHuman {
    answers: VecDeque<String>,
    default: Option<String>,
    pub asked: Vec<Question>,
}

impl ScriptedHuman {
    pub const DEFAULT_ANSWER: &'static str = "try again more carefully";

    pub fn new(answers: impl IntoIterator<Item = String>, default: Option<String>) -> Self {
        ScriptedHuman {
            answers: answers.into_iter().collect(),
            default,
            asked: Vec::new(),
        }
    }
}

impl Default for ScriptedHuman {
    fn default() -> Self {
        ScriptedHuman::new([], Some(ScriptedHuman::DEFAULT_ANSWER.into()))
    }
}

impl HumanChannel for ScriptedHuman {
    fn ask(&mut self, question: &Question) -> Option<String> {
        self.asked.push(question.clone());
        self.answers.pop_front().or_else(|| self.default.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "command", content = "text", rename_all = "snake_case")]
pub enum OperatorCommand {
    /// Move on to the next list entry.
    Advance,
    /// Ask for a fresh list from what is visibly done.
    Regenerate,
    /// Free text handed to the planner.
    Hint(String),
}

impl OperatorCommand {
    /// `advance` and `regenerate` are commands; anything else is a hint.
    pub fn from_prompt(text: &str) -> OperatorCommand {
        match text.trim().to_ascii_lowercase().as_str() {
            "advance" | "next" => OperatorCommand::Advance,
            "regenerate" | "replan" => OperatorCommand::Regenerate,
            _ => OperatorCommand::Hint(text.trim().to_string()),
        }
    }
}

pub struct OperatorView<'a> {
    pub elapsed: u64,
    pub mode: Mode,
    pub frame: &'a Frame,
    /// The list entry in progress (supervised mode), `None` when exhausted.
    pub current: Option<&'a SubInstruction>,
    pub stages_done: usize,
    pub stages_total: usize,
    /// Elapsed step of the last stage latch or list regeneration.
    pub last_progress: u64,
}

/// Polled once per world step.
pub trait Operator {
    fn poll(&mut self, view: &OperatorView<'_>) -> Vec<OperatorCommand>;
}

/// Supervises the hierarchical mode on a fixed cadence: advances once the
/// current entry is visibly met, regenerates when the list runs out with
/// stages left or nothing has latched for `stall` steps. Silent otherwise.
#[derive(Clone, Debug)]
pub struct ScriptedOperator {
    pub poll_every: u64,
    pub stall: u64,
}

impl ScriptedOperator {
    pub fn new(cfg: &AgentConfig) -> Self {
        ScriptedOperator {
            poll_every: cfg.operator_poll,
            stall: 2 * cfg.episode_cap,
        }
    }
}

pub fn visibly_met(frame: &Frame, instr: &SubInstruction) -> bool {
    instr.skill().is_some_and(|s| {
        frame
            .visible_objects
            .iter()
            .any(|o| o.kind == s.kind && o.zone == s.zone)
    })
}

impl Operator for ScriptedOperator {
    fn poll(&mut self, view: &OperatorView<'_>) -> Vec<OperatorCommand> {
        if view.mode != Mode::HierHitl || view.elapsed == 0 || !view.elapsed.is_multiple_of(self.poll_every) {
            return Vec::new();
        }
        match view.current {
            Some(cur) if visibly_met(view.frame, cur) => alloc::vec![OperatorCommand::Advance],
            Some(_) if view.elapsed - view.last_progress >= self.stall => {
                alloc::vec![OperatorCommand::Regenerate]
            }
            Some(_) => Vec::new(),
            None if view.stages_done < view.stages_total => alloc::vec![OperatorCommand::Regenerate],
            None => Vec::new(),
        }
    }
}

/// Never says anything.
#[derive(Copy, Clone, Debug, Default)]
pub struct SilentOperator;

impl Operator for SilentOperator {
    fn poll(&mut self, _view: &OperatorView<'_>) -> Vec<OperatorCommand> {
        Vec::new()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub task: String,
    pub mode: Mode,
    pub seed: u64,
    pub stages_total: usize,
    pub stages_done: usize,
    pub steps_used: u64,
    pub auc_progress: f64,
    pub stale_discards: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub windows: u64,
    pub verdicts_applied: u64,
    /// Applied verdicts that disagreed with ground truth, by error mode.
    pub monitor_errors: BTreeMap<String, u64>,
    pub constraints: u64,
    pub backtracks: u64,
    pub questions: u64,
    pub max_reflection_lag: usize,
}

pub struct RunOutput {
    pub result: RunResult,
    pub stats: RunStats,
    pub events: Vec<EventLogRecord>,
    pub memory: MemoryStore,
    pub constraints: ConstraintBuffer,
    pub final_state: SceneState,
    pub tools: Vec<ToolSpec>,
}

/// A run that could not continue. `output` holds everything up to the
/// failure, with episodes closed.
pub struct RunAborted {
    pub reason: String,
    pub output: Box<RunOutput>,
}

impl fmt::Debug for RunAborted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RunAborted").field("reason", &self.reason).finish()
    }
}

impl fmt::Display for RunAborted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "run aborted: {}", self.reason)
    }
}

impl core::error::Error for RunAborted {}

/// Everything a run needs besides the task and its parameters.
pub struct RunEnv<'a> {
    pub world: World,
    pub initial: SceneState,
    pub registry: SkillRegistry,
    pub nutrients: NutrientTable,
    pub controller: &'a mut dyn Controller,
    pub backend: &'a dyn Backend,
    pub human: &'a mut dyn HumanChannel,
    pub operator: &'a mut dyn Operator,
    pub sink: &'a mut dyn crate::events::EventSink,
    pub clock: &'a dyn crate::events::Clock,
    pub latency: LatencySchedule,
}

struct EpisodeState {
    id: EpisodeId,
    instruction: SubInstruction,
    opened: u64,
    retries: u32,
}

struct Snap {
    id: SnapshotId,
    step_index: u64,
}

struct PendingVerdict {
    deliver_at: u64,
    order: u64,
    emitted: u64,
    episode_id: EpisodeId,
    instruction: SubInstruction,
    window: FrameWindow,
    verdict: MonitorVerdict,
    ground_truth: ProgressFlag,
    backend_error: Option<String>,
}

struct PendingReflection {
    deliver_at: u64,
    episode_id: EpisodeId,
    seq: u32,
    ground_truth: ProgressFlag,
}

struct Runtime<'a> {
    task: &'a TaskRequest,
    cfg: &'a AgentConfig,
    mode: Mode,
    world: World,
    regions: Vec<ZoneRegion>,
    state: SceneState,
    controller: &'a mut dyn Controller,
    client: RoleClient<'a>,
    planner: Planner,
    monitor: Monitor,
    reflector: Reflector,
    buffer: ConstraintBuffer,
    memory: MemoryStore,
    log: EventLog<'a>,
    human: &'a mut dyn HumanChannel,
    operator: &'a mut dyn Operator,
    latency: LatencySchedule,
    tool_specs: Vec<ToolSpec>,

    elapsed: u64,
    generation: u32,
    tops: VecDeque<Frame>,
    latched: Vec<Option<u64>>,
    last_progress: u64,
    snapshots: VecDeque<Snap>,
    episode: Option<EpisodeState>,
    next_episode: EpisodeId,
    completed: Vec<SubInstruction>,
    issued: Vec<SubInstruction>,
    hints: Vec<String>,
    verdicts: Vec<PendingVerdict>,
    reflections: VecDeque<PendingReflection>,
    last_applied: Option<(u32, u64)>,
    stale_discards: u64,
    reflect_count: u64,
    next_call: u32,
    next_question: u32,
    abort: Option<String>,
    stats: RunStats,
}

impl<'a> Runtime<'a> {
    fn render(&self, camera: CameraId) -> Frame {
        self.world.render(&self.state, camera)
    }

    fn alive(&self) -> bool {
        self.abort.is_none() && !self.all_latched() && self.elapsed < self.cfg.task_cap
    }

    fn all_latched(&self) -> bool {
        self.latched.iter().all(Option::is_some)
    }

    fn stages_done(&self) -> usize {
        self.latched.iter().filter(|l| l.is_some()).count()
    }

    fn emit(&mut self, event: Event) {
        self.log.emit(self.elapsed, event);
    }

    fn checkpoint_met(&self, instr: &SubInstruction) -> bool {
        instr.skill().is_some_and(|s| {
            eval_predicate(&self.state, &CheckpointPredicate::on(s.zone, s.kind)).unwrap_or(false)
        })
    }

    fn push_top(&mut self, frame: Frame) {
        let keep = (2 * self.cfg.monitor.h + 1) as usize;
        self.tops.push_back(frame);
        while self.tops.len() > keep {
            self.tops.pop_front();
        }
    }

    fn log_initial(&mut self) {
        let top = self.render(CameraId::Top);
        self.push_top(top.clone());
        self.emit(Event::Frame(FrameEvent {
            elapsed: 0,
            generation: 0,
            episode_id: None,
            action: None,
            noise: FaultDraw::Clean,
            outcome: None,
            frame: top,
            state: Some(self.state.clone()),
        }));
        self.latch();
    }

    fn latch(&mut self) {
        for (i, stage) in self.task.stages.iter().enumerate() {
            if self.latched[i].is_some() {
                continue;
            }
            if eval_predicate(&self.state, &stage.predicate).unwrap_or(false) {
                self.latched[i] = Some(self.elapsed);
                self.last_progress = self.elapsed;
                let ev = StageEvent {
                    stage_id: stage.id.clone(),
                    elapsed: self.elapsed,
                    step_index: self.state.step_index,
                };
                self.emit(Event::StageComplete(ev));
            }
        }
    }

    fn step_world(&mut self) {
        let mut action = PrimitiveAction::Noop;
        let mut noise = FaultDraw::Clean;
        if self.controller.status() == SessionStatus::Running {
            match self.controller.step() {
                Ok(s) => {
                    action = s.action;
                    noise = s.noise;
                }
                Err(ControllerError::NotRunning) => {}
                Err(e) => self.abort = Some(format!("controller: {e}")),
            }
        }
        let (next, outcome) = self.world.apply_primitive(&self.state, &action, noise);
        self.state = next;
        self.elapsed += 1;
        let top = self.render(CameraId::Top);
        self.push_top(top.clone());
        let episode_id = self.episode.as_ref().map(|e| e.id);
        self.emit(Event::Frame(FrameEvent {
            elapsed: self.elapsed,
            generation: self.generation,
            episode_id,
            action: Some(action),
            noise,
            outcome: Some(outcome),
            frame: top,
            state: None,
        }));
        self.latch();
    }

    fn take_snapshot(&mut self) {
        let step = self.state.step_index;
        if self.snapshots.back().is_some_and(|s| s.step_index == step) {
            return;
        }
        let id = self.world.snapshot(&self.state);
        self.snapshots.push_back(Snap { id, step_index: step });
        while self.snapshots.len() > self.cfg.snapshot_ring {
            if let Some(old) = self.snapshots.pop_front() {
                self.world.discard(old.id);
            }
        }
    }

    /// 1-based depth of the newest snapshot at or before `step`.
    fn snapshot_depth(&self, step: u64) -> Option<usize> {
        self.snapshots
            .iter()
            .rev()
            .position(|s| s.step_index <= step)
            .map(|p| p + 1)
    }

    fn snapshot_state_at(&self, step: u64) -> Option<SceneState> {
        let s = self.snapshots.iter().find(|s| s.step_index == step)?;
        self.world.restore(s.id).ok()
    }

    fn restart_monitor(&mut self) {
        self.monitor.reset();
        let frame = self.render(self.cfg.monitor.camera);
        let _ = self.monitor.push_frame(frame);
    }

    fn plan_event(&mut self, ev: PlanEvent) {
        self.emit(Event::Plan(ev));
    }

    // ---- episodes ----

    fn open_episode(&mut self, instr: SubInstruction, issue: bool) -> bool {
        let id = self.next_episode;
        self.next_episode += 1;
        let top = self.render(CameraId::Top);
        if self.memory.open_episode(id, instr.clone(), top).is_err() {
            self.abort = Some(format!("episode {id} opened twice"));
            return false;
        }
        self.emit(Event::EpisodeOpen(EpisodeOpenEvent {
            episode_id: id,
            instruction: instr.clone(),
            elapsed: self.elapsed,
            step_index: self.state.step_index,
        }));
        self.issued.push(instr.clone());
        self.episode = Some(EpisodeState {
            id,
            instruction: instr.clone(),
            opened: self.elapsed,
            retries: 0,
        });
        self.restart_monitor();
        self.take_snapshot();
        if issue {
            if let Err(e) = self.controller.issue(&instr, &self.world, &self.state) {
                let mut ev = PlanEvent::new(self.elapsed, PlanSource::Planner);
                ev.instruction = Some(instr);
                ev.reason = Some(e.to_string());
                self.plan_event(ev);
                let transport = matches!(e, ControllerError::Transport(_));
                self.close_episode(EpisodeOutcome::Failed);
                if transport {
                    self.abort = Some(format!("controller: {e}"));
                }
                return false;
            }
        }
        true
    }

    fn close_episode(&mut self, outcome: EpisodeOutcome) {
        let Some(ep) = self.episode.take() else {
            return;
        };
        while let Some(job) = self.reflections.pop_front() {
            self.complete_reflection(job);
        }
        self.controller.abort();
        let close_frame = self.render(CameraId::Top);
        let step = self.state.step_index;
        let client = &mut self.client;
        let res = self.memory.close_episode(ep.id, outcome, close_frame, &mut |recs, out| {
            let payload = SummarizePayload {
                short_memory: recs.to_vec(),
                outcome: out,
            };
            match client.summarize(payload, step) {
                Ok(r) => EpisodeSummary {
                    summary: r.summary,
                    failure_count: r.failure_count,
                },
                Err(_) => template_summary(recs, out),
            }
        });
        match res {
            Ok(record) => self.emit(Event::EpisodeClose(EpisodeCloseEvent {
                episode_id: ep.id,
                outcome,
                elapsed: self.elapsed,
                record,
            })),
            Err(e) => self.abort = Some(format!("memory: {e}")),
        }
        if self.checkpoint_met(&ep.instruction) {
            planner::mark_completed(&mut self.completed, &ep.instruction);
        }
    }

    /// One planner query, escalating a twice-rejected answer to the
    /// operator before a final attempt. Opens an episode for the result.
    fn plan_and_open(&mut self) -> Option<SubInstruction> {
        if !self.alive() {
            return None;
        }
        let mut escalated = false;
        loop {
            let frame = self.render(CameraId::Top);
            let ctx = self.planner.context(self.task, frame, &self.completed, self.memory.long());
            let inputs = PlanInputs {
                task: self.task,
                ctx: &ctx,
                hints: &self.hints,
                tools: &self.tool_specs,
                step_index: self.state.step_index,
            };
            let res = self.planner.next_instruction(&mut self.client, &inputs);
            let mut ev = PlanEvent::new(self.elapsed, PlanSource::Planner);
            ev.hints = self.hints.clone();
            match res {
                Ok(attempt) => {
                    ev.rejected = attempt.rejected;
                    ev.instruction = attempt.next.clone();
                    ev.terminal = attempt.next.is_none();
                    self.plan_event(ev);
                    let instr = attempt.next?;
                    return self.open_episode(instr.clone(), true).then_some(instr);
                }
                Err((PlanError::Rejected(r), _)) => {
                    ev.rejected = r.clone();
                    ev.reason = Some("no registered skill matched".into());
                    ev.terminal = escalated;
                    self.plan_event(ev);
                    if escalated {
                        return None;
                    }
                    escalated = true;
                    let q = format!(
                        "The planner keeps proposing unsupported steps ({}). What should I do next?",
                        r.join("; ")
                    );
                    let _ = self.ask(&q);
                }
                Err((PlanError::Backend(e), _)) => {
                    ev.reason = Some(e.to_string());
                    self.plan_event(ev);
                    self.abort = Some(format!("plan backend: {e}"));
                    return None;
                }
            }
        }
    }

    fn ask(&mut self, text: &str) -> Option<String> {
        self.next_question += 1;
        let q = Question {
            question_id: format!("q{}", self.next_question),
            text: text.to_string(),
            asked_step: self.elapsed,
        };
        self.stats.questions += 1;
        self.emit(Event::HumanQuestion(q.clone()));
        let answer = self.human.ask(&q);
        self.emit(Event::HumanAnswer(Answer {
            question_id: q.question_id,
            text: answer.clone(),
            timed_out: answer.is_none(),
        }));
        if let Some(a) = &answer {
            self.hints.push(a.clone());
        }
        answer
    }

    fn call_tool(&mut self, tb: &Toolbox<'_, Self>, name: &str, args: Value) -> Result<Value, ToolError> {
        self.next_call += 1;
        let call_id = self.next_call;
        self.emit(Event::ToolCall(ToolCall {
            call_id,
            name: name.to_string(),
            args: args.clone(),
            step_index: self.state.step_index,
        }));
        let res = tb.invoke(self, name, &args);
        let (status, payload) = match &res {
            Ok(v) => (ToolStatus::Ok, v.clone()),
            Err(e) => (ToolStatus::Error, json!({ "error": e.to_string() })),
        };
        self.emit(Event::ToolResult(ToolResult {
            call_id,
            name: name.to_string(),
            status,
            payload,
        }));
        res
    }

    // ---- verdicts and reflections ----

    fn emit_window(&mut self, tb: &Toolbox<'_, Self>, window: FrameWindow) {
        let Some(ep) = &self.episode else {
            return;
        };
        let (episode_id, instruction) = (ep.id, ep.instruction.clone());
        let (verdict, err) =
            self.monitor
                .evaluate(&mut self.client, &window, &instruction, &self.buffer, self.generation);
        let now = self.tops.back().cloned().unwrap_or_else(|| self.render(CameraId::Top));
        let prev = self
            .tops
            .iter()
            .find(|f| f.step_index == window.prev.step_index)
            .cloned()
            .unwrap_or_else(|| window.prev.clone());
        let ground_truth = instruction
            .skill()
            .map_or(ProgressFlag::Ongoing, |s| backend::ground_truth(&prev, &now, s, &self.regions));
        let order = self.stats.windows;
        self.stats.windows += 1;
        let delay = self.latency.verdict_delay(order);
        let pending = PendingVerdict {
            deliver_at: self.elapsed + delay,
            order,
            emitted: self.elapsed,
            episode_id,
            instruction,
            window,
            verdict,
            ground_truth,
            backend_error: err.map(|e| e.to_string()),
        };
        if delay == 0 {
            self.apply_verdict(tb, pending);
        } else {
            self.verdicts.push(pending);
        }
    }

    fn deliver_due(&mut self, tb: &Toolbox<'_, Self>) {
        self.deliver_reflections();
        loop {
            let due = self
                .verdicts
                .iter()
                .enumerate()
                .filter(|(_, p)| p.deliver_at <= self.elapsed)
                .min_by_key(|(_, p)| (p.deliver_at, p.order))
                .map(|(i, _)| i);
            let Some(i) = due else { break };
            let p = self.verdicts.remove(i);
            self.apply_verdict(tb, p);
        }
    }

    fn verdict_event(&mut self, p: &PendingVerdict, disposition: Disposition, verdict: &MonitorVerdict) {
        let error_mode = if disposition == Disposition::Applied {
            backend::classify_error(verdict.flag, p.ground_truth)
        } else {
            None
        };
        self.emit(Event::Verdict(VerdictEvent {
            episode_id: p.episode_id,
            elapsed: self.elapsed,
            emitted: p.emitted,
            window_prev: p.window.prev.step_index,
            verdict: verdict.clone(),
            ground_truth: p.ground_truth,
            error_mode,
            disposition,
            backend_error: p.backend_error.clone(),
        }));
    }

    fn apply_verdict(&mut self, tb: &Toolbox<'_, Self>, p: PendingVerdict) {
        if self.episode.as_ref().map(|e| e.id) != Some(p.episode_id) {
            self.verdict_event(&p, Disposition::ClosedEpisode, &p.verdict);
            return;
        }
        let key = p.verdict.order_key();
        if p.verdict.generation < self.generation || self.last_applied.is_some_and(|l| key <= l) {
            self.stale_discards += 1;
            self.verdict_event(&p, Disposition::Stale, &p.verdict);
            return;
        }
        self.last_applied = Some(key);
        let seq = self.memory.next_seq(p.episode_id);
        let record = ShortMemoryRecord {
            episode_id: p.episode_id,
            seq,
            frame_now: p.window.now.clone(),
            frame_prev: p.window.prev.clone(),
            instruction: p.instruction.clone(),
            verdict: p.verdict.clone(),
            constraint: None,
        };
        if let Err(e) = self.memory.append_step(p.episode_id, record) {
            self.abort = Some(format!("memory: {e}"));
            return;
        }
        self.stats.verdicts_applied += 1;
        if let Some(tag) = backend::classify_error(p.verdict.flag, p.ground_truth) {
            *self.stats.monitor_errors.entry(tag.as_str().to_string()).or_default() += 1;
        }
        self.verdict_event(&p, Disposition::Applied, &p.verdict);
        if p.verdict.flag != ProgressFlag::Hinder {
            self.enqueue_reflection(p.episode_id, seq, p.ground_truth);
        }
        self.act_on(tb, p.verdict.flag, &p);
    }

    fn act_on(&mut self, tb: &Toolbox<'_, Self>, flag: ProgressFlag, p: &PendingVerdict) {
        match flag {
            ProgressFlag::Ongoing => {}
            ProgressFlag::Done => {
                self.close_episode(EpisodeOutcome::Done);
                self.plan_and_open();
            }
            ProgressFlag::Failure => self.on_failure(tb, p),
            ProgressFlag::Hinder => self.on_hinder(tb, p),
        }
    }

    fn on_failure(&mut self, tb: &Toolbox<'_, Self>, p: &PendingVerdict) {
        let Some(ep) = &self.episode else {
            return;
        };
        if ep.retries >= self.cfg.retries {
            let _ = self.call_tool(tb, "replan", json!({ "reason": "retries exhausted" }));
            return;
        }
        let instruction = ep.instruction.clone();
        let k = self
            .snapshot_depth(p.window.prev.step_index)
            .unwrap_or(self.snapshots.len() + 1);
        match self.call_tool(tb, "backtrack", json!({ "k": k })) {
            Ok(_) => {
                if let Some(ep) = &mut self.episode {
                    ep.retries += 1;
                }
                let mut ev = PlanEvent::new(self.elapsed, PlanSource::Retry);
                ev.retry = true;
                ev.instruction = Some(instruction.clone());
                if let Err(e) = self.controller.issue(&instruction, &self.world, &self.state) {
                    ev.reason = Some(e.to_string());
                    self.plan_event(ev);
                    let _ = self.call_tool(tb, "replan", json!({ "reason": "reissue failed" }));
                } else {
                    self.plan_event(ev);
                }
            }
            Err(e) => {
                let reason = format!("backtrack unavailable: {e}");
                let _ = self.call_tool(tb, "replan", json!({ "reason": reason }));
            }
        }
    }

    fn on_hinder(&mut self, tb: &Toolbox<'_, Self>, p: &PendingVerdict) {
        let Some(ep) = &self.episode else {
            return;
        };
        let instruction = ep.instruction.clone();
        let cams: Vec<CameraId> = CameraId::ALL
            .iter()
            .copied()
            .filter(|c| *c != self.cfg.monitor.camera)
            .collect();
        let mut views = Vec::new();
        for cam in &cams {
            if let Ok(v) = self.call_tool(tb, "query_camera", json!({ "camera_id": cam.as_str() })) {
                if let Ok(f) = serde_json::from_value::<Frame>(v) {
                    views.push(f);
                }
            }
        }
        let target = instruction.target_kind;
        let chosen = views
            .iter()
            .find(|f| target.is_some_and(|k| f.find_kind(k).is_some() || f.held_kind() == Some(k)))
            .or(views.first())
            .cloned();
        let h = self.cfg.monitor.h;
        let second = chosen.and_then(|now| {
            let prev_state = self.snapshot_state_at(now.step_index.checked_sub(h)?)?;
            let prev = self.world.render(&prev_state, now.camera_id);
            Some(FrameWindow { prev, now })
        });
        let flag = match second {
            Some(window) => {
                let v = self.monitor.reevaluate(
                    &mut self.client,
                    &window,
                    &instruction,
                    &self.buffer,
                    self.generation,
                );
                let flag = v.flag;
                let looked = PendingVerdict {
                    deliver_at: self.elapsed,
                    order: p.order,
                    emitted: self.elapsed,
                    episode_id: p.episode_id,
                    instruction: instruction.clone(),
                    window,
                    verdict: v.clone(),
                    ground_truth: p.ground_truth,
                    backend_error: None,
                };
                self.emit(Event::Verdict(VerdictEvent {
                    episode_id: looked.episode_id,
                    elapsed: self.elapsed,
                    emitted: looked.emitted,
                    window_prev: looked.window.prev.step_index,
                    verdict: v,
                    ground_truth: looked.ground_truth,
                    error_mode: None,
                    disposition: Disposition::Reevaluated,
                    backend_error: None,
                }));
                flag
            }
            None => ProgressFlag::Hinder,
        };
        if flag != ProgressFlag::Hinder {
            return self.act_on(tb, flag, p);
        }
        let question = format!(
            "No visible progress on '{}' for {} windows. How should I proceed?",
            instruction.text,
            self.monitor.streak()
        );
        let reason = match self.call_tool(tb, "ask_human", json!({ "question": question })) {
            Ok(v) => format!("operator: {}", v["answer"].as_str().unwrap_or_default()),
            Err(_) => "no operator answer".to_string(),
        };
        let _ = self.call_tool(tb, "replan", json!({ "reason": reason }));
    }

    fn enqueue_reflection(&mut self, episode_id: EpisodeId, seq: u32, ground_truth: ProgressFlag) {
        if self.reflections.len() >= self.cfg.reflection_lag.max(1) {
            if let Some(old) = self.reflections.pop_front() {
                self.complete_reflection(old);
            }
        }
        let delay = self.latency.reflect_delay(self.reflect_count);
        self.reflect_count += 1;
        let floor = self.reflections.back().map_or(0, |r| r.deliver_at);
        self.reflections.push_back(PendingReflection {
            deliver_at: (self.elapsed + delay).max(floor),
            episode_id,
            seq,
            ground_truth,
        });
        self.stats.max_reflection_lag = self.stats.max_reflection_lag.max(self.reflections.len());
        self.deliver_reflections();
    }

    fn deliver_reflections(&mut self) {
        while self.reflections.front().is_some_and(|r| r.deliver_at <= self.elapsed) {
            if let Some(job) = self.reflections.pop_front() {
                self.complete_reflection(job);
            }
        }
    }

    fn complete_reflection(&mut self, job: PendingReflection) {
        let records: Vec<ShortMemoryRecord> = self
            .memory
            .records(job.episode_id)
            .iter()
            .take_while(|r| r.seq <= job.seq)
            .cloned()
            .collect();
        match self.reflector.reflect(&mut self.client, &records, Some(job.ground_truth)) {
            Ok(Some(c)) => {
                if self.buffer.add(c.clone()) {
                    self.stats.constraints += 1;
                    let _ = self.memory.attach_constraint(job.episode_id, job.seq, c.clone());
                    self.emit(Event::Constraint(ConstraintEvent {
                        episode_id: job.episode_id,
                        record_seq: job.seq,
                        elapsed: self.elapsed,
                        constraint: Some(c),
                        error: None,
                    }));
                }
            }
            Ok(None) => {}
            Err(e) => self.emit(Event::Constraint(ConstraintEvent {
                episode_id: job.episode_id,
                record_seq: job.seq,
                elapsed: self.elapsed,
                constraint: None,
                error: Some(e.to_string()),
            })),
        }
    }

    fn poll_operator(&mut self, current: Option<&SubInstruction>) -> Vec<OperatorCommand> {
        let frame = self.tops.back().cloned().unwrap_or_else(|| self.render(CameraId::Top));
        let view = OperatorView {
            elapsed: self.elapsed,
            mode: self.mode,
            frame: &frame,
            current,
            stages_done: self.stages_done(),
            stages_total: self.task.stages.len(),
            last_progress: self.last_progress,
        };
        let cmds = self.operator.poll(&view);
        let mut out = Vec::new();
        for c in cmds {
            let mut ev = PlanEvent::new(self.elapsed, PlanSource::Operator);
            match &c {
                OperatorCommand::Advance => ev.reason = Some("advance".into()),
                OperatorCommand::Regenerate => ev.reason = Some("regenerate".into()),
                OperatorCommand::Hint(h) => {
                    ev.reason = Some("hint".into());
                    ev.hints = alloc::vec![h.clone()];
                    self.hints.push(h.clone());
                }
            }
            self.plan_event(ev);
            if !matches!(c, OperatorCommand::Hint(_)) {
                out.push(c);
            }
        }
        out
    }

    fn finish(&mut self) {
        let pending = core::mem::take(&mut self.verdicts);
        for p in &pending {
            self.verdict_event(p, Disposition::Undelivered, &p.verdict);
        }
        if let Some(ep) = &self.episode {
            let outcome = if self.checkpoint_met(&ep.instruction) {
                EpisodeOutcome::Done
            } else {
                EpisodeOutcome::Timeout
            };
            self.close_episode(outcome);
        }
    }

    // ---- modes ----

    fn run_agent(&mut self, tb: &Toolbox<'_, Self>) {
        self.plan_and_open();
        while self.alive() && self.episode.is_some() {
            self.poll_operator(None);
            self.deliver_due(tb);
            if !self.alive() || self.episode.is_none() {
                break;
            }
            self.step_world();
            if !self.alive() {
                break;
            }
            let frame = self.render(self.cfg.monitor.camera);
            if let Ok(Some(window)) = self.monitor.push_frame(frame) {
                self.emit_window(tb, window);
                self.take_snapshot();
            }
            if let Some(ep) = &self.episode {
                if self.elapsed - ep.opened >= self.cfg.episode_cap {
                    self.close_episode(EpisodeOutcome::Timeout);
                    self.plan_and_open();
                }
            }
        }
    }

    /// Build an instruction list by planning against hypothetical completion.
    fn plan_list(&mut self, source: PlanSource) -> Vec<SubInstruction> {
        let mut hypothetical: Vec<SubInstruction> = match source {
            PlanSource::Upfront => Vec::new(),
            _ => {
                let frame = self.render(CameraId::Top);
                self.issued.iter().filter(|i| visibly_met(&frame, i)).cloned().collect()
            }
        };
        let mut list = Vec::new();
        let mut rejected = Vec::new();
        let bound = self.planner.registry.skills().count() + 1;
        for _ in 0..bound {
            let frame = self.render(CameraId::Top);
            let ctx = self.planner.context(self.task, frame, &hypothetical, self.memory.long());
            let inputs = PlanInputs {
                task: self.task,
                ctx: &ctx,
                hints: &self.hints,
                tools: &self.tool_specs,
                step_index: self.state.step_index,
            };
            match self.planner.next_instruction(&mut self.client, &inputs) {
                Ok(att) => {
                    rejected.extend(att.rejected);
                    match att.next {
                        Some(i) => {
                            planner::mark_completed(&mut hypothetical, &i);
                            list.push(i);
                        }
                        None => break,
                    }
                }
                Err((PlanError::Rejected(r), _)) => {
                    rejected.extend(r);
                    break;
                }
                Err((PlanError::Backend(e), _)) => {
                    self.abort = Some(format!("plan backend: {e}"));
                    break;
                }
            }
        }
        let mut ev = PlanEvent::new(self.elapsed, source);
        ev.list = list.clone();
        ev.rejected = rejected;
        ev.hints = self.hints.clone();
        ev.terminal = list.is_empty();
        if let Some(reason) = &self.abort {
            ev.reason = Some(reason.clone());
        }
        self.plan_event(ev);
        list
    }

    fn run_hier(&mut self) {
        let hitl = self.mode == Mode::HierHitl;
        let mut list = self.plan_list(PlanSource::Upfront);
        let mut idx = 0;
        while self.alive() {
            if idx >= list.len() {
                if !hitl {
                    break;
                }
                let cmds = self.poll_operator(None);
                if cmds.contains(&OperatorCommand::Regenerate) {
                    self.last_progress = self.elapsed;
                    list = self.plan_list(PlanSource::Operator);
                    idx = 0;
                    continue;
                }
                self.step_world();
                continue;
            }
            let entry = list[idx].clone();
            let budget_end = self.elapsed + self.cfg.episode_cap;
            let mut regenerate = false;
            if self.open_episode(entry.clone(), true) {
                while self.alive() && self.elapsed < budget_end {
                    let cmds = self.poll_operator(Some(&entry));
                    if cmds.contains(&OperatorCommand::Regenerate) {
                        regenerate = true;
                        break;
                    }
                    if cmds.contains(&OperatorCommand::Advance) {
                        break;
                    }
                    self.step_world();
                }
                let timed_out = self.controller.session().is_some_and(|s| s.timed_out)
                    || self.controller.status() == SessionStatus::Running;
                let outcome = if self.checkpoint_met(&entry) {
                    EpisodeOutcome::Done
                } else if timed_out {
                    EpisodeOutcome::Timeout
                } else {
                    EpisodeOutcome::Failed
                };
                self.close_episode(outcome);
            }
            if regenerate {
                self.last_progress = self.elapsed;
                list = self.plan_list(PlanSource::Operator);
                idx = 0;
            } else {
                idx += 1;
            }
        }
    }

    fn run_vanilla(&mut self) {
        let raw = SubInstruction::new(self.task.text.clone(), 0);
        let mut ev = PlanEvent::new(self.elapsed, PlanSource::Raw);
        ev.instruction = Some(raw.clone());
        match self.controller.issue(&raw, &self.world, &self.state) {
            Err(e) => {
                ev.reason = Some(e.to_string());
                self.plan_event(ev);
                if let ControllerError::Transport(_) = e {
                    self.abort = Some(format!("controller: {e}"));
                }
            }
            Ok(_) => {
                self.plan_event(ev);
                self.controller.abort();
                if self.open_episode(raw, true) {
                    while self.alive() {
                        self.step_world();
                    }
                }
            }
        }
    }
}

impl EmbodiedHost for Runtime<'_> {
    fn render_camera(&mut self, camera: CameraId) -> Frame {
        self.render(camera)
    }

    fn backtrack(&mut self, k: usize) -> Result<SceneState, ToolError> {
        let available = self.snapshots.len();
        if k == 0 || k > available {
            return Err(ToolError::TooDeep { requested: k, available });
        }
        self.controller.abort();
        let idx = available - k;
        let restored = self
            .world
            .restore(self.snapshots[idx].id)
            .map_err(|e| ToolError::Failed(e.to_string()))?;
        for s in self.snapshots.drain(idx + 1..) {
            self.world.discard(s.id);
        }
        self.state = restored.clone();
        self.generation += 1;
        self.stats.backtracks += 1;
        self.tops.clear();
        let top = self.render(CameraId::Top);
        self.push_top(top);
        self.restart_monitor();
        Ok(restored)
    }

    fn replan(&mut self, _reason: &str) -> Result<Option<SubInstruction>, ToolError> {
        self.close_episode(EpisodeOutcome::Failed);
        let next = self.plan_and_open();
        match &self.abort {
            Some(reason) => Err(ToolError::Failed(reason.clone())),
            None => Ok(next),
        }
    }

    fn ask_human(&mut self, question: &str) -> Result<String, ToolError> {
        self.ask(question).ok_or(ToolError::Timeout)
    }
}

/// Run one task in the given mode.
pub fn run_task(
    task: &TaskRequest,
    mode: Mode,
    cfg: &AgentConfig,
    seed: u64,
    env: RunEnv<'_>,
) -> Result<RunOutput, RunAborted> {
    let tool_specs = toolbox::builtin_specs();
    let mut planner = Planner::new(env.registry, env.nutrients);
    planner.retrieval_cap = cfg.retrieval_cap;
    let regions = env.world.config().zones.clone();
    let reflector = Reflector::new(cfg.tail_cap);
    let mut rt = Runtime {
        task,
        cfg,
        mode,
        world: env.world,
        regions,
        state: env.initial,
        controller: env.controller,
        client: RoleClient::new(env.backend),
        planner,
        monitor: Monitor::new(cfg.monitor),
        reflector,
        buffer: ConstraintBuffer::with_capacity(cfg.buffer_capacity),
        memory: MemoryStore::default(),
        log: EventLog::new(env.sink, env.clock),
        human: env.human,
        operator: env.operator,
        latency: env.latency,
        tool_specs: tool_specs.clone(),
        elapsed: 0,
        generation: 0,
        tops: VecDeque::new(),
        latched: alloc::vec![None; task.stages.len()],
        last_progress: 0,
        snapshots: VecDeque::new(),
        episode: None,
        next_episode: 1,
        completed: Vec::new(),
        issued: Vec::new(),
        hints: Vec::new(),
        verdicts: Vec::new(),
        reflections: VecDeque::new(),
        last_applied: None,
        stale_discards: 0,
        reflect_count: 0,
        next_call: 0,
        next_question: 0,
        abort: None,
        stats: RunStats::default(),
    };
    let tb = toolbox::with_builtins::<Runtime<'_>>();

    rt.log_initial();
    match mode {
        Mode::Agent => rt.run_agent(&tb),
        Mode::Hier | Mode::HierHitl => rt.run_hier(),
        Mode::Vanilla => rt.run_vanilla(),
    }
    rt.finish();

    let stages_done = rt.stages_done();
    let events = rt.log.into_records();
    let curve = metrics::compute_curve(&events, task.stages.len(), cfg.task_cap);
    let auc_progress = curve.as_ref().map_or(0.0, |c| c.auc);
    let output = RunOutput {
        result: RunResult {
            task: task.text.clone(),
            mode,
            seed,
            stages_total: task.stages.len(),
            stages_done,
            steps_used: rt.elapsed,
            auc_progress,
            stale_discards: rt.stale_discards,
        },
        stats: rt.stats,
        events,
        memory: rt.memory,
        constraints: rt.buffer,
        final_state: rt.state,
        tools: tool_specs,
    };
    let reason = match (rt.abort, curve) {
        (Some(r), _) => r,
        (None, Err(e)) => format!("event log invalid: {e}"),
        (None, Ok(_)) => return Ok(output),
    };
    Err(RunAborted {
        reason,
        output: Box::new(output),
    })
}

/// Error-mode tags a verdict event was attributed to, for tests and reports.
pub fn applied_errors(events: &[EventLogRecord]) -> Vec<(u64, ErrorTag)> {
    events
        .iter()
        .filter_map(|r| match &r.event {
            Event::Verdict(v) if v.disposition == Disposition::Applied => v.error_mode.map(|t| (r.seq, t)),
            _ => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::world::World;

    #[test]
    fn mode_names() {
        for m in Mode::ALL {
            assert_eq!(Mode::parse(m.as_str()), Some(m));
        }
        assert_eq!(Mode::parse("hier-hitl"), Some(Mode::HierHitl));
        assert_eq!(serde_json::to_string(&Mode::HierHitl).unwrap(), "\"hier_hitl\"");
        assert_eq!(Mode::parse("agentic"), None);
    }

    #[test]
    fn config_defaults() {
        let c: AgentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, AgentConfig::default());
        assert_eq!((c.retries, c.episode_cap, c.task_cap, c.reflection_lag), (2, 120, 600, 2));
        assert!(serde_json::from_str::<AgentConfig>(r#"{"retry":3}"#).is_err());
    }

    #[test]
    fn latency_schedules() {
        assert_eq!(LatencySchedule::Sync.verdict_delay(7), 0);
        let f = LatencySchedule::Fixed { verdict: 3, reflect: 5 };
        assert_eq!((f.verdict_delay(0), f.reflect_delay(9)), (3, 5));
        let s = LatencySchedule::Seeded { seed: 1, max_verdict: 4, max_reflect: 0 };
        assert!((0..50).all(|n| s.verdict_delay(n) <= 4 && s.reflect_delay(n) == 0));
        assert_eq!(s.verdict_delay(11), s.verdict_delay(11));
        let t: LatencySchedule = serde_json::from_str(r#"{"kind":"table","verdict":[4,1]}"#).unwrap();
        assert_eq!((t.verdict_delay(0), t.verdict_delay(1), t.verdict_delay(2)), (4, 1, 0));
    }

    #[test]
    fn prompts_map_to_commands() {
        assert_eq!(OperatorCommand::from_prompt(" Advance "), OperatorCommand::Advance);
        assert_eq!(OperatorCommand::from_prompt("regenerate"), OperatorCommand::Regenerate);
        assert_eq!(
            OperatorCommand::from_prompt("skip the chips"),
            OperatorCommand::Hint("skip the chips".into())
        );
    }

    #[test]
    fn scripted_operator_polls_on_cadence_in_hitl_only() {
        let cfg = AgentConfig::default();
        let mut op = ScriptedOperator::new(&cfg);
        let w = World::new(fixtures::reference_scene()).unwrap();
        let frame = w.render(&w.reset(0), CameraId::Top);
        let view = |elapsed, mode| OperatorView {
            elapsed,
            mode,
            frame: &frame,
            current: None,
            stages_done: 0,
            stages_total: 2,
            last_progress: 0,
        };
        assert!(op.poll(&view(19, Mode::HierHitl)).is_empty());
        assert_eq!(op.poll(&view(20, Mode::HierHitl)), alloc::vec![OperatorCommand::Regenerate]);
        assert!(op.poll(&view(20, Mode::Hier)).is_empty());
    }

    #[test]
    fn scripted_human_answers_then_defaults() {
        let mut h = ScriptedHuman::new(["first".to_string()], None);
        let q = Question {
            question_id: "q1".into(),
            text: "?".into(),
            asked_step: 3,
        };
        assert_eq!(h.ask(&q).as_deref(), Some("first"));
        assert_eq!(h.ask(&q), None);
        assert_eq!(h.asked.len(), 2);
    }
}
