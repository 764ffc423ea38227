//! Append-only run event log.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::backend::ErrorTag;
use crate::memory::{EpisodeId, EpisodeOutcome, LongMemoryRecord};
use crate::monitor::{MonitorVerdict, ProgressFlag};
use crate::planner::SubInstruction;
use crate::reflector::VisualConstraint;
use crate::toolbox::{ToolCall, ToolResult};
use crate::world::{FaultDraw, Frame, PrimitiveAction, SceneState, StepOutcome};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameEvent {
    /// Steps elapsed in the run; never rewinds, unlike `frame.step_index`.
    pub elapsed: u64,
    pub generation: u32,
    pub episode_id: Option<EpisodeId>,
    /// `None` for observations that did not come from a step (run start).
    pub action: Option<PrimitiveAction>,
    pub noise: FaultDraw,
    pub outcome: Option<StepOutcome>,
    pub frame: Frame,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<SceneState>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disposition {
    Applied,
    /// Not newer than the last applied verdict, or from before a backtrack.
    Stale,
    /// Its episode had already closed.
    ClosedEpisode,
    /// Still in flight when the run ended.
    Undelivered,
    /// Second look after a HINDER; acted on but not stored.
    Reevaluated,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictEvent {
    pub episode_id: EpisodeId,
    pub elapsed: u64,
    /// Elapsed step at which the window was emitted.
    pub emitted: u64,
    pub window_prev: u64,
    pub verdict: MonitorVerdict,
    pub ground_truth: ProgressFlag,
    pub error_mode: Option<ErrorTag>,
    pub disposition: Disposition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend_error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintEvent {
    pub episode_id: EpisodeId,
    pub record_seq: u32,
    pub elapsed: u64,
    pub constraint: Option<VisualConstraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanSource {
    Planner,
    Retry,
    Upfront,
    Operator,
    Raw,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEvent {
    pub elapsed: u64,
    pub source: PlanSource,
    pub instruction: Option<SubInstruction>,
    pub terminal: bool,
    pub retry: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub list: Vec<SubInstruction>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rejected: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hints: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl PlanEvent {
    pub fn new(elapsed: u64, source: PlanSource) -> Self {
        PlanEvent {
            elapsed,
            source,
            instruction: None,
            terminal: false,
            retry: false,
            list: Vec::new(),
            rejected: Vec::new(),
            hints: Vec::new(),
            reason: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeOpenEvent {
    pub episode_id: EpisodeId,
    pub instruction: SubInstruction,
    pub elapsed: u64,
    pub step_index: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeCloseEvent {
    pub episode_id: EpisodeId,
    pub outcome: EpisodeOutcome,
    pub elapsed: u64,
    pub record: LongMemoryRecord,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageEvent {
    pub stage_id: String,
    pub elapsed: u64,
    pub step_index: u64,
}

/// Pending operator question, as listed by the gateway.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub question_id: String,
    pub text: String,
    pub asked_step: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub question_id: String,
    pub text: Option<String>,
    pub timed_out: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum Event {
    Frame(FrameEvent),
    Verdict(VerdictEvent),
    Constraint(ConstraintEvent),
    ToolCall(ToolCall),
    ToolResult(ToolResult),
    Plan(PlanEvent),
    EpisodeOpen(EpisodeOpenEvent),
    EpisodeClose(EpisodeCloseEvent),
    StageComplete(StageEvent),
    HumanQuestion(Question),
    HumanAnswer(Answer),
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::Frame(_) => "frame",
            Event::Verdict(_) => "verdict",
            Event::Constraint(_) => "constraint",
            Event::ToolCall(_) => "tool_call",
            Event::ToolResult(_) => "tool_result",
            Event::Plan(_) => "plan",
            Event::EpisodeOpen(_) => "episode_open",
            Event::EpisodeClose(_) => "episode_close",
            Event::StageComplete(_) => "stage_complete",
            Event::HumanQuestion(_) => "human_question",
            Event::HumanAnswer(_) => "human_answer",
        }
    }
}

/// `{"seq", "kind", "payload", "wall_time"}` on the wire.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventLogRecord {
    pub seq: u64,
    #[serde(flatten)]
    pub event: Event,
    pub wall_time: u64,
}

/// Time source for `wall_time`. Deterministic runs use the logical clock.
pub trait Clock {
    fn now(&self, elapsed: u64) -> u64;
}

/// `wall_time` equals the elapsed step count.
#[derive(Copy, Clone, Debug, Default)]
pub struct LogicalClock;

impl Clock for LogicalClock {
    fn now(&self, elapsed: u64) -> u64 {
        elapsed
    }
}

pub trait EventSink {
    fn record(&mut self, rec: &EventLogRecord);
}

/// Discards everything; the orchestrator keeps its own copy.
#[derive(Copy, Clone, Debug, Default)]
pub struct NullSink;

impl EventSink for NullSink {
    fn record(&mut self, _rec: &EventLogRecord) {}
}

impl EventSink for Vec<EventLogRecord> {
    fn record(&mut self, rec: &EventLogRecord) {
        self.push(rec.clone());
    }
}

pub struct EventLog<'a> {
    records: Vec<EventLogRecord>,
    sink: &'a mut dyn EventSink,
    clock: &'a dyn Clock,
}

impl<'a> EventLog<'a> {
    pub fn new(sink: &'a mut dyn EventSink, clock: &'a dyn Clock) -> Self {
        EventLog {
            records: Vec::new(),
            sink,
            clock,
        }
    }

    pub fn emit(&mut self, elapsed: u64, event: Event) -> u64 {
        let seq = self.records.len() as u64 + 1;
        let rec = EventLogRecord {
            seq,
            event,
            wall_time: self.clock.now(elapsed),
        };
        self.sink.record(&rec);
        self.records.push(rec);
        seq
    }

    pub fn records(&self) -> &[EventLogRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<EventLogRecord> {
        self.records
    }
}
