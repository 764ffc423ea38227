//! Role-typed model-call boundary.
//!
//! One request schema per role (plan, monitor, reflect, summarize). The
//! scripted backend computes answers from ground truth over the frames it is
//! given and injects configured error modes; remote adapters live in the std
//! crate and speak the same schema.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::memory::{self, EpisodeOutcome, LongMemoryRecord, ShortMemoryRecord};
use crate::monitor::ProgressFlag;
use crate::planner::{NutrientTable, SubInstruction};
use crate::reflector::{scope_matches, ConstraintDraft, VisualConstraint};
use crate::rng;
use crate::toolbox::ToolSpec;
use crate::vla::{self, Skill};
use crate::world::{Frame, Kind, SceneConfig, VisibleObject, Zone, ZoneRegion};

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Plan,
    Monitor,
    Reflect,
    Summarize,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Plan, Role::Monitor, Role::Reflect, Role::Summarize];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Plan => "plan",
            Role::Monitor => "monitor",
            Role::Reflect => "reflect",
            Role::Summarize => "summarize",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanPayload {
    pub task: String,
    pub completed: Vec<SubInstruction>,
    pub frame: Frame,
    pub long_memory: Vec<LongMemoryRecord>,
    #[serde(default)]
    pub hints: Vec<String>,
    #[serde(default)]
    pub rejected: Vec<String>,
    #[serde(default)]
    pub tools: Vec<ToolSpec>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitorPayload {
    pub frame_now: Frame,
    pub frame_prev: Frame,
    pub instruction: SubInstruction,
    pub constraints: Vec<VisualConstraint>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflectPayload {
    /// Newest record first.
    pub short_memory_tail: Vec<ShortMemoryRecord>,
    #[serde(default)]
    pub ground_truth_hint: Option<ProgressFlag>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummarizePayload {
    pub short_memory: Vec<ShortMemoryRecord>,
    pub outcome: EpisodeOutcome,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", content = "payload", rename_all = "snake_case")]
pub enum RolePayload {
    Plan(PlanPayload),
    Monitor(MonitorPayload),
    Reflect(ReflectPayload),
    Summarize(SummarizePayload),
}

impl RolePayload {
    pub fn role(&self) -> Role {
        match self {
            RolePayload::Plan(_) => Role::Plan,
            RolePayload::Monitor(_) => Role::Monitor,
            RolePayload::Reflect(_) => Role::Reflect,
            RolePayload::Summarize(_) => Role::Summarize,
        }
    }
}

/// `{"role", "payload", "request_id", "step_index"}` on the wire.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendRequest {
    #[serde(flatten)]
    pub body: RolePayload,
    pub request_id: String,
    pub step_index: u64,
}

impl BackendRequest {
    pub fn role(&self) -> Role {
        self.body.role()
    }
}

/// Next instruction or the `TERMINAL` sentinel; a plain string on the wire.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum PlanNext {
    Instruction(String),
    Terminal,
}

pub const TERMINAL: &str = "TERMINAL";

impl From<String> for PlanNext {
    fn from(s: String) -> Self {
        if s == TERMINAL {
            PlanNext::Terminal
        } else {
            PlanNext::Instruction(s)
        }
    }
}

impl From<PlanNext> for String {
    fn from(p: PlanNext) -> String {
        match p {
            PlanNext::Instruction(s) => s,
            PlanNext::Terminal => TERMINAL.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanResponse {
    pub next: PlanNext,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorResponse {
    pub flag: ProgressFlag,
    pub rationale: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReflectResponse {
    pub constraint: Option<ConstraintDraft>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummarizeResponse {
    pub summary: String,
    pub failure_count: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BackendResponse {
    Plan(PlanResponse),
    Monitor(MonitorResponse),
    Reflect(ReflectResponse),
    Summarize(SummarizeResponse),
}

impl BackendResponse {
    pub fn role(&self) -> Role {
        match self {
            BackendResponse::Plan(_) => Role::Plan,
            BackendResponse::Monitor(_) => Role::Monitor,
            BackendResponse::Reflect(_) => Role::Reflect,
            BackendResponse::Summarize(_) => Role::Summarize,
        }
    }

    pub fn to_json(&self) -> Value {
        let v = match self {
            BackendResponse::Plan(r) => serde_json::to_value(r),
            BackendResponse::Monitor(r) => serde_json::to_value(r),
            BackendResponse::Reflect(r) => serde_json::to_value(r),
            BackendResponse::Summarize(r) => serde_json::to_value(r),
        };
        v.expect("response types serialize")
    }

    pub fn from_json(role: Role, v: Value) -> Result<BackendResponse, serde_json::Error> {
        Ok(match role {
            Role::Plan => BackendResponse::Plan(serde_json::from_value(v)?),
            Role::Monitor => BackendResponse::Monitor(serde_json::from_value(v)?),
            Role::Reflect => BackendResponse::Reflect(serde_json::from_value(v)?),
            Role::Summarize => BackendResponse::Summarize(serde_json::from_value(v)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("backend transport: {0}")]
    Transport(String),
    #[error("could not parse {role} response: {raw:?}")]
    Parse { role: Role, raw: String },
    #[error("window spacing: {0}")]
    Window(String),
    #[error("expected a {expected} response, got {got}")]
    RoleMismatch { expected: Role, got: Role },
}

/// Blocking request/response. Implementations must tolerate concurrent
/// calls, hence `&self`.
pub trait Backend {
    fn call(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn call(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError> {
        (**self).call(req)
    }
}

/// Issues request ids (`{role}-{n:06}`) and retries once on transport errors.
pub struct RoleClient<'a> {
    backend: &'a dyn Backend,
    counters: [u32; 4],
    issued: u32,
    last_request: Option<BackendRequest>,
}

impl<'a> RoleClient<'a> {
    pub fn new(backend: &'a dyn Backend) -> Self {
        RoleClient {
            backend,
            counters: [0; 4],
            issued: 0,
            last_request: None,
        }
    }

    /// Number of distinct requests issued (retries not counted).
    pub fn issued(&self) -> u32 {
        self.issued
    }

    pub fn last_request(&self) -> Option<&BackendRequest> {
        self.last_request.as_ref()
    }

    pub fn call(&mut self, body: RolePayload, step_index: u64) -> Result<BackendResponse, BackendError> {
        let role = body.role();
        self.counters[role.index()] += 1;
        self.issued += 1;
        let req = BackendRequest {
            body,
            request_id: format!("{}-{:06}", role, self.counters[role.index()]),
            step_index,
        };
        let resp = match self.backend.call(&req) {
            Err(BackendError::Transport(_)) => self.backend.call(&req),
            other => other,
        };
        self.last_request = Some(req);
        let resp = resp?;
        if resp.role() != role {
            return Err(BackendError::RoleMismatch {
                expected: role,
                got: resp.role(),
            });
        }
        Ok(resp)
    }

    pub fn plan(&mut self, p: PlanPayload, step: u64) -> Result<PlanNext, BackendError> {
        match self.call(RolePayload::Plan(p), step)? {
            BackendResponse::Plan(r) => Ok(r.next),
            _ => unreachable!("role checked"),
        }
    }

    pub fn monitor(&mut self, p: MonitorPayload, step: u64) -> Result<MonitorResponse, BackendError> {
        match self.call(RolePayload::Monitor(p), step)? {
            BackendResponse::Monitor(r) => Ok(r),
            _ => unreachable!("role checked"),
        }
    }

    pub fn reflect(&mut self, p: ReflectPayload, step: u64) -> Result<Option<ConstraintDraft>, BackendError> {
        match self.call(RolePayload::Reflect(p), step)? {
            BackendResponse::Reflect(r) => Ok(r.constraint),
            _ => unreachable!("role checked"),
        }
    }

    pub fn summarize(&mut self, p: SummarizePayload, step: u64) -> Result<SummarizeResponse, BackendError> {
        match self.call(RolePayload::Summarize(p), step)? {
            BackendResponse::Summarize(r) => Ok(r),
            _ => unreachable!("role checked"),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorTag {
    FalseDoneNearMiss,
    FalseFailureOnApproach,
    MissedFailure,
}

impl ErrorTag {
    pub const ALL: [ErrorTag; 3] = [
        ErrorTag::FalseDoneNearMiss,
        ErrorTag::FalseFailureOnApproach,
        ErrorTag::MissedFailure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorTag::FalseDoneNearMiss => "false_done_near_miss",
            ErrorTag::FalseFailureOnApproach => "false_failure_on_approach",
            ErrorTag::MissedFailure => "missed_failure",
        }
    }

    pub fn parse(s: &str) -> Option<ErrorTag> {
        ErrorTag::ALL.into_iter().find(|t| t.as_str() == s)
    }

    /// The flag this mode reports instead of the ground truth.
    pub fn reported(self) -> ProgressFlag {
        match self {
            ErrorTag::FalseDoneNearMiss => ProgressFlag::Done,
            ErrorTag::FalseFailureOnApproach => ProgressFlag::Failure,
            ErrorTag::MissedFailure => ProgressFlag::Ongoing,
        }
    }
}

impl fmt::Display for ErrorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorMode {
    pub tag: ErrorTag,
    pub rate: f64,
    #[serde(default = "any_scope")]
    pub scope: String,
}

fn any_scope() -> String {
    "*".to_string()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorModeConfig {
    #[serde(default)]
    pub modes: Vec<ErrorMode>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ErrorModeError {
    #[error("error mode {0} rate outside [0, 1]")]
    BadRate(ErrorTag),
    #[error("error mode {0} listed twice")]
    DuplicateTag(ErrorTag),
}

impl ErrorModeConfig {
    pub fn validate(&self) -> Result<(), ErrorModeError> {
        for (i, m) in self.modes.iter().enumerate() {
            if !(0.0..=1.0).contains(&m.rate) {
                return Err(ErrorModeError::BadRate(m.tag));
            }
            if self.modes[..i].iter().any(|o| o.tag == m.tag) {
                return Err(ErrorModeError::DuplicateTag(m.tag));
            }
        }
        Ok(())
    }

    pub fn rate(&self, tag: ErrorTag) -> f64 {
        self.modes
            .iter()
            .find(|m| m.tag == tag)
            .map_or(0.0, |m| m.rate)
    }
}

/// Which error mode a (reported, true) flag pair corresponds to.
pub fn classify_error(reported: ProgressFlag, truth: ProgressFlag) -> Option<ErrorTag> {
    match (reported, truth) {
        (ProgressFlag::Done, ProgressFlag::Ongoing) => Some(ErrorTag::FalseDoneNearMiss),
        (ProgressFlag::Failure, ProgressFlag::Ongoing) => Some(ErrorTag::FalseFailureOnApproach),
        (ProgressFlag::Ongoing, ProgressFlag::Failure) => Some(ErrorTag::MissedFailure),
        _ => None,
    }
}

fn region_distance(regions: &[ZoneRegion], zone: Zone, cell: crate::world::Cell) -> Option<i32> {
    regions
        .iter()
        .find(|z| z.zone == zone)
        .map(|z| z.region.distance(cell))
}

fn target_in(frame: &Frame, kind: Kind) -> Option<&VisibleObject> {
    frame.find_kind(kind)
}

fn holds_kind(frame: &Frame, kind: Kind) -> bool {
    frame.held.is_some() && frame.held_kind() == Some(kind)
}

/// Ground-truth flag for a window, judged from the two frames.
///
/// Order: target missing from view -> HINDER; checkpoint met -> DONE; wrong
/// object held, or target dropped away from the zone, or target taken out of
/// the zone -> FAILURE; otherwise ONGOING. A near-miss placement is ONGOING.
pub fn ground_truth(prev: &Frame, now: &Frame, skill: Skill, regions: &[ZoneRegion]) -> ProgressFlag {
    let target = target_in(now, skill.kind);
    let held = holds_kind(now, skill.kind);
    if target.is_none() && !held {
        return ProgressFlag::Hinder;
    }
    if now
        .visible_objects
        .iter()
        .any(|o| o.kind == skill.kind && o.zone == skill.zone)
    {
        return ProgressFlag::Done;
    }
    if now.held.is_some() && !held {
        return ProgressFlag::Failure;
    }
    if let Some(t) = target {
        let was_held = holds_kind(prev, skill.kind);
        let far = region_distance(regions, skill.zone, t.cell).is_some_and(|d| d > 1);
        if was_held && !held && far {
            return ProgressFlag::Failure;
        }
    }
    let was_in_zone = prev
        .visible_objects
        .iter()
        .any(|o| o.kind == skill.kind && o.zone == skill.zone);
    if was_in_zone {
        return ProgressFlag::Failure;
    }
    ProgressFlag::Ongoing
}

/// Whether an error mode has an opportunity to fire on this window.
pub fn mode_applies(
    tag: ErrorTag,
    truth: ProgressFlag,
    prev: &Frame,
    now: &Frame,
    skill: Skill,
    regions: &[ZoneRegion],
) -> bool {
    match tag {
        ErrorTag::FalseDoneNearMiss => {
            truth == ProgressFlag::Ongoing
                && !holds_kind(now, skill.kind)
                && target_in(now, skill.kind).is_some_and(|t| {
                    t.zone != Zone::Gripper
                        && region_distance(regions, skill.zone, t.cell) == Some(1)
                })
        }
        ErrorTag::FalseFailureOnApproach => {
            truth == ProgressFlag::Ongoing
                && now.held.is_none()
                && match (target_in(prev, skill.kind), target_in(now, skill.kind)) {
                    (Some(a), Some(b)) => {
                        b.cell.chebyshev(now.gripper) < a.cell.chebyshev(prev.gripper)
                    }
                    _ => false,
                }
        }
        ErrorTag::MissedFailure => truth == ProgressFlag::Failure,
    }
}

pub fn constraint_text(tag: ErrorTag, skill: Skill) -> String {
    let mut kind = String::from(skill.kind.as_str());
    if let Some(first) = kind.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    match tag {
        ErrorTag::FalseDoneNearMiss => {
            format!("{kind} must be placed on the {} rather than the table", skill.zone)
        }
        ErrorTag::FalseFailureOnApproach => format!(
            "An empty gripper moving toward the {} is progress, not a failure",
            skill.kind
        ),
        ErrorTag::MissedFailure => format!(
            "A dropped {} or a different item in the gripper is a failure",
            skill.kind
        ),
    }
}

/// Excluded kinds from `skip {kind}` / `skip the {kind}` hints.
pub fn skipped_kinds(hints: &[String]) -> Vec<Kind> {
    let mut out = Vec::new();
    for h in hints {
        let norm = vla::normalize(h);
        let words: Vec<&str> = norm
            .split(|c: char| !c.is_ascii_alphanumeric())
            .filter(|w| !w.is_empty())
            .collect();
        for (i, w) in words.iter().enumerate() {
            if *w != "skip" {
                continue;
            }
            let next = match words.get(i + 1) {
                Some(&"the") => words.get(i + 2),
                other => other,
            };
            if let Some(k) = next.and_then(|n| Kind::parse(n)) {
                if !out.contains(&k) {
                    out.push(k);
                }
            }
        }
    }
    out
}

/// Deterministic backend: ground truth plus seeded error injection.
#[derive(Clone, Debug)]
pub struct ScriptedBackend {
    seed: u64,
    regions: Vec<ZoneRegion>,
    modes: ErrorModeConfig,
    table: NutrientTable,
    h: u64,
}

impl ScriptedBackend {
    pub fn new(seed: u64, scene: SceneConfig, modes: ErrorModeConfig, table: NutrientTable, h: u64) -> Self {
        ScriptedBackend {
            seed,
            regions: scene.zones,
            modes,
            table,
            h,
        }
    }

    /// Reference scene, reference error modes, window of 10.
    pub fn reference(seed: u64) -> Self {
        ScriptedBackend::new(
            seed,
            crate::fixtures::reference_scene(),
            crate::fixtures::reference_error_modes(),
            crate::fixtures::nutrient_table(),
            10,
        )
    }

    pub fn modes(&self) -> &ErrorModeConfig {
        &self.modes
    }

    pub fn plan(&self, p: &PlanPayload) -> PlanNext {
        let Some(items) = self.table.lookup(&p.task) else {
            return PlanNext::Terminal;
        };
        let done: Vec<Kind> = p.completed.iter().filter_map(|c| c.target_kind).collect();
        let skipped = skipped_kinds(&p.hints);
        let failures = |k: Kind| -> u32 {
            p.long_memory
                .iter()
                .filter(|r| r.instruction.target_kind == Some(k))
                .map(|r| r.failure_count)
                .sum()
        };
        items
            .iter()
            .filter(|s| !done.contains(&s.kind) && !skipped.contains(&s.kind))
            .min_by_key(|s| (failures(s.kind), s.kind))
            .map_or(PlanNext::Terminal, |s| PlanNext::Instruction(s.text()))
    }

    pub fn monitor(&self, p: &MonitorPayload, request_id: &str) -> Result<MonitorResponse, BackendError> {
        let (prev, now) = (&p.frame_prev, &p.frame_now);
        if now.step_index < prev.step_index || now.step_index - prev.step_index != self.h {
            return Err(BackendError::Window(format!(
                "frames at {} and {} are not {} steps apart",
                prev.step_index, now.step_index, self.h
            )));
        }
        if now.camera_id != prev.camera_id {
            return Err(BackendError::Window("frames from different cameras".into()));
        }
        let Some(skill) = p.instruction.skill() else {
            return Ok(MonitorResponse {
                flag: ProgressFlag::Ongoing,
                rationale: "instruction has no checkable target".into(),
            });
        };
        let truth = ground_truth(prev, now, skill, &self.regions);
        for mode in &self.modes.modes {
            if !scope_matches(&mode.scope, &p.instruction)
                || p.constraints.iter().any(|c| c.tag == mode.tag.as_str())
                || !mode_applies(mode.tag, truth, prev, now, skill, &self.regions)
            {
                continue;
            }
            let mut r = rng::labelled(self.seed, mode.tag.as_str(), request_id);
            if r.random::<f64>() < mode.rate {
                return Ok(MonitorResponse {
                    flag: mode.tag.reported(),
                    rationale: format!("{} judged from the frames", mode.tag.reported()),
                });
            }
        }
        Ok(MonitorResponse {
            flag: truth,
            rationale: format!("{truth} judged from the frames"),
        })
    }

    pub fn reflect(&self, p: &ReflectPayload) -> Option<ConstraintDraft> {
        let newest = p.short_memory_tail.first()?;
        let skill = newest.instruction.skill()?;
        if newest.verdict.flag == ProgressFlag::Hinder {
            return None;
        }
        let truth = p.ground_truth_hint.unwrap_or_else(|| {
            ground_truth(&newest.frame_prev, &newest.frame_now, skill, &self.regions)
        });
        let tag = classify_error(newest.verdict.flag, truth)?;
        Some(ConstraintDraft {
            tag: tag.as_str().to_string(),
            scope: skill.kind.as_str().to_string(),
            text: constraint_text(tag, skill),
        })
    }

    pub fn summarize(&self, p: &SummarizePayload) -> SummarizeResponse {
        let s = memory::template_summary(&p.short_memory, p.outcome);
        SummarizeResponse {
            summary: s.summary,
            failure_count: s.failure_count,
        }
    }
}

impl Backend for ScriptedBackend {
    fn call(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError> {
        Ok(match &req.body {
            RolePayload::Plan(p) => BackendResponse::Plan(PlanResponse { next: self.plan(p) }),
            RolePayload::Monitor(p) => BackendResponse::Monitor(self.monitor(p, &req.request_id)?),
            RolePayload::Reflect(p) => BackendResponse::Reflect(ReflectResponse {
                constraint: self.reflect(p),
            }),
            RolePayload::Summarize(p) => BackendResponse::Summarize(self.summarize(p)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::monitor::MonitorVerdict;
    use crate::world::{CameraId, Cell, SceneState, World};

    fn world() -> World {
        World::new(fixtures::reference_scene()).unwrap()
    }

    fn place(w: &World, s: &mut SceneState, id: &str, cell: Cell) {
        let zone = w.zone_of(cell);
        let o = s.objects.iter_mut().find(|o| o.id == id).unwrap();
        o.cell = cell;
        o.zone = zone;
    }

    fn stamped(f: Frame, step: u64) -> Frame {
        Frame { step_index: step, ..f }
    }

    /// Shrimp held over the plate at step 10, released next to it at 20.
    fn near_miss_window() -> (Frame, Frame) {
        let w = world();
        let mut s = w.reset(42);
        let over = Cell::new(8, 8);
        s.gripper.cell = over;
        s.gripper.holding = Some("shrimp".into());
        s.objects.iter_mut().find(|o| o.id == "shrimp").unwrap().zone = Zone::Gripper;
        s.objects.iter_mut().find(|o| o.id == "shrimp").unwrap().cell = over;
        let prev = stamped(w.render(&s, CameraId::Top), 10);
        s.gripper.holding = None;
        place(&w, &mut s, "shrimp", Cell::new(7, 8));
        let now = stamped(w.render(&s, CameraId::Top), 20);
        (prev, now)
    }

    fn shrimp() -> SubInstruction {
        SubInstruction::new("put shrimp on plate", 1)
    }

    fn always(tag: ErrorTag, scope: &str) -> ScriptedBackend {
        ScriptedBackend::new(
            7,
            fixtures::reference_scene(),
            ErrorModeConfig {
                modes: alloc::vec![ErrorMode { tag, rate: 1.0, scope: scope.into() }],
            },
            fixtures::nutrient_table(),
            10,
        )
    }

    fn plan_payload(task: &str, completed: &[&str]) -> PlanPayload {
        let w = world();
        PlanPayload {
            task: task.into(),
            completed: completed.iter().enumerate().map(|(i, t)| SubInstruction::new(*t, i as u32 + 1)).collect(),
            frame: w.render(&w.reset(0), CameraId::Top),
            long_memory: Vec::new(),
            hints: Vec::new(),
            rejected: Vec::new(),
            tools: Vec::new(),
        }
    }

    #[test]
    fn plan_lookup_and_tie_order() {
        let b = ScriptedBackend::reference(0);
        assert_eq!(
            b.plan(&plan_payload(fixtures::PROTEIN_TASK, &[])),
            PlanNext::Instruction("put sausage on plate".into())
        );
        assert_eq!(
            b.plan(&plan_payload(fixtures::PROTEIN_TASK, &["put sausage on plate", "put shrimp on plate"])),
            PlanNext::Terminal
        );
        assert_eq!(b.plan(&plan_payload("juggle", &[])), PlanNext::Terminal);
    }

    #[test]
    fn skip_hint_excludes_kind() {
        let b = ScriptedBackend::reference(0);
        let mut p = plan_payload(fixtures::PROTEIN_TASK, &["put sausage on plate"]);
        p.hints.push("skip the shrimp".into());
        assert_eq!(b.plan(&p), PlanNext::Terminal);
        assert_eq!(skipped_kinds(&["Skip chips, and skip the MUSHROOM".into()]), [Kind::Chips, Kind::Mushroom]);
    }

    #[test]
    fn near_miss_false_done_and_suppression() {
        let (prev, now) = near_miss_window();
        let regions = fixtures::reference_scene().zones;
        let skill = shrimp().skill().unwrap();
        assert_eq!(ground_truth(&prev, &now, skill, &regions), ProgressFlag::Ongoing);

        let b = always(ErrorTag::FalseDoneNearMiss, "shrimp");
        let mut p = MonitorPayload { frame_now: now, frame_prev: prev, instruction: shrimp(), constraints: Vec::new() };
        assert_eq!(b.monitor(&p, "monitor-000001").unwrap().flag, ProgressFlag::Done);

        p.constraints.push(VisualConstraint {
            id: "c1".into(),
            tag: "false_done_near_miss".into(),
            scope: "shrimp".into(),
            text: constraint_text(ErrorTag::FalseDoneNearMiss, skill),
            created_step: 20,
        });
        assert_eq!(b.monitor(&p, "monitor-000002").unwrap().flag, ProgressFlag::Ongoing);
    }

    #[test]
    fn static_window_is_ongoing() {
        let w = world();
        let s = w.reset(0);
        let f = w.render(&s, CameraId::Top);
        let b = ScriptedBackend::new(0, fixtures::reference_scene(), ErrorModeConfig::default(), fixtures::nutrient_table(), 10);
        let p = MonitorPayload {
            frame_now: stamped(f.clone(), 10),
            frame_prev: f,
            instruction: shrimp(),
            constraints: Vec::new(),
        };
        assert_eq!(b.monitor(&p, "monitor-000001").unwrap().flag, ProgressFlag::Ongoing);
    }

    #[test]
    fn spacing_is_checked() {
        let (prev, now) = near_miss_window();
        let b = ScriptedBackend::reference(0);
        let p = MonitorPayload { frame_now: stamped(now, 25), frame_prev: prev, instruction: shrimp(), constraints: Vec::new() };
        assert!(matches!(b.monitor(&p, "m"), Err(BackendError::Window(_))));
    }

    #[test]
    fn approach_false_failure() {
        let w = world();
        let mut s = w.reset(0);
        let prev = w.render(&s, CameraId::Top);
        s.gripper.cell = Cell::new(5, 4);
        let now = stamped(w.render(&s, CameraId::Top), 10);
        let b = always(ErrorTag::FalseFailureOnApproach, "*");
        let p = MonitorPayload { frame_now: now, frame_prev: prev, instruction: shrimp(), constraints: Vec::new() };
        assert_eq!(b.monitor(&p, "monitor-000001").unwrap().flag, ProgressFlag::Failure);
    }

    fn record(prev: Frame, now: Frame, flag: ProgressFlag) -> ShortMemoryRecord {
        ShortMemoryRecord {
            episode_id: 1,
            seq: 1,
            verdict: MonitorVerdict {
                flag,
                step_index: now.step_index,
                rationale: String::new(),
                constraints_used: Vec::new(),
                generation: 0,
            },
            frame_now: now,
            frame_prev: prev,
            instruction: shrimp(),
            constraint: None,
        }
    }

    #[test]
    fn reflect_emits_on_mismatch_only() {
        let (prev, now) = near_miss_window();
        let b = ScriptedBackend::reference(0);
        let wrong = ReflectPayload {
            short_memory_tail: alloc::vec![record(prev.clone(), now.clone(), ProgressFlag::Done)],
            ground_truth_hint: None,
        };
        let c = b.reflect(&wrong).unwrap();
        assert_eq!(c.tag, "false_done_near_miss");
        assert_eq!(c.text, "Shrimp must be placed on the plate rather than the table");

        let right = ReflectPayload {
            short_memory_tail: alloc::vec![record(prev, now, ProgressFlag::Ongoing)],
            ground_truth_hint: None,
        };
        assert_eq!(b.reflect(&right), None);
    }

    #[test]
    fn reflect_on_false_failure() {
        let w = world();
        let mut s = w.reset(0);
        let prev = w.render(&s, CameraId::Top);
        s.gripper.cell = Cell::new(5, 4);
        let now = stamped(w.render(&s, CameraId::Top), 10);
        let b = ScriptedBackend::reference(0);
        let p = ReflectPayload {
            short_memory_tail: alloc::vec![record(prev, now, ProgressFlag::Failure)],
            ground_truth_hint: None,
        };
        assert_eq!(b.reflect(&p).unwrap().tag, "false_failure_on_approach");
    }

    #[test]
    fn summarize_counts() {
        let (prev, now) = near_miss_window();
        let b = ScriptedBackend::reference(0);
        let r = b.summarize(&SummarizePayload {
            short_memory: alloc::vec![
                record(prev.clone(), now.clone(), ProgressFlag::Ongoing),
                record(prev.clone(), now.clone(), ProgressFlag::Ongoing),
                record(prev, now, ProgressFlag::Done),
            ],
            outcome: EpisodeOutcome::Done,
        });
        assert!(r.summary.ends_with("3 windows, 0 FAILURE, 0 constraints, outcome DONE"));
        assert_eq!(r.failure_count, 0);
        let empty = b.summarize(&SummarizePayload { short_memory: Vec::new(), outcome: EpisodeOutcome::Failed });
        assert_eq!(empty.summary, "no steps recorded");
    }

    #[test]
    fn request_wire_shape() {
        let req = BackendRequest {
            body: RolePayload::Summarize(SummarizePayload { short_memory: Vec::new(), outcome: EpisodeOutcome::Done }),
            request_id: "summarize-000001".into(),
            step_index: 40,
        };
        let v = serde_json::to_value(&req).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        assert_eq!(keys, ["payload", "request_id", "role", "step_index"]);
        let back: BackendRequest = serde_json::from_value(v).unwrap();
        assert_eq!(back, req);
    }

    #[test]
    fn error_mode_validation() {
        let mut cfg = fixtures::reference_error_modes();
        cfg.validate().unwrap();
        cfg.modes[0].rate = 1.5;
        assert_eq!(cfg.validate(), Err(ErrorModeError::BadRate(ErrorTag::FalseDoneNearMiss)));
        let mut cfg = fixtures::reference_error_modes();
        cfg.modes[1].tag = ErrorTag::FalseDoneNearMiss;
        assert_eq!(cfg.validate(), Err(ErrorModeError::DuplicateTag(ErrorTag::FalseDoneNearMiss)));
    }

    struct Flaky(core::cell::Cell<u32>);
    impl Backend for Flaky {
        fn call(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError> {
            self.0.set(self.0.get() + 1);
            if self.0.get() % 2 == 1 {
                return Err(BackendError::Transport("reset".into()));
            }
            ScriptedBackend::reference(0).call(req)
        }
    }

    #[test]
    fn client_retries_once_and_numbers_requests() {
        let flaky = Flaky(core::cell::Cell::new(0));
        let mut client = RoleClient::new(&flaky);
        let next = client.plan(plan_payload(fixtures::FIBER_TASK, &[]), 0).unwrap();
        assert_eq!(next, PlanNext::Instruction("put broccoli on plate".into()));
        assert_eq!(flaky.0.get(), 2);
        assert_eq!(client.last_request().unwrap().request_id, "plan-000001");
        client.plan(plan_payload(fixtures::FIBER_TASK, &[]), 0).unwrap();
        assert_eq!(client.last_request().unwrap().request_id, "plan-000002");
    }
}
