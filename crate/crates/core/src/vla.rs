//! Low-level controller contract and the scripted controller.
//!
//! A controller accepts one sub-instruction at a time and emits one
//! [`PrimitiveAction`] per world step. The scripted controller compiles a
//! registry instruction into `MOVE_TO(object) -> GRASP -> MOVE_TO(zone) ->
//! RELEASE`; each primitive occupies a drawn duration of 3..=8 steps (NOOP
//! padding followed by the primitive itself). Success and the fault, if any,
//! are drawn once at issue time from the controller's seeded stream.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::planner::SubInstruction;
use crate::rng::{self, SimRng};
use crate::world::{Cell, FaultDraw, Kind, PrimitiveAction, SceneState, World, Zone};

pub const MIN_PRIMITIVE_STEPS: u32 = 3;
pub const MAX_PRIMITIVE_STEPS: u32 = 8;
pub const MIN_FREEZE_STEPS: u32 = 15;
pub const MAX_FREEZE_STEPS: u32 = 40;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkillEntry {
    pub kinds: Vec<Kind>,
    pub zones: Vec<Zone>,
}

/// The instruction language a controller accepts: `put {kind} on {zone}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SkillRegistry {
    pub entries: Vec<SkillEntry>,
}

/// A parsed registry instruction.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Skill {
    pub kind: Kind,
    pub zone: Zone,
}

impl Skill {
    pub fn text(self) -> String {
        format!("put {} on {}", self.kind, self.zone)
    }
}

/// Lowercase and collapse runs of whitespace.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

/// Parse the `put {kind} on {zone}` template without consulting a registry.
pub fn parse_template(text: &str) -> Option<Skill> {
    let norm = normalize(text);
    let mut words = norm.split(' ');
    match (words.next(), words.next(), words.next(), words.next(), words.next()) {
        (Some("put"), Some(kind), Some("on"), Some(zone), None) => Some(Skill {
            kind: Kind::parse(kind)?,
            zone: Zone::parse(zone)?,
        }),
        _ => None,
    }
}

impl SkillRegistry {
    pub fn parse(&self, text: &str) -> Option<Skill> {
        let skill = parse_template(text)?;
        self.entries
            .iter()
            .any(|e| e.kinds.contains(&skill.kind) && e.zones.contains(&skill.zone))
            .then_some(skill)
    }

    pub fn skills(&self) -> impl Iterator<Item = Skill> + '_ {
        self.entries.iter().flat_map(|e| {
            e.kinds
                .iter()
                .flat_map(move |&kind| e.zones.iter().map(move |&zone| Skill { kind, zone }))
        })
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    NearMissPlace,
    DropEarly,
    Freeze,
    WrongObject,
}

impl FaultKind {
    pub const ALL: [FaultKind; 4] = [
        FaultKind::NearMissPlace,
        FaultKind::DropEarly,
        FaultKind::Freeze,
        FaultKind::WrongObject,
    ];
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FaultMix {
    pub near_miss_place: f64,
    pub drop_early: f64,
    pub freeze: f64,
    pub wrong_object: f64,
}

impl FaultMix {
    pub fn weight(&self, k: FaultKind) -> f64 {
        match k {
            FaultKind::NearMissPlace => self.near_miss_place,
            FaultKind::DropEarly => self.drop_early,
            FaultKind::Freeze => self.freeze,
            FaultKind::WrongObject => self.wrong_object,
        }
    }

    pub fn total(&self) -> f64 {
        FaultKind::ALL.iter().map(|k| self.weight(*k)).sum()
    }

    /// Pick a fault from a uniform draw in `[0, 1)`.
    pub fn pick(&self, u: f64) -> FaultKind {
        let total = self.total();
        let mut acc = 0.0;
        for k in FaultKind::ALL {
            acc += self.weight(k) / total;
            if u < acc {
                return k;
            }
        }
        FaultKind::ALL
            .into_iter()
            .rev()
            .find(|k| self.weight(*k) > 0.0)
            .unwrap_or(FaultKind::NearMissPlace)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Proficiency {
    pub success_prob: f64,
    #[serde(default)]
    pub fault_mix: FaultMix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProficiencyEntry {
    pub kind: Kind,
    pub zone: Zone,
    pub success_prob: f64,
    #[serde(default)]
    pub fault_mix: FaultMix,
}

/// Per-(skill, kind) success probability and fault mixture.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProficiencyTable {
    entries: BTreeMap<Skill, Proficiency>,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ProficiencyError {
    #[error("success probability for `{0}` outside [0, 1]")]
    BadProbability(String),
    #[error("fault weights for `{0}` must be non-negative and sum to 1")]
    BadWeights(String),
    #[error("no proficiency entry for `{0}`")]
    Missing(String),
}

impl ProficiencyTable {
    pub fn from_entries(
        entries: impl IntoIterator<Item = ProficiencyEntry>,
    ) -> Result<Self, ProficiencyError> {
        let mut table = ProficiencyTable::default();
        for e in entries {
            let skill = Skill {
                kind: e.kind,
                zone: e.zone,
            };
            if !(0.0..=1.0).contains(&e.success_prob) {
                return Err(ProficiencyError::BadProbability(skill.text()));
            }
            let weights_ok = FaultKind::ALL.iter().all(|k| e.fault_mix.weight(*k) >= 0.0)
                && (e.fault_mix.total() - 1.0).abs() < 1e-9;
            if e.success_prob < 1.0 && !weights_ok {
                return Err(ProficiencyError::BadWeights(skill.text()));
            }
            table.entries.insert(
                skill,
                Proficiency {
                    success_prob: e.success_prob,
                    fault_mix: e.fault_mix,
                },
            );
        }
        Ok(table)
    }

    pub fn entries(&self) -> Vec<ProficiencyEntry> {
        self.entries
            .iter()
            .map(|(s, p)| ProficiencyEntry {
                kind: s.kind,
                zone: s.zone,
                success_prob: p.success_prob,
                fault_mix: p.fault_mix,
            })
            .collect()
    }

    pub fn get(&self, skill: Skill) -> Option<&Proficiency> {
        self.entries.get(&skill)
    }

    pub fn set(&mut self, skill: Skill, p: Proficiency) {
        self.entries.insert(skill, p);
    }

    /// Check that every registry instruction has an entry.
    pub fn covers(&self, registry: &SkillRegistry) -> Result<(), ProficiencyError> {
        match registry.skills().find(|s| !self.entries.contains_key(s)) {
            Some(s) => Err(ProficiencyError::Missing(s.text())),
            None => Ok(()),
        }
    }

    /// Every registry entry at the same proficiency.
    pub fn uniform(registry: &SkillRegistry, p: Proficiency) -> Self {
        ProficiencyTable {
            entries: registry.skills().map(|s| (s, p)).collect(),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Idle,
    Running,
    Finished,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmittedStep {
    pub action: PrimitiveAction,
    #[serde(default)]
    pub noise: FaultDraw,
}

/// The active (or last) instruction execution of a controller.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerSession {
    pub instruction: SubInstruction,
    /// Compiled primitives, without duration padding.
    pub plan: Vec<PrimitiveAction>,
    pub status: SessionStatus,
    pub steps_taken: u32,
    pub timed_out: bool,
    /// Fault pre-drawn at issue, if any (scripted controllers only).
    pub fault: Option<FaultKind>,
}

/// One controller step as seen by the world driver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerStep {
    pub action: PrimitiveAction,
    pub noise: FaultDraw,
    pub status: SessionStatus,
    pub steps_taken: u32,
    pub timed_out: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ControllerError {
    #[error("unsupported skill: `{0}`")]
    UnsupportedSkill(String),
    #[error("a session is already running")]
    Busy,
    #[error("no running session")]
    NotRunning,
    #[error("controller transport: {0}")]
    Transport(String),
}

/// Low-level controller contract: `issue` an instruction, then `step` once
/// per world step until the session finishes.
pub trait Controller {
    fn issue(
        &mut self,
        instruction: &SubInstruction,
        world: &World,
        state: &SceneState,
    ) -> Result<ControllerSession, ControllerError>;

    fn step(&mut self) -> Result<ControllerStep, ControllerError>;

    /// Idempotent; a no-op when idle or finished.
    fn abort(&mut self);

    fn session(&self) -> Option<&ControllerSession>;

    fn status(&self) -> SessionStatus {
        self.session().map_or(SessionStatus::Idle, |s| s.status)
    }
}

#[derive(Clone, Debug)]
pub struct ScriptedVla {
    registry: SkillRegistry,
    table: ProficiencyTable,
    rng: SimRng,
    step_cap: u32,
    session: Option<ControllerSession>,
    queue: VecDeque<EmittedStep>,
}

/// Draws taken at every issue, in order, regardless of outcome.
#[derive(Copy, Clone, Debug)]
struct IssueDraws {
    success: f64,
    fault: f64,
    durations: [u32; 5],
    freeze_len: u32,
    freeze_pos: f64,
}

impl ScriptedVla {
    pub fn new(registry: SkillRegistry, table: ProficiencyTable, seed: u64, step_cap: u32) -> Self {
        ScriptedVla {
            registry,
            table,
            rng: rng::stream(seed, "vla", 0),
            step_cap,
            session: None,
            queue: VecDeque::new(),
        }
    }

    pub fn registry(&self) -> &SkillRegistry {
        &self.registry
    }

    /// Remaining padded steps of the running session.
    pub fn pending(&self) -> &VecDeque<EmittedStep> {
        &self.queue
    }

    fn draw(&mut self) -> IssueDraws {
        let success = self.rng.random::<f64>();
        let fault = self.rng.random::<f64>();
        let mut durations = [0; 5];
        for d in &mut durations {
            *d = self.rng.random_range(MIN_PRIMITIVE_STEPS..=MAX_PRIMITIVE_STEPS);
        }
        let freeze_len = self.rng.random_range(MIN_FREEZE_STEPS..=MAX_FREEZE_STEPS);
        let freeze_pos = self.rng.random::<f64>();
        IssueDraws {
            success,
            fault,
            durations,
            freeze_len,
            freeze_pos,
        }
    }
}

/// Nearest other food to `target` not already in `zone`; ties by kind order.
fn nearest_other_food<'a>(state: &'a SceneState, target: &str, zone: Zone) -> Option<&'a str> {
    let origin = state.object(target)?.cell;
    state
        .objects
        .iter()
        .filter(|o| {
            o.id != target && !o.kind.is_fixture() && o.zone != zone && o.zone != Zone::Gripper
        })
        .min_by_key(|o| (o.cell.chebyshev(origin), o.kind))
        .map(|o| o.id.as_str())
}

/// Compiled primitive with the world-level fault attached.
fn compile(
    world: &World,
    state: &SceneState,
    skill: Skill,
    fault: Option<FaultKind>,
) -> Vec<EmittedStep> {
    let target_id = state
        .objects
        .iter()
        .filter(|o| o.kind == skill.kind)
        .min_by_key(|o| (o.zone == skill.zone, o.cell.chebyshev(state.gripper.cell)))
        .map(|o| o.id.clone());
    let zone_cell: Cell = world
        .free_cell_in(state, skill.zone)
        .unwrap_or(state.gripper.cell);
    let mut steps = Vec::new();
    let clean = |action| EmittedStep {
        action,
        noise: FaultDraw::Clean,
    };

    let Some(mut target) = target_id else {
        return steps;
    };
    let holding = state.gripper.holding.clone();
    if fault == Some(FaultKind::WrongObject) && holding.as_deref() != Some(target.as_str()) {
        if let Some(other) = nearest_other_food(state, &target, skill.zone) {
            target = other.into();
        }
    }

    match holding {
        Some(h) if h == target => {}
        Some(_) => {
            steps.push(clean(PrimitiveAction::Release));
            let cell = state.object(&target).map_or(state.gripper.cell, |o| o.cell);
            steps.push(clean(PrimitiveAction::MoveTo(cell)));
            steps.push(clean(PrimitiveAction::Grasp(target.clone())));
        }
        None => {
            let cell = state.object(&target).map_or(state.gripper.cell, |o| o.cell);
            steps.push(clean(PrimitiveAction::MoveTo(cell)));
            steps.push(clean(PrimitiveAction::Grasp(target.clone())));
        }
    }
    steps.push(EmittedStep {
        action: PrimitiveAction::MoveTo(zone_cell),
        noise: if fault == Some(FaultKind::DropEarly) {
            FaultDraw::DropEarly
        } else {
            FaultDraw::Clean
        },
    });
    steps.push(EmittedStep {
        action: PrimitiveAction::Release,
        noise: if fault == Some(FaultKind::NearMissPlace) {
            FaultDraw::NearMissPlace
        } else {
            FaultDraw::Clean
        },
    });
    steps
}

impl Controller for ScriptedVla {
    fn issue(
        &mut self,
        instruction: &SubInstruction,
        world: &World,
        state: &SceneState,
    ) -> Result<ControllerSession, ControllerError> {
        if self.status() == SessionStatus::Running {
            return Err(ControllerError::Busy);
        }
        let skill = self
            .registry
            .parse(&instruction.text)
            .ok_or_else(|| ControllerError::UnsupportedSkill(instruction.text.clone()))?;
        let draws = self.draw();
        let prof = self.table.get(skill).copied().unwrap_or(Proficiency {
            success_prob: 1.0,
            fault_mix: FaultMix::default(),
        });
        let fault = (draws.success >= prof.success_prob && prof.fault_mix.total() > 0.0)
            .then(|| prof.fault_mix.pick(draws.fault));

        let primitives = compile(world, state, skill, fault);
        let freeze_at = (fault == Some(FaultKind::Freeze) && !primitives.is_empty()).then(|| {
            let n = primitives.len();
            ((draws.freeze_pos * n as f64) as usize).min(n - 1)
        });

        self.queue.clear();
        for (i, p) in primitives.iter().enumerate() {
            if freeze_at == Some(i) {
                for _ in 0..draws.freeze_len {
                    self.queue.push_back(EmittedStep {
                        action: PrimitiveAction::Noop,
                        noise: FaultDraw::Clean,
                    });
                }
            }
            let d = draws.durations[i % draws.durations.len()];
            for _ in 1..d {
                self.queue.push_back(EmittedStep {
                    action: PrimitiveAction::Noop,
                    noise: FaultDraw::Clean,
                });
            }
            self.queue.push_back(p.clone());
        }

        let session = ControllerSession {
            instruction: instruction.clone(),
            plan: primitives.into_iter().map(|p| p.action).collect(),
            status: if self.queue.is_empty() {
                SessionStatus::Finished
            } else {
                SessionStatus::Running
            },
            steps_taken: 0,
            timed_out: false,
            fault,
        };
        self.session = Some(session.clone());
        Ok(session)
    }

    fn step(&mut self) -> Result<ControllerStep, ControllerError> {
        let session = match self.session.as_mut() {
            Some(s) if s.status == SessionStatus::Running => s,
            _ => return Err(ControllerError::NotRunning),
        };
        let next = self.queue.pop_front().unwrap_or(EmittedStep {
            action: PrimitiveAction::Noop,
            noise: FaultDraw::Clean,
        });
        session.steps_taken += 1;
        if self.queue.is_empty() {
            session.status = SessionStatus::Finished;
        } else if session.steps_taken >= self.step_cap {
            session.status = SessionStatus::Finished;
            session.timed_out = true;
            self.queue.clear();
        }
        Ok(ControllerStep {
            action: next.action,
            noise: next.noise,
            status: session.status,
            steps_taken: session.steps_taken,
            timed_out: session.timed_out,
        })
    }

    fn abort(&mut self) {
        if let Some(s) = self.session.as_mut() {
            if s.status == SessionStatus::Running {
                s.status = SessionStatus::Finished;
            }
        }
        self.queue.clear();
    }

    fn session(&self) -> Option<&ControllerSession> {
        self.session.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::world::{eval_predicate, CheckpointPredicate};

    fn instr(text: &str) -> SubInstruction {
        SubInstruction::new(text, 1)
    }

    fn run(vla: &mut ScriptedVla, world: &World, mut state: SceneState) -> (SceneState, u32) {
        let mut steps = 0;
        while vla.status() == SessionStatus::Running {
            let s = vla.step().unwrap();
            state = world.apply_primitive(&state, &s.action, s.noise).0;
            steps += 1;
        }
        (state, steps)
    }

    #[test]
    fn registry_matching_normalizes() {
        let reg = fixtures::reference_registry();
        assert!(reg.parse("put sausage on plate").is_some());
        assert!(reg.parse("  Put   Sausage ON plate ").is_some());
        assert!(reg.parse("put sausage on the plate").is_none());
        assert!(reg.parse("put broccoli on pan").is_none());
        assert!(reg.parse("put shrimp on pan").is_some());
    }

    #[test]
    fn issue_compiles_four_primitives() {
        let world = World::new(fixtures::reference_scene()).unwrap();
        let state = world.reset(42);
        let mut vla = fixtures::reference_vla(42, 120);
        let s = vla.issue(&instr("put sausage on plate"), &world, &state).unwrap();
        assert_eq!(s.status, SessionStatus::Running);
        assert_eq!(s.plan.len(), 4);
        assert!(matches!(s.plan[0], PrimitiveAction::MoveTo(_)));
        assert!(matches!(s.plan[1], PrimitiveAction::Grasp(_)));
        assert!(matches!(s.plan[2], PrimitiveAction::MoveTo(_)));
        assert_eq!(s.plan[3], PrimitiveAction::Release);
    }

    #[test]
    fn abstract_task_is_unsupported() {
        let world = World::new(fixtures::reference_scene()).unwrap();
        let state = world.reset(42);
        let mut vla = fixtures::reference_vla(42, 120);
        for task in fixtures::TASK_TEXTS {
            assert_eq!(
                vla.issue(&instr(task), &world, &state),
                Err(ControllerError::UnsupportedSkill(task.into()))
            );
        }
    }

    #[test]
    fn certain_near_miss_ends_adjacent() {
        let world = World::new(fixtures::reference_scene()).unwrap();
        let state = world.reset(42);
        let reg = fixtures::reference_registry();
        let mut table = ProficiencyTable::uniform(&reg, Proficiency { success_prob: 1.0, fault_mix: FaultMix::default() });
        table.set(
            Skill { kind: Kind::Shrimp, zone: Zone::Plate },
            Proficiency {
                success_prob: 0.0,
                fault_mix: FaultMix { near_miss_place: 1.0, ..Default::default() },
            },
        );
        for seed in 0..20 {
            let mut vla = ScriptedVla::new(reg.clone(), table.clone(), seed, 120);
            let s = vla.issue(&instr("put shrimp on plate"), &world, &state).unwrap();
            assert_eq!(s.fault, Some(FaultKind::NearMissPlace));
            let (end, _) = run(&mut vla, &world, state.clone());
            let shrimp = end.object("shrimp").unwrap();
            assert_eq!(shrimp.zone, Zone::Table);
            assert_eq!(world.region(Zone::Plate).unwrap().distance(shrimp.cell), 1);
        }
    }

    #[test]
    fn clean_run_finishes_at_sum_of_durations() {
        let world = World::new(fixtures::reference_scene()).unwrap();
        let state = world.reset(5);
        let reg = fixtures::reference_registry();
        let table = ProficiencyTable::uniform(&reg, Proficiency { success_prob: 1.0, fault_mix: FaultMix::default() });
        let mut vla = ScriptedVla::new(reg, table, 5, 120);
        // replicate the draw order independently to get the expected total
        let mut oracle = rng::stream(5, "vla", 0);
        let _: f64 = oracle.random();
        let _: f64 = oracle.random();
        let durations: Vec<u32> = (0..5).map(|_| oracle.random_range(3..=8)).collect();
        let expected: u32 = durations[..4].iter().sum();

        vla.issue(&instr("put sausage on plate"), &world, &state).unwrap();
        let (end, steps) = run(&mut vla, &world, state);
        assert_eq!(steps, expected);
        assert!(eval_predicate(&end, &CheckpointPredicate::on(Zone::Plate, Kind::Sausage)).unwrap());
    }

    #[test]
    fn freeze_emits_a_noop_run() {
        let world = World::new(fixtures::reference_scene()).unwrap();
        let state = world.reset(5);
        let reg = fixtures::reference_registry();
        let table = ProficiencyTable::uniform(
            &reg,
            Proficiency { success_prob: 0.0, fault_mix: FaultMix { freeze: 1.0, ..Default::default() } },
        );
        let mut vla = ScriptedVla::new(reg, table, 11, 500);
        let s = vla.issue(&instr("put chips on plate"), &world, &state).unwrap();
        assert_eq!(s.fault, Some(FaultKind::Freeze));
        let mut longest = 0;
        let mut cur = 0;
        while vla.status() == SessionStatus::Running {
            if vla.step().unwrap().action == PrimitiveAction::Noop {
                cur += 1;
                longest = longest.max(cur);
            } else {
                cur = 0;
            }
        }
        assert!(longest >= MIN_FREEZE_STEPS);
    }

    #[test]
    fn abort_mid_grasp_leaves_object() {
        let world = World::new(fixtures::reference_scene()).unwrap();
        let mut state = world.reset(5);
        let mut vla = fixtures::reference_vla(5, 120);
        vla.issue(&instr("put sausage on plate"), &world, &state).unwrap();
        // step until the move has happened but the grasp has not
        loop {
            let s = vla.step().unwrap();
            let moved = matches!(s.action, PrimitiveAction::MoveTo(_));
            state = world.apply_primitive(&state, &s.action, s.noise).0;
            if moved {
                break;
            }
        }
        vla.step().unwrap();
        vla.abort();
        assert_eq!(vla.status(), SessionStatus::Finished);
        assert_eq!(vla.step(), Err(ControllerError::NotRunning));
        assert!(state.gripper.holding.is_none());
        vla.abort();
        assert!(vla.issue(&instr("put broccoli on plate"), &world, &state).is_ok());
    }

    #[test]
    fn abort_idle_is_noop() {
        let mut vla = fixtures::reference_vla(5, 120);
        vla.abort();
        assert_eq!(vla.status(), SessionStatus::Idle);
    }

    #[test]
    fn step_cap_times_out() {
        let world = World::new(fixtures::reference_scene()).unwrap();
        let state = world.reset(5);
        let mut vla = fixtures::reference_vla(5, 4);
        vla.issue(&instr("put sausage on plate"), &world, &state).unwrap();
        let mut last = None;
        while vla.status() == SessionStatus::Running {
            last = Some(vla.step().unwrap());
        }
        let last = last.unwrap();
        assert!(last.timed_out);
        assert_eq!(last.steps_taken, 4);
    }

    #[test]
    fn busy_controller_rejects_issue() {
        let world = World::new(fixtures::reference_scene()).unwrap();
        let state = world.reset(5);
        let mut vla = fixtures::reference_vla(5, 120);
        vla.issue(&instr("put sausage on plate"), &world, &state).unwrap();
        assert_eq!(
            vla.issue(&instr("put chips on plate"), &world, &state),
            Err(ControllerError::Busy)
        );
    }

    #[test]
    fn proficiency_validation() {
        let bad = ProficiencyEntry {
            kind: Kind::Shrimp,
            zone: Zone::Plate,
            success_prob: 0.5,
            fault_mix: FaultMix { near_miss_place: 0.5, ..Default::default() },
        };
        assert!(matches!(
            ProficiencyTable::from_entries([bad]),
            Err(ProficiencyError::BadWeights(_))
        ));
        let t = ProficiencyTable::default();
        assert!(t.covers(&fixtures::reference_registry()).is_err());
        assert!(fixtures::reference_proficiency().covers(&fixtures::reference_registry()).is_ok());
    }
}
