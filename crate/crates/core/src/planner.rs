//! Planner-side logic: task and sub-instruction types, long-memory retrieval
//! and validation of what the plan backend proposes.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, PlanNext, PlanPayload, RoleClient};
use crate::memory::LongMemoryRecord;
use crate::toolbox::ToolSpec;
use crate::vla::{self, Skill, SkillRegistry};
use crate::world::{CheckpointPredicate, Frame, Kind};

pub const DEFAULT_RETRIEVAL_CAP: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub id: String,
    pub predicate: CheckpointPredicate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRequest {
    pub text: String,
    pub stages: Vec<Stage>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TaskError {
    #[error("task has no stages")]
    NoStages,
    #[error("duplicate stage id `{0}`")]
    DuplicateStage(String),
}

impl TaskRequest {
    pub fn validate(&self) -> Result<(), TaskError> {
        if self.stages.is_empty() {
            return Err(TaskError::NoStages);
        }
        for (i, s) in self.stages.iter().enumerate() {
            if self.stages[..i].iter().any(|o| o.id == s.id) {
                return Err(TaskError::DuplicateStage(s.id.clone()));
            }
        }
        Ok(())
    }
}

/// An intermediate instruction handed to the controller.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubInstruction {
    pub text: String,
    pub index: u32,
    #[serde(default)]
    pub target_kind: Option<Kind>,
}

impl SubInstruction {
    pub fn new(text: impl Into<String>, index: u32) -> Self {
        let text = text.into();
        let target_kind = vla::parse_template(&text).map(|s| s.kind);
        SubInstruction {
            text,
            index,
            target_kind,
        }
    }

    pub fn skill(&self) -> Option<Skill> {
        vla::parse_template(&self.text)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanContext {
    pub frame: Frame,
    pub completed: Vec<SubInstruction>,
    pub retrieved: Vec<LongMemoryRecord>,
}

impl PlanContext {
    /// Append once; duplicates (same text) leave the list unchanged.
    pub fn mark_completed(mut self, instruction: &SubInstruction) -> Self {
        mark_completed(&mut self.completed, instruction);
        self
    }
}

pub fn mark_completed(completed: &mut Vec<SubInstruction>, instruction: &SubInstruction) {
    if !completed.iter().any(|c| c.text == instruction.text) {
        completed.push(instruction.clone());
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NutrientEntry {
    pub keyword: String,
    pub items: Vec<Skill>,
}

/// Maps task phrasings (by keyword) to the items that satisfy them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NutrientTable {
    pub entries: Vec<NutrientEntry>,
}

impl NutrientTable {
    pub fn lookup(&self, task: &str) -> Option<&[Skill]> {
        let norm = vla::normalize(task);
        self.entries
            .iter()
            .find(|e| norm.contains(&vla::normalize(&e.keyword)))
            .map(|e| e.items.as_slice())
    }

    pub fn kinds_for(&self, task: &str) -> Vec<Kind> {
        self.lookup(task)
            .map(|items| items.iter().map(|s| s.kind).collect())
            .unwrap_or_default()
    }
}

/// Long-memory records relevant to the task: the instruction's target kind
/// is among the task's items. Newest first, at most `cap`.
pub fn retrieve_long(
    task: &TaskRequest,
    table: &NutrientTable,
    store: &[LongMemoryRecord],
    cap: usize,
) -> Vec<LongMemoryRecord> {
    let kinds = table.kinds_for(&task.text);
    store
        .iter()
        .rev()
        .filter(|r| r.instruction.target_kind.is_some_and(|k| kinds.contains(&k)))
        .take(cap)
        .cloned()
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("planner proposed unsupported instructions: {0:?}")]
    Rejected(Vec<String>),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// What one `next_instruction` call did, for the event log.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanAttempt {
    pub next: Option<SubInstruction>,
    pub rejected: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Planner {
    pub registry: SkillRegistry,
    pub table: NutrientTable,
    pub retrieval_cap: usize,
    next_index: u32,
}

pub struct PlanInputs<'a> {
    pub task: &'a TaskRequest,
    pub ctx: &'a PlanContext,
    pub hints: &'a [String],
    pub tools: &'a [ToolSpec],
    pub step_index: u64,
}

impl Planner {
    pub fn new(registry: SkillRegistry, table: NutrientTable) -> Self {
        Planner {
            registry,
            table,
            retrieval_cap: DEFAULT_RETRIEVAL_CAP,
            next_index: 1,
        }
    }

    pub fn context(
        &self,
        task: &TaskRequest,
        frame: Frame,
        completed: &[SubInstruction],
        store: &[LongMemoryRecord],
    ) -> PlanContext {
        PlanContext {
            frame,
            completed: completed.to_vec(),
            retrieved: retrieve_long(task, &self.table, store, self.retrieval_cap),
        }
    }

    /// Ask the plan backend for the next instruction. An unregistered answer
    /// is re-queried once with the rejection noted; a second one fails with
    /// [`PlanError::Rejected`].
    pub fn next_instruction(
        &mut self,
        client: &mut RoleClient<'_>,
        inputs: &PlanInputs<'_>,
    ) -> Result<PlanAttempt, (PlanError, Vec<String>)> {
        let mut rejected = Vec::new();
        for _ in 0..2 {
            let payload = PlanPayload {
                task: inputs.task.text.clone(),
                completed: inputs.ctx.completed.clone(),
                frame: inputs.ctx.frame.clone(),
                long_memory: inputs.ctx.retrieved.clone(),
                hints: inputs.hints.to_vec(),
                rejected: rejected.clone(),
                tools: inputs.tools.to_vec(),
            };
            let next = client
                .plan(payload, inputs.step_index)
                .map_err(|e| (PlanError::Backend(e), rejected.clone()))?;
            match next {
                PlanNext::Terminal => {
                    return Ok(PlanAttempt {
                        next: None,
                        rejected,
                    })
                }
                PlanNext::Instruction(text) => match self.registry.parse(&text) {
                    Some(skill) => {
                        let instr = SubInstruction::new(skill.text(), self.next_index);
                        self.next_index += 1;
                        return Ok(PlanAttempt {
                            next: Some(instr),
                            rejected,
                        });
                    }
                    None => rejected.push(text),
                },
            }
        }
        Err((PlanError::Rejected(rejected.clone()), rejected))
    }
}
