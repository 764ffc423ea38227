//! Verdict verification and the constraint buffer.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, ReflectPayload, RoleClient};
use crate::memory::ShortMemoryRecord;
use crate::monitor::ProgressFlag;
use crate::planner::SubInstruction;
use crate::vla;

pub const DEFAULT_BUFFER_CAPACITY: usize = 64;
pub const DEFAULT_TAIL_CAP: usize = 16;

/// What a reflect backend proposes; the reflector stamps id and step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintDraft {
    pub tag: String,
    pub scope: String,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisualConstraint {
    pub id: String,
    pub tag: String,
    pub scope: String,
    pub text: String,
    pub created_step: u64,
}

/// Scope patterns: `*`, a target kind (`shrimp`), or a full instruction.
pub fn scope_matches(scope: &str, instruction: &SubInstruction) -> bool {
    let scope = vla::normalize(scope);
    if scope == "*" {
        return true;
    }
    if instruction
        .target_kind
        .is_some_and(|k| k.as_str() == scope)
    {
        return true;
    }
    scope == vla::normalize(&instruction.text)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintBuffer {
    constraints: VecDeque<VisualConstraint>,
    capacity: usize,
}

impl Default for ConstraintBuffer {
    fn default() -> Self {
        ConstraintBuffer::with_capacity(DEFAULT_BUFFER_CAPACITY)
    }
}

impl ConstraintBuffer {
    pub fn with_capacity(capacity: usize) -> Self {
        ConstraintBuffer {
            constraints: VecDeque::new(),
            capacity: capacity.max(1),
        }
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &VisualConstraint> {
        self.constraints.iter()
    }

    pub fn contains(&self, tag: &str, scope: &str) -> bool {
        self.constraints
            .iter()
            .any(|c| c.tag == tag && c.scope == scope)
    }

    /// Returns whether the constraint was inserted (duplicates are ignored).
    pub fn add(&mut self, c: VisualConstraint) -> bool {
        if self.contains(&c.tag, &c.scope) {
            return false;
        }
        self.constraints.push_back(c);
        while self.constraints.len() > self.capacity {
            self.constraints.pop_front();
        }
        true
    }
}

/// Constraints whose scope matches the instruction, in insertion order.
pub fn relevant(buffer: &ConstraintBuffer, instruction: &SubInstruction) -> Vec<VisualConstraint> {
    buffer
        .iter()
        .filter(|c| scope_matches(&c.scope, instruction))
        .cloned()
        .collect()
}

#[derive(Clone, Debug)]
pub struct Reflector {
    pub tail_cap: usize,
    next_id: u32,
}

impl Default for Reflector {
    fn default() -> Self {
        Reflector {
            tail_cap: DEFAULT_TAIL_CAP,
            next_id: 1,
        }
    }
}

impl Reflector {
    pub fn new(tail_cap: usize) -> Self {
        Reflector { tail_cap, next_id: 1 }
    }

    /// `records` are the episode's records in seq order, ending with the one
    /// for the verdict under review.
    pub fn reflect(
        &mut self,
        client: &mut RoleClient<'_>,
        records: &[ShortMemoryRecord],
        ground_truth: Option<ProgressFlag>,
    ) -> Result<Option<VisualConstraint>, BackendError> {
        let Some(newest) = records.last() else {
            return Ok(None);
        };
        let step = newest.verdict.step_index;
        let tail: Vec<ShortMemoryRecord> = records.iter().rev().take(self.tail_cap).cloned().collect();
        let draft = client.reflect(
            ReflectPayload {
                short_memory_tail: tail,
                ground_truth_hint: ground_truth,
            },
            step,
        )?;
        Ok(draft.map(|d| {
            let id = format!("c{}", self.next_id);
            self.next_id += 1;
            VisualConstraint {
                id,
                tag: d.tag,
                scope: d.scope,
                text: d.text,
                created_step: step,
            }
        }))
    }
}

pub fn constraint_id(c: &Option<VisualConstraint>) -> Option<String> {
    c.as_ref().map(|c| c.id.clone())
}
