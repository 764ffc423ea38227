//! Frame ring, window emission and verdict production.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, MonitorPayload, RoleClient};
use crate::planner::SubInstruction;
use crate::reflector::{self, ConstraintBuffer};
use crate::world::{CameraId, Frame};

pub const BACKEND_UNAVAILABLE: &str = "backend_unavailable";

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProgressFlag {
    Hinder,
    Ongoing,
    Failure,
    Done,
}

impl ProgressFlag {
    pub const ALL: [ProgressFlag; 4] = [
        ProgressFlag::Hinder,
        ProgressFlag::Ongoing,
        ProgressFlag::Failure,
        ProgressFlag::Done,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProgressFlag::Hinder => "HINDER",
            ProgressFlag::Ongoing => "ONGOING",
            ProgressFlag::Failure => "FAILURE",
            ProgressFlag::Done => "DONE",
        }
    }

    pub fn parse(s: &str) -> Option<ProgressFlag> {
        ProgressFlag::ALL.into_iter().find(|f| f.as_str() == s)
    }
}

impl fmt::Display for ProgressFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_h() -> u64 {
    10
}

fn default_patience() -> u32 {
    3
}

fn default_camera() -> CameraId {
    CameraId::Top
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorConfig {
    #[serde(default = "default_h")]
    pub h: u64,
    #[serde(default = "default_patience")]
    pub patience: u32,
    #[serde(default = "default_camera")]
    pub camera: CameraId,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            h: default_h(),
            patience: default_patience(),
            camera: default_camera(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameWindow {
    pub prev: Frame,
    pub now: Frame,
}

impl FrameWindow {
    pub fn is_static(&self) -> bool {
        !self.now.differs_from(&self.prev)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitorVerdict {
    pub flag: ProgressFlag,
    /// World step of the window's newer frame.
    pub step_index: u64,
    pub rationale: String,
    pub constraints_used: Vec<String>,
    /// Backtrack generation the window belongs to; orders verdicts together
    /// with `step_index` because restores rewind the world clock.
    #[serde(default)]
    pub generation: u32,
}

impl MonitorVerdict {
    pub fn order_key(&self) -> (u32, u64) {
        (self.generation, self.step_index)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum FrameOrderError {
    #[error("frame at step {got} does not follow step {last}")]
    OutOfOrder { last: u64, got: u64 },
    #[error("frame from camera {got:?} pushed into a {expected:?} ring")]
    WrongCamera { expected: CameraId, got: CameraId },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
struct WindowMark {
    is_static: bool,
    flag: ProgressFlag,
}

/// Count trailing windows that were static and not flagged DONE/FAILURE.
pub fn no_progress_streak<'a>(history: impl DoubleEndedIterator<Item = (&'a FrameWindow, ProgressFlag)>) -> u32 {
    history
        .rev()
        .take_while(|(w, f)| w.is_static() && !matches!(f, ProgressFlag::Done | ProgressFlag::Failure))
        .count() as u32
}

#[derive(Clone, Debug)]
pub struct Monitor {
    config: MonitorConfig,
    ring: VecDeque<Frame>,
    marks: Vec<WindowMark>,
}

impl Monitor {
    pub fn new(config: MonitorConfig) -> Self {
        Monitor {
            config,
            ring: VecDeque::new(),
            marks: Vec::new(),
        }
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.config
    }

    /// Drop buffered frames and the no-progress history.
    pub fn reset(&mut self) {
        self.ring.clear();
        self.marks.clear();
    }

    pub fn push_frame(&mut self, frame: Frame) -> Result<Option<FrameWindow>, FrameOrderError> {
        if frame.camera_id != self.config.camera {
            return Err(FrameOrderError::WrongCamera {
                expected: self.config.camera,
                got: frame.camera_id,
            });
        }
        if let Some(last) = self.ring.back() {
            if frame.step_index <= last.step_index {
                return Err(FrameOrderError::OutOfOrder {
                    last: last.step_index,
                    got: frame.step_index,
                });
            }
        }
        let h = self.config.h;
        let now = frame.step_index;
        while self
            .ring
            .front()
            .is_some_and(|f| f.step_index + h < now)
        {
            self.ring.pop_front();
        }
        self.ring.push_back(frame.clone());
        if !now.is_multiple_of(h) || now < h {
            return Ok(None);
        }
        let prev = self.ring.iter().find(|f| f.step_index == now - h).cloned();
        Ok(prev.map(|prev| FrameWindow { prev, now: frame }))
    }

    /// Current no-progress streak over evaluated windows.
    pub fn streak(&self) -> u32 {
        self.marks
            .iter()
            .rev()
            .take_while(|m| m.is_static && !matches!(m.flag, ProgressFlag::Done | ProgressFlag::Failure))
            .count() as u32
    }

    /// Evaluate a window against the relevant constraints. Never fails:
    /// backend trouble degrades to ONGOING.
    pub fn evaluate(
        &mut self,
        client: &mut RoleClient<'_>,
        window: &FrameWindow,
        instruction: &SubInstruction,
        buffer: &ConstraintBuffer,
        generation: u32,
    ) -> (MonitorVerdict, Option<BackendError>) {
        let relevant = reflector::relevant(buffer, instruction);
        let constraints_used = relevant.iter().map(|c| c.id.clone()).collect();
        let payload = MonitorPayload {
            frame_now: window.now.clone(),
            frame_prev: window.prev.clone(),
            instruction: instruction.clone(),
            constraints: relevant,
        };
        let (mut flag, mut rationale, err) = match client.monitor(payload, window.now.step_index) {
            Ok(r) => (r.flag, r.rationale, None),
            Err(BackendError::Parse { raw, .. }) => (
                ProgressFlag::Ongoing,
                format!("parse_error: {raw}"),
                Some(BackendError::Parse { role: crate::backend::Role::Monitor, raw }),
            ),
            Err(e) => (ProgressFlag::Ongoing, BACKEND_UNAVAILABLE.to_string(), Some(e)),
        };
        let is_static = window.is_static();
        if flag == ProgressFlag::Ongoing && is_static && self.streak() + 1 >= self.config.patience {
            flag = ProgressFlag::Hinder;
            rationale = format!("no progress for {} windows", self.streak() + 1);
        }
        self.marks.push(WindowMark { is_static, flag });
        (
            MonitorVerdict {
                flag,
                step_index: window.now.step_index,
                rationale,
                constraints_used,
                generation,
            },
            err,
        )
    }

    /// Second look after a HINDER using other views. A window that is still
    /// static keeps the patience escalation.
    pub fn reevaluate(
        &mut self,
        client: &mut RoleClient<'_>,
        window: &FrameWindow,
        instruction: &SubInstruction,
        buffer: &ConstraintBuffer,
        generation: u32,
    ) -> MonitorVerdict {
        let relevant = reflector::relevant(buffer, instruction);
        let constraints_used = relevant.iter().map(|c| c.id.clone()).collect();
        let payload = MonitorPayload {
            frame_now: window.now.clone(),
            frame_prev: window.prev.clone(),
            instruction: instruction.clone(),
            constraints: relevant,
        };
        let (mut flag, mut rationale) = match client.monitor(payload, window.now.step_index) {
            Ok(r) => (r.flag, r.rationale),
            Err(_) => (ProgressFlag::Ongoing, BACKEND_UNAVAILABLE.to_string()),
        };
        if flag == ProgressFlag::Ongoing && window.is_static() && self.streak() >= self.config.patience {
            flag = ProgressFlag::Hinder;
            rationale = format!("still no progress after {} windows", self.streak());
        }
        MonitorVerdict {
            flag,
            step_index: window.now.step_index,
            rationale,
            constraints_used,
            generation,
        }
    }
}
