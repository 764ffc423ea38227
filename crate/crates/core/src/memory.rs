//! Short memory (per-episode window records), long memory (one record per
//! closed episode) and the line formats used to persist them.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::monitor::{MonitorVerdict, ProgressFlag};
use crate::planner::SubInstruction;
use crate::reflector::VisualConstraint;
use crate::world::Frame;

pub type EpisodeId = u32;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EpisodeOutcome {
    Done,
    Failed,
    Timeout,
}

impl fmt::Display for EpisodeOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EpisodeOutcome::Done => "DONE",
            EpisodeOutcome::Failed => "FAILED",
            EpisodeOutcome::Timeout => "TIMEOUT",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShortMemoryRecord {
    pub episode_id: EpisodeId,
    pub seq: u32,
    pub frame_now: Frame,
    pub frame_prev: Frame,
    pub instruction: SubInstruction,
    pub verdict: MonitorVerdict,
    pub constraint: Option<VisualConstraint>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LongMemoryRecord {
    pub episode_id: EpisodeId,
    pub o_init: Frame,
    pub o_final: Frame,
    pub instruction: SubInstruction,
    pub summary: String,
    pub failure_count: u32,
    pub outcome: EpisodeOutcome,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub summary: String,
    pub failure_count: u32,
}

/// On-disk shape of a short-memory record: flag and constraint id at the
/// top level for grepping, the full verdict and constraint alongside.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShortMemoryLine {
    pub episode_id: EpisodeId,
    pub seq: u32,
    pub instruction: SubInstruction,
    pub flag: ProgressFlag,
    pub constraint_id: Option<String>,
    pub verdict: MonitorVerdict,
    pub constraint: Option<VisualConstraint>,
    pub frame_prev: Frame,
    pub frame_now: Frame,
}

impl From<&ShortMemoryRecord> for ShortMemoryLine {
    fn from(r: &ShortMemoryRecord) -> Self {
        ShortMemoryLine {
            episode_id: r.episode_id,
            seq: r.seq,
            instruction: r.instruction.clone(),
            flag: r.verdict.flag,
            constraint_id: r.constraint.as_ref().map(|c| c.id.clone()),
            verdict: r.verdict.clone(),
            constraint: r.constraint.clone(),
            frame_prev: r.frame_prev.clone(),
            frame_now: r.frame_now.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MemoryError {
    #[error("episode {0} is closed")]
    EpisodeClosed(EpisodeId),
    #[error("episode {0} is unknown")]
    UnknownEpisode(EpisodeId),
    #[error("episode {0} is already open")]
    AlreadyOpen(EpisodeId),
    #[error("episode {episode}: expected seq {expected}, got {got}")]
    SequenceError {
        episode: EpisodeId,
        expected: u32,
        got: u32,
    },
    #[error("record {seq} of episode {episode} already has a constraint")]
    ConstraintSet { episode: EpisodeId, seq: u32 },
    #[error("short-memory line disagrees with itself: {0}")]
    Inconsistent(String),
}

impl TryFrom<ShortMemoryLine> for ShortMemoryRecord {
    type Error = MemoryError;
    fn try_from(l: ShortMemoryLine) -> Result<Self, MemoryError> {
        if l.flag != l.verdict.flag {
            return Err(MemoryError::Inconsistent(alloc::format!(
                "flag {} vs verdict {}",
                l.flag,
                l.verdict.flag
            )));
        }
        if l.constraint_id != l.constraint.as_ref().map(|c| c.id.clone()) {
            return Err(MemoryError::Inconsistent("constraint_id".into()));
        }
        Ok(ShortMemoryRecord {
            episode_id: l.episode_id,
            seq: l.seq,
            frame_now: l.frame_now,
            frame_prev: l.frame_prev,
            instruction: l.instruction,
            verdict: l.verdict,
            constraint: l.constraint,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeMemory {
    pub instruction: SubInstruction,
    pub open_frame: Frame,
    pub records: Vec<ShortMemoryRecord>,
    pub closed: bool,
}

/// Both stores for one task run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MemoryStore {
    episodes: BTreeMap<EpisodeId, EpisodeMemory>,
    long: Vec<LongMemoryRecord>,
}

/// The summary template used by scripted summarization and as the local
/// fallback when a remote summarizer is unavailable.
pub fn template_summary(records: &[ShortMemoryRecord], outcome: EpisodeOutcome) -> EpisodeSummary {
    let Some(first) = records.first() else {
        return EpisodeSummary {
            summary: "no steps recorded".into(),
            failure_count: 0,
        };
    };
    let fails = records
        .iter()
        .filter(|r| r.verdict.flag == ProgressFlag::Failure)
        .count() as u32;
    let constraints = records.iter().filter(|r| r.constraint.is_some()).count();
    EpisodeSummary {
        summary: alloc::format!(
            "instruction {}: {} windows, {} FAILURE, {} constraints, outcome {}",
            first.instruction.text,
            records.len(),
            fails,
            constraints,
            outcome
        ),
        failure_count: fails,
    }
}

impl MemoryStore {
    pub fn open_episode(
        &mut self,
        id: EpisodeId,
        instruction: SubInstruction,
        open_frame: Frame,
    ) -> Result<(), MemoryError> {
        if self.episodes.contains_key(&id) {
            return Err(MemoryError::AlreadyOpen(id));
        }
        self.episodes.insert(
            id,
            EpisodeMemory {
                instruction,
                open_frame,
                records: Vec::new(),
                closed: false,
            },
        );
        Ok(())
    }

    fn open_mut(&mut self, id: EpisodeId) -> Result<&mut EpisodeMemory, MemoryError> {
        let ep = self
            .episodes
            .get_mut(&id)
            .ok_or(MemoryError::UnknownEpisode(id))?;
        if ep.closed {
            return Err(MemoryError::EpisodeClosed(id));
        }
        Ok(ep)
    }

    pub fn next_seq(&self, id: EpisodeId) -> u32 {
        self.episodes
            .get(&id)
            .and_then(|e| e.records.last())
            .map_or(1, |r| r.seq + 1)
    }

    pub fn append_step(&mut self, id: EpisodeId, record: ShortMemoryRecord) -> Result<(), MemoryError> {
        let expected = self.next_seq(id);
        let ep = self.open_mut(id)?;
        if record.seq != expected {
            return Err(MemoryError::SequenceError {
                episode: id,
                expected,
                got: record.seq,
            });
        }
        ep.records.push(record);
        Ok(())
    }

    /// Set the reflection output of a record. Each record takes at most one.
    pub fn attach_constraint(
        &mut self,
        id: EpisodeId,
        seq: u32,
        c: VisualConstraint,
    ) -> Result<(), MemoryError> {
        let ep = self.open_mut(id)?;
        let rec = ep
            .records
            .iter_mut()
            .find(|r| r.seq == seq)
            .ok_or(MemoryError::SequenceError {
                episode: id,
                expected: seq,
                got: seq,
            })?;
        if rec.constraint.is_some() {
            return Err(MemoryError::ConstraintSet { episode: id, seq });
        }
        rec.constraint = Some(c);
        Ok(())
    }

    /// Close an episode and write its long-memory record. `o_init` is the
    /// first window's older frame and `o_final` the last window's newer
    /// frame; an episode without windows uses the open and close frames.
    pub fn close_episode(
        &mut self,
        id: EpisodeId,
        outcome: EpisodeOutcome,
        close_frame: Frame,
        summarize: &mut dyn FnMut(&[ShortMemoryRecord], EpisodeOutcome) -> EpisodeSummary,
    ) -> Result<LongMemoryRecord, MemoryError> {
        let ep = self.open_mut(id)?;
        let summary = summarize(&ep.records, outcome);
        let (o_init, o_final) = match (ep.records.first(), ep.records.last()) {
            (Some(a), Some(b)) => (a.frame_prev.clone(), b.frame_now.clone()),
            _ => (ep.open_frame.clone(), close_frame),
        };
        ep.closed = true;
        let rec = LongMemoryRecord {
            episode_id: id,
            o_init,
            o_final,
            instruction: ep.instruction.clone(),
            summary: summary.summary,
            failure_count: summary.failure_count,
            outcome,
        };
        self.long.push(rec.clone());
        Ok(rec)
    }

    pub fn episode(&self, id: EpisodeId) -> Option<&EpisodeMemory> {
        self.episodes.get(&id)
    }

    pub fn records(&self, id: EpisodeId) -> &[ShortMemoryRecord] {
        self.episodes.get(&id).map_or(&[], |e| &e.records)
    }

    pub fn episodes(&self) -> impl Iterator<Item = (EpisodeId, &EpisodeMemory)> {
        self.episodes.iter().map(|(k, v)| (*k, v))
    }

    pub fn long(&self) -> &[LongMemoryRecord] {
        &self.long
    }

    pub fn open_ids(&self) -> Vec<EpisodeId> {
        self.episodes
            .iter()
            .filter(|(_, e)| !e.closed)
            .map(|(k, _)| *k)
            .collect()
    }

    /// Every short-memory record of every episode, by episode then seq.
    pub fn short_lines(&self) -> Vec<ShortMemoryLine> {
        self.episodes
            .values()
            .flat_map(|e| e.records.iter().map(ShortMemoryLine::from))
            .collect()
    }

    /// Rebuild both stores from persisted lines. Episodes are marked closed
    /// when a long-memory record exists for them.
    pub fn from_lines(
        short: Vec<ShortMemoryLine>,
        long: Vec<LongMemoryRecord>,
    ) -> Result<MemoryStore, MemoryError> {
        let mut store = MemoryStore::default();
        for rec in &long {
            store.episodes.insert(
                rec.episode_id,
                EpisodeMemory {
                    instruction: rec.instruction.clone(),
                    open_frame: rec.o_init.clone(),
                    records: Vec::new(),
                    closed: false,
                },
            );
        }
        for line in short {
            let rec = ShortMemoryRecord::try_from(line)?;
            let id = rec.episode_id;
            let ep = store.episodes.entry(id).or_insert_with(|| EpisodeMemory {
                instruction: rec.instruction.clone(),
                open_frame: rec.frame_prev.clone(),
                records: Vec::new(),
                closed: false,
            });
            let expected = ep.records.last().map_or(1, |r| r.seq + 1);
            if rec.seq != expected {
                return Err(MemoryError::SequenceError {
                    episode: id,
                    expected,
                    got: rec.seq,
                });
            }
            ep.records.push(rec);
        }
        for rec in &long {
            if let Some(ep) = store.episodes.get_mut(&rec.episode_id) {
                ep.closed = true;
            }
        }
        store.long = long;
        Ok(store)
    }

    /// Equality of persisted content, ignoring the open frames of episodes
    /// that only exist in memory.
    pub fn same_content(&self, other: &MemoryStore) -> bool {
        self.short_lines() == other.short_lines() && self.long == other.long
    }
}
