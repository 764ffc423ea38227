//! Progress curves and their normalized area.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::events::{Event, EventLogRecord};
use crate::memory::EpisodeId;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CurveError {
    #[error("event log has a gap: expected seq {expected}, found {got}")]
    SeqGap { expected: u64, got: u64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("episode {0} was opened but never closed")]
    Unclosed(EpisodeId),
    #[error("stage `{0}` completed twice")]
    DuplicateStage(String),
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub elapsed: u64,
    pub progress: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgressCurve {
    pub stages_total: usize,
    pub t_max: u64,
    /// One point per stage latch, in order.
    pub points: Vec<CurvePoint>,
    pub auc: f64,
}

/// Mean of the step function `progress(t)` over `t = 1..=t_max`, where
/// `progress(t)` is the fraction of stages latched at or before `t`.
pub fn auc(latch_times: &[u64], stages_total: usize, t_max: u64) -> f64 {
    if stages_total == 0 || t_max == 0 {
        return 0.0;
    }
    let covered: u64 = latch_times
        .iter()
        .filter(|e| **e <= t_max)
        .map(|e| t_max + 1 - (*e).max(1))
        .sum();
    covered as f64 / (stages_total as f64 * t_max as f64)
}

/// Validate a log and build its progress curve.
pub fn compute_curve(
    records: &[EventLogRecord],
    stages_total: usize,
    t_max: u64,
) -> Result<ProgressCurve, CurveError> {
    let mut open: BTreeMap<EpisodeId, bool> = BTreeMap::new();
    let mut latched: Vec<(String, u64)> = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        let expected = i as u64 + 1;
        if rec.seq != expected {
            return Err(CurveError::SeqGap { expected, got: rec.seq });
        }
        match &rec.event {
            Event::EpisodeOpen(e) => {
                open.insert(e.episode_id, true);
            }
            Event::EpisodeClose(e) => {
                open.insert(e.episode_id, false);
            }
            Event::StageComplete(s) => {
                if latched.iter().any(|(id, _)| *id == s.stage_id) {
                    return Err(CurveError::DuplicateStage(s.stage_id.clone()));
                }
                latched.push((s.stage_id.clone(), s.elapsed));
            }
            _ => {}
        }
    }
    if let Some((id, _)) = open.iter().find(|(_, o)| **o) {
        return Err(CurveError::Unclosed(*id));
    }
    let times: Vec<u64> = latched.iter().map(|(_, t)| *t).collect();
    let points = times
        .iter()
        .enumerate()
        .map(|(i, t)| CurvePoint {
            elapsed: (*t).min(t_max),
            progress: (i + 1) as f64 / stages_total.max(1) as f64,
        })
        .collect();
    Ok(ProgressCurve {
        stages_total,
        t_max,
        points,
        auc: auc(&times, stages_total, t_max),
    })
}

/// Parse a JSON-lines event log, then [`compute_curve`].
pub fn curve_from_jsonl(text: &str, stages_total: usize, t_max: u64) -> Result<ProgressCurve, CurveError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: EventLogRecord = serde_json::from_str(line).map_err(|e| CurveError::Parse {
            line: i + 1,
            message: alloc::format!("{e}"),
        })?;
        records.push(rec);
    }
    compute_curve(&records, stages_total, t_max)
}
