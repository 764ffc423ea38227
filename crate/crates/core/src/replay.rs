//! Re-simulate an event log and check every recorded observation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::events::{Event, EventLogRecord};
use crate::toolbox::ToolStatus;
use crate::world::{CameraId, SceneState, World};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("replay diverged at seq {seq}: {reason}")]
pub struct ReplayMismatch {
    pub seq: u64,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReplayReport {
    pub records: u64,
    pub frames: u64,
    pub restores: u64,
    pub mismatches: u64,
    pub final_state: Option<SceneState>,
}

fn mismatch(seq: u64, reason: impl Into<String>) -> ReplayMismatch {
    ReplayMismatch {
        seq,
        reason: reason.into(),
    }
}

/// Replays records up to and including `until`. The first frame must carry
/// the full state; each later frame is reproduced from its action and noise,
/// and each successful backtrack must land on a state seen earlier.
pub fn replay(world: &World, records: &[EventLogRecord], until: Option<u64>) -> Result<ReplayReport, ReplayMismatch> {
    walk(world, records, until, &mut |_, _| {})
}

/// The reproduced world state behind every frame record, by seq.
pub fn frame_states(world: &World, records: &[EventLogRecord]) -> Result<Vec<(u64, SceneState)>, ReplayMismatch> {
    let mut out = Vec::new();
    walk(world, records, None, &mut |seq, s| out.push((seq, s.clone())))?;
    Ok(out)
}

fn walk(
    world: &World,
    records: &[EventLogRecord],
    until: Option<u64>,
    on_frame: &mut dyn FnMut(u64, &SceneState),
) -> Result<ReplayReport, ReplayMismatch> {
    let mut report = ReplayReport::default();
    let mut state: Option<SceneState> = None;
    let mut seen: Vec<SceneState> = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        if until.is_some_and(|u| rec.seq > u) {
            break;
        }
        if rec.seq != i as u64 + 1 {
            return Err(mismatch(rec.seq, format!("expected seq {}", i + 1)));
        }
        report.records += 1;
        match &rec.event {
            Event::Frame(f) => {
                report.frames += 1;
                let next = match (&f.action, &state) {
                    (None, _) => f
                        .state
                        .clone()
                        .ok_or_else(|| mismatch(rec.seq, "observation frame without state"))?,
                    (Some(action), Some(cur)) => {
                        let (next, outcome) = world.apply_primitive(cur, action, f.noise);
                        if f.outcome.as_ref() != Some(&outcome) {
                            return Err(mismatch(rec.seq, "step outcome differs"));
                        }
                        next
                    }
                    (Some(_), None) => return Err(mismatch(rec.seq, "step before the initial state")),
                };
                if world.render(&next, f.frame.camera_id) != f.frame {
                    return Err(mismatch(rec.seq, "rendered frame differs"));
                }
                if f.frame.camera_id != CameraId::Top && f.state.is_some() {
                    return Err(mismatch(rec.seq, "state attached to a non-top frame"));
                }
                on_frame(rec.seq, &next);
                seen.push(next.clone());
                state = Some(next);
            }
            Event::ToolResult(r) if r.name == "backtrack" && r.status == ToolStatus::Ok => {
                let restored: SceneState = serde_json::from_value(r.payload["state"].clone())
                    .map_err(|e| mismatch(rec.seq, format!("backtrack payload: {e}")))?;
                if !seen.contains(&restored) {
                    return Err(mismatch(rec.seq, "restored state was never observed"));
                }
                report.restores += 1;
                state = Some(restored);
            }
            _ => {}
        }
    }
    report.final_state = state;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ScriptedBackend;
    use crate::events::{LogicalClock, NullSink};
    use crate::fixtures;
    use crate::orchestrator::{run_task, AgentConfig, LatencySchedule, Mode, RunEnv, ScriptedHuman, SilentOperator};
    use crate::world::{FaultDraw, PrimitiveAction};

    fn log(seed: u64) -> (World, Vec<EventLogRecord>) {
        let world = World::new(fixtures::reference_scene()).unwrap();
        let mut vla = fixtures::reference_vla(seed, 120);
        let backend = ScriptedBackend::reference(seed);
        let env = RunEnv {
            world: world.clone(),
            initial: world.reset(seed),
            registry: fixtures::reference_registry(),
            nutrients: fixtures::nutrient_table(),
            controller: &mut vla,
            backend: &backend,
            human: &mut ScriptedHuman::default(),
            operator: &mut SilentOperator,
            sink: &mut NullSink,
            clock: &LogicalClock,
            latency: LatencySchedule::Sync,
        };
        let out = run_task(&fixtures::protein_task(), Mode::Agent, &AgentConfig::default(), seed, env).unwrap();
        (world, out.events)
    }

    #[test]
    fn synchronous_run_replays_clean() {
        let (w, events) = log(42);
        let r = replay(&w, &events, None).unwrap();
        assert_eq!(r.records, events.len() as u64);
        assert_eq!(r.mismatches, 0);
        assert!(r.frames > 10);
    }

    #[test]
    fn until_stops_midway() {
        let (w, events) = log(43);
        let r = replay(&w, &events, Some(40)).unwrap();
        assert_eq!(r.records, 40);
    }

    #[test]
    fn tampered_frame_names_its_seq() {
        let (w, mut events) = log(42);
        let rec = events
            .iter_mut()
            .find(|r| matches!(&r.event, Event::Frame(f) if matches!(f.action, Some(PrimitiveAction::Release))))
            .unwrap();
        let seq = rec.seq;
        if let Event::Frame(f) = &mut rec.event {
            f.noise = match f.noise {
                FaultDraw::NearMissPlace => FaultDraw::Clean,
                _ => FaultDraw::NearMissPlace,
            };
        }
        assert_eq!(replay(&w, &events, None).unwrap_err().seq, seq);
        assert!(replay(&w, &events, Some(seq - 1)).is_ok());
    }

    #[test]
    fn seq_gap_is_a_mismatch() {
        let (w, mut events) = log(42);
        events.remove(5);
        assert_eq!(replay(&w, &events, None).unwrap_err().seq, 7);
    }
}
