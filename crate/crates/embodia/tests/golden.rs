//! Golden wire fixtures. `EMBODIA_BLESS=1 cargo test -p embodia --test golden
//! -- --ignored` rewrites them from fresh synchronous runs.

use std::collections::BTreeMap;
use std::sync::Mutex;

use embodia::gateway::{AnswerAccepted, ErrorBody, Gateway, PromptQueued, RunInfo, TextBody};
use embodia::harness::AggregateRow;
use embodia::remote_backend::request_body;
use embodia::remote_controller::{handle_request, ControllerRequest};
use embodia_core::backend::{Backend, BackendError, BackendRequest, BackendResponse, ScriptedBackend};
use embodia_core::events::{Event, EventLogRecord, LogicalClock, NullSink, Question};
use embodia_core::fixtures;
use embodia_core::orchestrator::{run_task, AgentConfig, LatencySchedule, Mode, RunEnv, RunOutput, ScriptedHuman, ScriptedOperator};
use embodia_core::planner::{SubInstruction, TaskRequest};
use embodia_core::prompt::canonical_format;
use embodia_core::world::World;

#[path = "support/golden.rs"]
mod golden;

#[test]
fn committed_golden_files_round_trip() {
    let results = golden::check_all();
    assert!(results.len() >= 30, "only {} golden files", results.len());
    for (name, r) in &results {
        if let Err(e) = r {
            panic!("{name}: {e}");
        }
    }
}

#[test]
fn tampered_golden_is_caught() {
    let text = std::fs::read_to_string(golden::dir().join("controller_request__step.json")).unwrap();
    assert_eq!(golden::reencode("controller_request", "step", &text).unwrap(), text);
    let bad = text.replace("\"step\"", "\"stop\"");
    assert!(golden::reencode("controller_request", "step", &bad).is_err());
}

struct Recorder<'a> {
    inner: &'a dyn Backend,
    calls: Mutex<Vec<(BackendRequest, BackendResponse)>>,
}

impl Backend for Recorder<'_> {
    fn call(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let resp = self.inner.call(req)?;
        self.calls.lock().unwrap().push((req.clone(), resp.clone()));
        Ok(resp)
    }
}

fn recorded_run(task: &TaskRequest, mode: Mode, seed: u64) -> (RunOutput, Vec<(BackendRequest, BackendResponse)>) {
    let cfg = AgentConfig::default();
    let world = World::new(fixtures::reference_scene()).unwrap();
    let initial = world.reset(seed);
    let mut vla = fixtures::reference_vla(seed, 120);
    let scripted = ScriptedBackend::reference(seed);
    let rec = Recorder {
        inner: &scripted,
        calls: Mutex::new(Vec::new()),
    };
    let env = RunEnv {
        world,
        initial,
        registry: fixtures::reference_registry(),
        nutrients: fixtures::nutrient_table(),
        controller: &mut vla,
        backend: &rec,
        human: &mut ScriptedHuman::default(),
        operator: &mut ScriptedOperator::new(&cfg),
        sink: &mut NullSink,
        clock: &LogicalClock,
        latency: LatencySchedule::Sync,
    };
    let out = run_task(task, mode, &cfg, seed, env).unwrap();
    (out, rec.calls.into_inner().unwrap())
}

#[test]
#[ignore = "rewrites tests/golden"]
fn bless() {
    if std::env::var("EMBODIA_BLESS").as_deref() != Ok("1") {
        return;
    }
    let mut files: BTreeMap<String, String> = BTreeMap::new();
    let mut put = |kind: &str, case: &str, text: String| {
        files.entry(format!("{kind}__{case}.json")).or_insert(text);
    };

    let mut outs = Vec::new();
    for (task, mode, seed) in [
        (fixtures::protein_task(), Mode::Agent, 42),
        (fixtures::brunch_task(), Mode::Agent, 43),
        (fixtures::fiber_task(), Mode::HierHitl, 44),
        (fixtures::fiber_task(), Mode::Vanilla, 42),
    ] {
        let (out, calls) = recorded_run(&task, mode, seed);
        for (req, resp) in &calls {
            let role = req.role().as_str();
            put("backend_request", role, golden::encode(&request_body(req)));
            let case = match resp {
                BackendResponse::Plan(p) if matches!(p.next, embodia_core::backend::PlanNext::Terminal) => {
                    format!("{role}-terminal")
                }
                BackendResponse::Monitor(m) => format!("{role}-{}", m.flag.as_str().to_ascii_lowercase()),
                BackendResponse::Reflect(r) if r.constraint.is_none() => format!("{role}-none"),
                _ => role.to_string(),
            };
            put("backend_response", &case, golden::encode(&resp.to_json()));
            put(
                "backend_text",
                &case,
                golden::encode(&serde_json::json!({ "text": canonical_format(resp) })),
            );
        }
        outs.push(out);
    }

    for out in &outs {
        for r in &out.events {
            put("event", r.event.kind(), golden::encode(r));
        }
        if let Some(l) = out.memory.short_lines().first() {
            put("short_memory", "line", golden::encode(l));
        }
        if let Some(l) = out.memory.long().first() {
            put("long_memory", "record", golden::encode(l));
        }
        if let Some(c) = out.constraints.iter().next() {
            put("constraint", "record", golden::encode(c));
        }
    }
    let first = &outs[0];
    put("tools", "catalog", golden::encode(&first.tools));
    put("result", "agent", golden::encode(&first.result));
    put(
        "aggregate_row",
        "agent",
        golden::encode(&AggregateRow {
            task: first.result.task.clone(),
            mode: first.result.mode,
            trial: 1,
            seed: first.result.seed,
            stages_done: first.result.stages_done,
            steps_used: first.result.steps_used,
            auc_progress: first.result.auc_progress,
        }),
    );

    // Controller exchange against a local scripted controller.
    let world = World::new(fixtures::reference_scene()).unwrap();
    let state = world.reset(42);
    let mut vla = fixtures::reference_vla(42, 120);
    let issue = ControllerRequest::Issue {
        instruction: SubInstruction::new("put shrimp on plate", 1),
        state: Some(state),
    };
    put("controller_request", "issue", golden::encode(&issue));
    put("controller_request", "step", golden::encode(&ControllerRequest::Step));
    put("controller_request", "abort", golden::encode(&ControllerRequest::Abort));
    put("controller_reply", "issued", golden::encode(&handle_request(&mut vla, &world, issue.clone()).unwrap()));
    put("controller_reply", "step", golden::encode(&handle_request(&mut vla, &world, ControllerRequest::Step).unwrap()));
    put("controller_reply", "busy", golden::encode(&handle_request(&mut vla, &world, issue).unwrap()));
    let unsupported = ControllerRequest::Issue {
        instruction: SubInstruction::new("juggle the plate", 2),
        state: None,
    };
    assert!(handle_request(&mut vla, &world, ControllerRequest::Abort).is_none());
    put("controller_reply", "unsupported", golden::encode(&handle_request(&mut vla, &world, unsupported).unwrap()));

    // Gateway bodies.
    let gw = Gateway::new();
    gw.begin_run(RunInfo {
        task: first.result.task.clone(),
        mode: Mode::Agent,
        seed: 42,
        stages_total: first.result.stages_total,
    });
    for r in first.events.iter().take(40) {
        gw.push_event(r);
    }
    let q = Question {
        question_id: "q-000001".into(),
        text: "No visible progress on 'put shrimp on plate' for 3 windows. How should I proceed?".into(),
        asked_step: 40,
    };
    let waiter = {
        let gw = gw.clone();
        let q = q.clone();
        std::thread::spawn(move || gw.ask(&q, std::time::Duration::from_secs(5)))
    };
    while gw.state().pending_questions.is_empty() {
        std::thread::yield_now();
    }
    put("gateway_state", "live", golden::encode(&gw.state()));
    put("gateway_questions", "pending", golden::encode(&gw.state().pending_questions));
    put("gateway_text", "answer", golden::encode(&TextBody { text: "skip the shrimp".into() }));
    put("gateway_text", "prompt", golden::encode(&TextBody { text: "regenerate".into() }));
    gw.answer(&q.question_id, "skip the shrimp".into()).unwrap();
    waiter.join().unwrap();
    put(
        "gateway_answer",
        "accepted",
        golden::encode(&AnswerAccepted {
            question_id: q.question_id.clone(),
            accepted: true,
        }),
    );
    put("gateway_prompt", "queued", golden::encode(&PromptQueued { queued: 1 }));
    put(
        "gateway_error",
        "conflict",
        golden::encode(&ErrorBody {
            error: "question `q-000001` is already closed".into(),
        }),
    );
    // Human exchange records, as the orchestrator logs them.
    for (kind, event) in [
        ("human_question", Event::HumanQuestion(q.clone())),
        (
            "human_answer",
            Event::HumanAnswer(embodia_core::events::Answer {
                question_id: q.question_id.clone(),
                text: Some("skip the shrimp".into()),
                timed_out: false,
            }),
        ),
    ] {
        let rec = EventLogRecord {
            seq: 41,
            event,
            wall_time: 40,
        };
        put("event", kind, golden::encode(&rec));
    }

    let dir = golden::dir();
    std::fs::create_dir_all(&dir).unwrap();
    for (name, text) in &files {
        std::fs::write(dir.join(name), text).unwrap();
    }
    eprintln!("wrote {} golden files", files.len());
}
