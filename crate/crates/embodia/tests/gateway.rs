use std::net::TcpStream;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use embodia::gateway::{self, Gateway, RunInfo, StateSnapshot};
use embodia::harness::{run_one, Wiring};
use embodia::server::HttpServer;
use embodia_core::events::{Event, EventLogRecord, PlanSource, Question};
use embodia_core::orchestrator::Mode;
use serde_json::{json, Value};
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

#[path = "support/common.rs"]
mod common;

fn http() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).build().into()
}

fn get(url: &str) -> Value {
    http().get(url).call().unwrap().body_mut().read_json().unwrap()
}

fn post(url: &str, body: Value) -> (u16, Value) {
    let mut r = http().post(url).send_json(body).unwrap();
    (r.status().as_u16(), r.body_mut().read_json().unwrap())
}

fn question(id: &str) -> Question {
    Question {
        question_id: id.into(),
        text: "which plate?".into(),
        asked_step: 7,
    }
}

fn serve() -> (Arc<Gateway>, HttpServer) {
    let gw = Gateway::new();
    let server = HttpServer::spawn("127.0.0.1:0", gateway::router(gw.clone())).unwrap();
    (gw, server)
}

fn subscribe(server: &HttpServer, from: Option<u64>) -> WebSocket<MaybeTlsStream<TcpStream>> {
    let q = from.map(|f| format!("?from={f}")).unwrap_or_default();
    let (ws, _) = tungstenite::connect(format!("ws://{}/ws/events{q}", server.addr())).unwrap();
    if let MaybeTlsStream::Plain(s) = ws.get_ref() {
        s.set_read_timeout(Some(Duration::from_millis(100))).unwrap();
    }
    ws
}

/// Read records until one with seq `target` arrives (`target` 0 means not
/// known yet) or the deadline passes.
fn read_until(ws: &mut WebSocket<MaybeTlsStream<TcpStream>>, target: &AtomicU64) -> Vec<EventLogRecord> {
    let deadline = Instant::now() + Duration::from_secs(30);
    let mut got: Vec<EventLogRecord> = Vec::new();
    while Instant::now() < deadline {
        let t = target.load(Ordering::SeqCst);
        if t != 0 && got.last().is_some_and(|r| r.seq >= t) {
            break;
        }
        match ws.read() {
            Ok(Message::Text(text)) => {
                assert!(text.ends_with('\n'));
                got.push(serde_json::from_str(text.trim_end()).unwrap());
            }
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {}
            Err(e) => panic!("{e}"),
        }
    }
    got
}

#[test]
fn live_run_streams_every_event_and_takes_answers_and_prompts() {
    let cfg = common::config("protein");
    let resolved = cfg.resolve().unwrap();
    let (gw, server) = serve();
    let base = server.url();
    let target = Arc::new(AtomicU64::new(0));

    let mut ws = subscribe(&server, None);
    let t = target.clone();
    let streamer = std::thread::spawn(move || read_until(&mut ws, &t));

    // Answer every question, after queueing a hint while it is pending.
    let responder = {
        let base = base.clone();
        let gw = gw.clone();
        std::thread::spawn(move || {
            let mut answered = Vec::new();
            loop {
                let qs: Vec<Question> = serde_json::from_value(get(&format!("{base}/api/questions"))).unwrap();
                for q in qs {
                    let (s, v) = post(&format!("{base}/api/prompts"), json!({"text": "mind the plate edge"}));
                    assert_eq!(s, 202);
                    assert!(v["queued"].as_u64().unwrap() >= 1);
                    let url = format!("{base}/api/questions/{}/answer", q.question_id);
                    let (s, v) = post(&url, json!({"text": "try the shrimp again"}));
                    assert_eq!(s, 200, "{v}");
                    assert_eq!(v, json!({"question_id": q.question_id, "accepted": true}));
                    // A second answer is a conflict.
                    assert_eq!(post(&url, json!({"text": "no"})).0, 409);
                    answered.push(q.question_id);
                }
                if gw.state().finished {
                    return answered;
                }
                std::thread::sleep(Duration::from_millis(5));
            }
        })
    };

    let wiring = Wiring {
        remote: None,
        gateway: Some(&gw),
    };
    let out = run_one(&cfg, &resolved, Mode::Agent, 43, true, wiring).unwrap().unwrap();
    target.store(out.events.last().unwrap().seq, Ordering::SeqCst);
    let answered = responder.join().unwrap();
    let streamed = streamer.join().unwrap();

    assert_eq!(streamed, out.events);
    assert!(!answered.is_empty());
    let answers: Vec<_> = out
        .events
        .iter()
        .filter_map(|r| match &r.event {
            Event::HumanAnswer(a) => Some(a),
            _ => None,
        })
        .collect();
    assert_eq!(answers.len(), answered.len());
    for a in answers {
        assert_eq!(a.text.as_deref(), Some("try the shrimp again"));
        assert!(!a.timed_out);
    }
    assert!(out.events.iter().any(|r| matches!(&r.event,
        Event::Plan(p) if p.source == PlanSource::Operator && p.hints == ["mind the plate edge"])));

    let state: StateSnapshot = serde_json::from_value(get(&format!("{base}/api/state"))).unwrap();
    assert!(state.finished);
    assert_eq!(state.last_seq, out.events.last().unwrap().seq);
    assert_eq!(state.stages_latched.len(), out.result.stages_done);
    assert_eq!(state.run.unwrap().seed, 43);
    assert!(state.pending_questions.is_empty());
}

#[test]
fn late_subscriber_resumes_from_the_requested_seq() {
    let cfg = common::config("fiber");
    let resolved = cfg.resolve().unwrap();
    let (gw, server) = serve();
    let wiring = Wiring {
        remote: None,
        gateway: Some(&gw),
    };
    let out = run_one(&cfg, &resolved, Mode::HierHitl, 42, true, wiring).unwrap().unwrap();
    let last = out.events.last().unwrap().seq;
    let target = AtomicU64::new(last);
    for from in [1, 17, last] {
        let got = read_until(&mut subscribe(&server, Some(from)), &target);
        let want: Vec<_> = out.events.iter().filter(|r| r.seq >= from).cloned().collect();
        assert_eq!(got, want, "from {from}");
    }
    let state = gw.state();
    assert_eq!(state.last_seq, last);
}

#[test]
fn new_run_restarts_open_streams() {
    let (gw, server) = serve();
    let info = |seed| RunInfo {
        task: "t".into(),
        mode: Mode::Agent,
        seed,
        stages_total: 1,
    };
    let rec = |seq| EventLogRecord {
        seq,
        event: Event::HumanQuestion(question(&format!("q{seq}"))),
        wall_time: seq,
    };
    gw.begin_run(info(1));
    for s in 1..=3 {
        gw.push_event(&rec(s));
    }
    let mut ws = subscribe(&server, None);
    assert_eq!(read_until(&mut ws, &AtomicU64::new(3)).len(), 3);
    gw.begin_run(info(2));
    gw.push_event(&rec(1));
    gw.push_event(&rec(2));
    let again = read_until(&mut ws, &AtomicU64::new(2));
    assert_eq!(again.iter().map(|r| r.seq).collect::<Vec<_>>(), [1, 2]);
}

#[test]
fn answer_endpoint_statuses() {
    let (gw, server) = serve();
    let base = server.url();
    let (s, v) = post(&format!("{base}/api/questions/q9/answer"), json!({"text": "x"}));
    assert_eq!(s, 404);
    assert!(v["error"].as_str().unwrap().contains("q9"));

    // A question that times out is closed.
    assert_eq!(gw.ask(&question("q1"), Duration::from_millis(10)), None);
    assert_eq!(post(&format!("{base}/api/questions/q1/answer"), json!({"text": "x"})).0, 409);

    // A pending one unblocks its asker.
    let asker = {
        let gw = gw.clone();
        std::thread::spawn(move || gw.ask(&question("q2"), Duration::from_secs(20)))
    };
    while get(&format!("{base}/api/questions")).as_array().unwrap().is_empty() {
        std::thread::sleep(Duration::from_millis(2));
    }
    let pending: Vec<Question> = serde_json::from_value(get(&format!("{base}/api/questions"))).unwrap();
    assert_eq!(pending, [question("q2")]);
    assert_eq!(post(&format!("{base}/api/questions/q2/answer"), json!({"text": "left"})).0, 200);
    assert_eq!(asker.join().unwrap().as_deref(), Some("left"));

    // Finishing a run closes what is still open.
    let asker = {
        let gw = gw.clone();
        std::thread::spawn(move || gw.ask(&question("q3"), Duration::from_secs(20)))
    };
    while gw.state().pending_questions.is_empty() {
        std::thread::sleep(Duration::from_millis(2));
    }
    gw.finish_run();
    assert_eq!(asker.join().unwrap(), None);
    assert_eq!(post(&format!("{base}/api/questions/q3/answer"), json!({"text": "x"})).0, 409);
}

#[test]
fn prompt_endpoint_queues_text() {
    let (gw, server) = serve();
    let url = format!("{}/api/prompts", server.url());
    assert_eq!(post(&url, json!({"text": "advance"})), (202, json!({"queued": 1})));
    assert_eq!(post(&url, json!({"text": "regenerate"})), (202, json!({"queued": 2})));
    assert_eq!(post(&url, json!({"text": "  "})).0, 422);
    assert_eq!(gw.take_prompts(), ["advance", "regenerate"]);
    assert!(gw.take_prompts().is_empty());
}

#[test]
fn idle_state_has_no_run() {
    let (_gw, server) = serve();
    let v = get(&format!("{}/api/state", server.url()));
    assert_eq!(v["run"], Value::Null);
    assert_eq!(v["last_seq"], 0);
    assert_eq!(v["finished"], false);
}
