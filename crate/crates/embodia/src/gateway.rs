//! HTTP and websocket gateway for a live run.
//!
//! - `GET /api/state`: current [`StateSnapshot`]
//! - `GET /api/questions`: pending operator questions
//! - `POST /api/questions/{id}/answer` with `{"text"}`: 404 unknown, 409 closed
//! - `POST /api/prompts` with `{"text"}`: queued operator prompt
//! - `/ws/events?from=SEQ`: event records in seq order, one JSON object per
//!   text message, newline terminated; the backlog first, then live records
//!
//! The snapshot and the event backlog change under one lock, so a client
//! that reads `last_seq` from `/api/state` and then subscribes with
//! `from = last_seq + 1` sees a gapless continuation.

use std::collections::{BTreeMap, VecDeque};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use embodia_core::events::{Event, EventLogRecord, EventSink, Question};
use embodia_core::orchestrator::{HumanChannel, Mode, Operator, OperatorCommand, OperatorView};
use embodia_core::world::Frame;
use serde::{Deserialize, Serialize};
use tokio::sync::watch;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunInfo {
    pub task: String,
    pub mode: Mode,
    pub seed: u64,
    pub stages_total: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub run: Option<RunInfo>,
    /// Seq of the newest record; the next streamed record has `last_seq + 1`.
    pub last_seq: u64,
    pub elapsed: u64,
    pub frame: Option<Frame>,
    pub stages_latched: Vec<String>,
    pub pending_questions: Vec<Question>,
    pub finished: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextBody {
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerAccepted {
    pub question_id: String,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptQueued {
    pub queued: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

#[derive(Debug)]
enum QuestionState {
    Pending,
    Answered(String),
    Closed,
}

#[derive(Debug, Default)]
struct Inner {
    /// Bumped by every `begin_run`; lets streams notice a reset.
    epoch: u64,
    run: Option<RunInfo>,
    events: Vec<EventLogRecord>,
    elapsed: u64,
    frame: Option<Frame>,
    stages_latched: Vec<String>,
    questions: BTreeMap<String, (Question, QuestionState)>,
    prompts: VecDeque<String>,
    finished: bool,
}

impl Inner {
    fn snapshot(&self) -> StateSnapshot {
        StateSnapshot {
            run: self.run.clone(),
            last_seq: self.events.last().map_or(0, |r| r.seq),
            elapsed: self.elapsed,
            frame: self.frame.clone(),
            stages_latched: self.stages_latched.clone(),
            pending_questions: self
                .questions
                .values()
                .filter(|(_, s)| matches!(s, QuestionState::Pending))
                .map(|(q, _)| q.clone())
                .collect(),
            finished: self.finished,
        }
    }
}

/// Shared between the run thread and the HTTP handlers.
pub struct Gateway {
    inner: Mutex<Inner>,
    answered: Condvar,
    /// (epoch, last_seq), published after each change.
    tick: watch::Sender<(u64, u64)>,
}

impl Default for Gateway {
    fn default() -> Self {
        Gateway {
            inner: Mutex::default(),
            answered: Condvar::new(),
            tick: watch::channel((0, 0)).0,
        }
    }
}

impl Gateway {
    pub fn new() -> Arc<Gateway> {
        Arc::new(Gateway::default())
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn publish(&self, g: &Inner) {
        self.tick
            .send_replace((g.epoch, g.events.last().map_or(0, |r| r.seq)));
    }

    /// Clear everything for a new trial.
    pub fn begin_run(&self, info: RunInfo) {
        let mut g = self.lock();
        let epoch = g.epoch + 1;
        *g = Inner {
            epoch,
            run: Some(info),
            ..Inner::default()
        };
        self.publish(&g);
    }

    pub fn finish_run(&self) {
        let mut g = self.lock();
        g.finished = true;
        for (_, s) in g.questions.values_mut() {
            if matches!(s, QuestionState::Pending) {
                *s = QuestionState::Closed;
            }
        }
        self.publish(&g);
        self.answered.notify_all();
    }

    pub fn state(&self) -> StateSnapshot {
        self.lock().snapshot()
    }

    pub fn push_event(&self, rec: &EventLogRecord) {
        let mut g = self.lock();
        match &rec.event {
            Event::Frame(f) => {
                g.elapsed = f.elapsed;
                if f.frame.camera_id == embodia_core::world::CameraId::Top {
                    g.frame = Some(f.frame.clone());
                }
            }
            Event::StageComplete(s) => {
                g.elapsed = s.elapsed;
                g.stages_latched.push(s.stage_id.clone());
            }
            _ => {}
        }
        g.events.push(rec.clone());
        self.publish(&g);
    }

    pub fn answer(&self, id: &str, text: String) -> Result<(), StatusCode> {
        let mut g = self.lock();
        match g.questions.get_mut(id) {
            None => Err(StatusCode::NOT_FOUND),
            Some((_, s @ QuestionState::Pending)) => {
                *s = QuestionState::Answered(text);
                self.answered.notify_all();
                Ok(())
            }
            Some(_) => Err(StatusCode::CONFLICT),
        }
    }

    pub fn push_prompt(&self, text: String) -> usize {
        let mut g = self.lock();
        g.prompts.push_back(text);
        g.prompts.len()
    }

    pub fn take_prompts(&self) -> Vec<String> {
        self.lock().prompts.drain(..).collect()
    }

    /// Block until the question is answered, the run ends or `timeout`.
    pub fn ask(&self, q: &Question, timeout: Duration) -> Option<String> {
        let deadline = Instant::now() + timeout;
        let mut g = self.lock();
        g.questions
            .insert(q.question_id.clone(), (q.clone(), QuestionState::Pending));
        loop {
            match g.questions.get(&q.question_id).map(|(_, s)| s) {
                Some(QuestionState::Answered(a)) => return Some(a.clone()),
                Some(QuestionState::Pending) => {}
                _ => return None,
            }
            let now = Instant::now();
            if now >= deadline {
                if let Some((_, s)) = g.questions.get_mut(&q.question_id) {
                    *s = QuestionState::Closed;
                }
                return None;
            }
            g = self
                .answered
                .wait_timeout(g, deadline - now)
                .unwrap_or_else(|p| p.into_inner())
                .0;
        }
    }

    fn events_from(&self, epoch: u64, from: u64) -> Option<Vec<EventLogRecord>> {
        let g = self.lock();
        (g.epoch == epoch).then(|| g.events.iter().filter(|r| r.seq >= from).cloned().collect())
    }
}

/// Event sink feeding the gateway.
pub struct GatewaySink(pub Arc<Gateway>);

impl EventSink for GatewaySink {
    fn record(&mut self, rec: &EventLogRecord) {
        self.0.push_event(rec);
    }
}

/// Human channel answered through the gateway.
pub struct GatewayHuman {
    pub gateway: Arc<Gateway>,
    pub timeout: Duration,
}

impl HumanChannel for GatewayHuman {
    fn ask(&mut self, question: &Question) -> Option<String> {
        self.gateway.ask(question, self.timeout)
    }
}

/// Queued prompts become operator commands, after those of `inner`.
pub struct GatewayOperator<'a> {
    pub gateway: Arc<Gateway>,
    pub inner: &'a mut dyn Operator,
}

impl Operator for GatewayOperator<'_> {
    fn poll(&mut self, view: &OperatorView<'_>) -> Vec<OperatorCommand> {
        let mut cmds = self.inner.poll(view);
        cmds.extend(
            self.gateway
                .take_prompts()
                .iter()
                .map(|t| OperatorCommand::from_prompt(t)),
        );
        cmds
    }
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(ErrorBody { error: msg.into() })).into_response()
}

async fn get_state(State(gw): State<Arc<Gateway>>) -> Json<StateSnapshot> {
    Json(gw.state())
}

async fn get_questions(State(gw): State<Arc<Gateway>>) -> Json<Vec<Question>> {
    Json(gw.state().pending_questions)
}

async fn post_answer(
    State(gw): State<Arc<Gateway>>,
    Path(id): Path<String>,
    Json(body): Json<TextBody>,
) -> Response {
    match gw.answer(&id, body.text) {
        Ok(()) => Json(AnswerAccepted {
            question_id: id,
            accepted: true,
        })
        .into_response(),
        Err(StatusCode::NOT_FOUND) => error(StatusCode::NOT_FOUND, format!("no question `{id}`")),
        Err(s) => error(s, format!("question `{id}` is already closed")),
    }
}

async fn post_prompt(State(gw): State<Arc<Gateway>>, Json(body): Json<TextBody>) -> Response {
    if body.text.trim().is_empty() {
        return error(StatusCode::UNPROCESSABLE_ENTITY, "empty prompt");
    }
    (StatusCode::ACCEPTED, Json(PromptQueued { queued: gw.push_prompt(body.text) })).into_response()
}

#[derive(Debug, Deserialize)]
struct StreamParams {
    from: Option<u64>,
}

async fn ws_events(
    State(gw): State<Arc<Gateway>>,
    Query(p): Query<StreamParams>,
    ws: WebSocketUpgrade,
) -> Response {
    let from = p.from.unwrap_or(1).max(1);
    ws.on_upgrade(move |socket| stream_events(gw, socket, from))
}

async fn stream_events(gw: Arc<Gateway>, mut socket: WebSocket, from: u64) {
    let mut rx = gw.tick.subscribe();
    let mut epoch = rx.borrow_and_update().0;
    let mut next = from;
    loop {
        let batch = match gw.events_from(epoch, next) {
            Some(b) => b,
            None => {
                // A new run started: stream it from the top.
                epoch = rx.borrow_and_update().0;
                next = 1;
                continue;
            }
        };
        for rec in batch {
            let mut line = serde_json::to_string(&rec).expect("records serialize");
            line.push('\n');
            if socket.send(Message::Text(line.into())).await.is_err() {
                return;
            }
            next = rec.seq + 1;
        }
        tokio::select! {
            changed = rx.changed() => {
                if changed.is_err() {
                    return;
                }
            }
            msg = socket.recv() => match msg {
                None | Some(Err(_)) | Some(Ok(Message::Close(_))) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}

pub fn router(gw: Arc<Gateway>) -> Router {
    Router::new()
        .route("/api/state", get(get_state))
        .route("/api/questions", get(get_questions))
        .route("/api/questions/{id}/answer", post(post_answer))
        .route("/api/prompts", post(post_prompt))
        .route("/ws/events", get(ws_events))
        .with_state(gw)
}
