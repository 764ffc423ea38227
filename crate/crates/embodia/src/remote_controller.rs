//! Controller over a line-delimited JSON stream socket.
//!
//! Requests: `issue`, `step`, `abort`. `issue` and `step` are answered with
//! one `outcome` line (or `error`); `abort` has no reply. Besides the fixed
//! `status` and `steps_taken` fields, outcomes carry the primitive taken and
//! its fault draw so the local world can follow the controller.

use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use embodia_core::planner::SubInstruction;
use embodia_core::vla::{
    Controller, ControllerError, ControllerSession, ControllerStep, FaultKind, ScriptedVla,
    SessionStatus,
};
use embodia_core::world::{FaultDraw, PrimitiveAction, SceneState, World};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum ControllerRequest {
    Issue {
        instruction: SubInstruction,
        /// World state at issue; the controller compiles against it.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        state: Option<SceneState>,
    },
    Step,
    Abort,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ControllerReply {
    Outcome {
        status: SessionStatus,
        steps_taken: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        action: Option<PrimitiveAction>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        noise: Option<FaultDraw>,
        #[serde(default)]
        timed_out: bool,
        /// Compiled primitives, sent in reply to `issue`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        plan: Option<Vec<PrimitiveAction>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fault: Option<FaultKind>,
    },
    Error {
        code: String,
        message: String,
    },
}

fn error_reply(e: &ControllerError) -> ControllerReply {
    let code = match e {
        ControllerError::UnsupportedSkill(_) => "unsupported_skill",
        ControllerError::Busy => "busy",
        ControllerError::NotRunning => "not_running",
        ControllerError::Transport(_) => "transport",
    };
    let message = match e {
        ControllerError::UnsupportedSkill(s) => s.clone(),
        other => other.to_string(),
    };
    ControllerReply::Error {
        code: code.into(),
        message,
    }
}

fn reply_error(code: &str, message: String) -> ControllerError {
    match code {
        "unsupported_skill" => ControllerError::UnsupportedSkill(message),
        "busy" => ControllerError::Busy,
        "not_running" => ControllerError::NotRunning,
        _ => ControllerError::Transport(format!("{code}: {message}")),
    }
}

pub struct RemoteController {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    session: Option<ControllerSession>,
}

fn transport(e: impl std::fmt::Display) -> ControllerError {
    ControllerError::Transport(e.to_string())
}

impl RemoteController {
    pub fn connect(addr: &str, timeout: Duration) -> io::Result<RemoteController> {
        let sock = addr
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, format!("no address for {addr}")))?;
        let stream = TcpStream::connect_timeout(&sock, timeout)?;
        stream.set_read_timeout(Some(timeout))?;
        stream.set_nodelay(true)?;
        Ok(RemoteController {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
            session: None,
        })
    }

    fn send(&mut self, req: &ControllerRequest) -> Result<(), ControllerError> {
        serde_json::to_writer(&mut self.writer, req).map_err(transport)?;
        self.writer.write_all(b"\n").map_err(transport)?;
        self.writer.flush().map_err(transport)
    }

    fn roundtrip(&mut self, req: &ControllerRequest) -> Result<ControllerReply, ControllerError> {
        self.send(req)?;
        let mut line = String::new();
        if self.reader.read_line(&mut line).map_err(transport)? == 0 {
            return Err(transport("controller closed the connection"));
        }
        serde_json::from_str(&line).map_err(transport)
    }
}

impl Controller for RemoteController {
    fn issue(
        &mut self,
        instruction: &SubInstruction,
        _world: &World,
        state: &SceneState,
    ) -> Result<ControllerSession, ControllerError> {
        let req = ControllerRequest::Issue {
            instruction: instruction.clone(),
            state: Some(state.clone()),
        };
        match self.roundtrip(&req)? {
            ControllerReply::Outcome {
                status,
                steps_taken,
                timed_out,
                plan,
                fault,
                ..
            } => {
                let s = ControllerSession {
                    instruction: instruction.clone(),
                    plan: plan.unwrap_or_default(),
                    status,
                    steps_taken,
                    timed_out,
                    fault,
                };
                self.session = Some(s.clone());
                Ok(s)
            }
            ControllerReply::Error { code, message } => Err(reply_error(&code, message)),
        }
    }

    fn step(&mut self) -> Result<ControllerStep, ControllerError> {
        match self.roundtrip(&ControllerRequest::Step)? {
            ControllerReply::Outcome {
                status,
                steps_taken,
                action,
                noise,
                timed_out,
                ..
            } => {
                if let Some(s) = self.session.as_mut() {
                    s.status = status;
                    s.steps_taken = steps_taken;
                    s.timed_out = timed_out;
                }
                Ok(ControllerStep {
                    action: action.unwrap_or(PrimitiveAction::Noop),
                    noise: noise.unwrap_or(FaultDraw::Clean),
                    status,
                    steps_taken,
                    timed_out,
                })
            }
            ControllerReply::Error { code, message } => Err(reply_error(&code, message)),
        }
    }

    fn abort(&mut self) {
        // A dead link surfaces on the next issue or step.
        let _ = self.send(&ControllerRequest::Abort);
        if let Some(s) = self.session.as_mut() {
            if s.status == SessionStatus::Running {
                s.status = SessionStatus::Finished;
            }
        }
    }

    fn session(&self) -> Option<&ControllerSession> {
        self.session.as_ref()
    }
}

/// Answer one request against a local controller.
pub fn handle_request(
    ctl: &mut dyn Controller,
    world: &World,
    req: ControllerRequest,
) -> Option<ControllerReply> {
    match req {
        ControllerRequest::Issue { instruction, state } => {
            let state = state.unwrap_or_else(|| world.reset(0));
            Some(match ctl.issue(&instruction, world, &state) {
                Ok(s) => ControllerReply::Outcome {
                    status: s.status,
                    steps_taken: s.steps_taken,
                    action: None,
                    noise: None,
                    timed_out: s.timed_out,
                    plan: Some(s.plan),
                    fault: s.fault,
                },
                Err(e) => error_reply(&e),
            })
        }
        ControllerRequest::Step => Some(match ctl.step() {
            Ok(s) => ControllerReply::Outcome {
                status: s.status,
                steps_taken: s.steps_taken,
                action: Some(s.action),
                noise: Some(s.noise),
                timed_out: s.timed_out,
                plan: None,
                fault: None,
            },
            Err(e) => error_reply(&e),
        }),
        ControllerRequest::Abort => {
            ctl.abort();
            None
        }
    }
}

fn serve_connection(stream: TcpStream, mut ctl: ScriptedVla, world: &World) -> io::Result<()> {
    let reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<ControllerRequest>(&line) {
            Ok(req) => handle_request(&mut ctl, world, req),
            Err(e) => Some(ControllerReply::Error {
                code: "bad_request".into(),
                message: e.to_string(),
            }),
        };
        if let Some(reply) = reply {
            serde_json::to_writer(&mut writer, &reply)?;
            writer.write_all(b"\n")?;
            writer.flush()?;
        }
    }
    Ok(())
}

/// A scripted controller served over TCP, one fresh controller per
/// connection. Stops accepting when dropped.
pub struct ControllerServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl ControllerServer {
    pub fn spawn(addr: &str, world: World, make: impl Fn() -> ScriptedVla + Send + 'static) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let world = Arc::new(world);
        let handle = std::thread::spawn(move || {
            for conn in listener.incoming() {
                if flag.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = conn else { continue };
                let ctl = make();
                let world = world.clone();
                std::thread::spawn(move || {
                    let _ = serve_connection(stream, ctl, &world);
                });
            }
        });
        Ok(ControllerServer {
            addr,
            stop,
            handle: Some(handle),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }
}

impl Drop for ControllerServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the accept loop.
        if let Ok(s) = TcpStream::connect(self.addr) {
            let _ = s.shutdown(Shutdown::Both);
        }
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}
