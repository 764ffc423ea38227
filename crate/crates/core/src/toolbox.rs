//! Tool registry with documented specs, plus the four builtin tools.
//!
//! Tools act on a host (the running orchestrator) through [`EmbodiedHost`];
//! the registry itself only validates arguments and dispatches.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::planner::SubInstruction;
use crate::world::{CameraId, Frame, SceneState};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolCategory {
    Perception,
    Control,
    Think,
}

impl ToolCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ToolCategory::Perception => "perception",
            ToolCategory::Control => "control",
            ToolCategory::Think => "think",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub category: ToolCategory,
    pub doc: String,
    pub params: Value,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCall {
    pub call_id: u32,
    pub name: String,
    pub args: Value,
    pub step_index: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolStatus {
    Ok,
    Error,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolResult {
    pub call_id: u32,
    pub name: String,
    pub status: ToolStatus,
    pub payload: Value,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ToolError {
    #[error("unknown tool `{0}`")]
    UnknownTool(String),
    #[error("bad arguments for `{tool}`: {reason}")]
    BadArgs { tool: String, reason: String },
    #[error("unknown camera `{0}`")]
    UnknownCamera(String),
    #[error("backtrack depth {requested} exceeds the {available} snapshots held")]
    TooDeep { requested: usize, available: usize },
    #[error("no answer before the deadline")]
    Timeout,
    #[error("{0}")]
    Failed(String),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("tool `{0}` is already registered")]
pub struct RegistrationError(pub String);

/// What the builtin tools need from the runtime.
pub trait EmbodiedHost {
    fn render_camera(&mut self, camera: CameraId) -> Frame;
    /// Restore the k-th most recent snapshot (1 = newest).
    fn backtrack(&mut self, k: usize) -> Result<SceneState, ToolError>;
    /// Close the current episode as failed and plan again. `None` is TERMINAL.
    fn replan(&mut self, reason: &str) -> Result<Option<SubInstruction>, ToolError>;
    fn ask_human(&mut self, question: &str) -> Result<String, ToolError>;
}

pub trait ToolHandler<H> {
    fn invoke(&self, host: &mut H, args: &Value) -> Result<Value, ToolError>;
}

impl<H, F> ToolHandler<H> for F
where
    F: Fn(&mut H, &Value) -> Result<Value, ToolError>,
{
    fn invoke(&self, host: &mut H, args: &Value) -> Result<Value, ToolError> {
        self(host, args)
    }
}

pub struct Toolbox<'t, H> {
    specs: Vec<ToolSpec>,
    handlers: Vec<Box<dyn ToolHandler<H> + 't>>,
}

impl<H> Default for Toolbox<'_, H> {
    fn default() -> Self {
        Toolbox {
            specs: Vec::new(),
            handlers: Vec::new(),
        }
    }
}

impl<'t, H> Toolbox<'t, H> {
    pub fn register(
        &mut self,
        spec: ToolSpec,
        handler: impl ToolHandler<H> + 't,
    ) -> Result<(), RegistrationError> {
        if self.specs.iter().any(|s| s.name == spec.name) {
            return Err(RegistrationError(spec.name));
        }
        self.specs.push(spec);
        self.handlers.push(Box::new(handler));
        Ok(())
    }

    pub fn specs(&self) -> &[ToolSpec] {
        &self.specs
    }

    pub fn invoke(&self, host: &mut H, name: &str, args: &Value) -> Result<Value, ToolError> {
        let i = self
            .specs
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| ToolError::UnknownTool(name.to_string()))?;
        self.handlers[i].invoke(host, args)
    }
}

fn str_arg<'a>(tool: &str, args: &'a Value, key: &str) -> Result<&'a str, ToolError> {
    args.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| ToolError::BadArgs {
            tool: tool.to_string(),
            reason: format!("missing string `{key}`"),
        })
}

pub fn builtin_specs() -> Vec<ToolSpec> {
    alloc::vec![
        ToolSpec {
            name: "query_camera".into(),
            category: ToolCategory::Perception,
            doc: "Render a fresh frame from the named camera (top, front or wrist) at the current step. \
                  Use it when the monitoring view cannot see the target."
                .into(),
            params: json!({"type": "object", "properties": {"camera_id": {"type": "string", "enum": ["top", "front", "wrist"]}}, "required": ["camera_id"]}),
        },
        ToolSpec {
            name: "backtrack".into(),
            category: ToolCategory::Control,
            doc: "Abort the running instruction and restore the world to the k-th most recent snapshot. \
                  Snapshots are taken at episode start and at every window boundary; at most 8 are kept."
                .into(),
            params: json!({"type": "object", "properties": {"k": {"type": "integer", "minimum": 1}}, "required": ["k"]}),
        },
        ToolSpec {
            name: "replan".into(),
            category: ToolCategory::Think,
            doc: "Give up on the current instruction, record the episode as failed and ask the planner \
                  for the next instruction. Returns the new instruction or TERMINAL."
                .into(),
            params: json!({"type": "object", "properties": {"reason": {"type": "string"}}, "required": ["reason"]}),
        },
        ToolSpec {
            name: "ask_human".into(),
            category: ToolCategory::Think,
            doc: "Pause the robot and put a question to the operator. Blocks until answered; the answer \
                  is passed to the planner as a hint."
                .into(),
            params: json!({"type": "object", "properties": {"question": {"type": "string"}}, "required": ["question"]}),
        },
    ]
}

/// A toolbox holding the four builtins.
pub fn with_builtins<'t, H: EmbodiedHost + 't>() -> Toolbox<'t, H> {
    let mut tb = Toolbox::default();
    let mut specs = builtin_specs().into_iter();
    let mut next = || specs.next().expect("four builtin specs");

    tb.register(next(), |h: &mut H, args: &Value| {
        let name = str_arg("query_camera", args, "camera_id")?;
        let cam = CameraId::parse(name).ok_or_else(|| ToolError::UnknownCamera(name.to_string()))?;
        let frame = h.render_camera(cam);
        Ok(serde_json::to_value(frame).expect("frames serialize"))
    })
    .expect("fresh toolbox");

    tb.register(next(), |h: &mut H, args: &Value| {
        let k = args
            .get("k")
            .and_then(Value::as_u64)
            .filter(|k| *k >= 1)
            .ok_or_else(|| ToolError::BadArgs {
                tool: "backtrack".into(),
                reason: "`k` must be a positive integer".into(),
            })?;
        let state = h.backtrack(k as usize)?;
        Ok(json!({ "k": k, "state": state }))
    })
    .expect("fresh toolbox");

    tb.register(next(), |h: &mut H, args: &Value| {
        let reason = str_arg("replan", args, "reason")?;
        let next = h.replan(reason)?;
        Ok(json!({ "reason": reason, "next": next }))
    })
    .expect("fresh toolbox");

    tb.register(next(), |h: &mut H, args: &Value| {
        let q = str_arg("ask_human", args, "question")?;
        let answer = h.ask_human(q)?;
        Ok(json!({ "answer": answer }))
    })
    .expect("fresh toolbox");

    tb
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::world::World;

    struct Host {
        world: World,
        state: SceneState,
        asked: Vec<String>,
    }

    impl EmbodiedHost for Host {
        fn render_camera(&mut self, camera: CameraId) -> Frame {
            self.world.render(&self.state, camera)
        }
        fn backtrack(&mut self, k: usize) -> Result<SceneState, ToolError> {
            if k > 8 {
                return Err(ToolError::TooDeep { requested: k, available: 8 });
            }
            Ok(self.state.clone())
        }
        fn replan(&mut self, _reason: &str) -> Result<Option<SubInstruction>, ToolError> {
            Ok(None)
        }
        fn ask_human(&mut self, question: &str) -> Result<String, ToolError> {
            self.asked.push(question.into());
            Ok("skip the shrimp".into())
        }
    }

    fn host() -> Host {
        let world = World::new(fixtures::reference_scene()).unwrap();
        let state = world.reset(42);
        Host { world, state, asked: Vec::new() }
    }

    #[test]
    fn builtins_registered_once() {
        let mut tb = with_builtins::<Host>();
        assert_eq!(tb.specs().len(), 4);
        assert!(tb.specs().iter().all(|s| !s.doc.is_empty()));
        let dup = builtin_specs().remove(0);
        assert!(tb.register(dup, |_: &mut Host, _: &Value| Ok(Value::Null)).is_err());
        let mut h = host();
        assert_eq!(tb.invoke(&mut h, "teleport", &json!({})), Err(ToolError::UnknownTool("teleport".into())));
    }

    #[test]
    fn query_camera_views() {
        let tb = with_builtins::<Host>();
        let mut h = host();
        let top: Frame = serde_json::from_value(tb.invoke(&mut h, "query_camera", &json!({"camera_id": "top"})).unwrap()).unwrap();
        assert_eq!(top.visible_objects.len(), 7);
        let front: Frame = serde_json::from_value(tb.invoke(&mut h, "query_camera", &json!({"camera_id": "front"})).unwrap()).unwrap();
        assert!(front.find_kind(crate::world::Kind::Mushroom).is_none());
        h.state.gripper.cell = crate::world::Cell::new(5, 4);
        let wrist: Frame = serde_json::from_value(tb.invoke(&mut h, "query_camera", &json!({"camera_id": "wrist"})).unwrap()).unwrap();
        assert!(wrist.find_kind(crate::world::Kind::Shrimp).is_some());
        assert_eq!(
            tb.invoke(&mut h, "query_camera", &json!({"camera_id": "rear"})),
            Err(ToolError::UnknownCamera("rear".into()))
        );
    }

    #[test]
    fn backtrack_bounds_and_args() {
        let tb = with_builtins::<Host>();
        let mut h = host();
        assert!(tb.invoke(&mut h, "backtrack", &json!({"k": 1})).is_ok());
        assert!(matches!(tb.invoke(&mut h, "backtrack", &json!({"k": 9})), Err(ToolError::TooDeep { .. })));
        assert!(matches!(tb.invoke(&mut h, "backtrack", &json!({"k": 0})), Err(ToolError::BadArgs { .. })));
    }

    #[test]
    fn ask_human_returns_answer() {
        let tb = with_builtins::<Host>();
        let mut h = host();
        let v = tb.invoke(&mut h, "ask_human", &json!({"question": "which item?"})).unwrap();
        assert_eq!(v["answer"], "skip the shrimp");
        assert_eq!(h.asked, ["which item?"]);
    }
}
