//! Golden wire fixtures under `tests/golden/`, named `{type}__{case}.json`.
//! Each is parsed into its type and serialized again; the result must equal
//! the committed bytes.

use std::path::{Path, PathBuf};

use embodia::gateway::{AnswerAccepted, ErrorBody, PromptQueued, StateSnapshot, TextBody};
use embodia::harness::AggregateRow;
use embodia::remote_backend::{decode_response, request_body};
use embodia::remote_controller::{ControllerReply, ControllerRequest};
use embodia_core::backend::{BackendRequest, BackendResponse, Role};
use embodia_core::events::{EventLogRecord, Question};
use embodia_core::memory::{LongMemoryRecord, ShortMemoryLine};
use embodia_core::orchestrator::RunResult;
use embodia_core::prompt::canonical_format;
use embodia_core::reflector::VisualConstraint;
use embodia_core::toolbox::ToolSpec;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

pub fn dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn encode<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).unwrap();
    s.push('\n');
    s
}

fn typed<T: Serialize + DeserializeOwned>(text: &str) -> Result<String, String> {
    let v: T = serde_json::from_str(text).map_err(|e| e.to_string())?;
    Ok(encode(&v))
}

fn role_of(case: &str) -> Result<Role, String> {
    let name = case.split('-').next().unwrap_or(case);
    [Role::Plan, Role::Monitor, Role::Reflect, Role::Summarize]
        .into_iter()
        .find(|r| r.as_str() == name)
        .ok_or_else(|| format!("no role in case name `{case}`"))
}

/// Re-encode `text` as message type `kind`.
pub fn reencode(kind: &str, case: &str, text: &str) -> Result<String, String> {
    match kind {
        "backend_request" => {
            // The wire body: request fields plus the rendered prompt.
            let req: BackendRequest = serde_json::from_str(text).map_err(|e| e.to_string())?;
            Ok(encode(&request_body(&req)))
        }
        "backend_response" => {
            let v: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
            let r = BackendResponse::from_json(role_of(case)?, v).map_err(|e| e.to_string())?;
            Ok(encode(&r.to_json()))
        }
        "backend_text" => {
            let v: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
            let r = decode_response(role_of(case)?, v).map_err(|e| e.to_string())?;
            Ok(encode(&serde_json::json!({ "text": canonical_format(&r) })))
        }
        "controller_request" => typed::<ControllerRequest>(text),
        "controller_reply" => typed::<ControllerReply>(text),
        "gateway_state" => typed::<StateSnapshot>(text),
        "gateway_questions" => typed::<Vec<Question>>(text),
        "gateway_text" => typed::<TextBody>(text),
        "gateway_answer" => typed::<AnswerAccepted>(text),
        "gateway_prompt" => typed::<PromptQueued>(text),
        "gateway_error" => typed::<ErrorBody>(text),
        "event" => typed::<EventLogRecord>(text),
        "short_memory" => typed::<ShortMemoryLine>(text),
        "long_memory" => typed::<LongMemoryRecord>(text),
        "constraint" => typed::<VisualConstraint>(text),
        "tools" => typed::<Vec<ToolSpec>>(text),
        "result" => typed::<RunResult>(text),
        "aggregate_row" => typed::<AggregateRow>(text),
        other => Err(format!("unknown golden type `{other}`")),
    }
}

/// `(file name, outcome)` for every fixture, sorted by name.
pub fn check_all() -> Vec<(String, Result<(), String>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir())
        .map(|rd| rd.filter_map(|e| e.ok()).map(|e| e.path()).collect())
        .unwrap_or_default();
    files.sort();
    files
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let stem = name.trim_end_matches(".json");
            let outcome = match stem.split_once("__") {
                None => Err("name is not type__case".to_string()),
                Some((kind, case)) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| e.to_string());
                    text.and_then(|t| {
                        let again = reencode(kind, case, &t)?;
                        if again == t {
                            Ok(())
                        } else {
                            Err(format!("re-encoded text differs:\n{again}"))
                        }
                    })
                }
            };
            (name, outcome)
        })
        .collect()
}
