//! Run directory artifacts and JSON-lines IO.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use embodia_core::events::EventLogRecord;
use embodia_core::memory::{LongMemoryRecord, MemoryStore, ShortMemoryLine};
use embodia_core::orchestrator::{Mode, RunOutput, RunResult};
use embodia_core::reflector::VisualConstraint;
use embodia_core::world::SceneConfig;
use serde::de::DeserializeOwned;
use serde::Serialize;

pub const EVENTS: &str = "events.jsonl";
pub const RESULT: &str = "result.json";
pub const SHORT_MEMORY: &str = "short_memory.jsonl";
pub const LONG_MEMORY: &str = "long_memory.jsonl";
pub const CONSTRAINTS: &str = "constraints.jsonl";
pub const TOOLS: &str = "tools.json";
pub const SCENE: &str = "scene.json";
pub const AGGREGATE: &str = "aggregate.csv";

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> LoadError + '_ {
    move |source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn trial_dir_name(task: &str, mode: Mode, trial: u32, seed: u64) -> String {
    format!(
        "{}-{}-t{trial}-s{seed}",
        embodia_core::fixtures::task_slug(task),
        mode.as_str()
    )
}

pub fn to_jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&item).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn parse_jsonl<T: DeserializeOwned>(text: &str, path: &Path) -> Result<Vec<T>, LoadError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| LoadError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, LoadError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_jsonl(&text, path)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, LoadError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| LoadError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)
}

/// Write every artifact of one trial into `dir`.
pub fn write_run(dir: &Path, out: &RunOutput, scene: &SceneConfig) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    write_jsonl(&dir.join(EVENTS), &out.events)?;
    write_json(&dir.join(RESULT), &out.result)?;
    write_jsonl(&dir.join(SHORT_MEMORY), out.memory.short_lines())?;
    write_jsonl(&dir.join(LONG_MEMORY), out.memory.long())?;
    write_jsonl(&dir.join(CONSTRAINTS), out.constraints.iter())?;
    write_json(&dir.join(TOOLS), &out.tools)?;
    write_json(&dir.join(SCENE), scene)?;
    Ok(())
}

pub fn load_events(path: &Path) -> Result<Vec<EventLogRecord>, LoadError> {
    read_jsonl(path)
}

pub fn load_result(dir: &Path) -> Result<RunResult, LoadError> {
    read_json(&dir.join(RESULT))
}

pub fn load_constraints(dir: &Path) -> Result<Vec<VisualConstraint>, LoadError> {
    read_jsonl(&dir.join(CONSTRAINTS))
}

pub fn load_memory(dir: &Path) -> Result<MemoryStore, LoadError> {
    let short_path = dir.join(SHORT_MEMORY);
    let short: Vec<ShortMemoryLine> = read_jsonl(&short_path)?;
    let long: Vec<LongMemoryRecord> = read_jsonl(&dir.join(LONG_MEMORY))?;
    MemoryStore::from_lines(short, long).map_err(|e| LoadError::Parse {
        path: short_path,
        line: 0,
        message: e.to_string(),
    })
}
