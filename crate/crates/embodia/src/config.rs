//! Run configuration files (TOML).
//!
//! Every key is checked: unknown keys are rejected by the parser and the
//! semantic checks below run before any trial starts. Errors carry the line
//! they refer to.

use std::fmt;
use std::path::Path;

use embodia_core::backend::{ErrorModeConfig, ErrorMode};
use embodia_core::orchestrator::{AgentConfig, LatencySchedule, ScriptedHuman};
use embodia_core::planner::{NutrientTable, TaskRequest};
use embodia_core::vla::{ProficiencyEntry, ProficiencyTable, SkillRegistry};
use embodia_core::world::{SceneConfig, World};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub file: String,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}: {}", self.file, self.line, self.column, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Scripted,
    Remote,
}

fn d_timeout() -> u64 {
    10_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    #[serde(default)]
    pub kind: BackendKind,
    /// Injected monitor errors for the scripted backend.
    #[serde(default)]
    pub error_modes: Vec<ErrorMode>,
    /// Base URL of a remote model backend.
    #[serde(default)]
    pub endpoint: Option<String>,
    /// `host:port` of a remote controller; without it the scripted
    /// controller runs locally even with a remote model backend.
    #[serde(default)]
    pub controller: Option<String>,
    #[serde(default = "d_timeout")]
    pub timeout_ms: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Scripted,
            error_modes: Vec::new(),
            endpoint: None,
            controller: None,
            timeout_ms: d_timeout(),
        }
    }
}

impl BackendConfig {
    pub fn error_mode_config(&self) -> ErrorModeConfig {
        ErrorModeConfig {
            modes: self.error_modes.clone(),
        }
    }
}

fn d_step_cap() -> u32 {
    120
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VlaConfig {
    /// Steps after which a controller session reports a timeout.
    #[serde(default = "d_step_cap")]
    pub step_cap: u32,
    pub proficiency: Vec<ProficiencyEntry>,
}

fn d_answer() -> Option<String> {
    Some(ScriptedHuman::DEFAULT_ANSWER.to_string())
}

fn d_human_timeout() -> u64 {
    300_000
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanConfig {
    /// Scripted answers, used in order.
    #[serde(default)]
    pub answers: Vec<String>,
    /// Used once `answers` runs out; absent means questions time out.
    #[serde(default = "d_answer")]
    pub default_answer: Option<String>,
    /// How long a gateway question waits for an operator.
    #[serde(default = "d_human_timeout")]
    pub timeout_ms: u64,
}

impl Default for HumanConfig {
    fn default() -> Self {
        HumanConfig {
            answers: Vec::new(),
            default_answer: d_answer(),
            timeout_ms: d_human_timeout(),
        }
    }
}

fn d_seed() -> u64 {
    42
}
fn d_trials() -> u32 {
    1
}
fn d_latency() -> LatencySchedule {
    LatencySchedule::Sync
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_trials")]
    pub trials: u32,
    pub task: TaskRequest,
    pub scene: SceneConfig,
    pub skills: SkillRegistry,
    pub nutrients: NutrientTable,
    pub vla: VlaConfig,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub orchestrator: AgentConfig,
    /// Ignored under `--sync`.
    #[serde(default = "d_latency")]
    pub latency: LatencySchedule,
    #[serde(default)]
    pub human: HumanConfig,
}

/// Fully checked pieces derived from a config.
pub struct Resolved {
    pub world: World,
    pub proficiency: ProficiencyTable,
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// Line of the first occurrence of `needle`, or 1.
fn line_of(src: &str, needle: &str) -> usize {
    src.lines()
        .position(|l| l.contains(needle))
        .map_or(1, |i| i + 1)
}

impl RunConfig {
    pub fn parse(src: &str, file: &str) -> Result<RunConfig, ConfigError> {
        let cfg: RunConfig = toml::from_str(src).map_err(|e| {
            let (line, column) = e.span().map_or((1, 1), |s| line_col(src, s.start));
            ConfigError {
                file: file.to_string(),
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        cfg.resolve_with(src, file)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let file = path.display().to_string();
        let src = std::fs::read_to_string(path).map_err(|e| ConfigError {
            file: file.clone(),
            line: 1,
            column: 1,
            message: format!("cannot read: {e}"),
        })?;
        RunConfig::parse(&src, &file)
    }

    /// Validate without source text (line numbers fall back to 1).
    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        self.resolve_with("", "<config>")
    }

    fn resolve_with(&self, src: &str, file: &str) -> Result<Resolved, ConfigError> {
        let err = |needle: &str, message: String| ConfigError {
            file: file.to_string(),
            line: line_of(src, needle),
            column: 1,
            message,
        };
        self.task
            .validate()
            .map_err(|e| err("[task]", format!("task: {e}")))?;
        for stage in &self.task.stages {
            stage
                .predicate
                .resolved()
                .map_err(|e| err(&format!("\"{}\"", stage.id), format!("stage `{}`: {e}", stage.id)))?;
        }
        if self.trials == 0 {
            return Err(err("trials", "trials must be at least 1".into()));
        }
        let world = World::new(self.scene.clone()).map_err(|e| err("[scene]", format!("scene: {e}")))?;
        let proficiency = ProficiencyTable::from_entries(self.vla.proficiency.clone())
            .map_err(|e| err("proficiency", format!("vla.proficiency: {e}")))?;
        proficiency
            .covers(&self.skills)
            .map_err(|e| err("proficiency", format!("vla.proficiency: {e}")))?;
        for entry in &self.nutrients.entries {
            for item in &entry.items {
                if self.skills.parse(&item.text()).is_none() {
                    return Err(err(
                        &format!("keyword = \"{}\"", entry.keyword),
                        format!("nutrient item `{}` is not a registered skill", item.text()),
                    ));
                }
            }
        }
        self.backend
            .error_mode_config()
            .validate()
            .map_err(|e| err("error_modes", format!("backend.error_modes: {e}")))?;
        if self.backend.kind == BackendKind::Remote && self.backend.endpoint.is_none() {
            return Err(err("[backend]", "remote backend needs an endpoint".into()));
        }
        let o = &self.orchestrator;
        for (name, v) in [
            ("episode_cap", o.episode_cap),
            ("task_cap", o.task_cap),
            ("monitor.h", o.monitor.h),
            ("operator_poll", o.operator_poll),
            ("snapshot_ring", o.snapshot_ring as u64),
            ("reflection_lag", o.reflection_lag as u64),
            ("buffer_capacity", o.buffer_capacity as u64),
        ] {
            if v == 0 {
                return Err(err("[orchestrator]", format!("orchestrator.{name} must be at least 1")));
            }
        }
        if self.vla.step_cap == 0 {
            return Err(err("step_cap", "vla.step_cap must be at least 1".into()));
        }
        Ok(Resolved { world, proficiency })
    }
}
