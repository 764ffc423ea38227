//! Cross-mode comparison table over finished run directories.
//!
//! Every `result.json` below the input directory is one trial. Trials are
//! grouped into run sets by the directory holding their trial directory;
//! a run set must cover a single task.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use embodia_core::orchestrator::{Mode, RunResult};
use serde::{Deserialize, Serialize};

use crate::rundir::{self, LoadError};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{dir}: run set mixes tasks `{first}` and `{second}`")]
    MixedTasks { dir: PathBuf, first: String, second: String },
    #[error("no result.json under {0}")]
    Empty(PathBuf),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub task: String,
    pub mode: Mode,
    pub trials: usize,
    pub auc_mean: f64,
    /// Sample standard deviation; 0 for a single trial.
    pub auc_std: f64,
    pub stages_done_mean: f64,
    pub stages_total: usize,
    pub steps_used_mean: f64,
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), ReportError> {
    let io = |source| ReportError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(io)?
        .collect::<Result<Vec<_>, _>>()
        .map_err(io)?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let path = e.path();
        if path.is_dir() {
            walk(&path, out)?;
        } else if e.file_name() == rundir::RESULT {
            out.push(path);
        }
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Rows sorted by task, then mode in the order vanilla, hier, hier_hitl, agent.
pub fn rows_from_results(results: &[RunResult]) -> Vec<ReportRow> {
    let mut groups: BTreeMap<(String, usize), Vec<&RunResult>> = BTreeMap::new();
    for r in results {
        let mode_rank = Mode::ALL.iter().position(|m| *m == r.mode).unwrap_or(0);
        groups.entry((r.task.clone(), mode_rank)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((task, rank), rs)| {
            let auc: Vec<f64> = rs.iter().map(|r| r.auc_progress).collect();
            let done: Vec<f64> = rs.iter().map(|r| r.stages_done as f64).collect();
            let steps: Vec<f64> = rs.iter().map(|r| r.steps_used as f64).collect();
            ReportRow {
                task,
                mode: Mode::ALL[rank],
                trials: rs.len(),
                auc_mean: mean(&auc),
                auc_std: sample_std(&auc),
                stages_done_mean: mean(&done),
                stages_total: rs.iter().map(|r| r.stages_total).max().unwrap_or(0),
                steps_used_mean: mean(&steps),
            }
        })
        .collect()
}

pub fn collect(dir: &Path) -> Result<Vec<ReportRow>, ReportError> {
    let mut files = Vec::new();
    walk(dir, &mut files)?;
    if files.is_empty() {
        return Err(ReportError::Empty(dir.to_path_buf()));
    }
    let mut set_task: BTreeMap<PathBuf, String> = BTreeMap::new();
    let mut results = Vec::new();
    for f in files {
        let trial_dir = f.parent().unwrap_or(dir);
        let set = trial_dir.parent().unwrap_or(dir).to_path_buf();
        let r: RunResult = rundir::read_json(&f)?;
        match set_task.get(&set) {
            Some(t) if *t != r.task => {
                return Err(ReportError::MixedTasks {
                    dir: set,
                    first: t.clone(),
                    second: r.task,
                })
            }
            Some(_) => {}
            None => {
                set_task.insert(set, r.task.clone());
            }
        }
        results.push(r);
    }
    Ok(rows_from_results(&results))
}

pub fn render_csv(rows: &[ReportRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("rows serialize");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

pub fn render_md(rows: &[ReportRow]) -> String {
    let mut s = String::from(
        "| task | mode | trials | auc mean | auc std | stages done | steps used |\n|---|---|---:|---:|---:|---:|---:|\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {:.4} | {:.4} | {:.1}/{} | {:.1} |",
            r.task, r.mode, r.trials, r.auc_mean, r.auc_std, r.stages_done_mean, r.stages_total, r.steps_used_mean
        );
    }
    s
}
