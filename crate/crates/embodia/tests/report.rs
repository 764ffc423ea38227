use embodia::harness::{read_aggregate, run_trials, RunOptions};
use embodia::report::{self, ReportError};
use embodia_core::orchestrator::Mode;

#[path = "support/common.rs"]
mod common;

fn run_set(root: &std::path::Path, name: &str, mode: Mode, trials: u32) -> std::path::PathBuf {
    let out = root.join(format!("{name}-{}", mode.as_str()));
    let mut opts = RunOptions::new(mode, &out);
    opts.sync = true;
    opts.trials = Some(trials);
    run_trials(&common::config(name), &opts).unwrap();
    out
}

#[test]
fn rows_follow_mode_order_with_sample_std() {
    let tmp = tempfile::tempdir().unwrap();
    for mode in [Mode::Agent, Mode::Vanilla, Mode::HierHitl, Mode::Hier] {
        run_set(tmp.path(), "protein", mode, 3);
    }
    let rows = report::collect(tmp.path()).unwrap();
    assert_eq!(rows.iter().map(|r| r.mode).collect::<Vec<_>>(), Mode::ALL.to_vec());
    for r in &rows {
        assert_eq!(r.trials, 3);
        let agg = read_aggregate(&tmp.path().join(format!("protein-{}", r.mode.as_str())).join("aggregate.csv")).unwrap();
        let auc: Vec<f64> = agg.iter().map(|a| a.auc_progress).collect();
        let m = auc.iter().sum::<f64>() / 3.0;
        let var = auc.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 2.0;
        assert!((r.auc_mean - m).abs() < 1e-12);
        assert!((r.auc_std - var.sqrt()).abs() < 1e-12);
    }
    let csv = report::render_csv(&rows);
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("task,mode,trials,auc_mean,auc_std"));
    let md = report::render_md(&rows);
    assert_eq!(md.lines().count(), 6);
    assert!(md.contains("| hier_hitl |"));
}

#[test]
fn a_run_set_with_two_tasks_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run_set(tmp.path(), "fiber", Mode::Hier, 1);
    let b = run_set(tmp.path(), "protein", Mode::Hier, 1);
    let stray = std::fs::read_dir(&b).unwrap().map(|e| e.unwrap().path()).find(|p| p.is_dir()).unwrap();
    std::fs::rename(&stray, a.join(stray.file_name().unwrap())).unwrap();
    match report::collect(tmp.path()) {
        Err(ReportError::MixedTasks { dir, .. }) => assert_eq!(dir, a),
        other => panic!("{other:?}"),
    }
}

#[test]
fn empty_input_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(matches!(report::collect(tmp.path()), Err(ReportError::Empty(_))));
}
