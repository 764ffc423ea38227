use std::path::Path;
use std::process::{Command, Output};

#[path = "support/common.rs"]
mod common;

fn embodia(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_embodia")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run(config: &Path, mode: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        "--config",
        config.to_str().unwrap(),
        "--mode",
        mode,
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    embodia(&args)
}

fn only_trial(out: &Path) -> std::path::PathBuf {
    std::fs::read_dir(out).unwrap().map(|e| e.unwrap().path()).find(|p| p.is_dir()).unwrap()
}

#[test]
fn bad_config_exits_two_with_location() {
    let tmp = tempfile::tempdir().unwrap();
    let src = std::fs::read_to_string(common::config_path("fiber")).unwrap().replace("[vla]", "[vla]\nturbo = true");
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, &src).unwrap();
    let o = run(&cfg, "agent", &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let line = src.lines().position(|l| l.contains("turbo")).unwrap() + 1;
    assert!(stderr(&o).contains(&format!("bad.toml:{line}:")), "{}", stderr(&o));

    let o = run(&tmp.path().join("missing.toml"), "agent", &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unreachable_remote_backend_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let src = std::fs::read_to_string(common::config_path("protein"))
        .unwrap()
        .replace("http://127.0.0.1:8700", &format!("http://127.0.0.1:{port}"))
        .replace("timeout_ms = 10000", "timeout_ms = 1000");
    let cfg = tmp.path().join("remote.toml");
    std::fs::write(&cfg, src).unwrap();
    let out = tmp.path().join("out");
    let o = run(&cfg, "hier", &out, &["--backend", "remote", "--trials", "1", "--sync"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(only_trial(&out).join("events.jsonl").is_file());
}

#[test]
fn run_then_replay_then_tamper() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(&common::config_path("brunch"), "agent", &out, &["--trials", "1", "--seed", "44", "--sync"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let trial = only_trial(&out);
    assert!(trial.file_name().unwrap().to_str().unwrap().ends_with("-agent-t1-s44"));
    for f in ["events.jsonl", "result.json", "short_memory.jsonl", "long_memory.jsonl", "constraints.jsonl", "tools.json", "scene.json"] {
        assert!(trial.join(f).is_file(), "{f}");
    }
    assert!(out.join("aggregate.csv").is_file());

    let log = trial.join("events.jsonl");
    let o = embodia(&["replay", "--log", log.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.trim_end().ends_with("0 mismatches"), "{stdout}");

    let o = embodia(&["replay", "--log", log.to_str().unwrap(), "--until", "10"]);
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("replayed 10 records"));

    // Move the gripper in one rendered frame and look for its seq in the error.
    let text = std::fs::read_to_string(&log).unwrap();
    let (idx, line) = text.lines().enumerate().filter(|(_, l)| l.contains("\"kind\":\"frame\"")).nth(3).unwrap();
    let mut rec: serde_json::Value = serde_json::from_str(line).unwrap();
    let seq = rec["seq"].as_u64().unwrap();
    let g = &mut rec["payload"]["frame"]["gripper"][0];
    *g = serde_json::json!((g.as_u64().unwrap() + 1) % 12);
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[idx] = rec.to_string();
    let bad = tmp.path().join("bad.jsonl");
    std::fs::write(&bad, lines.join("\n") + "\n").unwrap();
    let scene = trial.join("scene.json");
    let o = embodia(&["replay", "--log", bad.to_str().unwrap(), "--scene", scene.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(&format!("seq {seq}")), "{}", stderr(&o));

    let o = embodia(&["replay", "--log", tmp.path().join("none.jsonl").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn report_prints_csv_and_markdown() {
    let tmp = tempfile::tempdir().unwrap();
    for mode in ["vanilla", "agent"] {
        let o = run(&common::config_path("fiber"), mode, &tmp.path().join(mode), &["--trials", "2", "--sync"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let input = tmp.path().to_str().unwrap();
    let o = embodia(&["report", "--in", input, "--emit", "csv"]);
    assert!(o.status.success());
    let csv = String::from_utf8(o.stdout).unwrap();
    let modes: Vec<_> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().to_string()).collect();
    assert_eq!(modes, ["vanilla", "agent"]);
    let o = embodia(&["report", "--in", input]);
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("| task | mode |"));
    let o = embodia(&["report", "--in", tmp.path().join("vanilla").join("nothing").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}
