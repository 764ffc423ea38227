use embodia::config::{BackendKind, RunConfig};
use embodia_core::fixtures;
use embodia_core::orchestrator::LatencySchedule;

#[path = "support/common.rs"]
mod common;

#[test]
fn reference_configs_match_the_builtin_fixtures() {
    for (name, task) in [
        ("fiber", fixtures::fiber_task()),
        ("protein", fixtures::protein_task()),
        ("brunch", fixtures::brunch_task()),
    ] {
        let cfg = common::config(name);
        assert_eq!(cfg.task, task, "{name}");
        assert_eq!(cfg.scene, fixtures::reference_scene(), "{name}");
        assert_eq!(cfg.skills, fixtures::reference_registry(), "{name}");
        assert_eq!(cfg.nutrients, fixtures::nutrient_table(), "{name}");
        assert_eq!(cfg.vla.proficiency, fixtures::reference_proficiency_entries(), "{name}");
        assert_eq!(cfg.backend.error_mode_config(), fixtures::reference_error_modes(), "{name}");
        assert_eq!(cfg.backend.kind, BackendKind::Scripted);
        assert_eq!((cfg.seed, cfg.trials), (42, 5));
        cfg.resolve().unwrap();
    }
}

#[test]
fn minimal_config_takes_defaults() {
    let src = std::fs::read_to_string(common::config_path("fiber")).unwrap();
    // Drop every optional table.
    let keep: String = src
        .split("\n[")
        .filter(|sec| !["backend]", "orchestrator]"].iter().any(|s| sec.starts_with(s)))
        .collect::<Vec<_>>()
        .join("\n[");
    let keep = keep.replace("seed = 42\n", "").replace("trials = 5\n", "");
    let cfg = RunConfig::parse(&keep, "min.toml").unwrap();
    assert_eq!((cfg.seed, cfg.trials), (42, 1));
    assert_eq!(cfg.backend.kind, BackendKind::Scripted);
    assert!(cfg.backend.error_modes.is_empty());
    assert_eq!(cfg.latency, LatencySchedule::Sync);
    assert_eq!(cfg.orchestrator, Default::default());
}

#[test]
fn errors_name_file_and_line() {
    let src = std::fs::read_to_string(common::config_path("protein")).unwrap();
    let cases = [
        (src.replace("step_cap = 120", "step_cap = \"lots\""), "step_cap"),
        (src.replace("trials = 5", "trials = 0"), "trials"),
        (src.replace("[vla]", "[vla]\nwarp = 9"), "warp"),
        (src.replace("patience = 3", "patience = 3, hue = 1"), "hue"),
    ];
    for (text, needle) in cases {
        let e = RunConfig::parse(&text, "bad.toml").unwrap_err();
        let want = text.lines().position(|l| l.contains(needle)).unwrap() + 1;
        assert_eq!(e.line, want, "{needle}: {e}");
        assert!(e.to_string().starts_with(&format!("bad.toml:{want}:")), "{e}");
    }
}

#[test]
fn remote_without_endpoint_is_rejected() {
    let src = std::fs::read_to_string(common::config_path("brunch"))
        .unwrap()
        .replace("kind = \"scripted\"", "kind = \"remote\"")
        .replace("endpoint = \"http://127.0.0.1:8700\"\n", "");
    let e = RunConfig::parse(&src, "r.toml").unwrap_err();
    assert!(e.message.contains("endpoint"), "{e}");
}

#[test]
fn proficiency_must_cover_every_skill() {
    let src = std::fs::read_to_string(common::config_path("fiber")).unwrap();
    let line = src.lines().find(|l| l.contains("kind = \"chips\", zone = \"plate\", success_prob")).unwrap();
    let e = RunConfig::parse(&src.replace(&format!("{line}\n"), ""), "p.toml").unwrap_err();
    assert!(e.message.contains("proficiency"), "{e}");
}

#[test]
fn missing_file_is_a_config_error() {
    let e = RunConfig::load(std::path::Path::new("/nonexistent/x.toml")).unwrap_err();
    assert_eq!((e.line, e.column), (1, 1));
}
