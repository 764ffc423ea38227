//! Config loading shared by the integration targets.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use embodia::config::RunConfig;

pub fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.toml"))
}

pub fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(format!("{name}.toml"))
}

pub fn config(name: &str) -> RunConfig {
    RunConfig::load(&config_path(name)).unwrap_or_else(|e| panic!("{e}"))
}

pub fn near_miss() -> RunConfig {
    RunConfig::load(&fixture_path("near_miss")).unwrap_or_else(|e| panic!("{e}"))
}
