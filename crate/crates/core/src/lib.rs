#![no_std]
extern crate alloc;

pub mod backend;
pub mod events;
pub mod fixtures;
pub mod memory;
pub mod metrics;
pub mod monitor;
pub mod orchestrator;
pub mod planner;
pub mod prompt;
pub mod reflector;
pub mod replay;
pub mod rng;
pub mod toolbox;
pub mod vla;
pub mod world;
