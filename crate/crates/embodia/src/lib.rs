//! Std side of embodia: config files, run directories, remote adapters,
//! the operator gateway and the trial harness behind the `embodia` binary.

pub mod config;
pub mod gateway;
pub mod harness;
pub mod remote_backend;
pub mod remote_controller;
pub mod report;
pub mod rundir;
pub mod server;
