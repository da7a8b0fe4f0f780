//! Command-line orchestration for the collaborative tilt-maze: configuration,
//! run artifacts, the websocket service and the experiment commands.

pub mod cli;
pub mod commands;
pub mod config;
pub mod plot;
pub mod recorder;
pub mod service;
pub mod wire;
