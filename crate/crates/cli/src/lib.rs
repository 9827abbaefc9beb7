//! Configuration-driven front end for `ktplate-core`.

pub mod check;
pub mod commands;
pub mod config;
