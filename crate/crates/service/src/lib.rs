//! HTTP scoring service and `uiloop` command line over `uiloop-core`.

pub mod api;
pub mod cli;
pub mod clients;
pub mod config;
pub mod server;
