//! Localization service and command-line driver around the `fusionloc`
//! library: RP-database persistence, the `/api/v1` HTTP interface with
//! walkthrough sessions, and the `fusionloc` CLI.

pub mod api;
pub mod cli;
pub mod session;

pub use api::{router, AppState, ServiceConfig};
