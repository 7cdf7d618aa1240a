//! Session server for the hair authoring engine.
//!
//! `GET /ws` carries JSON commands in and JSON events plus binary frame
//! packets out. `GET /styles`, `GET /styles/{id}/thumbnail` and
//! `GET /healthz` serve the browser's static needs.

pub mod config;
pub mod embed;
pub mod generation;
pub mod server;
pub mod session;
pub mod state;

pub use config::ServiceConfig;
pub use generation::{GenerationBackend, GenerationError, HttpBackend, MockBackend};
pub use server::{router, serve};
pub use state::{AppState, StartupError};
