//! HTTP service for one-turn evaluation and free play: sessions over
//! scenario worlds, pluggable narrators, and durable annotation capture.

pub mod api;
mod app;
mod error;
pub mod narrator;
pub mod store;

pub use app::{app, export_lines, router, serve, AppState, ServiceConfig, STORE_ENV};
pub use error::ServiceError;
pub use narrator::HttpPredictor;
