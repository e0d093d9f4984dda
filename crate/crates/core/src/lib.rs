//! World-state triple graphs for text adventures, a rule-based action engine,
//! UseEvent simulation, grounding-task dataset construction, and evaluation
//! metrics.

pub mod engine;
pub mod eval;
pub mod graph;
pub mod synth;
pub mod tasks;
pub mod use_events;
