//! Typed triple store for world state, its text forms, and delta algebra.

mod delta;
mod edge;
mod store;
mod text;
mod triple;

pub use delta::{apply_delta, diff, infer_kinds, GraphDelta, Mutation, MutationOp};
pub use edge::EdgeLabel;
pub use store::{validate_name, TriplePattern, WorldGraph};
pub use text::{
    parse_delta, parse_graph, parse_triple_line, serialize_delta, serialize_graph,
    serialize_triples, NO_MUTATION,
};
pub use triple::{sanitize_value, NodeId, NodeKind, NodeRef, Triple};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unknown edge label `{0}`")]
    UnknownEdge(String),
    #[error("no edge token in line `{0}`")]
    NoEdgeToken(String),
    #[error("malformed triple `{0}`")]
    MalformedTriple(String),
    #[error("{edge} requires `true` or `false`, got `{value}`")]
    NonBooleanValue { edge: EdgeLabel, value: String },
    #[error("invalid node name `{0}`")]
    InvalidName(String),
    #[error("subject `{0}` does not name a node")]
    UnknownSubject(String),
    #[error("triple `{0}` would create a containment cycle")]
    ContainmentCycle(String),
    #[error("`{new}` conflicts with existing location `{existing}`")]
    LocationConflict { existing: String, new: String },
    #[error("cannot delete absent triple `{0}`")]
    MissingDelTarget(String),
    #[error("history triples cannot be deleted: `{0}`")]
    HistoryImmutable(String),
    #[error("`{0}` is not a history triple")]
    NotHistory(String),
    #[error("bad delta line prefix: `{0}`")]
    BadPrefix(String),
    #[error("NO_MUTATION cannot be combined with mutation lines")]
    MixedNoMutation,
    #[error("empty delta text")]
    EmptyDelta,
    #[error("duplicate mutation `{0}`")]
    DuplicateMutation(String),
}
