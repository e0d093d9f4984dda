//! Line-oriented text forms of graphs and deltas.
//!
//! A graph is one `subject EDGE value` line per triple. A delta is one
//! `ADD: triple` / `DEL: triple` line per mutation, or the single line
//! `NO_MUTATION`. Subjects and values may contain spaces; the edge is the
//! leftmost whitespace-delimited token that is a valid label.

use super::delta::ensure_entities;
use super::{EdgeLabel, GraphDelta, GraphError, Mutation, MutationOp, Triple, WorldGraph};

pub const NO_MUTATION: &str = "NO_MUTATION";

/// State triples in canonical order, then history in insertion order.
pub fn serialize_graph(graph: &WorldGraph) -> String {
    graph
        .triples()
        .chain(graph.history().iter())
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn serialize_triples<'a>(triples: impl IntoIterator<Item = &'a Triple>) -> String {
    triples
        .into_iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}

/// Splits one triple line at its leftmost edge token.
pub fn parse_triple_line(line: &str) -> Result<Triple, GraphError> {
    let line = line.trim_end();
    let mut offset = 0;
    for token in line.split(' ') {
        let start = offset;
        offset += token.len() + 1;
        if token.is_empty() {
            continue;
        }
        if let Ok(edge) = token.parse::<EdgeLabel>() {
            let subject = line[..start].trim_end_matches(' ');
            let value = line.get(start + token.len() + 1..).unwrap_or("");
            let t = Triple {
                subject: subject.to_string(),
                edge,
                value: value.to_string(),
            };
            t.validate()?;
            return Ok(t);
        }
    }
    Err(GraphError::NoEdgeToken(line.to_string()))
}

/// Parses graph text. Blank lines are skipped. Node kinds come from `IS_TYPE`
/// triples where present; otherwise they are inferred, defaulting to object.
pub fn parse_graph(text: &str) -> Result<WorldGraph, GraphError> {
    let mut triples = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        triples.push(parse_triple_line(line)?);
    }
    let mut graph = WorldGraph::new();
    ensure_entities(&mut graph, triples.iter())?;
    for t in triples {
        graph.insert_strict(t)?;
    }
    Ok(graph)
}

pub fn serialize_delta(delta: &GraphDelta) -> String {
    match delta {
        GraphDelta::NoMutation => NO_MUTATION.to_string(),
        GraphDelta::Mutations(ms) => ms
            .iter()
            .map(|m| format!("{} {}", m.op.prefix(), m.triple))
            .collect::<Vec<_>>()
            .join("\n"),
    }
}

/// Parses delta text, preserving line order. Trailing whitespace and blank
/// lines are ignored.
pub fn parse_delta(text: &str) -> Result<GraphDelta, GraphError> {
    let mut mutations = Vec::new();
    let mut saw_no_mutation = false;
    for raw in text.lines() {
        let line = raw.trim_end();
        if line.trim().is_empty() {
            continue;
        }
        if line == NO_MUTATION {
            saw_no_mutation = true;
            continue;
        }
        let (op, rest) = if let Some(rest) = line.strip_prefix("ADD:") {
            (MutationOp::Add, rest)
        } else if let Some(rest) = line.strip_prefix("DEL:") {
            (MutationOp::Del, rest)
        } else {
            return Err(GraphError::BadPrefix(line.to_string()));
        };
        let triple = parse_triple_line(rest.strip_prefix(' ').unwrap_or(rest))?;
        mutations.push(Mutation { op, triple });
    }
    match (saw_no_mutation, mutations.is_empty()) {
        (true, true) => Ok(GraphDelta::NoMutation),
        (true, false) => Err(GraphError::MixedNoMutation),
        (false, true) => Err(GraphError::EmptyDelta),
        (false, false) => GraphDelta::from_mutations(mutations),
    }
}
