use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::{EdgeLabel, GraphError, NodeKind, Triple, WorldGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MutationOp {
    Add,
    Del,
}

impl MutationOp {
    pub fn prefix(self) -> &'static str {
        match self {
            MutationOp::Add => "ADD:",
            MutationOp::Del => "DEL:",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mutation {
    pub op: MutationOp,
    pub triple: Triple,
}

impl Mutation {
    pub fn add(triple: Triple) -> Self {
        Mutation { op: MutationOp::Add, triple }
    }

    pub fn del(triple: Triple) -> Self {
        Mutation { op: MutationOp::Del, triple }
    }
}

/// A graph update: either the distinguished no-op, or a nonempty list of
/// mutations without duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraphDelta {
    NoMutation,
    Mutations(Vec<Mutation>),
}

impl GraphDelta {
    /// Empty input yields `NoMutation`; duplicate `(op, triple)` pairs are rejected.
    pub fn from_mutations(mutations: Vec<Mutation>) -> Result<Self, GraphError> {
        if mutations.is_empty() {
            return Ok(GraphDelta::NoMutation);
        }
        let mut seen = HashSet::new();
        for m in &mutations {
            if !seen.insert(m) {
                return Err(GraphError::DuplicateMutation(format!(
                    "{} {}",
                    m.op.prefix(),
                    m.triple
                )));
            }
        }
        Ok(GraphDelta::Mutations(mutations))
    }

    pub fn is_no_mutation(&self) -> bool {
        matches!(self, GraphDelta::NoMutation)
    }

    pub fn mutations(&self) -> &[Mutation] {
        match self {
            GraphDelta::NoMutation => &[],
            GraphDelta::Mutations(m) => m,
        }
    }

    pub fn len(&self) -> usize {
        self.mutations().len()
    }

    pub fn is_empty(&self) -> bool {
        self.mutations().is_empty()
    }

    pub fn additions(&self) -> impl Iterator<Item = &Triple> {
        self.mutations()
            .iter()
            .filter(|m| m.op == MutationOp::Add)
            .map(|m| &m.triple)
    }

    pub fn deletions(&self) -> impl Iterator<Item = &Triple> {
        self.mutations()
            .iter()
            .filter(|m| m.op == MutationOp::Del)
            .map(|m| &m.triple)
    }

    /// Order-insensitive view used for comparing predicted and gold deltas.
    pub fn mutation_set(&self) -> BTreeSet<&Mutation> {
        self.mutations().iter().collect()
    }
}

/// State-triple difference from `before` to `after`: all deletions, then all
/// additions, each in canonical order. History is not compared.
pub fn diff(before: &WorldGraph, after: &WorldGraph) -> GraphDelta {
    let old = before.state_triples();
    let new = after.state_triples();
    let mut mutations: Vec<Mutation> = old.difference(new).cloned().map(Mutation::del).collect();
    mutations.extend(new.difference(old).cloned().map(Mutation::add));
    if mutations.is_empty() {
        GraphDelta::NoMutation
    } else {
        GraphDelta::Mutations(mutations)
    }
}

/// Applies a delta, returning the new graph. Deletions run before additions
/// regardless of line order. Subjects and entity-valued objects of added
/// triples that name no node are created on the fly.
pub fn apply_delta(graph: &WorldGraph, delta: &GraphDelta) -> Result<WorldGraph, GraphError> {
    let mut out = graph.clone();
    if delta.is_no_mutation() {
        return Ok(out);
    }
    for t in delta.deletions() {
        if t.edge.is_history() {
            return Err(GraphError::HistoryImmutable(t.to_string()));
        }
        if !out.remove_triple(t) {
            return Err(GraphError::MissingDelTarget(t.to_string()));
        }
    }
    let added: Vec<&Triple> = delta.additions().collect();
    ensure_entities(&mut out, added.iter().copied())?;
    for t in added {
        out.upsert_triple(t.clone())?;
    }
    Ok(out)
}

/// Creates missing nodes for every name a set of triples refers to as an
/// entity, using [`infer_kinds`].
pub(crate) fn ensure_entities<'a>(
    graph: &mut WorldGraph,
    triples: impl Iterator<Item = &'a Triple> + Clone,
) -> Result<(), GraphError> {
    let evidence: Vec<Triple> = triples.clone().cloned().chain(graph.triples().cloned()).collect();
    let kinds = infer_kinds(evidence.iter());
    for (name, kind) in entity_names(triples) {
        if !graph.has_node_named(&name) {
            let kind = kinds.get(&name).copied().unwrap_or(kind);
            graph.add_node(&name, kind)?;
        }
    }
    Ok(())
}

/// Names used in entity position: every subject, plus the values of location
/// and `CONTAINS` edges. Paired with the positional default kind.
fn entity_names<'a>(triples: impl Iterator<Item = &'a Triple>) -> Vec<(String, NodeKind)> {
    let mut out: Vec<(String, NodeKind)> = Vec::new();
    let mut seen = HashSet::new();
    for t in triples {
        if seen.insert(t.subject.clone()) {
            out.push((t.subject.clone(), NodeKind::Object));
        }
        if (t.edge.is_location() || t.edge == EdgeLabel::Contains) && seen.insert(t.value.clone()) {
            out.push((t.value.clone(), NodeKind::Object));
        }
    }
    out
}

/// Best-effort node kinds from triple evidence. `IS_TYPE` wins; otherwise
/// persona, stats, carrying, and speech mark characters and backstory marks
/// rooms. Anything else defaults to object.
pub fn infer_kinds<'a>(triples: impl Iterator<Item = &'a Triple>) -> BTreeMap<String, NodeKind> {
    let mut typed: BTreeMap<String, NodeKind> = BTreeMap::new();
    let mut guessed: BTreeMap<String, NodeKind> = BTreeMap::new();
    for t in triples {
        match t.edge {
            EdgeLabel::IsType => {
                if let Some(k) = NodeKind::from_type_value(&t.value) {
                    typed.insert(t.subject.clone(), k);
                }
            }
            EdgeLabel::HasPersona
            | EdgeLabel::HasHealthLevel
            | EdgeLabel::HasStrengthLevel
            | EdgeLabel::HadSaid
            | EdgeLabel::HadActed
            | EdgeLabel::Observed => {
                guessed.insert(t.subject.clone(), NodeKind::Character);
            }
            e if e.is_carrier() => {
                guessed.insert(t.subject.clone(), NodeKind::Character);
            }
            EdgeLabel::HasBackstory => {
                guessed.entry(t.subject.clone()).or_insert(NodeKind::Room);
            }
            _ => {}
        }
    }
    guessed.extend(typed);
    guessed
}
