use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::{EdgeLabel, GraphError, NodeId, NodeKind, NodeRef, Triple};

/// Pattern for [`WorldGraph::query`]; unbound fields match anything.
#[derive(Debug, Clone, Copy, Default)]
pub struct TriplePattern<'a> {
    pub subject: Option<&'a str>,
    pub edge: Option<EdgeLabel>,
    pub value: Option<&'a str>,
}

impl<'a> TriplePattern<'a> {
    pub fn any() -> Self {
        Self::default()
    }

    pub fn subject(mut self, subject: &'a str) -> Self {
        self.subject = Some(subject);
        self
    }

    pub fn edge(mut self, edge: EdgeLabel) -> Self {
        self.edge = Some(edge);
        self
    }

    pub fn value(mut self, value: &'a str) -> Self {
        self.value = Some(value);
        self
    }

    pub fn matches(&self, t: &Triple) -> bool {
        self.subject.is_none_or(|s| s == t.subject)
            && self.edge.is_none_or(|e| e == t.edge)
            && self.value.is_none_or(|v| v == t.value)
    }
}

/// Full game state: typed nodes, the canonical state triple set, and the
/// append-only history (`HAD_SAID`, `HAD_ACTED`, `OBSERVED`).
///
/// Invariants kept by every mutating method:
/// - every triple subject (history included) names a node;
/// - each entity is the contained party of at most one location triple;
/// - the containment relation is acyclic.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "GraphRepr", into = "GraphRepr")]
pub struct WorldGraph {
    nodes: BTreeMap<NodeId, NodeRef>,
    triples: BTreeSet<Triple>,
    history: Vec<Triple>,
    /// Derived: contained party to the location triple placing it.
    placed: BTreeMap<String, Triple>,
    /// Derived: holder to the location triples it anchors.
    held: BTreeMap<String, BTreeSet<Triple>>,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    nodes: BTreeMap<NodeId, NodeRef>,
    triples: BTreeSet<Triple>,
    history: Vec<Triple>,
}

impl From<GraphRepr> for WorldGraph {
    fn from(r: GraphRepr) -> Self {
        let mut g = WorldGraph {
            nodes: r.nodes,
            history: r.history,
            ..WorldGraph::default()
        };
        for t in r.triples {
            g.insert_raw(t);
        }
        g
    }
}

impl From<WorldGraph> for GraphRepr {
    fn from(g: WorldGraph) -> Self {
        GraphRepr {
            nodes: g.nodes,
            triples: g.triples,
            history: g.history,
        }
    }
}

impl WorldGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts without checks; keeps the location indexes in sync. A second
    /// location triple for the same party overwrites the index entry, which
    /// `check_invariants` still detects from the triple set.
    fn insert_raw(&mut self, t: Triple) {
        if let (Some(child), Some(holder)) = (t.contained_party(), t.container_party()) {
            self.placed.insert(child.to_string(), t.clone());
            self.held.entry(holder.to_string()).or_default().insert(t.clone());
        }
        self.triples.insert(t);
    }

    fn remove_raw(&mut self, t: &Triple) -> bool {
        if !self.triples.remove(t) {
            return false;
        }
        if let (Some(child), Some(holder)) = (t.contained_party(), t.container_party()) {
            if self.placed.get(child) == Some(t) {
                self.placed.remove(child);
            }
            if let Some(set) = self.held.get_mut(holder) {
                set.remove(t);
                if set.is_empty() {
                    self.held.remove(holder);
                }
            }
        }
        true
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeRef> {
        self.nodes.values()
    }

    pub fn node(&self, id: &NodeId) -> Option<&NodeRef> {
        self.nodes.get(id)
    }

    /// First node (in id order) carrying this display name.
    pub fn node_by_name(&self, name: &str) -> Option<&NodeRef> {
        let guess = NodeId(name.trim().to_lowercase().replace(' ', "_"));
        match self.nodes.get(&guess) {
            Some(n) if n.display_name == name => Some(n),
            _ => self.nodes.values().find(|n| n.display_name == name),
        }
    }

    pub fn has_node_named(&self, name: &str) -> bool {
        self.node_by_name(name).is_some()
    }

    pub fn kind_of(&self, name: &str) -> Option<NodeKind> {
        self.node_by_name(name).map(|n| n.kind)
    }

    pub fn nodes_of_kind(&self, kind: NodeKind) -> Vec<&NodeRef> {
        self.nodes.values().filter(|n| n.kind == kind).collect()
    }

    /// Creates a new node. Display names need not be unique; ids are derived
    /// from the name and disambiguated with a `#n` suffix.
    pub fn add_node(&mut self, name: &str, kind: NodeKind) -> Result<NodeId, GraphError> {
        validate_name(name)?;
        let base = name.trim().to_lowercase().replace(' ', "_");
        let mut id = NodeId(base.clone());
        let mut n = 2;
        while self.nodes.contains_key(&id) {
            id = NodeId(format!("{base}#{n}"));
            n += 1;
        }
        self.nodes.insert(
            id.clone(),
            NodeRef {
                id: id.clone(),
                display_name: name.to_string(),
                kind,
            },
        );
        Ok(id)
    }

    /// Returns the existing node with this name, or creates one of `kind`.
    /// An existing node keeps its kind.
    pub fn ensure_node(&mut self, name: &str, kind: NodeKind) -> Result<NodeId, GraphError> {
        match self.node_by_name(name) {
            Some(n) => Ok(n.id.clone()),
            None => self.add_node(name, kind),
        }
    }

    /// State triples in canonical order.
    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn state_triples(&self) -> &BTreeSet<Triple> {
        &self.triples
    }

    pub fn history(&self) -> &[Triple] {
        &self.history
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty() && self.history.is_empty()
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.triples.contains(t)
    }

    /// State triples matching every bound field, in canonical order.
    pub fn query(&self, pattern: TriplePattern<'_>) -> Vec<&Triple> {
        self.triples.iter().filter(|t| pattern.matches(t)).collect()
    }

    /// First value of `(subject, edge)`, if any.
    pub fn value_of<'s>(&'s self, subject: &str, edge: EdgeLabel) -> Option<&'s str> {
        let start = Triple {
            subject: subject.to_string(),
            edge,
            value: String::new(),
        };
        self.triples
            .range(start..)
            .next()
            .filter(|t| t.subject == subject && t.edge == edge)
            .map(|t| t.value.as_str())
    }

    /// Triples of one `(subject, edge)` pair, via a range scan.
    pub fn with_subject_edge<'s>(
        &'s self,
        subject: &'s str,
        edge: EdgeLabel,
    ) -> impl Iterator<Item = &'s Triple> + 's {
        let start = Triple {
            subject: subject.to_string(),
            edge,
            value: String::new(),
        };
        self.triples
            .range(start..)
            .take_while(move |t| t.subject == subject && t.edge == edge)
    }

    pub fn is_true(&self, subject: &str, edge: EdgeLabel) -> bool {
        self.value_of(subject, edge) == Some("true")
    }

    /// The location triple placing `name`, if it is placed anywhere.
    pub fn location_of(&self, name: &str) -> Option<&Triple> {
        self.placed.get(name)
    }

    pub fn parent_of(&self, name: &str) -> Option<&str> {
        self.location_of(name).and_then(|t| t.container_party())
    }

    /// Location triples whose holder is `name`.
    pub fn children_of(&self, name: &str) -> Vec<&Triple> {
        self.held.get(name).into_iter().flatten().collect()
    }

    /// Walks up the containment chain until a room is reached.
    pub fn room_of(&self, name: &str) -> Option<&str> {
        let mut seen = HashSet::new();
        let mut current = name;
        loop {
            if self.kind_of(current) == Some(NodeKind::Room) {
                return Some(self.node_by_name(current)?.display_name.as_str());
            }
            if !seen.insert(current) {
                return None;
            }
            current = self.parent_of(current)?;
        }
    }

    /// Every entity transitively placed under `root`, in breadth-first order.
    pub fn descendants_of(&self, root: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen: HashSet<String> = HashSet::from([root.to_string()]);
        let mut frontier = vec![root.to_string()];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for holder in &frontier {
                for t in self.children_of(holder) {
                    if let Some(child) = t.contained_party() {
                        if seen.insert(child.to_string()) {
                            out.push(child.to_string());
                            next.push(child.to_string());
                        }
                    }
                }
            }
            frontier = next;
        }
        out
    }

    fn would_cycle(&self, child: &str, parent: &str) -> bool {
        if child == parent {
            return true;
        }
        let mut seen = HashSet::new();
        let mut current = parent;
        while let Some(up) = self.parent_of(current) {
            if up == child {
                return true;
            }
            if !seen.insert(up) {
                // Existing cycle; should be unreachable if invariants hold.
                return true;
            }
            current = up;
        }
        false
    }

    /// Inserts `t`, replacing any other location triple for the same
    /// contained party. History edges are appended to the history instead.
    pub fn upsert_triple(&mut self, t: Triple) -> Result<(), GraphError> {
        if t.edge.is_history() {
            return self.push_history(t);
        }
        t.validate()?;
        if !self.has_node_named(&t.subject) {
            return Err(GraphError::UnknownSubject(t.subject));
        }
        if self.triples.contains(&t) {
            return Ok(());
        }
        if let (Some(child), Some(parent)) = (t.contained_party(), t.container_party()) {
            if self.would_cycle(child, parent) {
                return Err(GraphError::ContainmentCycle(t.to_string()));
            }
            if let Some(old) = self.placed.get(child).cloned() {
                self.remove_raw(&old);
            }
        }
        self.insert_raw(t);
        Ok(())
    }

    /// Like [`upsert_triple`](Self::upsert_triple) but refuses to displace an
    /// existing location triple.
    pub fn insert_strict(&mut self, t: Triple) -> Result<(), GraphError> {
        if let Some(child) = t.contained_party() {
            if let Some(existing) = self.location_of(child) {
                if existing != &t {
                    return Err(GraphError::LocationConflict {
                        existing: existing.to_string(),
                        new: t.to_string(),
                    });
                }
            }
        }
        self.upsert_triple(t)
    }

    /// Replaces every `(subject, edge, _)` triple with the single given value.
    pub fn set_unique(
        &mut self,
        subject: &str,
        edge: EdgeLabel,
        value: impl AsRef<str>,
    ) -> Result<(), GraphError> {
        let t = Triple::new(subject, edge, value);
        t.validate()?;
        if !self.has_node_named(subject) {
            return Err(GraphError::UnknownSubject(subject.to_string()));
        }
        let stale: Vec<Triple> = self
            .with_subject_edge(subject, edge)
            .filter(|o| o.value != t.value)
            .cloned()
            .collect();
        for o in &stale {
            self.remove_raw(o);
        }
        self.upsert_triple(t)
    }

    pub fn remove_triple(&mut self, t: &Triple) -> bool {
        self.remove_raw(t)
    }

    /// Removes every state triple matching the pattern; returns what was removed.
    pub fn remove_matching(&mut self, pattern: TriplePattern<'_>) -> Vec<Triple> {
        let gone: Vec<Triple> = self
            .triples
            .iter()
            .filter(|t| pattern.matches(t))
            .cloned()
            .collect();
        for t in &gone {
            self.remove_raw(t);
        }
        gone
    }

    pub fn push_history(&mut self, t: Triple) -> Result<(), GraphError> {
        if !t.edge.is_history() {
            return Err(GraphError::NotHistory(t.to_string()));
        }
        t.validate()?;
        if !self.has_node_named(&t.subject) {
            return Err(GraphError::UnknownSubject(t.subject));
        }
        self.history.push(t);
        Ok(())
    }

    /// State triples about `root` and everything placed under it, including
    /// the location triples that place them.
    pub fn local_triples(&self, root: &str) -> Vec<Triple> {
        let mut members: HashSet<String> = self.descendants_of(root).into_iter().collect();
        members.insert(root.to_string());
        self.triples
            .iter()
            .filter(|t| {
                members.contains(&t.subject)
                    || t.contained_party().is_some_and(|c| members.contains(c))
            })
            .cloned()
            .collect()
    }

    /// Verifies all structural invariants; used by tests and after loading
    /// untrusted snapshots.
    pub fn check_invariants(&self) -> Result<(), GraphError> {
        for t in self.triples.iter().chain(self.history.iter()) {
            if !self.has_node_named(&t.subject) {
                return Err(GraphError::UnknownSubject(t.subject.clone()));
            }
        }
        let mut placed: BTreeMap<&str, &Triple> = BTreeMap::new();
        for t in &self.triples {
            if let Some(child) = t.contained_party() {
                if let Some(prev) = placed.insert(child, t) {
                    return Err(GraphError::LocationConflict {
                        existing: prev.to_string(),
                        new: t.to_string(),
                    });
                }
            }
        }
        for (child, t) in &placed {
            let mut seen = HashSet::from([*child]);
            let mut current = t.container_party().unwrap_or_default();
            loop {
                if !seen.insert(current) {
                    return Err(GraphError::ContainmentCycle(t.to_string()));
                }
                match placed.get(current).and_then(|p| p.container_party()) {
                    Some(up) => current = up,
                    None => break,
                }
            }
        }
        Ok(())
    }
}

/// Display names may contain spaces but not line breaks or edge tokens, so
/// the leftmost-edge parsing rule stays unambiguous.
pub fn validate_name(name: &str) -> Result<(), GraphError> {
    if name.trim().is_empty() || name.contains(['\n', '\r']) {
        return Err(GraphError::InvalidName(name.to_string()));
    }
    if name.split_whitespace().any(EdgeLabel::is_edge_token) {
        return Err(GraphError::InvalidName(name.to_string()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coin_box() -> WorldGraph {
        let mut g = WorldGraph::new();
        g.add_node("room", NodeKind::Room).unwrap();
        g.add_node("box", NodeKind::Object).unwrap();
        g.add_node("coin", NodeKind::Object).unwrap();
        g.add_node("wizard", NodeKind::Character).unwrap();
        g
    }

    #[test]
    fn upsert_inserts_and_is_idempotent() {
        let mut g = coin_box();
        let t = Triple::new("coin", EdgeLabel::IsInside, "box");
        g.upsert_triple(t.clone()).unwrap();
        let before = g.clone();
        g.upsert_triple(t.clone()).unwrap();
        assert_eq!(g, before);
        assert_eq!(g.query(TriplePattern::any()), vec![&t]);
    }

    #[test]
    fn upsert_detects_cycles() {
        let mut g = coin_box();
        g.upsert_triple(Triple::new("coin", EdgeLabel::IsInside, "box")).unwrap();
        let err = g
            .upsert_triple(Triple::new("box", EdgeLabel::IsInside, "coin"))
            .unwrap_err();
        assert!(matches!(err, GraphError::ContainmentCycle(_)));
        assert!(matches!(
            g.upsert_triple(Triple::new("box", EdgeLabel::IsInside, "box")),
            Err(GraphError::ContainmentCycle(_))
        ));
    }

    #[test]
    fn upsert_detects_indirect_cycles_through_carriers() {
        let mut g = coin_box();
        g.upsert_triple(Triple::new("wizard", EdgeLabel::IsCarrying, "box")).unwrap();
        g.upsert_triple(Triple::new("coin", EdgeLabel::IsInside, "box")).unwrap();
        assert!(matches!(
            g.upsert_triple(Triple::new("wizard", EdgeLabel::IsInside, "coin")),
            Err(GraphError::ContainmentCycle(_))
        ));
    }

    #[test]
    fn upsert_replaces_conflicting_location() {
        let mut g = coin_box();
        g.upsert_triple(Triple::new("coin", EdgeLabel::IsInside, "room")).unwrap();
        g.upsert_triple(Triple::new("wizard", EdgeLabel::IsCarrying, "coin")).unwrap();
        let locs = g.query(TriplePattern::any());
        assert_eq!(locs, vec![&Triple::new("wizard", EdgeLabel::IsCarrying, "coin")]);
        g.check_invariants().unwrap();
    }

    #[test]
    fn unknown_subject_is_rejected() {
        let mut g = coin_box();
        assert!(matches!(
            g.upsert_triple(Triple::new("ghost", EdgeLabel::IsInside, "room")),
            Err(GraphError::UnknownSubject(_))
        ));
    }

    #[test]
    fn query_filters_on_bound_fields() {
        let mut g = coin_box();
        g.upsert_triple(Triple::new("wizard", EdgeLabel::IsCarrying, "coin")).unwrap();
        g.upsert_triple(Triple::new("box", EdgeLabel::IsInside, "room")).unwrap();
        let hits = g.query(TriplePattern::any().subject("wizard").edge(EdgeLabel::IsCarrying));
        assert_eq!(hits, vec![&Triple::new("wizard", EdgeLabel::IsCarrying, "coin")]);
        assert!(g.query(TriplePattern::any().subject("nobody")).is_empty());
        assert_eq!(g.query(TriplePattern::any()).len(), 2);
    }

    #[test]
    fn names_with_edge_tokens_are_rejected() {
        let mut g = WorldGraph::new();
        assert!(g.add_node("the IS_INSIDE thing", NodeKind::Object).is_err());
        assert!(g.add_node("  ", NodeKind::Object).is_err());
    }

    #[test]
    fn duplicate_names_get_distinct_ids() {
        let mut g = WorldGraph::new();
        let a = g.add_node("coin", NodeKind::Object).unwrap();
        let b = g.add_node("coin", NodeKind::Object).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn room_of_walks_up() {
        let mut g = coin_box();
        g.upsert_triple(Triple::new("wizard", EdgeLabel::IsInside, "room")).unwrap();
        g.upsert_triple(Triple::new("wizard", EdgeLabel::IsCarrying, "box")).unwrap();
        g.upsert_triple(Triple::new("coin", EdgeLabel::IsInside, "box")).unwrap();
        assert_eq!(g.room_of("coin"), Some("room"));
        assert_eq!(g.descendants_of("room"), vec!["wizard", "box", "coin"]);
    }

    #[test]
    fn set_unique_replaces_values() {
        let mut g = coin_box();
        g.set_unique("box", EdgeLabel::IsContainer, "false").unwrap();
        g.set_unique("box", EdgeLabel::IsContainer, "true").unwrap();
        assert_eq!(g.query(TriplePattern::any().subject("box")).len(), 1);
        assert!(g.is_true("box", EdgeLabel::IsContainer));
    }

    #[test]
    fn history_is_append_only_and_separate() {
        let mut g = coin_box();
        g.upsert_triple(Triple::new("wizard", EdgeLabel::HadSaid, "hello")).unwrap();
        assert!(g.state_triples().is_empty());
        assert_eq!(g.history().len(), 1);
    }
}
