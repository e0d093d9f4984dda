use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dropout::{apply_edge_dropout_traced, DropoutClass, DropoutConfig, Draw, GraphContextSetting};
use super::stats::tokenize;
use super::TaskError;
use crate::engine::{render_game_text, render_room_view, EngineError, World};
use crate::graph::{serialize_triples, EdgeLabel, Triple};

pub const GAME_TEXT_HEADER: &str = "[GameText]";
pub const GRAPH_HEADER: &str = "[Graph]";
pub const HISTORY_HEADER: &str = "[History]";

pub const DEFAULT_TOKEN_BUDGET: usize = 1600;

/// Knobs shared by every example builder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextConfig {
    pub dropout: DropoutConfig,
    /// Whole-graph ablation; replaces the `graph_state` gate when set.
    pub graph_setting: Option<GraphContextSetting>,
    /// Whitespace-token cap on the assembled input.
    pub token_budget: usize,
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig {
            dropout: DropoutConfig::default(),
            graph_setting: None,
            token_budget: DEFAULT_TOKEN_BUDGET,
        }
    }
}

impl ContextConfig {
    /// No dropout of any kind and the graph always present.
    pub fn lossless() -> Self {
        ContextConfig { dropout: DropoutConfig::zero(), ..Default::default() }
    }
}

/// Whose perspective the context is rendered from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum View {
    /// A character's GameText; the graph covers the character's room.
    Character(String),
    /// A viewpoint-free room rendering, for environment tasks.
    Room(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ContextTrace {
    pub draws: Vec<Draw>,
    pub game_text_present: bool,
    pub graph_present: bool,
    /// State triples rendered in the graph block, in order.
    pub graph_block: Vec<Triple>,
    pub protected: BTreeSet<Triple>,
    /// History lines removed to fit the token budget.
    pub truncated_history: usize,
}

impl ContextTrace {
    /// Protected triples missing from a rendered graph block. Zero when the
    /// whole block was ablated.
    pub fn protected_dropped(&self) -> usize {
        if !self.graph_present {
            return 0;
        }
        self.protected.iter().filter(|t| !self.graph_block.contains(t)).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssembledContext {
    pub text: String,
    pub trace: ContextTrace,
}

fn history_line(t: &Triple) -> String {
    match t.edge {
        EdgeLabel::HadSaid => format!("{}: \"{}\"", t.subject, t.value),
        _ => format!("{} {}", t.subject, t.value),
    }
}

/// Builds a model input: an optional GameText block, an optional graph block
/// of the room's triples after edge dropout, a history block of speech and
/// past actions by characters in the room, and the prompt as the last line.
///
/// With a `graph_setting`, the graph block is omitted with its probability
/// and the configured `graph_state` gate is not drawn. History lines are
/// rendered as prose, so an omitted graph block leaves no edge tokens.
/// Oldest history lines are cut first when the input exceeds the token
/// budget.
pub fn assemble_context<R: Rng + ?Sized>(
    world: &World,
    view: &View,
    prompt: &str,
    protected: &BTreeSet<Triple>,
    config: &ContextConfig,
    rng: &mut R,
) -> Result<AssembledContext, TaskError> {
    let ContextConfig { dropout, graph_setting, token_budget } = config;
    let (graph_setting, token_budget) = (*graph_setting, *token_budget);
    dropout.validate()?;
    let room = match view {
        View::Character(c) => world
            .room_of(c)
            .ok_or_else(|| EngineError::UnknownActor(c.clone()))?
            .to_string(),
        View::Room(r) => r.clone(),
    };
    let mut draws = Vec::new();

    let game_text_present = !rng.gen_bool(dropout.game_text);
    draws.push(Draw { class: DropoutClass::GameText, kept: game_text_present });
    let (graph_allowed, edge_config) = match graph_setting {
        Some(s) => (
            !rng.gen_bool(s.drop_probability()),
            dropout.with(DropoutClass::GraphState, 0.0),
        ),
        None => (true, *dropout),
    };

    let present = world.characters_in(&room);
    let mut triples = world.graph.local_triples(&room);
    triples.extend(
        world
            .graph
            .history()
            .iter()
            .filter(|t| matches!(t.edge, EdgeLabel::HadSaid | EdgeLabel::HadActed))
            .filter(|t| present.contains(&t.subject))
            .cloned(),
    );
    // Protection only applies to triples that would be in the context.
    let protected: BTreeSet<Triple> = triples.iter().filter(|t| protected.contains(t)).cloned().collect();
    let outcome = apply_edge_dropout_traced(&triples, &edge_config, &protected, rng)?;
    draws.extend(
        outcome
            .draws
            .iter()
            .filter(|d| graph_setting.is_none() || d.class != DropoutClass::GraphState),
    );
    let (history, state): (Vec<Triple>, Vec<Triple>) =
        outcome.kept.into_iter().partition(|t| t.edge.is_history());
    let graph_block = if graph_allowed { state } else { Vec::new() };
    let graph_present = !graph_block.is_empty();

    let game_text = game_text_present.then(|| match view {
        View::Character(c) => render_game_text(world, c).text,
        View::Room(r) => render_room_view(world, r).text,
    });
    let graph_text = graph_present.then(|| serialize_triples(&graph_block));
    let mut history_lines: Vec<String> = history.iter().map(history_line).collect();

    let render = |history_lines: &[String]| {
        let mut parts: Vec<String> = Vec::new();
        if let Some(g) = &game_text {
            parts.push(format!("{GAME_TEXT_HEADER}\n{g}"));
        }
        if let Some(g) = &graph_text {
            parts.push(format!("{GRAPH_HEADER}\n{g}"));
        }
        if !history_lines.is_empty() {
            parts.push(format!("{HISTORY_HEADER}\n{}", history_lines.join("\n")));
        }
        parts.push(prompt.to_string());
        parts.join("\n")
    };
    let mut text = render(&history_lines);
    let mut truncated_history = 0;
    while !history_lines.is_empty() && tokenize(&text).count() > token_budget {
        history_lines.remove(0);
        truncated_history += 1;
        text = render(&history_lines);
    }

    Ok(AssembledContext {
        text,
        trace: ContextTrace {
            draws,
            game_text_present,
            graph_present,
            graph_block,
            protected,
            truncated_history,
        },
    })
}
