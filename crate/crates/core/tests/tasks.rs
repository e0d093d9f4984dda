mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{assert_golden, fixture_path, wizard_room};
use worldgraph_core::engine::{parse_action, CanonicalAction, Verb, World, WorldFixture};
use worldgraph_core::graph::{parse_delta, parse_triple_line, serialize_delta, EdgeLabel, GraphDelta, Triple};
use worldgraph_core::tasks::{
    build_attribute_example, build_dataset, build_element_example, build_graph_update_example,
    build_narration_example, build_room_example, compute_stats, export_dataset, generate, import_dataset,
    prompt_variants, read_examples, write_examples, ActionOrigin, ActionSource, AttributeQuery, BuildConfig,
    ContextConfig, DropoutClass, DropoutConfig, ElementKind, GraphContextSetting, LabelGrammar, PromptKind,
    RoomTextKind, SideStats, Sources, SplitName, TaskError, TaskExample, TaskKind, GRAPH_HEADER,
};
use worldgraph_core::use_events::{apply_use_event, instantiate, load_use_events, render_external, UseEvent};

fn published() -> Vec<UseEvent> {
    load_use_events(&fixture_path("use_events/published.jsonl")).unwrap()
}

fn sources() -> Sources {
    Sources::load(&fixture_path("worlds"), Some(&fixture_path("use_events/published.jsonl"))).unwrap()
}

fn action(world: &World, actor: &str, text: &str) -> CanonicalAction {
    parse_action(text, world, actor).unwrap()
}

fn game<'a>(a: &'a CanonicalAction) -> ActionSource<'a> {
    ActionSource::Engine { action: a, origin: ActionOrigin::Game }
}

/// Lines of the graph block, if the input has one.
fn graph_lines(input: &str) -> Option<Vec<&str>> {
    let lines: Vec<&str> = input.lines().collect();
    let start = lines.iter().position(|l| *l == GRAPH_HEADER)?;
    let body = &lines[start + 1..lines.len() - 1];
    Some(body.iter().take_while(|l| !l.starts_with('[')).copied().collect())
}

fn camp(characters: &[&str]) -> World {
    let chars: Vec<String> = characters
        .iter()
        .map(|c| format!(r#"{{"name": "{c}", "room": "camp", "description": "A {c}."}}"#))
        .collect();
    let json = format!(
        r#"{{"id": "camp", "rooms": [{{"name": "camp", "description": "A quiet camp."}}],
            "characters": [{}]}}"#,
        chars.join(",")
    );
    serde_json::from_str::<WorldFixture>(&json).unwrap().build().unwrap()
}

#[test]
fn get_staff_graph_update_label() {
    let w = wizard_room();
    let a = action(&w, "wizard", "get staff");
    let b = build_graph_update_example(&w, "wizard", &game(&a), 1, &ContextConfig::default()).unwrap();
    assert_eq!(b.example.task, TaskKind::GameActions);
    assert_eq!(b.example.label, "DEL: staff IS_INSIDE room\nADD: wizard IS_CARRYING staff");
    assert_eq!(b.example.prompt(), "modify graph after: wizard get staff");
    assert!(b.trace.protected.contains(&Triple::new("staff", EdgeLabel::IsInside, "room")));
}

#[test]
fn invalid_action_labels_no_mutation() {
    let w = wizard_room();
    let a = action(&w, "wizard", "eat jar");
    let src = ActionSource::Engine { action: &a, origin: ActionOrigin::InvalidSelfPlay };
    let b = build_graph_update_example(&w, "wizard", &src, 2, &ContextConfig::default()).unwrap();
    assert_eq!(b.example.task, TaskKind::InvalidSelfPlay);
    assert_eq!(b.example.label, "NO_MUTATION");
    let n = build_narration_example(&w, "wizard", "wizard", &src, 2, &ContextConfig::default()).unwrap();
    assert_eq!(n.example.label, "You can't eat that!");
    // Nobody else perceives a refused action.
    assert!(matches!(
        build_narration_example(&w, "wizard", "knight", &src, 2, &ContextConfig::default()),
        Err(TaskError::ObserverNotPresent { .. })
    ));
}

#[test]
fn narration_labels_per_observer() {
    let w = wizard_room();
    let a = action(&w, "wizard", "get staff");
    let cfg = ContextConfig::default();
    let own = build_narration_example(&w, "wizard", "wizard", &game(&a), 3, &cfg).unwrap();
    assert_eq!(own.example.label, "You get the staff.");
    assert_eq!(own.example.prompt(), "narrate from wizard perspective: wizard get staff");
    let other = build_narration_example(&w, "wizard", "knight", &game(&a), 3, &cfg).unwrap();
    assert_eq!(other.example.label, "wizard gets the staff.");
    assert!(matches!(
        build_narration_example(&w, "knight", "rug", &game(&action(&w, "knight", "hug peasant")), 3, &cfg),
        Err(TaskError::ObserverNotPresent { .. })
    ));
}

#[test]
fn use_event_examples_match_the_simulator() {
    let stake = published().remove(0);
    let world = camp(&["milo", "bystander"]);
    let src = ActionSource::UseEvent { event: &stake, index: 0 };
    let cfg = ContextConfig::default();

    let oracle = apply_use_event(&instantiate(&world, &stake, "milo").unwrap(), &stake, "milo").unwrap();
    let g = build_graph_update_example(&world, "milo", &src, 4, &cfg).unwrap();
    assert_eq!(g.example.task, TaskKind::UseEventActions);
    assert_eq!(g.example.label, serialize_delta(&oracle.delta));
    assert!(g.example.label.contains("ADD: milo IS_WEARING sharpened wooden stake"));
    assert_eq!(g.example.prompt(), "modify graph after: milo tie rope to wood stake");
    assert_eq!(g.example.provenance.event, Some(0));

    let own = build_narration_example(&world, "milo", "milo", &src, 4, &cfg).unwrap();
    assert!(own.example.label.starts_with("You tie the rope to each end of the wood stake"));
    let other = build_narration_example(&world, "milo", "bystander", &src, 4, &cfg).unwrap();
    assert_eq!(other.example.label, render_external(&stake, "milo"));
    assert!(other.example.label.starts_with("milo ties a rope to each end"));
}

#[test]
fn boring_and_failed_use_events_label_no_mutation() {
    let world = camp(&["milo"]);
    for (i, e) in published().iter().enumerate().filter(|(_, e)| e.is_no_op()) {
        let src = ActionSource::UseEvent { event: e, index: i };
        let b = build_graph_update_example(&world, "milo", &src, 5, &ContextConfig::default()).unwrap();
        assert_eq!(b.example.label, "NO_MUTATION", "{}", e.phrase);
    }
}

fn one_carrier_world() -> World {
    let json = r#"{"id": "cell", "rooms": [{"name": "cell"}],
        "characters": [{"name": "wizard", "room": "cell"}],
        "objects": [{"name": "staff", "location": {"carried_by": "wizard"},
                     "description": "A gnarled oak staff.", "wieldable": true}]}"#;
    serde_json::from_str::<WorldFixture>(json).unwrap().build().unwrap()
}

#[test]
fn carried_element_becomes_the_label() {
    let w = one_carrier_world();
    let b = build_element_example(&w, ElementKind::Carried, 6, &ContextConfig::lossless()).unwrap();
    assert_eq!(b.example.task, TaskKind::AddCharacterCarrying);
    assert!(
        prompt_variants(PromptKind::AddCarried, "wizard").contains(&b.example.prompt().to_string()),
        "{}",
        b.example.prompt()
    );
    assert_eq!(
        b.example.label,
        "staff HAS_DESCRIPTION A gnarled oak staff.\n\
         staff IS_CONTAINER false\n\
         staff IS_DRINK false\n\
         staff IS_FOOD false\n\
         staff IS_GETTABLE true\n\
         staff IS_SURFACE false\n\
         staff IS_TYPE object\n\
         staff IS_WEARABLE false\n\
         staff IS_WIELDABLE true\n\
         wizard IS_CARRYING staff"
    );
    // Removed, not protected: no trace of the staff in the context.
    assert!(!b.example.input.contains("staff"));
}

#[test]
fn lone_character_is_the_forced_choice() {
    let w = camp(&["hermit"]);
    let b = build_element_example(&w, ElementKind::Character, 7, &ContextConfig::lossless()).unwrap();
    assert_eq!(b.example.task, TaskKind::AddCharacter);
    let label: BTreeSet<Triple> = b.example.label.lines().map(|l| parse_triple_line(l).unwrap()).collect();
    assert!(label.contains(&Triple::new("hermit", EdgeLabel::IsInside, "camp")));
    assert!(label.contains(&Triple::new("hermit", EdgeLabel::HasDescription, "A hermit.")));
    assert!(label.iter().all(|t| t.subject == "hermit"));
    assert!(matches!(
        build_element_example(&w, ElementKind::Worn, 7, &ContextConfig::lossless()),
        Err(TaskError::NothingToRemove(_))
    ));
}

#[test]
fn element_prompts_are_uniform() {
    let w = wizard_room();
    let variants = prompt_variants(PromptKind::AddCharacter, "");
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let n = 1000;
    for seed in 0..n {
        let b = build_element_example(&w, ElementKind::Character, seed, &ContextConfig::lossless()).unwrap();
        *counts.entry(b.example.prompt().to_string()).or_default() += 1;
    }
    assert_eq!(counts.len(), variants.len());
    let expected = n as f64 / variants.len() as f64;
    for (p, c) in &counts {
        assert!((*c as f64 - expected).abs() <= 0.05 * n as f64, "{p}: {c}");
    }
}

#[test]
fn attribute_labels() {
    let w = wizard_room();
    let cfg = ContextConfig::lossless();
    let b = build_attribute_example(&w, "box", &AttributeQuery::Boolean(EdgeLabel::IsContainer), 8, &cfg).unwrap();
    assert_eq!(b.example.task, TaskKind::ObjectsAttributes);
    assert_eq!(b.example.label, "box IS_CONTAINER true");
    assert!(prompt_variants(PromptKind::Container, "box").contains(&b.example.prompt().to_string()));
    assert!(!graph_lines(&b.example.input).unwrap().contains(&"box IS_CONTAINER true"));

    let typed = build_attribute_example(&w, "jar", &AttributeQuery::Type, 8, &cfg).unwrap();
    assert_eq!(typed.example.label, "jar IS_TYPE object");
    let negative = build_attribute_example(&w, "apple", &AttributeQuery::Boolean(EdgeLabel::IsSurface), 8, &cfg);
    assert_eq!(negative.unwrap().example.label, "apple IS_SURFACE false");
    assert!(matches!(
        build_attribute_example(&w, "apple", &AttributeQuery::Attribute(Some("glowing".into())), 8, &cfg),
        Err(TaskError::UnknownAttribute { .. })
    ));
}

fn torch_event(json_tail: &str) -> UseEvent {
    let line = format!(
        r#"{{"phrase": "douse torch with bucket", "narration": "The flame hisses out.",
            "external": "{{actor}} douses a torch.", "kind": "success",
            "initial_primary": {{"name": "torch", "description": "A torch.", "attributes": ["lit", "burnable"]}},
            "initial_secondary": {{"name": "bucket", "description": "A bucket of water."}},
            {json_tail}}}"#
    );
    worldgraph_core::use_events::parse_use_event_json(&line.replace('\n', " ")).unwrap()
}

#[test]
fn attribute_labels_track_post_action_state() {
    let cfg = ContextConfig::lossless();
    let e = torch_event(
        r#""final_objects": [{"name": "torch", "description": "A wet torch.", "location": "Held by {actor}",
            "attribute_changes": ["-lit", "+extinguished"]}]"#,
    );
    let before = instantiate(&camp(&["milo"]), &e, "milo").unwrap();
    let burnable = build_attribute_example(
        &before,
        "torch",
        &AttributeQuery::Attribute(Some("burnable".into())),
        9,
        &cfg,
    )
    .unwrap();
    assert_eq!(burnable.example.label, "torch HAS_ATTRIBUTE burnable");
    let lit = build_attribute_example(&before, "torch", &AttributeQuery::Attribute(Some("lit".into())), 9, &cfg);
    assert_eq!(lit.unwrap().example.label, "torch HAS_ATTRIBUTE lit");

    let after = apply_use_event(&before, &e, "milo").unwrap().world;
    assert!(matches!(
        build_attribute_example(&after, "torch", &AttributeQuery::Attribute(Some("lit".into())), 9, &cfg),
        Err(TaskError::UnknownAttribute { .. })
    ));
    let ext = build_attribute_example(&after, "torch", &AttributeQuery::Attribute(Some("extinguished".into())), 9, &cfg);
    assert_eq!(ext.unwrap().example.label, "torch HAS_ATTRIBUTE extinguished");
}

#[test]
fn room_text_tasks() {
    let w = wizard_room();
    let cfg = ContextConfig::lossless();
    let d = build_room_example(&w, "room", RoomTextKind::Description, 10, &cfg).unwrap();
    assert_eq!(d.example.label, "A round stone room lit by a single candle.");
    assert_eq!(d.example.prompt(), "describe the room");
    assert!(!d.example.input.contains("single candle"));

    let mut seen = BTreeSet::new();
    for seed in 0..60 {
        let b = build_room_example(&w, "room", RoomTextKind::Backstory, seed, &cfg).unwrap();
        assert_eq!(b.example.label, "The tower was raised by the first archmage.");
        assert_eq!(b, build_room_example(&w, "room", RoomTextKind::Backstory, seed, &cfg).unwrap());
        seen.insert(b.example.prompt().to_string());
    }
    let expected: BTreeSet<String> = ["background", "describe the room backstory", "room backstory"]
        .into_iter()
        .map(String::from)
        .collect();
    assert_eq!(seen, expected);
    assert!(matches!(
        build_room_example(&w, "hallway", RoomTextKind::Backstory, 0, &cfg),
        Err(TaskError::MissingRoomText { .. })
    ));
}

#[test]
fn graph_setting_one_removes_every_graph_block() {
    let mut cfg = BuildConfig { examples_per_task: 25, seed: 11, ..Default::default() };
    cfg.context.graph_setting = Some(GraphContextSetting::new(1.0).unwrap());
    let ds = build_dataset(&sources(), &cfg).unwrap();
    for ex in ds.all() {
        assert!(graph_lines(&ex.input).is_none(), "{}", ex.input);
        for tok in ex.input.split_whitespace() {
            assert!(!EdgeLabel::is_edge_token(tok), "{tok} in {}", ex.input);
        }
    }
}

#[test]
fn graph_setting_presence_rate() {
    let mut cfg = BuildConfig {
        examples_per_task: 150,
        seed: 12,
        tasks: vec![TaskKind::GameActions, TaskKind::AddObject, TaskKind::RoomDescription],
        ..Default::default()
    };
    cfg.context.graph_setting = Some(GraphContextSetting::new(0.5).unwrap());
    let (generated, _) = generate(&sources(), &cfg).unwrap();
    let present = generated.iter().filter(|g| g.built.trace.graph_present).count();
    let rate = present as f64 / generated.len() as f64;
    assert!((rate - 0.5).abs() < 0.06, "{rate}");
}

#[test]
fn labels_are_grounded_and_parse() {
    let s = sources();
    let cfg = BuildConfig { examples_per_task: 20, seed: 13, ..Default::default() };
    let (generated, warnings) = generate(&s, &cfg).unwrap();
    assert!(warnings.iter().all(|w| !w.contains("built")), "{warnings:?}");
    let kinds: BTreeSet<TaskKind> = generated.iter().map(|g| g.built.example.task).collect();
    assert_eq!(kinds.len(), 20);
    for g in &generated {
        let ex = &g.built.example;
        assert!(!ex.label.trim().is_empty());
        assert_eq!(g.built.trace.protected_dropped(), 0, "{}", ex.input);
        match ex.task.label_grammar() {
            LabelGrammar::Delta => {
                parse_delta(&ex.label).unwrap();
            }
            LabelGrammar::Triples => {
                // Every label triple exists in the source world.
                let world = s.replay(&ex.provenance.world, &ex.provenance.prior).unwrap();
                for line in ex.label.lines() {
                    let t = parse_triple_line(line).unwrap();
                    assert!(world.graph.contains(&t), "{t} not in {}", ex.provenance.world);
                }
            }
            LabelGrammar::FreeText => {}
        }
    }
}

#[test]
fn dropout_never_touches_protected_triples() {
    let w = wizard_room();
    let a = action(&w, "knight", "give coin to peasant");
    let cfg = ContextConfig { dropout: DropoutConfig::uniform(0.9), ..Default::default() };
    for seed in 0..300 {
        let b = build_graph_update_example(&w, "knight", &game(&a), seed, &cfg).unwrap();
        assert_eq!(b.trace.protected_dropped(), 0);
        if let Some(lines) = graph_lines(&b.example.input) {
            assert!(lines.contains(&"knight IS_CARRYING coin"));
        }
    }
}

#[test]
fn dropout_rates_track_configuration() {
    let cfg = BuildConfig {
        examples_per_task: 60,
        seed: 14,
        ..Default::default()
    };
    let (generated, _) = generate(&sources(), &cfg).unwrap();
    let mut tally: BTreeMap<DropoutClass, (usize, usize)> = BTreeMap::new();
    for g in &generated {
        for d in &g.built.trace.draws {
            let e = tally.entry(d.class).or_default();
            e.0 += d.kept as usize;
            e.1 += 1;
        }
    }
    let defaults = DropoutConfig::default();
    for (class, (kept, total)) in tally {
        let expected = 1.0 - defaults.get(class);
        let observed = kept as f64 / total as f64;
        // Loose bound at this sample size; the acceptance suite uses 10,000.
        assert!((observed - expected).abs() < 0.08, "{class:?}: {observed} vs {expected} over {total}");
    }
}

#[test]
fn datasets_are_deterministic_and_split() {
    let s = sources();
    let cfg = BuildConfig { examples_per_task: 10, seed: 15, ..Default::default() };
    let a = build_dataset(&s, &cfg).unwrap();
    let b = build_dataset(&s, &cfg).unwrap();
    assert_eq!(a, b);
    let other = build_dataset(&s, &BuildConfig { seed: 16, ..cfg.clone() }).unwrap();
    assert_ne!(a, other);
    assert_eq!(a.all().count(), 200);
    // UseEvent examples follow their event's split.
    let events = published();
    let unseen: BTreeSet<usize> = a
        .split(SplitName::UnseenTest)
        .iter()
        .filter_map(|e| e.provenance.event)
        .collect();
    for ex in a.split(SplitName::Train).iter().filter(|e| e.task.is_use_event()) {
        assert!(!unseen.contains(&ex.provenance.event.unwrap()));
    }
    assert!(unseen.iter().all(|&i| i < events.len()));
}

#[test]
fn export_import_round_trip() {
    let cfg = BuildConfig { examples_per_task: 5, seed: 17, ..Default::default() };
    let examples: Vec<TaskExample> = build_dataset(&sources(), &cfg).unwrap().all().cloned().collect();
    assert_eq!(examples.len(), 100);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.jsonl");
    export_dataset(&examples, &p).unwrap();
    assert_eq!(import_dataset(&p).unwrap(), examples);
    let first = std::fs::read(&p).unwrap();
    export_dataset(&import_dataset(&p).unwrap(), &p).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), first);
}

#[test]
fn export_is_byte_stable() {
    let cfg = BuildConfig {
        examples_per_task: 1,
        seed: 18,
        tasks: vec![TaskKind::GameActions, TaskKind::GameActionsNarration, TaskKind::ObjectsAttributes],
        ..Default::default()
    };
    let examples: Vec<TaskExample> = build_dataset(&sources(), &cfg).unwrap().all().cloned().collect();
    let mut buf = Vec::new();
    write_examples(&mut buf, &examples).unwrap();
    assert_golden("dataset_small.jsonl", &String::from_utf8(buf).unwrap());
}

#[test]
fn schema_violations_name_the_line() {
    let good = TaskExample {
        task: TaskKind::RoomDescription,
        input: "describe the room".into(),
        label: "A room.".into(),
        seed: 1,
        provenance: Default::default(),
    };
    let mut buf = Vec::new();
    write_examples(&mut buf, &[good.clone(), good]).unwrap();
    let mut text = String::from_utf8(buf).unwrap();
    text.push_str(r#"{"task":"RoomDescription","input":"describe the room","seed":2,"provenance":{"world":""}}"#);
    match read_examples(text.as_bytes()) {
        Err(TaskError::SchemaViolation { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

/// Second implementation: counts by hand-rolled loops over bytes.
fn recount(texts: &[String]) -> SideStats {
    let mut tokens = 0usize;
    let mut vocab: Vec<String> = Vec::new();
    let mut seen: Vec<&String> = Vec::new();
    for t in texts {
        if !seen.contains(&t) {
            seen.push(t);
        }
        let mut current = String::new();
        for ch in t.chars().chain(std::iter::once(' ')) {
            if ch.is_whitespace() {
                if !current.is_empty() {
                    tokens += 1;
                    if !vocab.contains(&current) {
                        vocab.push(current.clone());
                    }
                    current.clear();
                }
            } else {
                current.extend(ch.to_lowercase());
            }
        }
    }
    SideStats {
        avg_length: tokens as f64 / texts.len() as f64,
        tokens,
        unique_tokens: vocab.len(),
        unique_utterances: seen.len(),
        utterances: texts.len(),
    }
}

#[test]
fn stats_match_an_independent_recount() {
    let narrations: Vec<String> = published()[1..].iter().map(|e| e.narration.clone()).collect();
    assert_eq!(narrations.len(), 8);
    let examples: Vec<TaskExample> = narrations
        .iter()
        .map(|n| TaskExample {
            task: TaskKind::UseEventActionsNarration,
            input: "narrate".into(),
            label: n.clone(),
            seed: 0,
            provenance: Default::default(),
        })
        .collect();
    let stats = compute_stats(&examples);
    assert_eq!(stats.tasks[&TaskKind::UseEventActionsNarration].labels, recount(&narrations));
    assert_eq!(stats.all.labels, recount(&narrations));
}

#[test]
fn stats_identities_hold_on_generated_data() {
    let cfg = BuildConfig { examples_per_task: 8, seed: 19, ..Default::default() };
    let examples: Vec<TaskExample> = build_dataset(&sources(), &cfg).unwrap().all().cloned().collect();
    let stats = compute_stats(&examples);
    for t in stats.tasks.values().chain([&stats.all]) {
        for side in [t.input, t.labels] {
            assert!(side.unique_tokens <= side.tokens);
            assert!(side.unique_utterances <= side.utterances);
        }
    }
    assert_eq!(stats.all.input.utterances, examples.len());
}

#[test]
fn say_and_go_round_trip_through_builders() {
    let w = wizard_room();
    let cfg = ContextConfig::lossless();
    let say = CanonicalAction::say("hello there");
    let b = build_narration_example(&w, "wizard", "knight", &game(&say), 20, &cfg).unwrap();
    assert_eq!(b.example.label, "wizard says \"hello there\"");
    let go = action(&w, "wizard", "go hallway");
    assert_eq!(go.verb, Verb::Go);
    let g = build_graph_update_example(&w, "wizard", &game(&go), 20, &cfg).unwrap();
    let delta = parse_delta(&g.example.label).unwrap();
    assert!(matches!(delta, GraphDelta::Mutations(_)));
    assert!(g.example.label.contains("ADD: wizard IS_INSIDE hallway"));
}
