use std::io::{self, BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use worldgraph_core::engine::{act, render_game_text, World, WorldFixture};
use worldgraph_core::eval::{run_eval, EngineOracle, EvalOptions, GoldEcho, Metric, Predictor, ProcessPredictor};
use worldgraph_core::graph::{serialize_delta, serialize_graph};
use worldgraph_core::tasks::{
    build_dataset, compute_stats, import_dataset, read_dataset_dir, write_dataset_dir, BuildConfig,
    GraphContextSetting, Sources, SplitName, TaskExample,
};
use worldgraph_service::api::NarratorSpec;
use worldgraph_service::{HttpPredictor, ServiceConfig, STORE_ENV};

#[derive(Parser)]
#[command(name = "worldgraph", version, about = "Text-adventure world graphs, grounding datasets, and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Interactive terminal session over a world fixture.
    Play {
        fixture: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Character to play; defaults to the fixture's player.
        #[arg(long)]
        actor: Option<String>,
        /// Print each turn's graph delta after the narration.
        #[arg(long)]
        show_delta: bool,
    },
    /// Build a split grounding-task dataset.
    Build {
        #[arg(long)]
        worlds: PathBuf,
        #[arg(long)]
        use_events: Option<PathBuf>,
        /// Comma-separated task names; all tasks when omitted.
        #[arg(long, value_delimiter = ',')]
        tasks: Vec<String>,
        /// Probability of dropping the whole graph block: 0.25, 0.5 or 1.0.
        #[arg(long)]
        graph_dropout: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        examples_per_task: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-task size and token statistics of a dataset directory or JSONL file.
    Stats {
        dataset: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Both)]
        format: Format,
    },
    /// Score a predictor on a dataset.
    Eval {
        dataset: PathBuf,
        /// `oracle`, `gold`, `url=<endpoint>`, or `exec=<program>`.
        #[arg(long)]
        predictor: String,
        /// Argument for an `exec=` predictor; repeatable.
        #[arg(long = "predictor-arg", allow_hyphen_values = true)]
        predictor_args: Vec<String>,
        /// World fixtures, required by the oracle.
        #[arg(long)]
        worlds: Option<PathBuf>,
        #[arg(long)]
        use_events: Option<PathBuf>,
        /// Restrict to one split of a dataset directory.
        #[arg(long)]
        split: Option<String>,
        #[arg(long, value_delimiter = ',')]
        metrics: Vec<String>,
        #[arg(long, default_value_t = 4)]
        concurrency: usize,
        #[arg(long, default_value_t = 30)]
        timeout_secs: u64,
        #[arg(long, value_enum, default_value_t = Format::Both)]
        format: Format,
    },
    /// Run the HTTP session service.
    Serve {
        #[arg(long)]
        scenarios: PathBuf,
        /// Overridden by the WORLDGRAPH_STORE environment variable.
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = String::from("0.0.0.0"))]
        host: String,
        /// `engine` or `url=<endpoint>`.
        #[arg(long, default_value = "engine")]
        narrator: String,
        /// Graph-block drop probability for external narrator inputs.
        #[arg(long, default_value_t = 1.0)]
        narrator_graph_drop: f64,
        #[arg(long, default_value_t = 10)]
        narrator_timeout_secs: u64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Csv,
    Both,
}

fn print_report(table: &str, csv: &str, format: Format) {
    match format {
        Format::Table => print!("{table}"),
        Format::Csv => print!("{csv}"),
        Format::Both => print!("{table}\n{csv}"),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Play { fixture, seed, actor, show_delta } => play(&fixture, seed, actor, show_delta),
        Command::Build { worlds, use_events, tasks, graph_dropout, seed, examples_per_task, out } => {
            let mut cfg = BuildConfig { seed, examples_per_task, ..Default::default() };
            if !tasks.is_empty() {
                cfg.tasks = tasks.iter().map(|t| t.parse()).collect::<Result<_, _>>()?;
            }
            if let Some(p) = graph_dropout {
                cfg.context.graph_setting = Some(GraphContextSetting::new(p)?);
            }
            let sources = Sources::load(&worlds, use_events.as_deref())?;
            let dataset = build_dataset(&sources, &cfg)?;
            for w in &dataset.warnings {
                log::warn!("{w}");
            }
            write_dataset_dir(&dataset, &out)?;
            for split in SplitName::ALL {
                println!("{split}\t{}", dataset.split(split).len());
            }
            Ok(())
        }
        Command::Stats { dataset, format } => {
            let stats = compute_stats(&load_examples(&dataset, None)?);
            print_report(&stats.to_table(), &stats.to_csv(), format);
            Ok(())
        }
        Command::Eval {
            dataset,
            predictor,
            predictor_args,
            worlds,
            use_events,
            split,
            metrics,
            concurrency,
            timeout_secs,
            format,
        } => {
            let examples = load_examples(&dataset, split.as_deref())?;
            let timeout = Duration::from_secs(timeout_secs);
            let predictor: Box<dyn Predictor> = match predictor.as_str() {
                "oracle" => {
                    let worlds = worlds.context("the oracle predictor needs --worlds")?;
                    Box::new(EngineOracle::new(Sources::load(&worlds, use_events.as_deref())?, &examples))
                }
                "gold" => Box::new(GoldEcho::new(&examples)),
                other => match (other.strip_prefix("url="), other.strip_prefix("exec=")) {
                    (Some(url), _) => Box::new(HttpPredictor::new(url, timeout)?),
                    (_, Some(program)) => Box::new(ProcessPredictor::spawn(program, &predictor_args, timeout)?),
                    _ => bail!("unknown predictor `{other}`; use oracle, gold, url=<endpoint> or exec=<program>"),
                },
            };
            let mut opts = EvalOptions { concurrency, ..Default::default() };
            if !metrics.is_empty() {
                opts.metrics = metrics.iter().map(|m| m.parse::<Metric>()).collect::<Result<_, _>>().map_err(anyhow::Error::msg)?;
            }
            let report = run_eval(&examples, predictor.as_ref(), &opts)?;
            print_report(&report.to_table(), &report.to_csv(), format);
            Ok(())
        }
        Command::Serve {
            scenarios,
            store,
            port,
            host,
            narrator,
            narrator_graph_drop,
            narrator_timeout_secs,
        } => {
            let mut config = ServiceConfig::new(scenarios, store).with_env_overrides();
            config.narrator = narrator.parse::<NarratorSpec>().map_err(anyhow::Error::msg)?;
            config.narrator_timeout = Duration::from_secs(narrator_timeout_secs);
            GraphContextSetting::free(narrator_graph_drop)?;
            config.external_graph_drop = narrator_graph_drop;
            if std::env::var_os(STORE_ENV).is_some() {
                log::info!("store directory from {STORE_ENV}: {}", config.store_dir.display());
            }
            let addr: SocketAddr = format!("{host}:{port}").parse().context("bad listen address")?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(worldgraph_service::serve(config, addr))?;
            Ok(())
        }
    }
}

/// A dataset directory (optionally one split) or a single JSONL file.
fn load_examples(path: &Path, split: Option<&str>) -> Result<Vec<TaskExample>> {
    if path.is_dir() {
        let dataset = read_dataset_dir(path)?;
        return Ok(match split {
            None => dataset.all().cloned().collect(),
            Some(name) => {
                let split = SplitName::ALL
                    .into_iter()
                    .find(|s| s.as_str() == name)
                    .with_context(|| format!("unknown split `{name}`"))?;
                dataset.split(split).to_vec()
            }
        });
    }
    if split.is_some() {
        bail!("--split needs a dataset directory");
    }
    Ok(import_dataset(path)?)
}

fn play(fixture: &Path, seed: u64, actor: Option<String>, show_delta: bool) -> Result<()> {
    let fixture = WorldFixture::load(fixture)?;
    let mut world: World = fixture.build()?;
    world.rng_seed = seed;
    let actor = actor
        .or_else(|| fixture.player.clone())
        .or_else(|| world.actors().first().map(|n| n.display_name.clone()))
        .context("the fixture has no characters")?;
    if world.room_of(&actor).is_none() {
        bail!("`{actor}` is not a placed character");
    }

    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    writeln!(out, "{}", render_game_text(&world, &actor).text)?;
    writeln!(out, "(:look, :graph, :quit)")?;
    loop {
        write!(out, "> ")?;
        out.flush()?;
        let mut line = String::new();
        if stdin.lock().read_line(&mut line)? == 0 {
            break;
        }
        match line.trim() {
            "" => continue,
            ":quit" | ":q" => break,
            ":look" => writeln!(out, "{}", render_game_text(&world, &actor).text)?,
            ":graph" => writeln!(out, "{}", serialize_graph(&world.graph))?,
            text => match act(&mut world, &actor, text) {
                Ok(result) => {
                    writeln!(out, "{}", result.narration)?;
                    if show_delta {
                        writeln!(out, "{}", serialize_delta(&result.delta))?;
                    }
                }
                Err(e) => writeln!(out, "error: {e}")?,
            },
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;
    use worldgraph_core::tasks::TaskKind;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn build_accepts_task_lists() {
        let cli = Cli::try_parse_from([
            "worldgraph", "build", "--worlds", "w", "--tasks", "GameActions,RoomDescription", "--out", "o",
        ])
        .unwrap();
        match cli.command {
            Command::Build { tasks, graph_dropout, .. } => {
                assert_eq!(tasks, ["GameActions", "RoomDescription"]);
                assert_eq!(graph_dropout, None);
            }
            _ => panic!("parsed the wrong subcommand"),
        }
        assert!(TaskKind::ALL.iter().any(|t| t.as_str() == "GameActions"));
    }
}
