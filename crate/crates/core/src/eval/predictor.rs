use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::engine::{execute, narration_for, parse_action, templated_narration};
use crate::graph::serialize_delta;
use crate::tasks::{Sources, TaskExample};
use crate::use_events::{apply_use_event, instantiate, render_external};

/// One line of the predictor protocol, sent to the predictor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictRequest {
    pub example_id: String,
    pub input: String,
}

impl PredictRequest {
    pub fn for_example(example: &TaskExample) -> Self {
        PredictRequest { example_id: example.id(), input: example.input.clone() }
    }
}

/// One line of the predictor protocol, returned by the predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub example_id: String,
    pub text: String,
    /// Natural-log likelihoods of the gold tokens, each at most zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_logprobs: Option<Vec<f64>>,
}

impl Prediction {
    pub fn text(example_id: impl Into<String>, text: impl Into<String>) -> Self {
        Prediction { example_id: example_id.into(), text: text.into(), token_logprobs: None }
    }

    /// Checks the response against its request.
    pub fn check(&self, request: &PredictRequest) -> Result<(), EvalError> {
        if self.example_id != request.example_id {
            return Err(EvalError::ProtocolViolation(format!(
                "response for `{}` answers request `{}`",
                self.example_id, request.example_id
            )));
        }
        if let Some(lp) = &self.token_logprobs {
            if let Some(bad) = lp.iter().find(|v| **v > 0.0 || v.is_nan()) {
                return Err(EvalError::ProtocolViolation(format!(
                    "positive log-probability {bad} for `{}`",
                    self.example_id
                )));
            }
        }
        Ok(())
    }
}

/// Anything that maps a model input to predicted label text.
pub trait Predictor: Send + Sync {
    fn name(&self) -> String;

    /// Errors other than `Unsupported` and `ProtocolViolation` are treated as
    /// the predictor being unavailable.
    fn predict(&self, request: &PredictRequest) -> Result<Prediction, EvalError>;
}

/// Returns each example's gold label; a harness self-check.
pub struct GoldEcho {
    labels: HashMap<String, String>,
}

impl GoldEcho {
    pub fn new<'a>(examples: impl IntoIterator<Item = &'a TaskExample>) -> Self {
        GoldEcho { labels: examples.into_iter().map(|e| (e.id(), e.label.clone())).collect() }
    }
}

impl Predictor for GoldEcho {
    fn name(&self) -> String {
        "gold".to_string()
    }

    fn predict(&self, request: &PredictRequest) -> Result<Prediction, EvalError> {
        let label = self
            .labels
            .get(&request.example_id)
            .ok_or_else(|| EvalError::ProtocolViolation(format!("unknown example `{}`", request.example_id)))?;
        Ok(Prediction::text(&request.example_id, label))
    }
}

/// Predicts action-task labels by replaying each example's provenance
/// through the engine and the UseEvent simulator. Environment tasks are
/// unsupported.
pub struct EngineOracle {
    sources: Sources,
    examples: HashMap<String, TaskExample>,
}

impl EngineOracle {
    pub fn new<'a>(sources: Sources, examples: impl IntoIterator<Item = &'a TaskExample>) -> Self {
        EngineOracle {
            sources,
            examples: examples.into_iter().map(|e| (e.id(), e.clone())).collect(),
        }
    }

    fn answer(&self, example: &TaskExample) -> Result<String, EvalError> {
        let task = example.task;
        if !task.is_action() {
            return Err(EvalError::Unsupported(task.to_string()));
        }
        let p = &example.provenance;
        let missing = |what: &str| EvalError::ProtocolViolation(format!("example `{}` lacks {what}", example.id()));
        let actor = p.actor.as_deref().ok_or_else(|| missing("an actor"))?;
        let world = self.sources.replay(&p.world, &p.prior)?;

        if task.is_use_event() {
            let index = p.event.ok_or_else(|| missing("an event index"))?;
            let event = self.sources.use_events.get(index).ok_or_else(|| missing("a known event"))?;
            if task.is_narration() {
                let observer = p.observer.as_deref().ok_or_else(|| missing("an observer"))?;
                return Ok(if observer == actor {
                    event.narration.clone()
                } else {
                    render_external(event, actor)
                });
            }
            let ready = instantiate(&world, event, actor).map_err(crate::tasks::TaskError::from)?;
            let outcome = apply_use_event(&ready, event, actor).map_err(crate::tasks::TaskError::from)?;
            return Ok(serialize_delta(&outcome.delta));
        }

        let text = p.action.as_deref().ok_or_else(|| missing("an action"))?;
        let action = parse_action(text, &world, actor)
            .map_err(|e| EvalError::ProtocolViolation(format!("cannot parse `{text}`: {e}")))?;
        let mut after = world.clone();
        let result = execute(&mut after, actor, &action).map_err(crate::tasks::TaskError::from)?;
        if task.is_narration() {
            let observer = p.observer.as_deref().ok_or_else(|| missing("an observer"))?;
            return Ok(if result.validity.is_valid() {
                narration_for(&action, actor, observer, &result.validity)
            } else {
                templated_narration(&action, &result.validity)
            });
        }
        Ok(serialize_delta(&result.delta))
    }
}

impl Predictor for EngineOracle {
    fn name(&self) -> String {
        "engine-oracle".to_string()
    }

    fn predict(&self, request: &PredictRequest) -> Result<Prediction, EvalError> {
        let example = self
            .examples
            .get(&request.example_id)
            .ok_or_else(|| EvalError::ProtocolViolation(format!("unknown example `{}`", request.example_id)))?;
        Ok(Prediction::text(&request.example_id, self.answer(example)?))
    }
}

struct ProcessIo {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    /// Set after a timeout or I/O failure; the stream may be out of step.
    broken: Option<String>,
}

/// An external process speaking the predictor protocol: one JSON request
/// per line on stdin, one JSON response per line on stdout. Requests are
/// serialized.
pub struct ProcessPredictor {
    program: String,
    io: Mutex<ProcessIo>,
    timeout: Duration,
}

impl ProcessPredictor {
    pub fn spawn(program: &str, args: &[String], timeout: Duration) -> Result<Self, EvalError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| EvalError::PredictorUnavailable { reason: format!("cannot start `{program}`: {e}"), partial: None })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(ProcessPredictor {
            program: program.to_string(),
            io: Mutex::new(ProcessIo { child, stdin, lines: rx, broken: None }),
            timeout,
        })
    }
}

impl Predictor for ProcessPredictor {
    fn name(&self) -> String {
        format!("process:{}", self.program)
    }

    fn predict(&self, request: &PredictRequest) -> Result<Prediction, EvalError> {
        let mut io = self.io.lock().unwrap_or_else(|p| p.into_inner());
        let unavailable = |reason: String| EvalError::PredictorUnavailable { reason, partial: None };
        if let Some(reason) = &io.broken {
            return Err(unavailable(reason.clone()));
        }
        let line = serde_json::to_string(request).expect("request serializes");
        if let Err(e) = writeln!(io.stdin, "{line}").and_then(|_| io.stdin.flush()) {
            let reason = format!("write to predictor failed: {e}");
            io.broken = Some(reason.clone());
            return Err(unavailable(reason));
        }
        let reply = match io.lines.recv_timeout(self.timeout) {
            Ok(Ok(reply)) => reply,
            Ok(Err(e)) => {
                let reason = format!("read from predictor failed: {e}");
                io.broken = Some(reason.clone());
                return Err(unavailable(reason));
            }
            Err(RecvTimeoutError::Timeout) => {
                let reason = format!("no response within {:?}", self.timeout);
                io.broken = Some(reason.clone());
                return Err(unavailable(reason));
            }
            Err(RecvTimeoutError::Disconnected) => {
                let reason = "predictor exited".to_string();
                io.broken = Some(reason.clone());
                return Err(unavailable(reason));
            }
        };
        let prediction: Prediction = serde_json::from_str(&reply)
            .map_err(|e| EvalError::ProtocolViolation(format!("bad response line: {e}")))?;
        prediction.check(request)?;
        Ok(prediction)
    }
}

impl Drop for ProcessPredictor {
    fn drop(&mut self) {
        let io = self.io.get_mut().unwrap_or_else(|p| p.into_inner());
        let _ = io.child.kill();
        let _ = io.child.wait();
    }
}
