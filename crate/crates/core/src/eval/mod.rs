//! Evaluation: token F1, perplexity from supplied log-likelihoods, delta
//! exact match, the predictor protocol, and human-annotation aggregation.

mod annotations;
mod metrics;
mod predictor;
mod report;

pub use annotations::{
    aggregate_annotations, read_annotations, synthetic_annotations, AnnotationRates, AnnotationRecord, FlagCounts,
};
pub use metrics::{delta_exact_match, delta_match, perplexity, token_f1, DeltaMatch};
pub use predictor::{EngineOracle, GoldEcho, PredictRequest, Prediction, Predictor, ProcessPredictor};
pub use report::{MetricReport, TaskMetrics};

use report::ReportBuilder;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::graph::parse_delta;
use crate::tasks::{LabelGrammar, TaskError, TaskExample};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("perplexity of an empty sequence")]
    EmptySequence,
    #[error("log-probability {value} at position {index} is positive")]
    PositiveLogprob { index: usize, value: f64 },
    #[error("no annotation records")]
    NoRecords,
    #[error("no arrangement of {total} records has {action} action flags, {setting} setting flags, and {all_good} clean")]
    InfeasibleCounts { total: usize, action: usize, setting: usize, all_good: usize },
    #[error("predictor unavailable: {reason}")]
    PredictorUnavailable {
        reason: String,
        /// Metrics over the predictions received before the failure.
        partial: Option<Box<MetricReport>>,
    },
    #[error("predictor protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("predictor does not support task {0}")]
    Unsupported(String),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    F1,
    Perplexity,
    DeltaExactMatch,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::F1, Metric::Perplexity, Metric::DeltaExactMatch];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::F1 => "f1",
            Metric::Perplexity => "perplexity",
            Metric::DeltaExactMatch => "delta_exact_match",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f1" => Ok(Metric::F1),
            "perplexity" | "ppl" => Ok(Metric::Perplexity),
            "delta_exact_match" | "exact_match" | "em" => Ok(Metric::DeltaExactMatch),
            other => Err(format!("unknown metric `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalOptions {
    pub metrics: BTreeSet<Metric>,
    /// Maximum in-flight predictor requests.
    pub concurrency: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { metrics: Metric::ALL.into_iter().collect(), concurrency: 4 }
    }
}

/// Collects predictions for every example and scores them per task.
///
/// Requests run on up to `concurrency` threads; results are aggregated in
/// example order, so the report does not depend on scheduling. Examples the
/// predictor does not support are counted as skipped. If the predictor
/// becomes unavailable, the error carries a report over the predictions
/// received so far, marked partial.
pub fn run_eval(
    examples: &[TaskExample],
    predictor: &dyn Predictor,
    options: &EvalOptions,
) -> Result<MetricReport, EvalError> {
    if options.concurrency == 0 {
        return Err(EvalError::Task(TaskError::InvalidConfig("concurrency must be positive".into())));
    }
    let golds = examples
        .iter()
        .map(|e| match e.task.label_grammar() {
            LabelGrammar::Delta => parse_delta(&e.label).map(Some).map_err(TaskError::from),
            _ => Ok(None),
        })
        .collect::<Result<Vec<_>, _>>()?;

    let slots: Mutex<Vec<Option<Result<Prediction, EvalError>>>> = Mutex::new(vec![None; examples.len()]);
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    std::thread::scope(|s| {
        for _ in 0..options.concurrency.min(examples.len().max(1)) {
            s.spawn(|| loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(example) = examples.get(i) else { break };
                let request = PredictRequest::for_example(example);
                let result = predictor.predict(&request).and_then(|p| p.check(&request).map(|_| p));
                if matches!(result, Err(EvalError::PredictorUnavailable { .. } | EvalError::ProtocolViolation(_))) {
                    stop.store(true, Ordering::Relaxed);
                }
                slots.lock().unwrap()[i] = Some(result);
            });
        }
    });

    let mut report = ReportBuilder::new(predictor.name(), &options.metrics);
    let mut failure: Option<EvalError> = None;
    for ((example, gold), slot) in examples.iter().zip(&golds).zip(slots.into_inner().unwrap()) {
        match slot {
            Some(Ok(p)) => report.record(example, gold.as_ref(), &p),
            Some(Err(EvalError::Unsupported(_))) => report.skipped += 1,
            Some(Err(e @ EvalError::ProtocolViolation(_))) => return Err(e),
            Some(Err(e)) => {
                failure.get_or_insert(e);
            }
            None => {}
        }
    }
    match failure {
        None => Ok(report.build(false)),
        Some(e) => {
            let reason = match e {
                EvalError::PredictorUnavailable { reason, .. } => reason,
                other => other.to_string(),
            };
            Err(EvalError::PredictorUnavailable { reason, partial: Some(Box::new(report.build(true))) })
        }
    }
}
