use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::metrics::{delta_match, perplexity, token_f1, DeltaMatch};
use super::{Metric, Prediction};
use crate::graph::GraphDelta;
use crate::tasks::{TaskExample, TaskKind};

/// Scores for one task, or for all tasks together.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub n: usize,
    pub f1: Option<f64>,
    /// Over all gold tokens of the predictions that supplied log-likelihoods.
    pub perplexity: Option<f64>,
    /// Over graph-update examples only.
    pub delta_exact_match: Option<f64>,
    pub unparseable: usize,
}

#[derive(Debug, Clone, Default)]
struct Accumulator {
    n: usize,
    f1_sum: f64,
    logprobs: Vec<f64>,
    delta_n: usize,
    delta_hits: usize,
    unparseable: usize,
}

impl Accumulator {
    fn add(&mut self, metrics: &BTreeSet<Metric>, label: &str, gold: Option<&GraphDelta>, p: &Prediction) {
        self.n += 1;
        if metrics.contains(&Metric::F1) {
            self.f1_sum += token_f1(&p.text, label);
        }
        if metrics.contains(&Metric::Perplexity) {
            if let Some(lp) = &p.token_logprobs {
                self.logprobs.extend(lp);
            }
        }
        if let (true, Some(gold)) = (metrics.contains(&Metric::DeltaExactMatch), gold) {
            self.delta_n += 1;
            match delta_match(&p.text, gold) {
                DeltaMatch::Match => self.delta_hits += 1,
                DeltaMatch::Mismatch => {}
                DeltaMatch::Unparseable => self.unparseable += 1,
            }
        }
    }

    fn finish(&self, metrics: &BTreeSet<Metric>) -> TaskMetrics {
        TaskMetrics {
            n: self.n,
            f1: (metrics.contains(&Metric::F1) && self.n > 0).then(|| self.f1_sum / self.n as f64),
            // Logprobs were range-checked on arrival.
            perplexity: perplexity(&self.logprobs).ok(),
            delta_exact_match: (self.delta_n > 0).then(|| self.delta_hits as f64 / self.delta_n as f64),
            unparseable: self.unparseable,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub predictor: String,
    pub metrics: BTreeSet<Metric>,
    /// Only tasks with at least one scored example.
    pub rows: BTreeMap<TaskKind, TaskMetrics>,
    pub all: TaskMetrics,
    /// Examples the predictor declined.
    pub skipped: usize,
    /// True when the predictor failed before every example was scored.
    pub partial: bool,
}

/// Folds scored predictions into a [`MetricReport`].
pub(crate) struct ReportBuilder {
    predictor: String,
    metrics: BTreeSet<Metric>,
    acc: BTreeMap<TaskKind, Accumulator>,
    all: Accumulator,
    pub(crate) skipped: usize,
}

impl ReportBuilder {
    pub(crate) fn new(predictor: String, metrics: &BTreeSet<Metric>) -> Self {
        ReportBuilder {
            predictor,
            metrics: metrics.clone(),
            acc: BTreeMap::new(),
            all: Accumulator::default(),
            skipped: 0,
        }
    }

    pub(crate) fn record(&mut self, example: &TaskExample, gold: Option<&GraphDelta>, p: &Prediction) {
        self.acc.entry(example.task).or_default().add(&self.metrics, &example.label, gold, p);
        self.all.add(&self.metrics, &example.label, gold, p);
    }

    pub(crate) fn build(self, partial: bool) -> MetricReport {
        MetricReport {
            rows: self.acc.iter().map(|(k, a)| (*k, a.finish(&self.metrics))).collect(),
            all: self.all.finish(&self.metrics),
            predictor: self.predictor,
            metrics: self.metrics,
            skipped: self.skipped,
            partial,
        }
    }
}

impl MetricReport {
    fn table_rows(&self) -> Vec<[String; 6]> {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
        let row = |name: &str, m: &TaskMetrics| {
            [
                name.to_string(),
                m.n.to_string(),
                fmt(m.f1),
                fmt(m.perplexity),
                fmt(m.delta_exact_match),
                m.unparseable.to_string(),
            ]
        };
        self.rows
            .iter()
            .map(|(k, m)| row(k.as_str(), m))
            .chain(std::iter::once(row("ALL", &self.all)))
            .collect()
    }

    const HEADER: [&'static str; 6] = ["task", "n", "f1", "perplexity", "delta_exact_match", "unparseable"];

    pub fn to_csv(&self) -> String {
        let mut out = Self::HEADER.join(",");
        out.push('\n');
        for r in self.table_rows() {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    /// Column-aligned text; empty cells print as `-`.
    pub fn to_table(&self) -> String {
        let rows: Vec<[String; 6]> = self
            .table_rows()
            .into_iter()
            .map(|r| r.map(|c| if c.is_empty() { "-".to_string() } else { c }))
            .collect();
        let mut widths = Self::HEADER.map(str::len);
        for r in &rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let line = |cells: Vec<&str>| {
            let padded: Vec<String> = cells
                .iter()
                .zip(widths)
                .enumerate()
                .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            padded.join("  ").trim_end().to_string()
        };
        let mut out = vec![line(Self::HEADER.to_vec())];
        out.extend(rows.iter().map(|r| line(r.iter().map(String::as_str).collect())));
        let mut text = out.join("\n");
        text.push('\n');
        if self.skipped > 0 {
            text.push_str(&format!("skipped: {}\n", self.skipped));
        }
        if self.partial {
            text.push_str("partial: predictor failed before all examples were scored\n");
        }
        text
    }
}
