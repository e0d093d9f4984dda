use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{TaskExample, TaskKind};

/// Lowercased whitespace tokens.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().map(str::to_lowercase)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SideStats {
    pub avg_length: f64,
    pub tokens: usize,
    pub unique_tokens: usize,
    pub unique_utterances: usize,
    pub utterances: usize,
}

impl SideStats {
    pub fn of<'a>(texts: impl IntoIterator<Item = &'a str>) -> SideStats {
        let mut tokens = 0;
        let mut vocab = BTreeSet::new();
        let mut distinct = BTreeSet::new();
        let mut utterances = 0;
        for t in texts {
            utterances += 1;
            distinct.insert(t);
            for tok in tokenize(t) {
                tokens += 1;
                vocab.insert(tok);
            }
        }
        SideStats {
            avg_length: if utterances == 0 { 0.0 } else { tokens as f64 / utterances as f64 },
            tokens,
            unique_tokens: vocab.len(),
            unique_utterances: distinct.len(),
            utterances,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TaskStats {
    pub input: SideStats,
    pub labels: SideStats,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetStats {
    pub tasks: BTreeMap<TaskKind, TaskStats>,
    /// Over every example regardless of task.
    pub all: TaskStats,
}

fn task_stats(examples: &[&TaskExample]) -> TaskStats {
    TaskStats {
        input: SideStats::of(examples.iter().map(|e| e.input.as_str())),
        labels: SideStats::of(examples.iter().map(|e| e.label.as_str())),
    }
}

pub fn compute_stats(examples: &[TaskExample]) -> DatasetStats {
    let mut by_task: BTreeMap<TaskKind, Vec<&TaskExample>> = BTreeMap::new();
    for e in examples {
        by_task.entry(e.task).or_default().push(e);
    }
    DatasetStats {
        tasks: by_task.iter().map(|(k, v)| (*k, task_stats(v))).collect(),
        all: task_stats(&examples.iter().collect::<Vec<_>>()),
    }
}

const COLUMNS: [&str; 11] = [
    "task",
    "input_avg_length",
    "input_tokens",
    "input_unique_tokens",
    "input_unique_utterances",
    "input_utterances",
    "label_avg_length",
    "label_tokens",
    "label_unique_tokens",
    "label_unique_utterances",
    "label_utterances",
];

impl DatasetStats {
    fn rows(&self) -> Vec<Vec<String>> {
        let side = |s: &SideStats| {
            vec![
                format!("{:.2}", s.avg_length),
                s.tokens.to_string(),
                s.unique_tokens.to_string(),
                s.unique_utterances.to_string(),
                s.utterances.to_string(),
            ]
        };
        let row = |name: &str, t: &TaskStats| {
            let mut r = vec![name.to_string()];
            r.extend(side(&t.input));
            r.extend(side(&t.labels));
            r
        };
        let mut rows: Vec<Vec<String>> = self.tasks.iter().map(|(k, t)| row(k.as_str(), t)).collect();
        rows.push(row("ALL", &self.all));
        rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = COLUMNS.join(",");
        out.push('\n');
        for r in self.rows() {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    /// Fixed-width table: task name left-aligned, numbers right-aligned.
    pub fn to_table(&self) -> String {
        let header: Vec<String> = COLUMNS.iter().map(|s| s.to_string()).collect();
        let rows = self.rows();
        let widths: Vec<usize> = (0..COLUMNS.len())
            .map(|i| {
                std::iter::once(&header)
                    .chain(&rows)
                    .map(|r| r[i].len())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        for r in std::iter::once(&header).chain(&rows) {
            let cells: Vec<String> = r
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    if i == 0 {
                        format!("{c:<w$}", w = widths[i])
                    } else {
                        format!("{c:>w$}", w = widths[i])
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        out
    }
}
