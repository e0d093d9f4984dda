use std::io::BufRead;

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use super::EvalError;

/// One human judgement of a predicted narration. Extra fields written by the
/// service (session, turn, scenario) are ignored on read.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub example_id: String,
    pub inconsistent_action: bool,
    pub inconsistent_setting: bool,
    pub annotator_id: String,
    pub timestamp: DateTime<Utc>,
}

impl AnnotationRecord {
    /// Derived, never stored.
    pub fn all_good(&self) -> bool {
        !self.inconsistent_action && !self.inconsistent_setting
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRates {
    pub inconsistent_action: f64,
    pub inconsistent_setting: f64,
    pub all_good: f64,
    pub n: usize,
}

/// Fraction of records carrying each flag, and of records with neither.
/// Flags co-occur, so the rates need not sum to one.
pub fn aggregate_annotations(records: &[AnnotationRecord]) -> Result<AnnotationRates, EvalError> {
    if records.is_empty() {
        return Err(EvalError::NoRecords);
    }
    let n = records.len();
    let rate = |f: &dyn Fn(&AnnotationRecord) -> bool| records.iter().filter(|r| f(r)).count() as f64 / n as f64;
    Ok(AnnotationRates {
        inconsistent_action: rate(&|r| r.inconsistent_action),
        inconsistent_setting: rate(&|r| r.inconsistent_setting),
        all_good: rate(&|r| r.all_good()),
        n,
    })
}

/// Reads annotation JSONL, skipping blank lines.
pub fn read_annotations(reader: impl BufRead) -> Result<Vec<AnnotationRecord>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| EvalError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line)
            .map_err(|e| EvalError::ProtocolViolation(format!("annotation line {}: {e}", i + 1)))?;
        out.push(r);
    }
    Ok(out)
}

/// Flag counts for a synthetic annotation set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlagCounts {
    pub total: usize,
    pub inconsistent_action: usize,
    pub inconsistent_setting: usize,
    /// Records with neither flag.
    pub all_good: usize,
}

impl FlagCounts {
    /// Records that must carry both flags for the counts to hold, if any
    /// arrangement exists.
    pub fn required_overlap(&self) -> Option<usize> {
        let flagged = self.total.checked_sub(self.all_good)?;
        let both = (self.inconsistent_action + self.inconsistent_setting).checked_sub(flagged)?;
        (both <= self.inconsistent_action.min(self.inconsistent_setting)).then_some(both)
    }
}

/// Builds records realizing `counts` exactly: the overlapping records first,
/// then action-only, setting-only, and clean records. Timestamps are one
/// second apart from the Unix epoch.
pub fn synthetic_annotations(counts: FlagCounts) -> Result<Vec<AnnotationRecord>, EvalError> {
    let both = counts.required_overlap().ok_or(EvalError::InfeasibleCounts {
        total: counts.total,
        action: counts.inconsistent_action,
        setting: counts.inconsistent_setting,
        all_good: counts.all_good,
    })?;
    let action_only = counts.inconsistent_action - both;
    let setting_only = counts.inconsistent_setting - both;
    let flags = std::iter::repeat_n((true, true), both)
        .chain(std::iter::repeat_n((true, false), action_only))
        .chain(std::iter::repeat_n((false, true), setting_only))
        .chain(std::iter::repeat_n((false, false), counts.all_good));
    Ok(flags
        .enumerate()
        .map(|(i, (a, s))| AnnotationRecord {
            example_id: format!("synthetic-{i:03}"),
            inconsistent_action: a,
            inconsistent_setting: s,
            annotator_id: "synthetic".to_string(),
            timestamp: Utc.timestamp_opt(i as i64, 0).unwrap(),
        })
        .collect())
}
