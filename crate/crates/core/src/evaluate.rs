//! Precision, recall and F1 of top-1 predictions against multi-label gold
//! sets, and the journal-level to article-level transition matrix.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::ensemble::EnsembleDecision;
use crate::report::{self, decimal};

pub const NONE_LABEL: &str = "none";

#[derive(Debug, Error)]
pub enum EvaluateError {
    #[error("nothing to evaluate")]
    Empty,
    #[error("{predicted} predictions for {gold} gold label sets")]
    LengthMismatch { predicted: usize, gold: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Counts {
    pub fn scores(&self) -> Scores {
        let precision = ratio(self.true_positives, self.true_positives + self.false_positives);
        let recall = ratio(self.true_positives, self.true_positives + self.false_negatives);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Scores { precision, recall, f1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub label: String,
    pub support: usize,
    pub counts: Counts,
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub classes: Vec<ClassMetrics>,
    pub micro: Scores,
    /// Mean over classes with non-zero support.
    pub macro_avg: Scores,
    pub records: usize,
}

/// A prediction inside the gold set is a true positive for that class. A wrong
/// prediction is a false positive for the predicted class and a false
/// negative for every gold label; a missing prediction only the latter.
pub fn score_predictions(
    predicted: &[Option<String>],
    gold: &[Vec<String>],
) -> Result<MetricsReport, EvaluateError> {
    if predicted.len() != gold.len() {
        return Err(EvaluateError::LengthMismatch { predicted: predicted.len(), gold: gold.len() });
    }
    if predicted.is_empty() {
        return Err(EvaluateError::Empty);
    }
    let mut counts: BTreeMap<&str, Counts> = BTreeMap::new();
    let mut support: BTreeMap<&str, usize> = BTreeMap::new();
    for (pred, gold_set) in predicted.iter().zip(gold) {
        let gold_set: BTreeSet<&str> = gold_set.iter().map(String::as_str).collect();
        for g in &gold_set {
            *support.entry(g).or_default() += 1;
            counts.entry(g).or_default();
        }
        match pred.as_deref() {
            Some(p) if gold_set.contains(p) => counts.entry(p).or_default().true_positives += 1,
            other => {
                if let Some(p) = other {
                    counts.entry(p).or_default().false_positives += 1;
                }
                for g in &gold_set {
                    counts.entry(g).or_default().false_negatives += 1;
                }
            }
        }
    }
    let total = counts.values().fold(Counts::default(), |acc, c| Counts {
        true_positives: acc.true_positives + c.true_positives,
        false_positives: acc.false_positives + c.false_positives,
        false_negatives: acc.false_negatives + c.false_negatives,
    });
    let classes: Vec<ClassMetrics> = counts
        .into_iter()
        .map(|(label, c)| ClassMetrics {
            label: label.to_string(),
            support: support.get(label).copied().unwrap_or(0),
            counts: c,
            scores: c.scores(),
        })
        .collect();
    let supported: Vec<&ClassMetrics> = classes.iter().filter(|c| c.support > 0).collect();
    let n = supported.len().max(1) as f64;
    let macro_avg = Scores {
        precision: supported.iter().map(|c| c.scores.precision).sum::<f64>() / n,
        recall: supported.iter().map(|c| c.scores.recall).sum::<f64>() / n,
        f1: supported.iter().map(|c| c.scores.f1).sum::<f64>() / n,
    };
    Ok(MetricsReport { classes, micro: total.scores(), macro_avg, records: predicted.len() })
}

impl MetricsReport {
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), EvaluateError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["class", "support", "precision", "recall", "f1"])?;
        for c in &self.classes {
            w.write_record([
                c.label.clone(),
                c.support.to_string(),
                decimal(c.scores.precision),
                decimal(c.scores.recall),
                decimal(c.scores.f1),
            ])?;
        }
        for (name, s) in [("micro", self.micro), ("macro", self.macro_avg)] {
            w.write_record([
                name.to_string(),
                self.records.to_string(),
                decimal(s.precision),
                decimal(s.recall),
                decimal(s.f1),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Rows: journal-title label; columns: ensemble label; `none` last in both.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransitionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

pub fn build_transition_matrix(
    decisions: &[EnsembleDecision],
) -> Result<TransitionMatrix, EvaluateError> {
    if decisions.is_empty() {
        return Err(EvaluateError::Empty);
    }
    let mut set: BTreeSet<&str> = BTreeSet::new();
    for d in decisions {
        set.extend(d.journal_only_label.as_deref());
        set.extend(d.final_label.as_deref());
    }
    set.remove(NONE_LABEL);
    let mut labels: Vec<String> = set.into_iter().map(str::to_string).collect();
    labels.push(NONE_LABEL.to_string());
    let index = |l: Option<&str>| {
        let l = l.unwrap_or(NONE_LABEL);
        labels.iter().position(|x| x == l).expect("label collected above")
    };
    let mut counts = vec![vec![0usize; labels.len()]; labels.len()];
    for d in decisions {
        counts[index(d.journal_only_label.as_deref())][index(d.final_label.as_deref())] += 1;
    }
    Ok(TransitionMatrix { labels, counts })
}

impl TransitionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// Row-stochastic version; rows without support stay all zero.
    pub fn normalized(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let total: usize = row.iter().sum();
                row.iter().map(|&c| ratio(c, total)).collect()
            })
            .collect()
    }

    fn write_table<W: Write, T>(
        &self,
        sink: W,
        rows: &[Vec<T>],
        fmt: impl Fn(&T) -> String,
    ) -> Result<(), EvaluateError> {
        let mut w = csv::Writer::from_writer(sink);
        let header: Vec<&str> =
            std::iter::once("journal_label").chain(self.labels.iter().map(String::as_str)).collect();
        w.write_record(&header)?;
        for (label, row) in self.labels.iter().zip(rows) {
            let record: Vec<String> =
                std::iter::once(label.clone()).chain(row.iter().map(&fmt)).collect();
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), EvaluateError> {
        self.write_table(sink, &self.counts, |c| c.to_string())
    }

    pub fn write_normalized_csv<W: Write>(&self, sink: W) -> Result<(), EvaluateError> {
        self.write_table(sink, &self.normalized(), |x| decimal(*x))
    }
}

#[derive(Serialize)]
struct MatrixDocument<'a> {
    labels: &'a [String],
    counts: &'a [Vec<usize>],
    normalized: Vec<Vec<f64>>,
}

/// Writes `path` (CSV) and a JSON mirror beside it (`<stem>.json`).
pub fn emit_metrics(report: &MetricsReport, path: &Path) -> Result<(), EvaluateError> {
    let mut w = report::create(path)?;
    report.write_csv(&mut w)?;
    w.flush()?;
    report::write_json(&report::sibling_path(path, "", "json"), report)?;
    Ok(())
}

/// Writes the counts to `path`, the row-normalized matrix to
/// `<stem>.normalized.csv` and both to `<stem>.json`.
pub fn emit_transition(matrix: &TransitionMatrix, path: &Path) -> Result<(), EvaluateError> {
    let mut w = report::create(path)?;
    matrix.write_csv(&mut w)?;
    w.flush()?;
    let mut w = report::create(&report::sibling_path(path, ".normalized", "csv"))?;
    matrix.write_normalized_csv(&mut w)?;
    w.flush()?;
    let doc = MatrixDocument {
        labels: &matrix.labels,
        counts: &matrix.counts,
        normalized: matrix.normalized(),
    };
    report::write_json(&report::sibling_path(path, "", "json"), &doc)?;
    Ok(())
}
