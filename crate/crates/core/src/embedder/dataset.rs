//! Training text format: `__label__<label>` tokens, then the document text,
//! one document per line. Spaces inside labels are written as underscores.

use std::io::{self, BufRead};

pub const LABEL_PREFIX: &str = "__label__";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingExample {
    pub labels: Vec<String>,
    pub text: String,
}

impl TrainingExample {
    pub fn to_line(&self) -> String {
        let mut line = String::new();
        for label in &self.labels {
            line.push_str(&encode_label(label));
            line.push(' ');
        }
        line.push_str(&self.text);
        line
    }

    pub fn from_line(line: &str) -> Self {
        let mut labels = Vec::new();
        let mut words = line.split_whitespace().peekable();
        while let Some(label) = words.peek().and_then(|w| w.strip_prefix(LABEL_PREFIX)) {
            labels.push(decode_label(label));
            words.next();
        }
        TrainingExample { labels, text: words.collect::<Vec<_>>().join(" ") }
    }
}

pub fn encode_label(label: &str) -> String {
    format!("{LABEL_PREFIX}{}", label.replace(' ', "_"))
}

pub fn decode_label(encoded: &str) -> String {
    encoded.strip_prefix(LABEL_PREFIX).unwrap_or(encoded).replace('_', " ")
}

/// Reads a training file; blank lines are skipped.
pub fn parse_training_text<R: BufRead>(source: R) -> io::Result<Vec<TrainingExample>> {
    let mut out = Vec::new();
    for line in source.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(TrainingExample::from_line(&line));
        }
    }
    Ok(out)
}
