//! Article-level decision from the five channel models.
//!
//! Each channel whose top prediction clears the probability threshold casts
//! one vote; the journal-title channel's vote weighs slightly more so that it
//! settles ties between equally sized coalitions.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Channel, PublicationRecord};
use crate::embedder::{EmbedderError, Model, Prediction};
use crate::fields::FieldScheme;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("channel {0} appears more than once")]
    DuplicateChannel(Channel),
    #[error("model for channel {channel} knows labels absent from the scheme: {}", labels.join(", "))]
    SchemeMismatch { channel: Channel, labels: Vec<String> },
    #[error("channel models were trained on different label sets ({0} vs {1})")]
    LabelSetMismatch(Channel, Channel),
    #[error("invalid ensemble policy: {0}")]
    InvalidPolicy(String),
    #[error(transparent)]
    Embedder(#[from] EmbedderError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPrediction {
    pub channel: Channel,
    pub prediction: Option<Prediction>,
}

impl ChannelPrediction {
    pub fn new(channel: Channel, label: &str, probability: f64) -> Self {
        ChannelPrediction {
            channel,
            prediction: Some(Prediction { label: label.to_string(), probability }),
        }
    }

    pub fn absent(channel: Channel) -> Self {
        ChannelPrediction { channel, prediction: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePolicy {
    pub threshold: f64,
    pub journal_weight_bonus: f64,
    pub md_demotion: bool,
    pub multidisciplinary_label: String,
}

impl Default for EnsemblePolicy {
    fn default() -> Self {
        EnsemblePolicy {
            threshold: 0.5,
            journal_weight_bonus: 0.01,
            md_demotion: true,
            multidisciplinary_label: "Multidisciplinary".to_string(),
        }
    }
}

impl EnsemblePolicy {
    pub fn validate(&self) -> Result<(), EnsembleError> {
        if !(0.0..1.0).contains(&self.threshold) {
            return Err(EnsembleError::InvalidPolicy(format!(
                "threshold {} outside [0, 1)",
                self.threshold
            )));
        }
        if !(self.journal_weight_bonus > 0.0 && self.journal_weight_bonus < 1.0) {
            return Err(EnsembleError::InvalidPolicy(format!(
                "journal bonus {} outside (0, 1)",
                self.journal_weight_bonus
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Default)]
struct Tally {
    votes: usize,
    weight: f64,
    best_probability: f64,
}

/// Plurality vote. Ties on the integer vote count go to the journal channel's
/// label through its bonus; with `md_demotion` a specific field beats the
/// multidisciplinary label on equal count. Remaining ties: highest single
/// probability, then label order.
pub fn combine(
    channels: &[ChannelPrediction],
    policy: &EnsemblePolicy,
) -> Result<Option<String>, EnsembleError> {
    let mut seen = HashSet::new();
    for c in channels {
        if !seen.insert(c.channel) {
            return Err(EnsembleError::DuplicateChannel(c.channel));
        }
    }
    let mut tallies: BTreeMap<&str, Tally> = BTreeMap::new();
    for c in channels {
        let Some(p) = &c.prediction else { continue };
        let t = tallies.entry(p.label.as_str()).or_default();
        t.votes += 1;
        t.weight += if c.channel == Channel::JournalTitle {
            1.0 + policy.journal_weight_bonus
        } else {
            1.0
        };
        t.best_probability = t.best_probability.max(p.probability);
    }
    let Some(max_votes) = tallies.values().map(|t| t.votes).max() else {
        return Ok(None);
    };
    let mut top: Vec<(&str, &Tally)> =
        tallies.iter().filter(|(_, t)| t.votes == max_votes).map(|(l, t)| (*l, t)).collect();
    if policy.md_demotion && top.len() > 1 {
        top.retain(|(l, _)| *l != policy.multidisciplinary_label);
    }
    // `top` is in label order, so keeping the first of equals breaks the last tie
    let winner = top.into_iter().reduce(|best, cand| {
        let better = cand
            .1
            .weight
            .total_cmp(&best.1.weight)
            .then(cand.1.best_probability.total_cmp(&best.1.best_probability));
        if better.is_gt() {
            cand
        } else {
            best
        }
    });
    Ok(winner.map(|(l, _)| l.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDecision {
    pub channels: Vec<ChannelPrediction>,
    pub final_label: Option<String>,
    pub journal_only_label: Option<String>,
}

/// The channel models used together for classification.
#[derive(Debug, Clone, Default)]
pub struct ChannelModels {
    models: BTreeMap<Channel, Model<f32>>,
}

impl ChannelModels {
    /// With a scheme, every model's labels must belong to it; without one,
    /// all models must share the same label set.
    pub fn new(
        models: BTreeMap<Channel, Model<f32>>,
        scheme: Option<&FieldScheme>,
    ) -> Result<Self, EnsembleError> {
        match scheme {
            Some(scheme) => {
                for (channel, model) in &models {
                    let unknown: Vec<String> = model
                        .labels()
                        .iter()
                        .filter(|l| !scheme.contains_label(l))
                        .cloned()
                        .collect();
                    if !unknown.is_empty() {
                        return Err(EnsembleError::SchemeMismatch { channel: *channel, labels: unknown });
                    }
                }
            }
            None => {
                let mut iter = models.iter();
                if let Some((first_channel, first)) = iter.next() {
                    let expected: BTreeSet<&String> = first.labels().iter().collect();
                    for (channel, model) in iter {
                        if model.labels().iter().collect::<BTreeSet<_>>() != expected {
                            return Err(EnsembleError::LabelSetMismatch(*first_channel, *channel));
                        }
                    }
                }
            }
        }
        Ok(ChannelModels { models })
    }

    pub fn get(&self, channel: Channel) -> Option<&Model<f32>> {
        self.models.get(&channel)
    }

    pub fn channels(&self) -> impl Iterator<Item = Channel> + '_ {
        self.models.keys().copied()
    }
}

/// Top-1 prediction of every channel that has text and a model, then the vote.
pub fn classify_record(
    models: &ChannelModels,
    record: &PublicationRecord,
    policy: &EnsemblePolicy,
) -> Result<EnsembleDecision, EnsembleError> {
    policy.validate()?;
    let mut channels = Vec::with_capacity(Channel::ALL.len());
    for channel in Channel::ALL {
        let prediction = match (models.get(channel), record.channel_text(channel)) {
            (Some(model), Some(text)) => {
                model.predict(&text, 1, policy.threshold)?.into_iter().next()
            }
            _ => None,
        };
        channels.push(ChannelPrediction { channel, prediction });
    }
    let journal_only_label = channels
        .iter()
        .find(|c| c.channel == Channel::JournalTitle)
        .and_then(|c| c.prediction.as_ref())
        .map(|p| p.label.clone());
    let final_label = combine(&channels, policy)?;
    Ok(EnsembleDecision { channels, final_label, journal_only_label })
}

/// One line of the batch classification output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLine {
    pub pmid: String,
    pub channels: BTreeMap<Channel, Option<Prediction>>,
    pub journal_only_label: Option<String>,
    pub final_label: Option<String>,
}

impl DecisionLine {
    pub fn new(pmid: &str, decision: &EnsembleDecision) -> Self {
        DecisionLine {
            pmid: pmid.to_string(),
            channels: decision
                .channels
                .iter()
                .map(|c| (c.channel, c.prediction.clone()))
                .collect(),
            journal_only_label: decision.journal_only_label.clone(),
            final_label: decision.final_label.clone(),
        }
    }

    pub fn to_decision(&self) -> EnsembleDecision {
        EnsembleDecision {
            channels: self
                .channels
                .iter()
                .map(|(c, p)| ChannelPrediction { channel: *c, prediction: p.clone() })
                .collect(),
            final_label: self.final_label.clone(),
            journal_only_label: self.journal_only_label.clone(),
        }
    }
}
