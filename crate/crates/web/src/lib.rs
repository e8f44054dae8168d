//! Browser bindings for the field selection, vote combination and toy
//! classifier explorer. Every export takes and returns JSON strings; the
//! `*_json` functions hold the logic and are usable natively.

use fortag::corpus::{Channel, ForCode};
use fortag::embedder::{analogies, nearest_neighbors, parse_training_text, train, Loss, Model, ModelParams};
use fortag::ensemble::{combine, ChannelPrediction, EnsemblePolicy};
use fortag::fields::{DistributionSet, SelectionConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;
use wasm_bindgen::prelude::*;

#[derive(Debug, Deserialize)]
pub struct SelectRequest {
    pub distributions: DistributionSet,
    #[serde(default = "default_2digit")]
    pub threshold_2digit: f64,
    #[serde(default = "default_4digit")]
    pub threshold_4digit: f64,
    #[serde(default = "default_parents")]
    pub drill_down: Vec<String>,
}

fn default_2digit() -> f64 {
    0.03
}

fn default_4digit() -> f64 {
    0.02
}

fn default_parents() -> Vec<String> {
    vec!["11".into(), "06".into()]
}

#[derive(Debug, Deserialize)]
pub struct Vote {
    pub channel: String,
    pub label: Option<String>,
    #[serde(default)]
    pub probability: f64,
}

#[derive(Debug, Deserialize)]
pub struct VoteRequest {
    pub votes: Vec<Vote>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    0.5
}

#[derive(Debug, Deserialize)]
pub struct ExploreRequest {
    pub training: String,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub word: String,
    #[serde(default)]
    pub analogy: Option<[String; 3]>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_k() -> usize {
    5
}

#[derive(Debug, Serialize)]
struct Ranked {
    item: String,
    score: f64,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Selected fields for a distribution document, in output order.
pub fn select_fields_json(request: &str) -> Result<String, String> {
    let req: SelectRequest = serde_json::from_str(request).map_err(err)?;
    let parents = req.drill_down.iter().map(|c| ForCode::parse(c.trim())).collect::<Result<Vec<_>, _>>().map_err(err)?;
    let config = SelectionConfig {
        threshold_2digit: req.threshold_2digit,
        threshold_4digit: req.threshold_4digit,
        drill_down_parents: parents,
        ..SelectionConfig::default()
    };
    let scheme = req.distributions.select(&config).map_err(err)?;
    Ok(scheme.to_json())
}

/// Final label for a set of per-channel predictions under the default policy
/// with the requested threshold.
pub fn combine_votes_json(request: &str) -> Result<String, String> {
    let req: VoteRequest = serde_json::from_str(request).map_err(err)?;
    let policy = EnsemblePolicy { threshold: req.threshold, ..EnsemblePolicy::default() };
    policy.validate().map_err(err)?;
    let mut channels = Vec::new();
    let mut voters = Vec::new();
    for v in &req.votes {
        let channel: Channel = v.channel.parse().map_err(err)?;
        match &v.label {
            Some(label) if v.probability > policy.threshold => {
                voters.push(channel.name());
                channels.push(ChannelPrediction::new(channel, label, v.probability));
            }
            _ => channels.push(ChannelPrediction::absent(channel)),
        }
    }
    let label = combine(&channels, &policy).map_err(err)?;
    Ok(json!({ "label": label, "voters": voters }).to_string())
}

fn toy_model(training: &str, seed: u64) -> Result<Model, String> {
    let examples = parse_training_text(training.as_bytes()).map_err(err)?;
    let params = ModelParams {
        dim: 16,
        epoch: 30,
        min_count: 1,
        learning_rate: 1.0,
        buckets: 512,
        loss: Loss::Ova,
        seed,
        ..ModelParams::default()
    };
    train(&examples, &params).map_err(err)
}

/// Trains a small classifier on `__label__` lines, then reports label
/// probabilities for `text`, neighbors of `word` and the analogy ranking.
pub fn explore_json(request: &str) -> Result<String, String> {
    let req: ExploreRequest = serde_json::from_str(request).map_err(err)?;
    let model = toy_model(&req.training, req.seed)?;
    let k = req.k.max(1);
    let labels: Vec<Ranked> = if req.text.trim().is_empty() {
        Vec::new()
    } else {
        let all = model.probabilities(&req.text).unwrap_or_default();
        let mut ranked: Vec<Ranked> = model
            .vocab()
            .labels()
            .iter()
            .zip(all)
            .map(|(l, p)| Ranked { item: l.clone(), score: p })
            .collect();
        ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.item.cmp(&b.item)));
        ranked.truncate(k);
        ranked
    };
    let to_ranked = |ns: Vec<fortag::embedder::Neighbor>| {
        ns.into_iter().map(|n| Ranked { item: n.word, score: n.similarity }).collect::<Vec<_>>()
    };
    let neighbors = if req.word.trim().is_empty() {
        Vec::new()
    } else {
        to_ranked(nearest_neighbors(&model, req.word.trim(), k).map_err(err)?)
    };
    let analogy = match &req.analogy {
        Some([a, b, c]) => to_ranked(analogies(&model, a.trim(), b.trim(), c.trim(), k).map_err(err)?),
        None => Vec::new(),
    };
    Ok(json!({
        "vocabulary": model.vocab().num_words(),
        "labels": labels,
        "neighbors": neighbors,
        "analogy": analogy,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn select_fields(request: &str) -> Result<String, JsValue> {
    select_fields_json(request).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn combine_votes(request: &str) -> Result<String, JsValue> {
    combine_votes_json(request).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn explore(request: &str) -> Result<String, JsValue> {
    explore_json(request).map_err(|e| JsValue::from_str(&e))
}
