//! Supervised text classifier in the fastText style.
//!
//! A document is represented by the mean of the input embeddings of its
//! in-vocabulary words and of its hashed word n-grams. A linear output layer
//! maps that hidden vector to one score per label; probabilities come from a
//! softmax or, for the one-vs-all loss, from independent sigmoids.

mod dataset;
mod explore;
mod io;
mod matrix;
mod tokenize;
mod train;

use std::collections::HashMap;
use std::fmt::{self, Debug};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{decode_label, encode_label, parse_training_text, TrainingExample};
pub use explore::{analogies, analogy_query, nearest_neighbors, Neighbor};
pub use io::{load_model, read_model, save_model, write_model, FormatError, MAGIC, VERSION};
pub use matrix::Matrix;
pub use tokenize::{fnv1a64, tokenize};
pub use train::{
    document_gradients, train, train_hogwild, train_with_report, DocumentGradients, Target,
    TrainingReport,
};

/// Floating-point precision of a model's matrices.
pub trait Real: Float + FromPrimitive + Default + Debug + Send + Sync + 'static {}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Debug, Error)]
pub enum EmbedderError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("training document {0} has no label")]
    UnlabeledDocument(usize),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("{0:?} is not in the vocabulary")]
    OutOfVocabulary(String),
    #[error("query {0:?} must be exactly one word")]
    InvalidQuery(String),
    #[error("multi-worker training requires single precision")]
    UnsupportedPrecision,
    #[error(transparent)]
    Format(#[from] FormatError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Softmax,
    Ova,
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Loss::Softmax => "softmax",
            Loss::Ova => "ova",
        })
    }
}

impl FromStr for Loss {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "softmax" => Ok(Loss::Softmax),
            "ova" | "one-vs-all" => Ok(Loss::Ova),
            other => Err(format!("unknown loss {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dim: usize,
    pub epoch: usize,
    pub word_ngrams: usize,
    pub min_count: usize,
    pub loss: Loss,
    pub learning_rate: f64,
    pub buckets: usize,
    pub seed: u64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            dim: 100,
            epoch: 50,
            word_ngrams: 2,
            min_count: 20,
            loss: Loss::Ova,
            learning_rate: 0.1,
            buckets: 2_000_000,
            seed: 0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), EmbedderError> {
        let bad = |m: &str| Err(EmbedderError::InvalidParams(m.to_string()));
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if self.epoch == 0 {
            return bad("epoch must be at least 1");
        }
        if !(1..=3).contains(&self.word_ngrams) {
            return bad("word_ngrams must be 1, 2 or 3");
        }
        if self.min_count == 0 {
            return bad("min_count must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.buckets == 0 {
            return bad("buckets must be at least 1");
        }
        Ok(())
    }
}

/// Words kept for training (count at least `min_count`) and the label set.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    words: Vec<(String, u64)>,
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Words are ordered by descending count, ties alphabetically; labels
    /// alphabetically.
    pub fn new(mut words: Vec<(String, u64)>, mut labels: Vec<String>) -> Self {
        words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        words.dedup_by(|a, b| a.0 == b.0);
        labels.sort();
        labels.dedup();
        Self::from_ordered(words, labels)
    }

    /// Keeps the given order, as read back from a model file.
    pub(crate) fn from_ordered(words: Vec<(String, u64)>, labels: Vec<String>) -> Self {
        let index = words.iter().enumerate().map(|(i, (w, _))| (w.clone(), i)).collect();
        Vocabulary { words, labels, index }
    }

    pub fn build<'a>(
        documents: impl IntoIterator<Item = (&'a [String], &'a [String])>,
        min_count: usize,
    ) -> Self {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        let mut labels = Vec::new();
        for (tokens, doc_labels) in documents {
            for t in tokens {
                *counts.entry(t.as_str()).or_default() += 1;
            }
            labels.extend(doc_labels.iter().cloned());
        }
        let words = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count as u64)
            .map(|(w, c)| (w.to_string(), c))
            .collect();
        Vocabulary::new(words, labels)
    }

    pub fn words(&self) -> &[(String, u64)] {
        &self.words
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn word_id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn label_id(&self, label: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }

    pub fn num_words(&self) -> usize {
        self.words.len()
    }
}

/// Feature indices of a token sequence: vocabulary ids of known unigrams,
/// then one hashed bucket per n-gram (orders 2..=word_ngrams). Unknown
/// unigrams are skipped; duplicates are kept.
pub fn featurize(tokens: &[String], vocab: &Vocabulary, params: &ModelParams) -> Vec<usize> {
    let mut features: Vec<usize> = tokens.iter().filter_map(|t| vocab.word_id(t)).collect();
    let offset = vocab.num_words();
    let buckets = params.buckets as u64;
    let mut gram = String::new();
    for n in 2..=params.word_ngrams {
        for window in tokens.windows(n) {
            gram.clear();
            for (i, t) in window.iter().enumerate() {
                if i > 0 {
                    gram.push(' ');
                }
                gram.push_str(t);
            }
            features.push(offset + (fnv1a64(&gram) % buckets) as usize);
        }
    }
    features
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    pub probability: f64,
}

/// A trained classifier: parameters, vocabulary and both weight matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<F: Real = f32> {
    params: ModelParams,
    vocab: Vocabulary,
    input: Matrix<F>,
    output: Matrix<F>,
}

pub type TextClassifierModel = Model<f32>;

impl<F: Real> Model<F> {
    pub fn from_parts(
        params: ModelParams,
        vocab: Vocabulary,
        input: Matrix<F>,
        output: Matrix<F>,
    ) -> Result<Self, EmbedderError> {
        params.validate()?;
        let expect_in = (vocab.num_words() + params.buckets, params.dim);
        let expect_out = (vocab.labels().len(), params.dim);
        if (input.rows(), input.cols()) != expect_in || (output.rows(), output.cols()) != expect_out
        {
            return Err(EmbedderError::InvalidParams(format!(
                "matrix shapes {}x{} / {}x{} do not match vocabulary and parameters",
                input.rows(),
                input.cols(),
                output.rows(),
                output.cols()
            )));
        }
        Ok(Model { params, vocab, input, output })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn labels(&self) -> &[String] {
        self.vocab.labels()
    }

    pub fn input_matrix(&self) -> &Matrix<F> {
        &self.input
    }

    pub fn output_matrix(&self) -> &Matrix<F> {
        &self.output
    }

    pub fn features(&self, text: &str) -> Vec<usize> {
        featurize(&tokenize(text), &self.vocab, &self.params)
    }

    /// Mean of the input rows of `features`; `None` when there are none.
    pub fn hidden(&self, features: &[usize]) -> Option<Vec<F>> {
        if features.is_empty() {
            return None;
        }
        let mut h = vec![F::zero(); self.params.dim];
        for &f in features {
            for (acc, &x) in h.iter_mut().zip(self.input.row(f)) {
                *acc = *acc + x;
            }
        }
        let n = F::from_usize(features.len()).expect("count fits");
        h.iter_mut().for_each(|x| *x = *x / n);
        Some(h)
    }

    pub fn scores(&self, hidden: &[F]) -> Vec<F> {
        (0..self.output.rows())
            .map(|i| {
                self.output
                    .row(i)
                    .iter()
                    .zip(hidden)
                    .fold(F::zero(), |acc, (&w, &h)| acc + w * h)
            })
            .collect()
    }

    /// Probability of every label, in label order. `None` when the text has
    /// no usable features.
    pub fn probabilities(&self, text: &str) -> Option<Vec<f64>> {
        let hidden = self.hidden(&self.features(text))?;
        let scores = self.scores(&hidden);
        Some(scores_to_probabilities(&scores, self.params.loss))
    }

    /// Up to `k` labels with probability strictly above `threshold`, most
    /// probable first.
    pub fn predict(
        &self,
        text: &str,
        k: usize,
        threshold: f64,
    ) -> Result<Vec<Prediction>, EmbedderError> {
        if k == 0 {
            return Err(EmbedderError::InvalidK);
        }
        let Some(probs) = self.probabilities(text) else {
            return Ok(Vec::new());
        };
        let mut order: Vec<usize> = (0..probs.len()).collect();
        order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
        Ok(order
            .into_iter()
            .take(k)
            .filter(|&i| probs[i] > threshold)
            .map(|i| Prediction { label: self.labels()[i].clone(), probability: probs[i] })
            .collect())
    }

    /// Same model in another precision.
    pub fn cast<G: Real>(&self) -> Model<G> {
        Model {
            params: self.params.clone(),
            vocab: self.vocab.clone(),
            input: self.input.cast(),
            output: self.output.cast(),
        }
    }
}

pub(crate) fn scores_to_probabilities<F: Real>(scores: &[F], loss: Loss) -> Vec<f64> {
    let s: Vec<f64> = scores.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect();
    match loss {
        Loss::Softmax => {
            let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = s.iter().map(|x| (x - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            exps.into_iter().map(|e| e / z).collect()
        }
        Loss::Ova => s.into_iter().map(sigmoid).collect(),
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
