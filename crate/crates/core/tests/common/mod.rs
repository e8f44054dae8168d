#![allow(dead_code)]

use std::path::PathBuf;

use fortag::sampler::ChannelDocument;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Pronounceable pseudo-word, unique per index.
pub fn word(i: usize) -> String {
    const C: &[u8] = b"bdfgklmnprstvz";
    const V: &[u8] = b"aeiou";
    let mut s = String::new();
    let mut n = i + 1;
    while n > 0 {
        s.push(C[n % C.len()] as char);
        n /= C.len();
        s.push(V[n % V.len()] as char);
        n /= V.len();
    }
    s
}

/// Every class owns a few journals; the title's class word decides the label.
pub fn journal_corpus(records: usize, classes: &[String], seed: u64) -> Vec<ChannelDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fillers = ["journal", "of", "international", "annals", "reviews", "letters", "research", "the"];
    let journals: Vec<(String, String)> = (0..classes.len() * 8)
        .map(|j| {
            let class = j % classes.len();
            let title = format!(
                "{} {} {} {} {}",
                fillers[rng.gen_range(0..fillers.len())],
                fillers[rng.gen_range(0..fillers.len())],
                word(1000 + class),
                word(2000 + j),
                fillers[rng.gen_range(0..fillers.len())],
            );
            (title, classes[class].clone())
        })
        .collect();
    (0..records)
        .map(|i| {
            let (title, label) = &journals[rng.gen_range(0..journals.len())];
            ChannelDocument {
                text: title.clone(),
                labels: vec![label.clone()],
                source_pmid: format!("j{i}"),
            }
        })
        .collect()
}

pub struct SkewedCorpus {
    pub docs: Vec<ChannelDocument>,
    pub classes: Vec<String>,
    pub priors: Vec<f64>,
}

/// Geometric class priors from `first` down to `last`; each class draws from
/// its own Zipf-weighted vocabulary, overlapping with its neighbours, and a
/// `noise` share of tokens comes from a shared pool.
pub fn skewed_corpus(records: usize, k: usize, first: f64, last: f64, noise: f64, seed: u64) -> SkewedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ratio = (last / first).powf(1.0 / (k - 1) as f64);
    let raw: Vec<f64> = (0..k).map(|i| first * ratio.powi(i as i32)).collect();
    let total: f64 = raw.iter().sum();
    let priors: Vec<f64> = raw.iter().map(|p| p / total).collect();
    let classes: Vec<String> = (0..k).map(|i| format!("class {i}")).collect();
    let class_pick = WeightedIndex::new(&priors).unwrap();
    const VOCAB: usize = 120;
    const STRIDE: usize = 60;
    let zipf = WeightedIndex::new((0..VOCAB).map(|i| 1.0 / (i + 1) as f64)).unwrap();
    let noise_words = 200;
    let docs = (0..records)
        .map(|i| {
            let c = class_pick.sample(&mut rng);
            let len = rng.gen_range(6..12);
            let tokens: Vec<String> = (0..len)
                .map(|_| {
                    if rng.gen_bool(noise) {
                        word(50_000 + rng.gen_range(0..noise_words))
                    } else {
                        word(c * STRIDE + zipf.sample(&mut rng))
                    }
                })
                .collect();
            ChannelDocument {
                text: tokens.join(" "),
                labels: vec![classes[c].clone()],
                source_pmid: format!("s{i}"),
            }
        })
        .collect();
    SkewedCorpus { docs, classes, priors }
}
