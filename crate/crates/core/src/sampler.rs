//! Channel-specific training sets: random or class-balanced sampling, then a
//! train/test split by article.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Channel, LabeledRecord};
use crate::embedder::{tokenize, TrainingExample};
use crate::fields::{assign_fields, FieldScheme};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("requested {requested} documents but only {available} are available")]
    NotEnoughDocuments { requested: usize, available: usize },
    #[error("no documents for class(es): {}", .0.join(", "))]
    EmptyClasses(Vec<String>),
    #[error("target size {target} is smaller than the number of classes ({classes})")]
    TargetBelowClassCount { target: usize, classes: usize },
    #[error("split ratio {0} must lie strictly between 0 and 1")]
    InvalidSplitRatio(f64),
    #[error("a train/test split needs at least 2 distinct articles, got {0}")]
    TooFewArticles(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One channel's text for one article, with the article's selected fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelDocument {
    pub text: String,
    pub labels: Vec<String>,
    pub source_pmid: String,
}

impl ChannelDocument {
    pub fn to_example(&self) -> TrainingExample {
        TrainingExample { labels: self.labels.clone(), text: self.text.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Random,
    Stratified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    pub strategy: Strategy,
    pub target_size: usize,
    pub seed: u64,
    pub split_ratio: f64,
}

impl SamplingSpec {
    pub fn new(strategy: Strategy, target_size: usize, seed: u64) -> Self {
        SamplingSpec { strategy, target_size, seed, split_ratio: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<ChannelDocument>,
    pub test: Vec<ChannelDocument>,
}

/// Collapses whitespace runs to single spaces.
fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Skips records whose channel is empty (or has no tokens) and records with no
/// selected field.
pub fn build_channel_documents(
    labeled: &[LabeledRecord],
    scheme: &FieldScheme,
    channel: Channel,
) -> Vec<ChannelDocument> {
    labeled
        .iter()
        .filter_map(|item| {
            let text = normalize(&item.record.channel_text(channel)?);
            if tokenize(&text).is_empty() {
                return None;
            }
            let labels = assign_fields(&item.for_codes, scheme);
            if labels.is_empty() {
                return None;
            }
            Some(ChannelDocument { text, labels, source_pmid: item.record.pmid.clone() })
        })
        .collect()
}

/// Uniform sample without replacement, in shuffled order.
pub fn sample_random(
    docs: &[ChannelDocument],
    spec: &SamplingSpec,
) -> Result<Vec<ChannelDocument>, SamplerError> {
    if spec.target_size > docs.len() {
        return Err(SamplerError::NotEnoughDocuments {
            requested: spec.target_size,
            available: docs.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut picked = index::sample(&mut rng, docs.len(), spec.target_size).into_vec();
    picked.shuffle(&mut rng);
    Ok(picked.into_iter().map(|i| docs[i].clone()).collect())
}

/// Equal quota per class. Classes are served rarest first; a document counts
/// toward every label it carries and is drawn at most once.
pub fn sample_stratified(
    docs: &[ChannelDocument],
    classes: &[String],
    spec: &SamplingSpec,
) -> Result<Vec<ChannelDocument>, SamplerError> {
    if spec.target_size < classes.len() {
        return Err(SamplerError::TargetBelowClassCount {
            target: spec.target_size,
            classes: classes.len(),
        });
    }
    let mut by_class: BTreeMap<&str, Vec<usize>> =
        classes.iter().map(|c| (c.as_str(), Vec::new())).collect();
    for (i, doc) in docs.iter().enumerate() {
        for label in &doc.labels {
            if let Some(list) = by_class.get_mut(label.as_str()) {
                list.push(i);
            }
        }
    }
    let empty: Vec<String> = by_class
        .iter()
        .filter(|(_, v)| v.is_empty())
        .map(|(c, _)| c.to_string())
        .collect();
    if !empty.is_empty() {
        return Err(SamplerError::EmptyClasses(empty));
    }

    let quota = spec.target_size / classes.len().max(1);
    let mut order: Vec<(&str, Vec<usize>)> = by_class.into_iter().collect();
    order.sort_by(|a, b| a.1.len().cmp(&b.1.len()).then(a.0.cmp(b.0)));

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut used = vec![false; docs.len()];
    let mut filled: HashMap<&str, usize> = HashMap::new();
    let mut picked = Vec::new();
    for (class, mut candidates) in order {
        let have = filled.get(class).copied().unwrap_or(0);
        let mut need = quota.saturating_sub(have);
        if need == 0 {
            continue;
        }
        candidates.shuffle(&mut rng);
        for i in candidates {
            if need == 0 {
                break;
            }
            if used[i] {
                continue;
            }
            used[i] = true;
            picked.push(i);
            for label in &docs[i].labels {
                *filled.entry(label.as_str()).or_default() += 1;
            }
            need -= 1;
        }
    }
    picked.shuffle(&mut rng);
    Ok(picked.into_iter().map(|i| docs[i].clone()).collect())
}

pub fn sample(
    docs: &[ChannelDocument],
    classes: &[String],
    spec: &SamplingSpec,
) -> Result<Vec<ChannelDocument>, SamplerError> {
    match spec.strategy {
        Strategy::Random => sample_random(docs, spec),
        Strategy::Stratified => sample_stratified(docs, classes, spec),
    }
}

/// Splits by shuffled article id so no article lands on both sides. The
/// number of training articles is `round(ratio * articles)`, kept within
/// `1..articles`.
pub fn split_train_test(
    docs: &[ChannelDocument],
    spec: &SamplingSpec,
) -> Result<DatasetSplit, SamplerError> {
    if !(spec.split_ratio > 0.0 && spec.split_ratio < 1.0) {
        return Err(SamplerError::InvalidSplitRatio(spec.split_ratio));
    }
    let mut seen = HashSet::new();
    let mut pmids: Vec<&str> = docs
        .iter()
        .map(|d| d.source_pmid.as_str())
        .filter(|p| seen.insert(*p))
        .collect();
    if pmids.len() < 2 {
        return Err(SamplerError::TooFewArticles(pmids.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    pmids.shuffle(&mut rng);
    let n_train = ((spec.split_ratio * pmids.len() as f64).round() as usize).clamp(1, pmids.len() - 1);
    let train_ids: HashSet<&str> = pmids[..n_train].iter().copied().collect();
    let (train, test) = docs
        .iter()
        .cloned()
        .partition(|d| train_ids.contains(d.source_pmid.as_str()));
    Ok(DatasetSplit { train, test })
}

pub fn write_training_text<W: Write>(docs: &[ChannelDocument], mut sink: W) -> std::io::Result<()> {
    for doc in docs {
        writeln!(sink, "{}", doc.to_example().to_line())?;
    }
    sink.flush()
}

/// Label counts over a document set (a document adds one to each label).
pub fn label_counts(docs: &[ChannelDocument]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for doc in docs {
        for label in &doc.labels {
            *counts.entry(label.clone()).or_default() += 1;
        }
    }
    counts
}

/// Shannon entropy (nats) of the label distribution of a document set.
pub fn label_entropy(docs: &[ChannelDocument]) -> f64 {
    let counts = label_counts(docs);
    let total: usize = counts.values().sum();
    if total == 0 {
        return 0.0;
    }
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.ln()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ForCode, ForCodeSet, PublicationRecord};
    use crate::fields::{select_fields, CodeDistribution, SelectionConfig};

    fn doc(pmid: usize, labels: &[&str]) -> ChannelDocument {
        ChannelDocument {
            text: format!("text {pmid}"),
            labels: labels.iter().map(|l| l.to_string()).collect(),
            source_pmid: pmid.to_string(),
        }
    }

    fn classes(names: &[&str]) -> Vec<String> {
        names.iter().map(|c| c.to_string()).collect()
    }

    fn scheme() -> FieldScheme {
        let dist = CodeDistribution {
            shares: [("03", 0.5), ("17", 0.5)]
                .iter()
                .map(|(c, s)| (ForCode::parse(c).unwrap(), *s))
                .collect(),
        };
        let config = SelectionConfig { drill_down_parents: vec![], ..Default::default() };
        select_fields(&dist, &Default::default(), &config).unwrap()
    }

    fn labeled(pmid: &str, codes: &[&str], f: impl FnOnce(&mut PublicationRecord)) -> LabeledRecord {
        let mut record = PublicationRecord::new(pmid);
        f(&mut record);
        LabeledRecord {
            record,
            for_codes: ForCodeSet::new(codes.iter().map(|c| ForCode::parse(c).unwrap()).collect())
                .unwrap(),
        }
    }

    #[test]
    fn channel_documents() {
        let title = "Topography and behavioral relevance of the global signal in the human brain.";
        let items = vec![
            labeled("1", &["17"], |r| r.title = Some(title.into())),
            labeled("2", &["17"], |r| r.keywords = vec!["stroke".into(), "MRI".into()]),
            labeled("3", &["13"], |r| r.title = Some("dropped: no selected field".into())),
            labeled("4", &["03"], |r| r.title = Some(" -- ".into())),
        ];
        let s = scheme();
        let titles = build_channel_documents(&items, &s, Channel::Title);
        assert_eq!(titles.len(), 1);
        assert_eq!(titles[0].text, title);
        assert_eq!(titles[0].labels, vec!["Psychology and Cognitive Sciences"]);
        assert!(build_channel_documents(&items, &s, Channel::Abstract).is_empty());
        let kw = build_channel_documents(&items, &s, Channel::Keywords);
        assert_eq!(kw[0].text, "stroke MRI");
    }

    #[test]
    fn random_sample_is_a_permutation_when_full() {
        let docs: Vec<_> = (0..10).map(|i| doc(i, &["a"])).collect();
        let spec = SamplingSpec::new(Strategy::Random, 10, 1);
        let out = sample_random(&docs, &spec).unwrap();
        let mut ids: Vec<_> = out.iter().map(|d| d.source_pmid.parse::<usize>().unwrap()).collect();
        ids.sort();
        assert_eq!(ids, (0..10).collect::<Vec<_>>());
        assert_eq!(out, sample_random(&docs, &spec).unwrap());
        assert!(matches!(
            sample_random(&docs, &SamplingSpec::new(Strategy::Random, 11, 1)),
            Err(SamplerError::NotEnoughDocuments { requested: 11, available: 10 })
        ));
    }

    #[test]
    fn stratified_two_class_skew() {
        let docs: Vec<_> = (0..1000).map(|i| doc(i, &[if i % 100 == 0 { "b" } else { "a" }])).collect();
        let out = sample_stratified(&docs, &classes(&["a", "b"]), &SamplingSpec::new(Strategy::Stratified, 20, 4)).unwrap();
        let counts = label_counts(&out);
        assert_eq!(counts["a"], 10);
        assert_eq!(counts["b"], 10);
    }

    #[test]
    fn stratified_seventeen_disjoint_classes() {
        let names: Vec<String> = (0..17).map(|c| format!("class{c}")).collect();
        let docs: Vec<_> = (0..17 * 300).map(|i| doc(i, &[&names[i % 17]])).collect();
        let out = sample_stratified(&docs, &names, &SamplingSpec::new(Strategy::Stratified, 1700, 9)).unwrap();
        assert_eq!(out.len(), 1700);
        assert!(label_counts(&out).values().all(|&c| c == 100));
    }

    #[test]
    fn stratified_rarest_first_with_short_class() {
        // class c has only 3 documents: it gets all of them, others their quota
        let mut docs: Vec<_> = (0..100).map(|i| doc(i, &["a"])).collect();
        docs.extend((100..200).map(|i| doc(i, &["b"])));
        docs.extend((200..203).map(|i| doc(i, &["c", "a"])));
        let out = sample_stratified(&docs, &classes(&["a", "b", "c"]), &SamplingSpec::new(Strategy::Stratified, 30, 2)).unwrap();
        let counts = label_counts(&out);
        assert_eq!(counts["c"], 3);
        assert_eq!(counts["a"], 10);
        assert_eq!(counts["b"], 10);
        assert_eq!(out.len(), 3 + 7 + 10);
    }

    #[test]
    fn stratified_errors() {
        let docs = vec![doc(1, &["a"])];
        match sample_stratified(&docs, &classes(&["a", "z"]), &SamplingSpec::new(Strategy::Stratified, 4, 0)) {
            Err(SamplerError::EmptyClasses(c)) => assert_eq!(c, vec!["z"]),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            sample_stratified(&docs, &classes(&["a", "z"]), &SamplingSpec::new(Strategy::Stratified, 1, 0)),
            Err(SamplerError::TargetBelowClassCount { .. })
        ));
    }

    #[test]
    fn split_ninety_ten() {
        let docs: Vec<_> = (0..100).map(|i| doc(i, &["a"])).collect();
        let spec = SamplingSpec::new(Strategy::Random, 100, 5);
        let split = split_train_test(&docs, &spec).unwrap();
        assert_eq!((split.train.len(), split.test.len()), (90, 10));
        assert_eq!(split, split_train_test(&docs, &spec).unwrap());
        let same: Vec<_> = (0..5).map(|_| doc(7, &["a"])).collect();
        assert!(matches!(split_train_test(&same, &spec), Err(SamplerError::TooFewArticles(1))));
        let bad = SamplingSpec { split_ratio: 1.0, ..spec };
        assert!(matches!(split_train_test(&docs, &bad), Err(SamplerError::InvalidSplitRatio(_))));
    }

    #[test]
    fn training_text_lines() {
        let mut buf = Vec::new();
        write_training_text(&[doc(1, &["Clinical Sciences", "MD"])], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "__label__Clinical_Sciences __label__MD text 1\n");
    }

    mod props {
        use super::*;
        use super::Strategy;
        use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest, Strategy as Gen};

        fn corpus() -> impl Gen<Value = Vec<ChannelDocument>> {
            proptest::collection::vec(
                (0usize..40, proptest::collection::btree_set(0usize..4, 1..3)),
                2..120,
            )
            .prop_map(|items| {
                items
                    .into_iter()
                    .enumerate()
                    .map(|(i, (pmid, labels))| ChannelDocument {
                        text: format!("doc {i}"),
                        labels: labels.into_iter().map(|l| format!("c{l}")).collect(),
                        source_pmid: pmid.to_string(),
                    })
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn samples_never_repeat_documents(docs in corpus(), seed in any::<u64>(), frac in 0.0f64..1.0) {
                let target = ((docs.len() as f64) * frac) as usize;
                let spec = SamplingSpec::new(Strategy::Random, target, seed);
                let out = sample_random(&docs, &spec).unwrap();
                let texts: HashSet<_> = out.iter().map(|d| d.text.clone()).collect();
                prop_assert_eq!(texts.len(), out.len());
                prop_assert_eq!(out.len(), target);

                let present: Vec<String> = label_counts(&docs).into_keys().collect();
                let spec = SamplingSpec::new(Strategy::Stratified, target.max(present.len()), seed);
                let out = sample_stratified(&docs, &present, &spec).unwrap();
                let texts: HashSet<_> = out.iter().map(|d| d.text.clone()).collect();
                prop_assert_eq!(texts.len(), out.len());
            }

            #[test]
            fn split_is_article_disjoint(docs in corpus(), seed in any::<u64>(), ratio in 0.05f64..0.95) {
                let spec = SamplingSpec { split_ratio: ratio, ..SamplingSpec::new(Strategy::Random, 0, seed) };
                if let Ok(split) = split_train_test(&docs, &spec) {
                    let train: HashSet<_> = split.train.iter().map(|d| &d.source_pmid).collect();
                    prop_assert!(split.test.iter().all(|d| !train.contains(&d.source_pmid)));
                    prop_assert_eq!(split.train.len() + split.test.len(), docs.len());
                    prop_assert!(!split.train.is_empty() && !split.test.is_empty());
                }
            }
        }
    }
}
