mod common;

use std::collections::BTreeMap;
use std::sync::OnceLock;

use fortag::corpus::{Channel, PublicationRecord};
use fortag::embedder::{train, Loss, ModelParams};
use fortag::ensemble::{classify_record, ChannelModels, EnsemblePolicy};
use proptest::prelude::*;

fn models() -> &'static ChannelModels {
    static MODELS: OnceLock<ChannelModels> = OnceLock::new();
    MODELS.get_or_init(|| {
        let corpus = common::skewed_corpus(400, 4, 0.4, 0.1, 0.3, 21);
        let examples: Vec<_> = corpus.docs.iter().map(|d| d.to_example()).collect();
        let mut map = BTreeMap::new();
        for (i, channel) in Channel::ALL.into_iter().enumerate() {
            let loss = if i % 2 == 0 { Loss::Ova } else { Loss::Softmax };
            let params = ModelParams { dim: 8, epoch: 3, min_count: 1, buckets: 100, loss, seed: i as u64, ..ModelParams::default() };
            map.insert(channel, train(&examples, &params).unwrap());
        }
        ChannelModels::new(map, None).unwrap()
    })
}

fn word_text() -> impl Strategy<Value = Option<String>> {
    proptest::option::of(proptest::collection::vec(0usize..400, 1..8).prop_map(|ids| {
        ids.into_iter().map(common::word).collect::<Vec<_>>().join(" ")
    }))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn raising_threshold_never_adds_voters(
        texts in proptest::collection::vec(word_text(), 5),
        low in 0.0f64..0.99,
        bump in 0.0f64..0.5,
    ) {
        let mut record = PublicationRecord::new("1");
        record.title = texts[0].clone();
        record.abstract_text = texts[1].clone();
        record.keywords = texts[2].iter().cloned().collect();
        record.mesh_terms = texts[3].iter().cloned().collect();
        record.journal_title = texts[4].clone();
        let high = (low + bump).min(0.999);
        let voters = |t: f64| {
            let policy = EnsemblePolicy { threshold: t, ..EnsemblePolicy::default() };
            let d = classify_record(models(), &record, &policy).unwrap();
            d.channels.iter().filter(|c| c.prediction.is_some()).count()
        };
        prop_assert!(voters(high) <= voters(low));
    }
}
