use fortag_web::{combine_votes_json, explore_json, select_fields_json};
use serde_json::{json, Value};

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

fn distributions() -> Value {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/fixtures/reference_distributions.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn default_thresholds_reproduce_the_reference_scheme() {
    let got = select_fields_json(&json!({ "distributions": distributions() }).to_string()).unwrap();
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/fixtures/reference_scheme.json");
    assert_eq!(got, std::fs::read_to_string(path).unwrap());
}

#[test]
fn lower_thresholds_select_more_fields() {
    let count = |t2: f64, t4: f64| {
        let req = json!({ "distributions": distributions(), "threshold_2digit": t2, "threshold_4digit": t4 });
        parse(select_fields_json(&req.to_string()).unwrap())["fields"].as_array().unwrap().len()
    };
    assert_eq!(count(0.03, 0.02), 17);
    assert!(count(0.01, 0.01) > 17);
    assert!(count(0.10, 0.10) < 17);
    assert!(select_fields_json(r#"{"distributions": {}, "drill_down": ["xx"]}"#).is_err());
}

#[test]
fn votes_follow_plurality_with_threshold() {
    let req = |threshold: f64| {
        json!({
            "threshold": threshold,
            "votes": [
                { "channel": "title", "label": "Neurosciences", "probability": 0.9 },
                { "channel": "abstract", "label": "Neurosciences", "probability": 0.55 },
                { "channel": "keywords", "label": "Clinical Sciences", "probability": 0.8 },
                { "channel": "mesh", "label": "Clinical Sciences", "probability": 0.7 },
                { "channel": "journal_title", "label": "Clinical Sciences", "probability": 0.6 },
            ]
        })
        .to_string()
    };
    assert_eq!(parse(combine_votes_json(&req(0.5)).unwrap())["label"], "Clinical Sciences");
    let high = parse(combine_votes_json(&req(0.85)).unwrap());
    assert_eq!(high["label"], "Neurosciences");
    assert_eq!(high["voters"], json!(["title"]));
    assert_eq!(parse(combine_votes_json(&req(0.95)).unwrap())["label"], Value::Null);
    assert!(combine_votes_json(r#"{"votes": [{"channel": "fax", "label": "x"}]}"#).is_err());
}

#[test]
fn toy_explorer_separates_topics() {
    let training = "__label__cardio heart rhythm atrial\n__label__cardio atrial heart failure\n\
                    __label__neuro brain neuron cortex\n__label__neuro cortex brain stroke\n";
    let req = json!({
        "training": training, "text": "heart failure", "word": "brain",
        "analogy": ["heart", "atrial", "brain"], "k": 2
    });
    let out = parse(explore_json(&req.to_string()).unwrap());
    assert_eq!(out["labels"][0]["item"], "cardio");
    assert!(out["labels"][0]["score"].as_f64().unwrap() > 0.9);
    assert_eq!(out["neighbors"].as_array().unwrap().len(), 2);
    assert_eq!(out["analogy"].as_array().unwrap().len(), 2);
    assert_eq!(explore_json(&req.to_string()).unwrap(), explore_json(&req.to_string()).unwrap());
    assert!(explore_json(&json!({ "training": training, "word": "kidney" }).to_string()).is_err());
}
