//! Threshold-based selection of the classification scheme.
//!
//! 2-digit divisions whose share of publications exceeds one threshold become
//! classes directly. A few large divisions are drilled down instead: their
//! 4-digit groups above a second threshold become classes and the remainder
//! is pooled into an "Other ..." bucket.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CountHistogram, CorpusError, ForCode, ForCodeSet, LabeledRecord};

#[derive(Debug, Error)]
pub enum FieldsError {
    #[error("cannot compute a distribution over an empty corpus")]
    EmptyCorpus,
    #[error("the 2-digit distribution is empty")]
    EmptyDistribution,
    #[error("drill-down division {0} does not occur in the 2-digit distribution")]
    DrillDownAbsent(ForCode),
    #[error("no 4-digit distribution given for drill-down division {0}")]
    MissingSubDistribution(ForCode),
    #[error("{0} is not a 2-digit division")]
    NotADivision(ForCode),
    #[error("share {share} for code {code} is outside [0, 1]")]
    InvalidShare { code: ForCode, share: f64 },
    #[error("threshold {0} is outside [0, 1)")]
    InvalidThreshold(f64),
    #[error("scheme has duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("scheme has no other-bucket for drill-down division {0}")]
    MissingOtherBucket(ForCode),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Display names of the FoR divisions and of the 4-digit groups under the
/// divisions most relevant to biomedical literature.
pub fn for_name(code: &str) -> Option<&'static str> {
    Some(match code {
        "MD" => "Multidisciplinary",
        "01" => "Mathematical Sciences",
        "02" => "Physical Sciences",
        "03" => "Chemical Sciences",
        "04" => "Earth Sciences",
        "05" => "Environmental Sciences",
        "06" => "Biological Sciences",
        "07" => "Agricultural and Veterinary Sciences",
        "08" => "Information and Computing Sciences",
        "09" => "Engineering",
        "10" => "Technology",
        "11" => "Medical and Health Sciences",
        "12" => "Built Environment and Design",
        "13" => "Education",
        "14" => "Economics",
        "15" => "Commerce, Management, Tourism and Services",
        "16" => "Studies in Human Society",
        "17" => "Psychology and Cognitive Sciences",
        "18" => "Law and Legal Studies",
        "19" => "Studies in Creative Arts and Writing",
        "20" => "Language, Communication and Culture",
        "21" => "History and Archaeology",
        "22" => "Philosophy and Religious Studies",
        "0601" => "Biochemistry and Cell Biology",
        "0602" => "Ecology",
        "0603" => "Evolutionary Biology",
        "0604" => "Genetics",
        "0605" => "Microbiology",
        "0606" => "Physiology",
        "0607" => "Plant Biology",
        "0608" => "Zoology",
        "0699" => "Other Biological Sciences",
        "1101" => "Medical Biochemistry and Metabolomics",
        "1102" => "Cardiorespiratory Medicine and Haematology",
        "1103" => "Clinical Sciences",
        "1104" => "Complementary and Alternative Medicine",
        "1105" => "Dentistry",
        "1106" => "Human Movement and Sports Science",
        "1107" => "Immunology",
        "1108" => "Medical Microbiology",
        "1109" => "Neurosciences",
        "1110" => "Nursing",
        "1111" => "Nutrition and Dietetics",
        "1112" => "Oncology and Carcinogenesis",
        "1113" => "Ophthalmology and Optometry",
        "1114" => "Paediatrics and Reproductive Medicine",
        "1115" => "Pharmacology and Pharmaceutical Sciences",
        "1116" => "Medical Physiology",
        "1117" => "Public Health and Health Services",
        "1199" => "Other Medical and Health Sciences",
        _ => return None,
    })
}

/// Label used for a code: its display name when known, else the code itself.
pub fn display_name(code: &ForCode) -> String {
    for_name(code.as_str())
        .map(str::to_string)
        .unwrap_or_else(|| code.as_str().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    #[serde(rename = "direct_2digit")]
    Direct2Digit,
    #[serde(rename = "direct_4digit")]
    Direct4Digit,
    OtherBucket,
    Multidisciplinary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedField {
    pub label: String,
    pub kind: FieldKind,
    /// For an other-bucket the first entry is the drill-down division; the
    /// rest are the observed 4-digit groups it absorbed.
    pub source_codes: Vec<ForCode>,
    pub share: f64,
}

impl SelectedField {
    fn sort_code(&self) -> &ForCode {
        &self.source_codes[0]
    }
}

/// Share of publications carrying each code. Shares need not sum to 1 since
/// a publication may carry several codes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CodeDistribution {
    pub shares: BTreeMap<ForCode, f64>,
}

impl CodeDistribution {
    pub fn share(&self, code: &str) -> f64 {
        ForCode::parse(code)
            .ok()
            .and_then(|c| self.shares.get(&c).copied())
            .unwrap_or(0.0)
    }

    fn validate(&self) -> Result<(), FieldsError> {
        for (code, &share) in &self.shares {
            if !(0.0..=1.0).contains(&share) {
                return Err(FieldsError::InvalidShare { code: code.clone(), share });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DistributionLevel {
    /// 4-digit codes truncated to their division; `MD` kept as is.
    TwoDigit,
    /// 4-digit groups under one division.
    FourDigitUnder(ForCode),
}

pub fn compute_distribution(
    labeled: &[LabeledRecord],
    level: &DistributionLevel,
) -> Result<CodeDistribution, FieldsError> {
    if labeled.is_empty() {
        return Err(FieldsError::EmptyCorpus);
    }
    let mut counts: BTreeMap<ForCode, usize> = BTreeMap::new();
    for item in labeled {
        let mut seen = HashSet::new();
        for code in item.for_codes.iter() {
            let key = match level {
                DistributionLevel::TwoDigit => code.division(),
                DistributionLevel::FourDigitUnder(parent) => {
                    if code.is_four_digit() && code.division() == *parent {
                        code.clone()
                    } else {
                        continue;
                    }
                }
            };
            if seen.insert(key.clone()) {
                *counts.entry(key).or_default() += 1;
            }
        }
    }
    let total = labeled.len() as f64;
    Ok(CodeDistribution {
        shares: counts.into_iter().map(|(c, n)| (c, n as f64 / total)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionConfig {
    pub threshold_2digit: f64,
    pub threshold_4digit: f64,
    pub drill_down_parents: Vec<ForCode>,
    /// Display-name overrides for drill-down divisions, used to build the
    /// "Other <name>" bucket labels.
    pub parent_names: BTreeMap<ForCode, String>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            threshold_2digit: 0.03,
            threshold_4digit: 0.02,
            drill_down_parents: vec![
                ForCode::parse("11").expect("valid code"),
                ForCode::parse("06").expect("valid code"),
            ],
            parent_names: BTreeMap::new(),
        }
    }
}

/// The selected classes and the rules mapping raw codes onto them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchemeDocument", into = "SchemeDocument")]
pub struct FieldScheme {
    fields: Vec<SelectedField>,
    drill_down_parents: BTreeSet<ForCode>,
    threshold_2digit: f64,
    threshold_4digit: f64,
    direct: HashMap<ForCode, usize>,
    other_buckets: HashMap<ForCode, usize>,
}

#[derive(Serialize, Deserialize)]
struct SchemeDocument {
    threshold_2digit: f64,
    threshold_4digit: f64,
    drill_down_parents: Vec<ForCode>,
    fields: Vec<SelectedField>,
}

impl TryFrom<SchemeDocument> for FieldScheme {
    type Error = FieldsError;
    fn try_from(doc: SchemeDocument) -> Result<Self, Self::Error> {
        FieldScheme::new(
            doc.fields,
            doc.drill_down_parents.into_iter().collect(),
            doc.threshold_2digit,
            doc.threshold_4digit,
        )
    }
}

impl From<FieldScheme> for SchemeDocument {
    fn from(s: FieldScheme) -> Self {
        SchemeDocument {
            threshold_2digit: s.threshold_2digit,
            threshold_4digit: s.threshold_4digit,
            drill_down_parents: s.drill_down_parents.into_iter().collect(),
            fields: s.fields,
        }
    }
}

impl FieldScheme {
    pub fn new(
        fields: Vec<SelectedField>,
        drill_down_parents: BTreeSet<ForCode>,
        threshold_2digit: f64,
        threshold_4digit: f64,
    ) -> Result<Self, FieldsError> {
        let mut labels = HashSet::new();
        let mut direct = HashMap::new();
        let mut other_buckets = HashMap::new();
        for (i, field) in fields.iter().enumerate() {
            if !labels.insert(field.label.as_str()) {
                return Err(FieldsError::DuplicateLabel(field.label.clone()));
            }
            match field.kind {
                FieldKind::OtherBucket => {
                    if let Some(parent) = field.source_codes.first() {
                        other_buckets.insert(parent.clone(), i);
                    }
                }
                _ => {
                    for code in &field.source_codes {
                        direct.insert(code.clone(), i);
                    }
                }
            }
        }
        for parent in &drill_down_parents {
            if !other_buckets.contains_key(parent) {
                return Err(FieldsError::MissingOtherBucket(parent.clone()));
            }
        }
        Ok(FieldScheme {
            fields,
            drill_down_parents,
            threshold_2digit,
            threshold_4digit,
            direct,
            other_buckets,
        })
    }

    pub fn fields(&self) -> &[SelectedField] {
        &self.fields
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.fields.iter().map(|f| f.label.as_str())
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn contains_label(&self, label: &str) -> bool {
        self.labels().any(|l| l == label)
    }

    pub fn drill_down_parents(&self) -> &BTreeSet<ForCode> {
        &self.drill_down_parents
    }

    pub fn thresholds(&self) -> (f64, f64) {
        (self.threshold_2digit, self.threshold_4digit)
    }

    /// The field a single raw code maps to, if any.
    pub fn field_for_code(&self, code: &ForCode) -> Option<&SelectedField> {
        let division = code.division();
        let index = if self.drill_down_parents.contains(&division) {
            if code.is_four_digit() {
                self.direct
                    .get(code)
                    .or_else(|| self.other_buckets.get(&division))
            } else {
                self.other_buckets.get(&division)
            }
        } else {
            self.direct.get(&division)
        };
        index.map(|&i| &self.fields[i])
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scheme serialization cannot fail");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Builds the scheme from the 2-digit distribution and the 4-digit
/// distributions of the drill-down divisions. Threshold comparisons are strict.
pub fn select_fields(
    dist2: &CodeDistribution,
    dist4_by_parent: &BTreeMap<ForCode, CodeDistribution>,
    config: &SelectionConfig,
) -> Result<FieldScheme, FieldsError> {
    for t in [config.threshold_2digit, config.threshold_4digit] {
        if !(0.0..1.0).contains(&t) {
            return Err(FieldsError::InvalidThreshold(t));
        }
    }
    if dist2.shares.is_empty() {
        return Err(FieldsError::EmptyDistribution);
    }
    dist2.validate()?;
    let parents: BTreeSet<ForCode> = config.drill_down_parents.iter().cloned().collect();
    for parent in &parents {
        if parent.is_four_digit() || parent.is_multidisciplinary() {
            return Err(FieldsError::NotADivision(parent.clone()));
        }
        if !dist2.shares.contains_key(parent) {
            return Err(FieldsError::DrillDownAbsent(parent.clone()));
        }
    }

    let mut fields = Vec::new();
    for (code, &share) in &dist2.shares {
        if parents.contains(code) || code.is_four_digit() || share <= config.threshold_2digit {
            continue;
        }
        let kind = if code.is_multidisciplinary() {
            FieldKind::Multidisciplinary
        } else {
            FieldKind::Direct2Digit
        };
        fields.push(SelectedField {
            label: display_name(code),
            kind,
            source_codes: vec![code.clone()],
            share,
        });
    }

    for parent in &parents {
        let dist4 = dist4_by_parent
            .get(parent)
            .ok_or_else(|| FieldsError::MissingSubDistribution(parent.clone()))?;
        dist4.validate()?;
        let mut absorbed = vec![parent.clone()];
        let mut absorbed_share = 0.0;
        for (code, &share) in &dist4.shares {
            if !code.is_four_digit() || code.division() != *parent {
                continue;
            }
            // "xx99" groups are the classification's own catch-alls
            let catch_all = code.as_str().ends_with("99");
            if share > config.threshold_4digit && !catch_all {
                fields.push(SelectedField {
                    label: display_name(code),
                    kind: FieldKind::Direct4Digit,
                    source_codes: vec![code.clone()],
                    share,
                });
            } else {
                absorbed.push(code.clone());
                absorbed_share += share;
            }
        }
        let parent_name = config
            .parent_names
            .get(parent)
            .cloned()
            .unwrap_or_else(|| display_name(parent));
        fields.push(SelectedField {
            label: format!("Other {parent_name}"),
            kind: FieldKind::OtherBucket,
            source_codes: absorbed,
            share: absorbed_share,
        });
    }

    fields.sort_by(|a, b| {
        b.share
            .total_cmp(&a.share)
            .then_with(|| (a.kind == FieldKind::OtherBucket).cmp(&(b.kind == FieldKind::OtherBucket)))
            .then_with(|| a.sort_code().cmp(b.sort_code()))
    });
    FieldScheme::new(fields, parents, config.threshold_2digit, config.threshold_4digit)
}

/// The 2-digit distribution plus the 4-digit distribution under each
/// drill-down division; the JSON input of the `select-fields` command.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DistributionSet {
    pub two_digit: CodeDistribution,
    pub four_digit: BTreeMap<ForCode, CodeDistribution>,
}

impl DistributionSet {
    pub fn from_records(
        labeled: &[LabeledRecord],
        parents: &[ForCode],
    ) -> Result<Self, FieldsError> {
        let two_digit = compute_distribution(labeled, &DistributionLevel::TwoDigit)?;
        let mut four_digit = BTreeMap::new();
        for parent in parents {
            four_digit.insert(
                parent.clone(),
                compute_distribution(labeled, &DistributionLevel::FourDigitUnder(parent.clone()))?,
            );
        }
        Ok(DistributionSet { two_digit, four_digit })
    }

    pub fn select(&self, config: &SelectionConfig) -> Result<FieldScheme, FieldsError> {
        select_fields(&self.two_digit, &self.four_digit, config)
    }
}

/// Convenience wrapper computing all distributions from labeled records.
pub fn select_fields_from_records(
    labeled: &[LabeledRecord],
    config: &SelectionConfig,
) -> Result<FieldScheme, FieldsError> {
    DistributionSet::from_records(labeled, &config.drill_down_parents)?.select(config)
}

/// Maps each raw code independently and collapses duplicates, keeping the
/// order of first appearance.
pub fn assign_fields(codes: &ForCodeSet, scheme: &FieldScheme) -> Vec<String> {
    let mut labels: Vec<String> = Vec::with_capacity(codes.len());
    for code in codes.iter() {
        if let Some(field) = scheme.field_for_code(code) {
            if !labels.iter().any(|l| *l == field.label) {
                labels.push(field.label.clone());
            }
        }
    }
    labels
}

/// Histogram of how many selected fields each record ends up with.
pub fn field_coverage(
    labeled: &[LabeledRecord],
    scheme: &FieldScheme,
) -> Result<CountHistogram, FieldsError> {
    Ok(CountHistogram::from_lengths(
        labeled.iter().map(|r| assign_fields(&r.for_codes, scheme).len()),
    )?)
}

/// Records that inherited at least one FoR code but lost all of them to the
/// field selection, as a share of all records.
pub fn selection_loss(labeled: &[LabeledRecord], scheme: &FieldScheme) -> f64 {
    if labeled.is_empty() {
        return 0.0;
    }
    let lost = labeled
        .iter()
        .filter(|r| !r.for_codes.is_empty() && assign_fields(&r.for_codes, scheme).is_empty())
        .count();
    lost as f64 / labeled.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PublicationRecord;

    fn code(c: &str) -> ForCode {
        ForCode::parse(c).unwrap()
    }

    fn dist(pairs: &[(&str, f64)]) -> CodeDistribution {
        CodeDistribution {
            shares: pairs.iter().map(|(c, s)| (code(c), *s)).collect(),
        }
    }

    fn codes(list: &[&str]) -> ForCodeSet {
        ForCodeSet::new(list.iter().map(|c| code(c)).collect()).unwrap()
    }

    fn labeled(list: &[&[&str]]) -> Vec<LabeledRecord> {
        list.iter()
            .enumerate()
            .map(|(i, cs)| LabeledRecord {
                record: PublicationRecord::new(i.to_string()),
                for_codes: codes(cs),
            })
            .collect()
    }

    /// Distributions shaped like a 2019 PubMed sample.
    pub(crate) fn reference_like() -> (CodeDistribution, BTreeMap<ForCode, CodeDistribution>) {
        let dist2 = dist(&[
            ("11", 0.518),
            ("06", 0.168),
            ("03", 0.113),
            ("09", 0.089),
            ("MD", 0.081),
            ("17", 0.072),
            ("02", 0.032),
            ("07", 0.031),
            ("08", 0.012),
            ("13", 0.004),
        ]);
        let mut dist4 = BTreeMap::new();
        dist4.insert(
            code("11"),
            dist(&[
                ("1103", 0.199),
                ("1117", 0.074),
                ("1109", 0.045),
                ("1115", 0.041),
                ("1112", 0.037),
                ("1102", 0.033),
                ("1114", 0.026),
                ("1107", 0.019),
                ("1199", 0.030),
            ]),
        );
        dist4.insert(code("06"), dist(&[("0601", 0.054), ("0605", 0.021), ("0604", 0.019)]));
        (dist2, dist4)
    }

    fn reference_scheme() -> FieldScheme {
        let (d2, d4) = reference_like();
        select_fields(&d2, &d4, &SelectionConfig::default()).unwrap()
    }

    #[test]
    fn distribution_counts_each_record_once_per_code() {
        let d = compute_distribution(&labeled(&[&["11", "06"]]), &DistributionLevel::TwoDigit)
            .unwrap();
        assert_eq!(d.share("11"), 1.0);
        assert_eq!(d.share("06"), 1.0);
        let d = compute_distribution(
            &labeled(&[&["1103", "1109"], &["MD"], &[]]),
            &DistributionLevel::TwoDigit,
        )
        .unwrap();
        assert!((d.share("11") - 1.0 / 3.0).abs() < 1e-12);
        assert!((d.share("MD") - 1.0 / 3.0).abs() < 1e-12);
        let d4 = compute_distribution(
            &labeled(&[&["1103", "0601"], &["1103"], &["11"], &["MD"]]),
            &DistributionLevel::FourDigitUnder(code("11")),
        )
        .unwrap();
        assert_eq!(d4.shares.len(), 1);
        assert_eq!(d4.share("1103"), 0.5);
        assert!(matches!(
            compute_distribution(&[], &DistributionLevel::TwoDigit),
            Err(FieldsError::EmptyCorpus)
        ));
    }

    #[test]
    fn reference_like_distribution_yields_seventeen_fields() {
        let scheme = reference_scheme();
        let labels: Vec<&str> = scheme.labels().collect();
        assert_eq!(labels.len(), 17, "{labels:?}");
        for expected in [
            "Clinical Sciences",
            "Chemical Sciences",
            "Other Medical and Health Sciences",
            "Engineering",
            "Multidisciplinary",
            "Public Health and Health Services",
            "Psychology and Cognitive Sciences",
            "Biochemistry and Cell Biology",
            "Neurosciences",
            "Other Biological Sciences",
            "Pharmacology and Pharmaceutical Sciences",
            "Oncology and Carcinogenesis",
            "Cardiorespiratory Medicine and Haematology",
            "Physical Sciences",
            "Agricultural and Veterinary Sciences",
            "Paediatrics and Reproductive Medicine",
            "Microbiology",
        ] {
            assert!(labels.contains(&expected), "missing {expected}");
        }
        assert_eq!(labels[0], "Clinical Sciences");
    }

    #[test]
    fn single_division() {
        let config = SelectionConfig { drill_down_parents: vec![], ..Default::default() };
        let scheme = select_fields(&dist(&[("03", 1.0)]), &BTreeMap::new(), &config).unwrap();
        assert_eq!(scheme.len(), 1);
        assert_eq!(scheme.fields()[0].kind, FieldKind::Direct2Digit);
        assert_eq!(scheme.fields()[0].source_codes, vec![code("03")]);
    }

    #[test]
    fn synthetic_thresholds_by_hand() {
        // 11 drilled down: 1103 (0.30 > 0.02) direct, 1105 (0.01) to the bucket.
        // 02 at 0.025 is not above 3 %; 07 and MD are.
        let d2 = dist(&[("11", 0.6), ("02", 0.025), ("07", 0.04), ("MD", 0.05)]);
        let mut d4 = BTreeMap::new();
        d4.insert(code("11"), dist(&[("1103", 0.3), ("1105", 0.01)]));
        let config = SelectionConfig { drill_down_parents: vec![code("11")], ..Default::default() };
        let scheme = select_fields(&d2, &d4, &config).unwrap();
        let summary: Vec<(&str, FieldKind)> =
            scheme.fields().iter().map(|f| (f.label.as_str(), f.kind)).collect();
        assert_eq!(
            summary,
            vec![
                ("Clinical Sciences", FieldKind::Direct4Digit),
                ("Multidisciplinary", FieldKind::Multidisciplinary),
                ("Agricultural and Veterinary Sciences", FieldKind::Direct2Digit),
                ("Other Medical and Health Sciences", FieldKind::OtherBucket),
            ]
        );
        assert_eq!(scheme.fields()[3].source_codes, vec![code("11"), code("1105")]);
    }

    #[test]
    fn thresholds_are_strict() {
        let config = SelectionConfig { drill_down_parents: vec![], ..Default::default() };
        let scheme =
            select_fields(&dist(&[("03", 0.03), ("09", 0.0301)]), &BTreeMap::new(), &config)
                .unwrap();
        assert_eq!(scheme.labels().collect::<Vec<_>>(), vec!["Engineering"]);
    }

    #[test]
    fn selection_errors() {
        let config = SelectionConfig::default();
        assert!(matches!(
            select_fields(&CodeDistribution::default(), &BTreeMap::new(), &config),
            Err(FieldsError::EmptyDistribution)
        ));
        assert!(matches!(
            select_fields(&dist(&[("11", 0.5)]), &BTreeMap::new(), &config),
            Err(FieldsError::DrillDownAbsent(c)) if c.as_str() == "06"
        ));
        let d2 = dist(&[("11", 0.5), ("06", 0.2)]);
        assert!(matches!(
            select_fields(&d2, &BTreeMap::new(), &config),
            Err(FieldsError::MissingSubDistribution(_))
        ));
    }

    #[test]
    fn assignment_rules() {
        let scheme = reference_scheme();
        assert_eq!(
            assign_fields(&codes(&["1115"]), &scheme),
            vec!["Pharmacology and Pharmaceutical Sciences"]
        );
        assert!(assign_fields(&codes(&[]), &scheme).is_empty());
        assert_eq!(
            assign_fields(&codes(&["0903", "1102"]), &scheme),
            vec!["Engineering", "Cardiorespiratory Medicine and Haematology"]
        );
        // bare drill-down division and sub-threshold groups land in the bucket
        assert_eq!(
            assign_fields(&codes(&["11", "1107", "1199"]), &scheme),
            vec!["Other Medical and Health Sciences"]
        );
        // unselected division is dropped
        assert!(assign_fields(&codes(&["13", "1301"]), &scheme).is_empty());
        assert_eq!(assign_fields(&codes(&["MD"]), &scheme), vec!["Multidisciplinary"]);
    }

    #[test]
    fn coverage_and_loss() {
        let scheme = reference_scheme();
        let data = labeled(&[&["1103"], &["1103", "0601"], &[], &["13"]]);
        let h = field_coverage(&data, &scheme).unwrap();
        assert_eq!(h.counts, [2, 1, 1, 0]);
        assert_eq!(selection_loss(&data, &scheme), 0.25);
        let all_one = labeled(&[&["1103"], &["03"]]);
        assert_eq!(field_coverage(&all_one, &scheme).unwrap().shares(), [0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn scheme_json_round_trip() {
        let scheme = reference_scheme();
        let back = FieldScheme::from_json(&scheme.to_json()).unwrap();
        assert_eq!(back, scheme);
        assert_eq!(
            back.field_for_code(&code("1109")).map(|f| f.label.as_str()),
            Some("Neurosciences")
        );
    }

    #[test]
    fn scheme_rejects_duplicate_labels() {
        let f = SelectedField {
            label: "A".into(),
            kind: FieldKind::Direct2Digit,
            source_codes: vec![code("03")],
            share: 0.5,
        };
        let mut g = f.clone();
        g.source_codes = vec![code("09")];
        assert!(matches!(
            FieldScheme::new(vec![f, g], BTreeSet::new(), 0.03, 0.02),
            Err(FieldsError::DuplicateLabel(_))
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn divisions() -> impl Strategy<Value = BTreeMap<String, f64>> {
            proptest::collection::btree_map(
                prop_oneof![(1u32..23).prop_map(|d| format!("{d:02}")), Just("MD".to_string())],
                0.0f64..1.0,
                1..12,
            )
        }

        proptest! {
            #[test]
            fn raising_threshold_never_adds_fields(
                shares in divisions(), t in 0.0f64..0.5, dt in 0.0f64..0.4,
            ) {
                let d2 = CodeDistribution {
                    shares: shares.iter().map(|(c, s)| (code(c), *s)).collect(),
                };
                let low = SelectionConfig {
                    threshold_2digit: t, drill_down_parents: vec![], ..Default::default()
                };
                let high = SelectionConfig { threshold_2digit: t + dt, ..low.clone() };
                let a = select_fields(&d2, &BTreeMap::new(), &low).unwrap();
                let b = select_fields(&d2, &BTreeMap::new(), &high).unwrap();
                for label in b.labels() {
                    prop_assert!(a.contains_label(label));
                }
            }

            #[test]
            fn assigned_labels_belong_to_scheme(
                raw in proptest::collection::btree_set(
                    prop_oneof![
                        (1u32..23).prop_map(|d| format!("{d:02}")),
                        (1u32..23, 1u32..100).prop_map(|(d, g)| format!("{d:02}{g:02}")),
                        Just("MD".to_string()),
                    ],
                    0..4,
                ),
            ) {
                let scheme = reference_scheme();
                let list: Vec<&str> = raw.iter().map(String::as_str).take(3).collect();
                let set = codes(&list);
                let labels = assign_fields(&set, &scheme);
                prop_assert!(labels.len() <= set.len());
                for l in &labels {
                    prop_assert!(scheme.contains_label(l));
                }
            }

            #[test]
            fn selection_is_deterministic(shares in divisions()) {
                let d2 = CodeDistribution {
                    shares: shares.iter().map(|(c, s)| (code(c), *s)).collect(),
                };
                let config = SelectionConfig { drill_down_parents: vec![], ..Default::default() };
                let a = select_fields(&d2, &BTreeMap::new(), &config).unwrap();
                let b = select_fields(&d2, &BTreeMap::new(), &config).unwrap();
                prop_assert_eq!(a.to_json(), b.to_json());
            }
        }
    }
}
