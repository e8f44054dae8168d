//! Publication records, the journal list and the ISSN join between them.
//!
//! Publications arrive as line-delimited JSON, one object per record. The
//! journal list is a comma-separated table carrying up to three FoR codes
//! (or `MD`) per journal. Joining the two on ISSN transfers the journal's
//! codes to every article it published.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{assign_fields, FieldScheme};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("duplicate pmid {pmid:?} on lines {first} and {second}")]
    DuplicatePmid { pmid: String, first: usize, second: usize },
    #[error("journal list row {row}: {message}")]
    MalformedRow { row: u64, message: String },
    #[error("journal list row {row}: invalid FoR code {value:?}")]
    InvalidForCode { row: u64, value: String },
    #[error("ISSN {issn} appears in the journal list with conflicting FoR codes [{first}] and [{second}]")]
    ConflictingIssn { issn: Issn, first: ForCodeSet, second: ForCodeSet },
    #[error("statistics requested over an empty corpus")]
    Empty,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IssnError {
    #[error("ISSN {0:?} does not have 8 characters")]
    BadLength(String),
    #[error("ISSN {0:?} contains characters other than digits and a final X")]
    BadCharacter(String),
}

/// An ISSN in canonical `NNNN-NNNC` form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Issn(String);

impl Issn {
    /// Strips hyphens and whitespace, uppercases the check character and
    /// re-inserts the hyphen after the fourth character.
    pub fn parse(raw: &str) -> Result<Self, IssnError> {
        let compact: String = raw
            .chars()
            .filter(|c| *c != '-' && !c.is_whitespace())
            .map(|c| c.to_ascii_uppercase())
            .collect();
        if compact.chars().count() != 8 {
            return Err(IssnError::BadLength(raw.to_string()));
        }
        let valid = compact.char_indices().all(|(i, c)| {
            c.is_ascii_digit() || (i == 7 && c == 'X')
        });
        if !valid {
            return Err(IssnError::BadCharacter(raw.to_string()));
        }
        Ok(Issn(format!("{}-{}", &compact[..4], &compact[4..])))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Issn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Issn {
    type Err = IssnError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Issn::parse(s)
    }
}

impl TryFrom<String> for Issn {
    type Error = IssnError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Issn::parse(&s)
    }
}

impl From<Issn> for String {
    fn from(issn: Issn) -> String {
        issn.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0:?} is not a 2-digit FoR code, a 4-digit FoR code or \"MD\"")]
pub struct ForCodeError(pub String);

/// A Fields of Research code: 2 digits, 4 digits, or the `MD` marker.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ForCode(String);

pub const MULTIDISCIPLINARY_CODE: &str = "MD";

impl ForCode {
    pub fn parse(raw: &str) -> Result<Self, ForCodeError> {
        let s = raw.trim();
        let digits = s.chars().all(|c| c.is_ascii_digit());
        if s == MULTIDISCIPLINARY_CODE || (digits && (s.len() == 2 || s.len() == 4)) {
            Ok(ForCode(s.to_string()))
        } else {
            Err(ForCodeError(raw.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_multidisciplinary(&self) -> bool {
        self.0 == MULTIDISCIPLINARY_CODE
    }

    pub fn is_four_digit(&self) -> bool {
        self.0.len() == 4 && !self.is_multidisciplinary()
    }

    /// The 2-digit division of this code. `MD` and 2-digit codes map to themselves.
    pub fn division(&self) -> ForCode {
        if self.is_four_digit() {
            ForCode(self.0[..2].to_string())
        } else {
            self.clone()
        }
    }
}

impl fmt::Display for ForCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for ForCode {
    type Error = ForCodeError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        ForCode::parse(&s)
    }
}

impl From<ForCode> for String {
    fn from(code: ForCode) -> String {
        code.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ForCodeSetError {
    #[error("a journal carries at most 3 FoR codes, got {0}")]
    TooMany(usize),
    #[error("duplicate FoR code {0}")]
    Duplicate(ForCode),
}

/// Zero to three distinct FoR codes, in the order they were listed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<ForCode>", into = "Vec<ForCode>")]
pub struct ForCodeSet(Vec<ForCode>);

impl ForCodeSet {
    pub const MAX_CODES: usize = 3;

    pub fn new(codes: Vec<ForCode>) -> Result<Self, ForCodeSetError> {
        if codes.len() > Self::MAX_CODES {
            return Err(ForCodeSetError::TooMany(codes.len()));
        }
        let mut seen = HashSet::new();
        for code in &codes {
            if !seen.insert(code) {
                return Err(ForCodeSetError::Duplicate(code.clone()));
            }
        }
        Ok(ForCodeSet(codes))
    }

    pub fn empty() -> Self {
        ForCodeSet(Vec::new())
    }

    pub fn codes(&self) -> &[ForCode] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ForCode> {
        self.0.iter()
    }
}

impl fmt::Display for ForCodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self.0.iter().map(ForCode::as_str).collect();
        f.write_str(&parts.join(","))
    }
}

impl TryFrom<Vec<ForCode>> for ForCodeSet {
    type Error = ForCodeSetError;
    fn try_from(codes: Vec<ForCode>) -> Result<Self, Self::Error> {
        ForCodeSet::new(codes)
    }
}

impl From<ForCodeSet> for Vec<ForCode> {
    fn from(set: ForCodeSet) -> Vec<ForCode> {
        set.0
    }
}

/// The metadata channels a publication can be classified from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Title,
    Abstract,
    Keywords,
    Mesh,
    JournalTitle,
}

impl Channel {
    pub const ALL: [Channel; 5] = [
        Channel::Title,
        Channel::Abstract,
        Channel::Keywords,
        Channel::Mesh,
        Channel::JournalTitle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Title => "title",
            Channel::Abstract => "abstract",
            Channel::Keywords => "keywords",
            Channel::Mesh => "mesh",
            Channel::JournalTitle => "journal_title",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Channel::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown channel {s:?}"))
    }
}

/// One article's metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PublicationRecord {
    pub pmid: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub issn: Option<Issn>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub journal_title: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(rename = "abstract", skip_serializing_if = "Option::is_none")]
    pub abstract_text: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub keywords: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub mesh_terms: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
}

#[derive(Deserialize)]
struct RawRecord {
    pmid: String,
    #[serde(default)]
    issn: Option<String>,
    #[serde(default)]
    journal_title: Option<String>,
    #[serde(default)]
    title: Option<String>,
    #[serde(default, rename = "abstract")]
    abstract_text: Option<String>,
    #[serde(default)]
    keywords: Option<Vec<String>>,
    #[serde(default)]
    mesh_terms: Option<Vec<String>>,
    #[serde(default)]
    year: Option<i32>,
}

fn non_blank(s: Option<String>) -> Option<String> {
    s.filter(|s| !s.trim().is_empty())
}

fn non_blank_list(list: Option<Vec<String>>) -> Vec<String> {
    list.unwrap_or_default()
        .into_iter()
        .filter(|s| !s.trim().is_empty())
        .collect()
}

impl PublicationRecord {
    /// A record with only an identifier.
    pub fn new(pmid: impl Into<String>) -> Self {
        PublicationRecord {
            pmid: pmid.into(),
            issn: None,
            journal_title: None,
            title: None,
            abstract_text: None,
            keywords: Vec::new(),
            mesh_terms: Vec::new(),
            year: None,
        }
    }

    /// Parses one line of the publications file.
    pub fn from_json_line(line: &str) -> Result<Self, String> {
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        if raw.pmid.trim().is_empty() {
            return Err("pmid is empty".to_string());
        }
        let issn = match non_blank(raw.issn) {
            Some(s) => Some(Issn::parse(&s).map_err(|e| e.to_string())?),
            None => None,
        };
        Ok(PublicationRecord {
            pmid: raw.pmid,
            issn,
            journal_title: non_blank(raw.journal_title),
            title: non_blank(raw.title),
            abstract_text: non_blank(raw.abstract_text),
            keywords: non_blank_list(raw.keywords),
            mesh_terms: non_blank_list(raw.mesh_terms),
            year: raw.year,
        })
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serialization cannot fail")
    }

    /// Raw text of one channel, or `None` when the channel is absent. List
    /// channels are joined with single spaces.
    pub fn channel_text(&self, channel: Channel) -> Option<String> {
        let text = match channel {
            Channel::Title => self.title.clone(),
            Channel::Abstract => self.abstract_text.clone(),
            Channel::JournalTitle => self.journal_title.clone(),
            Channel::Keywords => Some(self.keywords.join(" ")),
            Channel::Mesh => Some(self.mesh_terms.join(" ")),
        };
        text.filter(|t| !t.trim().is_empty())
    }

    pub fn has_abstract(&self) -> bool {
        self.abstract_text.is_some()
    }

    pub fn has_keywords(&self) -> bool {
        !self.keywords.is_empty()
    }

    pub fn has_mesh(&self) -> bool {
        !self.mesh_terms.is_empty()
    }
}

/// Reads a publications file: one JSON object per line, blank lines skipped.
pub fn parse_publications<R: BufRead>(source: R) -> Result<Vec<PublicationRecord>, CorpusError> {
    read_lines(source, PublicationRecord::from_json_line, |r| &r.pmid)
}

/// Reads the output of [`write_labeled`]: publication lines with an extra
/// `for_codes` array.
pub fn parse_labeled<R: BufRead>(source: R) -> Result<Vec<LabeledRecord>, CorpusError> {
    #[derive(Deserialize)]
    struct Codes {
        #[serde(default)]
        for_codes: ForCodeSet,
    }
    let parse = |line: &str| {
        let record = PublicationRecord::from_json_line(line)?;
        let codes: Codes = serde_json::from_str(line).map_err(|e| e.to_string())?;
        Ok(LabeledRecord { record, for_codes: codes.for_codes })
    };
    read_lines(source, parse, |r| &r.record.pmid)
}

fn read_lines<R: BufRead, T>(
    source: R,
    parse: impl Fn(&str) -> Result<T, String>,
    pmid: impl Fn(&T) -> &String,
) -> Result<Vec<T>, CorpusError> {
    let mut records = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record =
            parse(&line).map_err(|message| CorpusError::MalformedLine { line: line_no, message })?;
        let id = pmid(&record);
        if let Some(&first) = seen.get(id) {
            return Err(CorpusError::DuplicatePmid { pmid: id.clone(), first, second: line_no });
        }
        seen.insert(id.clone(), line_no);
        records.push(record);
    }
    Ok(records)
}

pub fn write_publications<W: Write>(records: &[PublicationRecord], mut sink: W) -> std::io::Result<()> {
    for record in records {
        writeln!(sink, "{}", record.to_json_line())?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub issns: Vec<Issn>,
    pub journal_title: String,
    pub for_codes: ForCodeSet,
}

#[derive(Debug, Clone, Default)]
pub struct JournalList {
    pub entries: Vec<JournalEntry>,
    /// Rows dropped because none of their ISSN cells held a valid ISSN.
    pub dropped_rows: usize,
}

/// Reads the journal list. Columns are located by header name: `journal_title`,
/// any number of `issn_*` columns and any number of `for_*` columns.
pub fn parse_journal_list<R: Read>(source: R) -> Result<JournalList, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let title_col = headers
        .iter()
        .position(|h| h == "journal_title")
        .ok_or_else(|| CorpusError::MalformedRow {
            row: 1,
            message: "missing journal_title column".to_string(),
        })?;
    let issn_cols: Vec<usize> = (0..headers.len())
        .filter(|&i| headers[i].starts_with("issn"))
        .collect();
    let for_cols: Vec<usize> = (0..headers.len())
        .filter(|&i| headers[i].starts_with("for"))
        .collect();

    let mut list = JournalList::default();
    for result in reader.records() {
        let row = result?;
        let row_no = row.position().map(|p| p.line()).unwrap_or(0);
        let cell = |i: usize| row.get(i).unwrap_or("");

        let mut codes = Vec::new();
        for &col in &for_cols {
            let value = cell(col);
            if value.is_empty() {
                continue;
            }
            let code = ForCode::parse(value).map_err(|_| CorpusError::InvalidForCode {
                row: row_no,
                value: value.to_string(),
            })?;
            if !codes.contains(&code) {
                codes.push(code);
            }
        }
        let for_codes = ForCodeSet::new(codes).map_err(|e| CorpusError::MalformedRow {
            row: row_no,
            message: e.to_string(),
        })?;

        let mut issns: Vec<Issn> = Vec::new();
        for &col in &issn_cols {
            if let Ok(issn) = Issn::parse(cell(col)) {
                if !issns.contains(&issn) {
                    issns.push(issn);
                }
            }
        }
        if issns.is_empty() {
            list.dropped_rows += 1;
            continue;
        }
        list.entries.push(JournalEntry {
            issns,
            journal_title: cell(title_col).to_string(),
            for_codes,
        });
    }
    Ok(list)
}

pub fn write_labeled<W: Write>(labeled: &[LabeledRecord], mut sink: W) -> std::io::Result<()> {
    for item in labeled {
        let line = serde_json::to_string(item).expect("record serialization cannot fail");
        writeln!(sink, "{line}")?;
    }
    Ok(())
}

/// A publication together with the FoR codes inherited from its journal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabeledRecord {
    #[serde(flatten)]
    pub record: PublicationRecord,
    pub for_codes: ForCodeSet,
}

/// Joins publications to the journal list on ISSN. Every record comes back
/// exactly once, in input order.
pub fn match_for_codes(
    records: &[PublicationRecord],
    journals: &[JournalEntry],
) -> Result<Vec<LabeledRecord>, CorpusError> {
    let mut index: HashMap<&Issn, &ForCodeSet> = HashMap::new();
    for entry in journals {
        for issn in &entry.issns {
            match index.get(issn) {
                Some(existing) if **existing != entry.for_codes => {
                    return Err(CorpusError::ConflictingIssn {
                        issn: issn.clone(),
                        first: (*existing).clone(),
                        second: entry.for_codes.clone(),
                    });
                }
                Some(_) => {}
                None => {
                    index.insert(issn, &entry.for_codes);
                }
            }
        }
    }
    Ok(records
        .iter()
        .map(|record| LabeledRecord {
            record: record.clone(),
            for_codes: record
                .issn
                .as_ref()
                .and_then(|issn| index.get(issn))
                .map(|codes| (*codes).clone())
                .unwrap_or_default(),
        })
        .collect())
}

/// Counts of records carrying 0, 1, 2 and 3 codes (or fields).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CountHistogram {
    pub counts: [usize; 4],
}

impl CountHistogram {
    pub fn from_lengths(lengths: impl IntoIterator<Item = usize>) -> Result<Self, CorpusError> {
        let mut counts = [0usize; 4];
        for len in lengths {
            counts[len.min(3)] += 1;
        }
        if counts.iter().sum::<usize>() == 0 {
            return Err(CorpusError::Empty);
        }
        Ok(CountHistogram { counts })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn shares(&self) -> [f64; 4] {
        let total = self.total() as f64;
        self.counts.map(|c| c as f64 / total)
    }

    pub fn write_csv<W: Write>(&self, sink: W, label: &str) -> Result<(), CorpusError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record([label, "count", "share"])?;
        for (n, (count, share)) in self.counts.iter().zip(self.shares()).enumerate() {
            w.write_record([n.to_string(), count.to_string(), crate::report::decimal(share)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Histogram of how many FoR codes each record inherited.
pub fn for_match_stats(labeled: &[LabeledRecord]) -> Result<CountHistogram, CorpusError> {
    CountHistogram::from_lengths(labeled.iter().map(|r| r.for_codes.len()))
}

/// Availability counts of abstract, keywords and MeSH over a group of records.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct AvailabilityCounts {
    pub total: usize,
    pub with_abstract: usize,
    pub with_keywords: usize,
    pub with_mesh: usize,
    /// Records by how many of the three channels they carry.
    pub by_channel_count: [usize; 4],
}

impl AvailabilityCounts {
    fn add(&mut self, record: &PublicationRecord) {
        let flags = [record.has_abstract(), record.has_keywords(), record.has_mesh()];
        self.total += 1;
        self.with_abstract += flags[0] as usize;
        self.with_keywords += flags[1] as usize;
        self.with_mesh += flags[2] as usize;
        self.by_channel_count[flags.iter().filter(|f| **f).count()] += 1;
    }

    fn share(&self, count: usize) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            count as f64 / self.total as f64
        }
    }

    pub fn abstract_share(&self) -> f64 {
        self.share(self.with_abstract)
    }

    pub fn keywords_share(&self) -> f64 {
        self.share(self.with_keywords)
    }

    pub fn mesh_share(&self) -> f64 {
        self.share(self.with_mesh)
    }

    pub fn at_least_share(&self, n: usize) -> f64 {
        self.share(self.by_channel_count[n.min(3)..].iter().sum())
    }

    pub fn all_three_share(&self) -> f64 {
        self.share(self.by_channel_count[3])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AvailabilityReport {
    pub overall: AvailabilityCounts,
    /// Per selected field, in scheme order. Empty when no scheme was given.
    pub per_field: Vec<(String, AvailabilityCounts)>,
}

impl AvailabilityReport {
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), CorpusError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record([
            "group", "records", "abstract", "keywords", "mesh", "at_least_1", "at_least_2", "all_3",
        ])?;
        let rows = std::iter::once(("overall", &self.overall))
            .chain(self.per_field.iter().map(|(l, c)| (l.as_str(), c)));
        for (group, c) in rows {
            let d = crate::report::decimal;
            w.write_record([
                group.to_string(),
                c.total.to_string(),
                d(c.abstract_share()),
                d(c.keywords_share()),
                d(c.mesh_share()),
                d(c.at_least_share(1)),
                d(c.at_least_share(2)),
                d(c.all_three_share()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Metadata availability overall and, when a scheme is given, per selected
/// field (a record counts toward each field it is assigned).
pub fn metadata_availability(
    labeled: &[LabeledRecord],
    scheme: Option<&FieldScheme>,
) -> Result<AvailabilityReport, CorpusError> {
    if labeled.is_empty() {
        return Err(CorpusError::Empty);
    }
    let mut overall = AvailabilityCounts::default();
    let mut per_field: Vec<(String, AvailabilityCounts)> = scheme
        .map(|s| s.labels().map(|l| (l.to_string(), AvailabilityCounts::default())).collect())
        .unwrap_or_default();
    for item in labeled {
        overall.add(&item.record);
        if let Some(scheme) = scheme {
            for label in assign_fields(&item.for_codes, scheme) {
                if let Some((_, counts)) = per_field.iter_mut().find(|(l, _)| *l == label) {
                    counts.add(&item.record);
                }
            }
        }
    }
    Ok(AvailabilityReport { overall, per_field })
}
