//! Corpus ingestion: metadata parsing, record filtering, deduplication and
//! profiling.

mod dedup;
pub mod fetch;
mod filter;
mod language;
mod parse;
mod profile;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use dedup::{deduplicate, non_null_field_count};
pub use filter::{filter_records, FilterSpec, LanguagePolicy};
pub use language::{detect_language, LanguageDetector, UNKNOWN_LANGUAGE};
pub use parse::{parse_metadata, ParseOutcome, RowError, Schema, SourceFormat};
pub use profile::{profile_corpus, CorpusProfile};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("unreadable corpus stream: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema maps column `{column}` for field `{field}` but the header has no such column")]
    MissingColumn { field: &'static str, column: String },
    #[error("malformed CSV header: {0}")]
    Header(String),
    #[error("unknown record field `{0}`")]
    UnknownField(String),
    #[error("invalid date window: {0}")]
    Window(String),
    #[error("corpus directory {path}: {message}")]
    CorpusDir { path: String, message: String },
    #[error("fetch failed on page {page}: {message}")]
    Fetch { page: u32, message: String },
}

/// How much of a publication date is known.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatePrecision {
    Year,
    Month,
    Day,
}

/// A calendar date plus its declared precision. Month- and year-precision
/// dates are anchored on the first day of the period.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublishDate {
    pub date: NaiveDate,
    pub precision: DatePrecision,
}

impl PublishDate {
    pub fn day(date: NaiveDate) -> Self {
        Self { date, precision: DatePrecision::Day }
    }

    /// Parses `YYYY-MM-DD`, `YYYY-MM` or `YYYY`.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        let parts: Vec<&str> = s.split('-').collect();
        let num = |p: &str, len: usize| -> Option<u32> {
            (p.len() == len && p.bytes().all(|b| b.is_ascii_digit())).then(|| p.parse().ok()).flatten()
        };
        match parts.as_slice() {
            [y] => {
                let y = num(y, 4)?;
                NaiveDate::from_ymd_opt(y as i32, 1, 1)
                    .map(|date| Self { date, precision: DatePrecision::Year })
            }
            [y, m] => {
                let (y, m) = (num(y, 4)?, num(m, 2)?);
                NaiveDate::from_ymd_opt(y as i32, m, 1)
                    .map(|date| Self { date, precision: DatePrecision::Month })
            }
            [y, m, d] => {
                let (y, m, d) = (num(y, 4)?, num(m, 2)?, num(d, 2)?);
                NaiveDate::from_ymd_opt(y as i32, m, d).map(Self::day)
            }
            _ => None,
        }
    }
}

impl fmt::Display for PublishDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.precision {
            DatePrecision::Day => write!(f, "{}", self.date.format("%Y-%m-%d")),
            DatePrecision::Month => write!(f, "{:04}-{:02}", self.date.year(), self.date.month()),
            DatePrecision::Year => write!(f, "{:04}", self.date.year()),
        }
    }
}

impl Serialize for PublishDate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PublishDate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        PublishDate::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("invalid date `{s}`")))
    }
}

/// One document's metadata and text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub record_id: String,
    pub dup_group_key: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub abstract_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doi: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub publish_date: Option<PublishDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub journal: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub authors: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
}

impl CorpusRecord {
    pub fn new(record_id: impl Into<String>, dup_group_key: impl Into<String>) -> Self {
        Self {
            record_id: record_id.into(),
            dup_group_key: dup_group_key.into(),
            title: String::new(),
            abstract_text: String::new(),
            doi: None,
            publish_date: None,
            journal: None,
            authors: None,
            language: None,
        }
    }

    /// Empty strings and empty author lists count as null.
    pub fn has_field(&self, field: RecordField) -> bool {
        fn present(s: &Option<String>) -> bool {
            s.as_deref().is_some_and(|v| !v.trim().is_empty())
        }
        match field {
            RecordField::RecordId => !self.record_id.is_empty(),
            RecordField::DupGroupKey => !self.dup_group_key.is_empty(),
            RecordField::Title => !self.title.trim().is_empty(),
            RecordField::Abstract => !self.abstract_text.trim().is_empty(),
            RecordField::Doi => present(&self.doi),
            RecordField::PublishDate => self.publish_date.is_some(),
            RecordField::Journal => present(&self.journal),
            RecordField::Authors => self.authors.as_ref().is_some_and(|a| !a.is_empty()),
            RecordField::Language => present(&self.language),
        }
    }

    /// The day-precision publication date, if any.
    pub fn day(&self) -> Option<NaiveDate> {
        self.publish_date
            .filter(|d| d.precision == DatePrecision::Day)
            .map(|d| d.date)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordField {
    RecordId,
    DupGroupKey,
    Title,
    Abstract,
    Doi,
    PublishDate,
    Journal,
    Authors,
    Language,
}

impl RecordField {
    pub const ALL: [RecordField; 9] = [
        RecordField::RecordId,
        RecordField::DupGroupKey,
        RecordField::Title,
        RecordField::Abstract,
        RecordField::Doi,
        RecordField::PublishDate,
        RecordField::Journal,
        RecordField::Authors,
        RecordField::Language,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RecordField::RecordId => "record_id",
            RecordField::DupGroupKey => "dup_group_key",
            RecordField::Title => "title",
            RecordField::Abstract => "abstract",
            RecordField::Doi => "doi",
            RecordField::PublishDate => "publish_date",
            RecordField::Journal => "journal",
            RecordField::Authors => "authors",
            RecordField::Language => "language",
        }
    }
}

impl FromStr for RecordField {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RecordField::ALL
            .into_iter()
            .find(|f| f.name() == s || (s == "abstract_text" && *f == RecordField::Abstract))
            .ok_or_else(|| IngestError::UnknownField(s.to_string()))
    }
}

/// Inclusive date range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, IngestError> {
        if start > end {
            return Err(IngestError::Window(format!("start {start} is after end {end}")));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }
}

/// Records dropped per preparation stage.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub raw_records: usize,
    pub missing_fields: usize,
    pub date_precision: usize,
    pub window: usize,
    pub language: usize,
    pub duplicates: usize,
    /// Rows rejected by the parser; they never became records and are not
    /// part of `raw_records`.
    #[serde(default)]
    pub malformed_rows: usize,
}

impl Provenance {
    pub fn total_dropped(&self) -> usize {
        self.missing_fields + self.date_precision + self.window + self.language + self.duplicates
    }
}

/// The filtered, deduplicated, date-sorted corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CleanCorpus {
    pub records: Vec<CorpusRecord>,
    pub window: DateWindow,
    pub provenance: Provenance,
}

const CORPUS_FILE: &str = "corpus.jsonl";
const PROVENANCE_FILE: &str = "provenance.json";

#[derive(Serialize, Deserialize)]
struct ProvenanceFile {
    window: DateWindow,
    provenance: Provenance,
    records: usize,
}

impl CleanCorpus {
    /// Filters then deduplicates, recording every drop.
    pub fn prepare(records: Vec<CorpusRecord>, spec: &FilterSpec) -> CleanCorpus {
        let filtered = filter_records(records, spec);
        let before = filtered.records.len();
        let mut records = deduplicate(filtered.records);
        sort_by_date(&mut records);
        let mut provenance = filtered.provenance;
        provenance.duplicates += before - records.len();
        CleanCorpus { records, window: filtered.window, provenance }
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.records
            .iter()
            .map(|r| r.publish_date.map(|d| d.date).unwrap_or(self.window.start))
            .collect()
    }

    /// Writes `corpus.jsonl` and `provenance.json` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), IngestError> {
        fs::create_dir_all(dir)?;
        let mut out = BufWriter::new(fs::File::create(dir.join(CORPUS_FILE))?);
        for r in &self.records {
            serde_json::to_writer(&mut out, r).map_err(std::io::Error::other)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        let meta = ProvenanceFile {
            window: self.window,
            provenance: self.provenance.clone(),
            records: self.records.len(),
        };
        let json = serde_json::to_string_pretty(&meta).map_err(std::io::Error::other)?;
        fs::write(dir.join(PROVENANCE_FILE), json + "\n")?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<CleanCorpus, IngestError> {
        let bad = |message: String| IngestError::CorpusDir { path: dir.display().to_string(), message };
        let meta: ProvenanceFile = serde_json::from_slice(&fs::read(dir.join(PROVENANCE_FILE))?)
            .map_err(|e| bad(format!("{PROVENANCE_FILE}: {e}")))?;
        let reader = BufReader::new(fs::File::open(dir.join(CORPUS_FILE))?);
        let mut records = Vec::with_capacity(meta.records);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: CorpusRecord = serde_json::from_str(&line)
                .map_err(|e| bad(format!("{CORPUS_FILE} line {}: {e}", i + 1)))?;
            records.push(rec);
        }
        if records.len() != meta.records {
            return Err(bad(format!(
                "{PROVENANCE_FILE} declares {} records, {CORPUS_FILE} holds {}",
                meta.records,
                records.len()
            )));
        }
        Ok(CleanCorpus { records, window: meta.window, provenance: meta.provenance })
    }
}

/// Ascending publication date, ties by record id. Undated records sort first.
pub(crate) fn sort_by_date(records: &mut [CorpusRecord]) {
    records.sort_by(|a, b| {
        a.publish_date
            .map(|d| d.date)
            .cmp(&b.publish_date.map(|d| d.date))
            .then_with(|| a.record_id.cmp(&b.record_id))
    });
}

/// Counts records per calendar month key `YYYY-MM`.
pub(crate) fn month_key(d: NaiveDate) -> String {
    format!("{:04}-{:02}", d.year(), d.month())
}

pub(crate) type Histogram = BTreeMap<usize, usize>;
