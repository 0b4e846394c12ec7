use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::DynamicsError;
use crate::ingest::DateWindow;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CasePoint {
    pub date: NaiveDate,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventMark {
    pub date: NaiveDate,
    pub label: String,
}

/// Context series drawn under topic intensities: a case-count curve and
/// dated event markers, both in ascending date order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OverlaySeries {
    pub cases: Vec<CasePoint>,
    pub events: Vec<EventMark>,
}

impl OverlaySeries {
    pub fn slice(&self, range: &DateWindow) -> OverlaySeries {
        OverlaySeries {
            cases: self.cases.iter().filter(|c| range.contains(c.date)).cloned().collect(),
            events: self.events.iter().filter(|e| range.contains(e.date)).cloned().collect(),
        }
    }
}

fn rows<R: Read>(input: R, origin: &str, expect: [&str; 2]) -> Result<Vec<(usize, String, String)>, DynamicsError> {
    let fail = |line: usize, message: String| DynamicsError::Overlay { path: origin.to_string(), line, message };
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| fail(line, e.to_string()))?;
        if rec.len() != 2 {
            return Err(fail(line, format!("expected 2 columns, found {}", rec.len())));
        }
        let (a, b) = (rec[0].trim(), rec[1].trim());
        if line == 1 && a == expect[0] && b == expect[1] {
            continue;
        }
        out.push((line, a.to_string(), b.to_string()));
    }
    Ok(out)
}

fn parse_date(origin: &str, line: usize, s: &str) -> Result<NaiveDate, DynamicsError> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| DynamicsError::Overlay {
        path: origin.to_string(),
        line,
        message: format!("bad date `{s}`"),
    })
}

/// `date,value` rows (header optional); values must be finite and
/// non-negative. Output is sorted by date.
pub fn parse_cases<R: Read>(input: R, origin: &str) -> Result<Vec<CasePoint>, DynamicsError> {
    let mut out = Vec::new();
    for (line, a, b) in rows(input, origin, ["date", "value"])? {
        let date = parse_date(origin, line, &a)?;
        let value: f64 = b.parse().ok().filter(|v: &f64| v.is_finite() && *v >= 0.0).ok_or_else(|| {
            DynamicsError::Overlay { path: origin.to_string(), line, message: format!("bad value `{b}`") }
        })?;
        out.push(CasePoint { date, value });
    }
    out.sort_by_key(|c| c.date);
    Ok(out)
}

/// `date,label` rows (header optional), sorted by date; same-day events keep
/// file order.
pub fn parse_events<R: Read>(input: R, origin: &str) -> Result<Vec<EventMark>, DynamicsError> {
    let mut out = Vec::new();
    for (line, a, b) in rows(input, origin, ["date", "label"])? {
        let date = parse_date(origin, line, &a)?;
        if b.is_empty() {
            return Err(DynamicsError::Overlay { path: origin.to_string(), line, message: "empty label".into() });
        }
        out.push(EventMark { date, label: b });
    }
    out.sort_by_key(|e| e.date);
    Ok(out)
}

fn open(path: &Path) -> Result<std::fs::File, DynamicsError> {
    std::fs::File::open(path).map_err(|source| DynamicsError::Io { path: path.display().to_string(), source })
}

pub fn load_cases(path: &Path) -> Result<Vec<CasePoint>, DynamicsError> {
    parse_cases(open(path)?, &path.display().to_string())
}

pub fn load_events(path: &Path) -> Result<Vec<EventMark>, DynamicsError> {
    parse_events(open(path)?, &path.display().to_string())
}
