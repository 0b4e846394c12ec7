//! Time binning of topic occurrences.
//!
//! Bins are half-open, `7 * width` days long and anchored at an origin date
//! (the corpus window start). A topic's intensity in a bin is its document
//! count divided by the number of documents published in that bin, outliers
//! included, so intensities of different topics are directly comparable.

mod overlay;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::DateWindow;

pub use overlay::{load_events, load_cases, parse_cases, parse_events, CasePoint, EventMark, OverlaySeries};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("bin width must be 1 to 4 weeks, got {0}")]
    BadWidth(u32),
    #[error("date {date} precedes the bin origin {origin}")]
    BeforeOrigin { date: NaiveDate, origin: NaiveDate },
    #[error("{labels} labels but {dates} dates")]
    LengthMismatch { labels: usize, dates: usize },
    #[error("unknown topic {0}")]
    UnknownTopic(usize),
    #[error("no bin starts between {start} and {end}")]
    EmptyInterval { start: NaiveDate, end: NaiveDate },
    #[error("{path}: line {line}: {message}")]
    Overlay { path: String, line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct BinWidth(u8);

impl BinWidth {
    pub const ALL: [BinWidth; 4] = [BinWidth(1), BinWidth(2), BinWidth(3), BinWidth(4)];

    pub fn new(weeks: u32) -> Result<Self, DynamicsError> {
        match weeks {
            1..=4 => Ok(BinWidth(weeks as u8)),
            _ => Err(DynamicsError::BadWidth(weeks)),
        }
    }

    pub fn weeks(self) -> u32 {
        self.0 as u32
    }

    pub fn days(self) -> i64 {
        7 * self.0 as i64
    }
}

impl TryFrom<u32> for BinWidth {
    type Error = DynamicsError;

    fn try_from(w: u32) -> Result<Self, Self::Error> {
        BinWidth::new(w)
    }
}

impl From<BinWidth> for u32 {
    fn from(w: BinWidth) -> u32 {
        w.weeks()
    }
}

pub fn bin_index(date: NaiveDate, width: BinWidth, origin: NaiveDate) -> Result<usize, DynamicsError> {
    let days = (date - origin).num_days();
    if days < 0 {
        return Err(DynamicsError::BeforeOrigin { date, origin });
    }
    Ok((days / width.days()) as usize)
}

pub fn assign_bins(dates: &[NaiveDate], width: BinWidth, origin: NaiveDate) -> Result<Vec<usize>, DynamicsError> {
    dates.iter().map(|&d| bin_index(d, width, origin)).collect()
}

/// Topic counts per bin with the per-bin totals they are normalized by.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicTimeSeries {
    width: BinWidth,
    origin: NaiveDate,
    /// `counts[topic][bin]`.
    counts: Vec<Vec<u32>>,
    outliers: Vec<u32>,
    totals: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub bin_start: NaiveDate,
    pub count: u32,
    pub intensity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicSeries {
    pub topic_id: usize,
    pub points: Vec<SeriesPoint>,
}

impl TopicTimeSeries {
    /// Rebuilds a series from stored counts; totals are recomputed.
    pub fn from_counts(
        width: BinWidth,
        origin: NaiveDate,
        counts: Vec<Vec<u32>>,
        outliers: Vec<u32>,
    ) -> Result<Self, DynamicsError> {
        let n_bins = outliers.len();
        if let Some(row) = counts.iter().find(|r| r.len() != n_bins) {
            return Err(DynamicsError::LengthMismatch { labels: row.len(), dates: n_bins });
        }
        let totals = (0..n_bins).map(|b| outliers[b] + counts.iter().map(|r| r[b]).sum::<u32>()).collect();
        Ok(Self { width, origin, counts, outliers, totals })
    }

    pub fn width(&self) -> BinWidth {
        self.width
    }

    pub fn origin(&self) -> NaiveDate {
        self.origin
    }

    pub fn n_bins(&self) -> usize {
        self.totals.len()
    }

    pub fn n_topics(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_start(&self, bin: usize) -> NaiveDate {
        self.origin + Duration::days(bin as i64 * self.width.days())
    }

    /// Half-open `[start, end)` of a bin.
    pub fn bin_edges(&self, bin: usize) -> (NaiveDate, NaiveDate) {
        (self.bin_start(bin), self.bin_start(bin + 1))
    }

    pub fn counts(&self, topic: usize) -> Result<&[u32], DynamicsError> {
        self.counts.get(topic).map(Vec::as_slice).ok_or(DynamicsError::UnknownTopic(topic))
    }

    pub fn all_counts(&self) -> &[Vec<u32>] {
        &self.counts
    }

    pub fn outliers(&self) -> &[u32] {
        &self.outliers
    }

    pub fn totals(&self) -> &[u32] {
        &self.totals
    }

    pub fn intensity(&self, topic: usize, bin: usize) -> f64 {
        match self.totals[bin] {
            0 => 0.0,
            t => self.counts[topic][bin] as f64 / t as f64,
        }
    }

    pub fn intensities(&self, topic: usize) -> Result<Vec<f64>, DynamicsError> {
        self.counts(topic)?;
        Ok((0..self.n_bins()).map(|b| self.intensity(topic, b)).collect())
    }

    /// Bins whose start date lies in `range` (inclusive).
    pub fn bins_in(&self, range: &DateWindow) -> std::ops::Range<usize> {
        let first = match (range.start - self.origin).num_days() {
            d if d <= 0 => 0,
            d => ((d + self.width.days() - 1) / self.width.days()) as usize,
        };
        let last = match (range.end - self.origin).num_days() {
            d if d < 0 => return 0..0,
            d => (d / self.width.days()) as usize + 1,
        };
        first.min(self.n_bins())..last.min(self.n_bins()).max(first.min(self.n_bins()))
    }
}

/// Tallies documents into bins from `window.start` through the bin that
/// holds `window.end`; bins past the last document stay in with zero
/// counts. Negative labels count as outliers.
pub fn build_series(
    labels: &[i32],
    dates: &[NaiveDate],
    n_topics: usize,
    width: BinWidth,
    window: &DateWindow,
) -> Result<TopicTimeSeries, DynamicsError> {
    if labels.len() != dates.len() {
        return Err(DynamicsError::LengthMismatch { labels: labels.len(), dates: dates.len() });
    }
    let bins = assign_bins(dates, width, window.start)?;
    let n_bins = bins
        .iter()
        .copied()
        .max()
        .map_or(0, |b| b + 1)
        .max(bin_index(window.end, width, window.start)? + 1);
    let mut counts = vec![vec![0u32; n_bins]; n_topics];
    let mut outliers = vec![0u32; n_bins];
    for (&l, &b) in labels.iter().zip(&bins) {
        if l < 0 {
            outliers[b] += 1;
        } else {
            let row = counts.get_mut(l as usize).ok_or(DynamicsError::UnknownTopic(l as usize))?;
            row[b] += 1;
        }
    }
    TopicTimeSeries::from_counts(width, window.start, counts, outliers)
}

/// Per-topic `(bin_start, count, intensity)` for bins starting in `range`.
pub fn series_for_topics(
    ts: &TopicTimeSeries,
    topics: &[usize],
    range: &DateWindow,
) -> Result<Vec<TopicSeries>, DynamicsError> {
    let bins = ts.bins_in(range);
    topics
        .iter()
        .map(|&topic| {
            let counts = ts.counts(topic)?;
            Ok(TopicSeries {
                topic_id: topic,
                points: bins
                    .clone()
                    .map(|b| SeriesPoint { bin_start: ts.bin_start(b), count: counts[b], intensity: ts.intensity(topic, b) })
                    .collect(),
            })
        })
        .collect()
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 { values[m] } else { (values[m - 1] + values[m]) / 2.0 })
}

/// Median intensity over the bins starting inside `interval`.
pub fn interval_median(ts: &TopicTimeSeries, topic: usize, interval: &DateWindow) -> Result<f64, DynamicsError> {
    ts.counts(topic)?;
    let mut v: Vec<f64> = ts.bins_in(interval).map(|b| ts.intensity(topic, b)).collect();
    median(&mut v).ok_or(DynamicsError::EmptyInterval { start: interval.start, end: interval.end })
}

fn month_start(year: i32, month0: i32) -> NaiveDate {
    let y = year + month0.div_euclid(12);
    let m = month0.rem_euclid(12) as u32 + 1;
    NaiveDate::from_ymd_opt(y, m, 1).expect("valid month")
}

/// Consecutive two-calendar-month intervals starting with the month of
/// `window.start` and covering `window.end`.
pub fn two_month_intervals(window: &DateWindow) -> Vec<DateWindow> {
    let (y, m0) = (window.start.year(), window.start.month0() as i32);
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let start = month_start(y, m0 + 2 * k);
        if start > window.end {
            break;
        }
        let end = month_start(y, m0 + 2 * k + 2) - Duration::days(1);
        out.push(DateWindow { start, end });
        k += 1;
    }
    out
}

fn interval_label(w: &DateWindow) -> String {
    format!("{}/{}", w.start.format("%Y-%m"), w.end.format("%Y-%m"))
}

/// CSV with one row per topic and one column per interval holding the
/// median intensity times 1000; intervals without bins are left empty.
pub fn heatmap_csv(ts: &TopicTimeSeries, topics: &[usize], intervals: &[DateWindow]) -> Result<String, DynamicsError> {
    let mut out = String::from("topic");
    for w in intervals {
        out.push(',');
        out.push_str(&interval_label(w));
    }
    out.push('\n');
    for &topic in topics {
        out.push_str(&topic.to_string());
        for w in intervals {
            out.push(',');
            match interval_median(ts, topic, w) {
                Ok(m) => out.push_str(&format!("{:.2}", m * 1000.0)),
                Err(DynamicsError::EmptyInterval { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        out.push('\n');
    }
    Ok(out)
}
