use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{month_key, CorpusRecord, DatePrecision, Histogram, RecordField};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusProfile {
    pub records: usize,
    /// `YYYY-MM` to record count, for day- and month-precision dates.
    pub monthly_counts: BTreeMap<String, usize>,
    /// Records whose date is known only to the year.
    pub imprecise_dates: usize,
    pub missing_dates: usize,
    /// Field name to fraction of records where it is non-null.
    pub field_completeness: BTreeMap<String, f64>,
    /// Group size to number of `dup_group_key` groups of that size.
    pub duplicate_histogram: Histogram,
}

pub fn profile_corpus(records: &[CorpusRecord]) -> CorpusProfile {
    let mut p = CorpusProfile { records: records.len(), ..CorpusProfile::default() };
    if records.is_empty() {
        return p;
    }
    let mut groups: BTreeMap<&str, usize> = BTreeMap::new();
    let mut non_null = [0usize; RecordField::ALL.len()];
    for r in records {
        match r.publish_date {
            Some(d) if d.precision == DatePrecision::Year => p.imprecise_dates += 1,
            Some(d) => *p.monthly_counts.entry(month_key(d.date)).or_default() += 1,
            None => p.missing_dates += 1,
        }
        *groups.entry(&r.dup_group_key).or_default() += 1;
        for (slot, f) in non_null.iter_mut().zip(RecordField::ALL) {
            *slot += usize::from(r.has_field(f));
        }
    }
    let n = records.len() as f64;
    p.field_completeness = RecordField::ALL
        .iter()
        .zip(non_null)
        .map(|(f, c)| (f.name().to_string(), c as f64 / n))
        .collect();
    for size in groups.into_values() {
        *p.duplicate_histogram.entry(size).or_default() += 1;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;

    #[test]
    fn empty_profile() {
        let p = profile_corpus(&[]);
        assert_eq!(p, CorpusProfile::default());
    }

    #[test]
    fn monthly_buckets() {
        let rs = vec![
            record("a", "a", "2020-03-01"),
            record("b", "b", "2020-03-15"),
            record("c", "c", "2020-03-31"),
            record("d", "d", "2020-04-01"),
            record("e", "e", "2021"),
        ];
        let p = profile_corpus(&rs);
        assert_eq!(p.monthly_counts.len(), 2);
        assert_eq!(p.monthly_counts["2020-03"], 3);
        assert_eq!(p.monthly_counts["2020-04"], 1);
        assert_eq!(p.imprecise_dates, 1);
    }

    #[test]
    fn duplicate_histogram_and_completeness() {
        let mut rs = vec![
            record("a1", "a", "2020-03-01"),
            record("a2", "a", "2020-03-02"),
            record("a3", "a", "2020-03-03"),
            record("b", "b", "2020-03-01"),
            record("c", "c", "2020-03-01"),
        ];
        rs[0].doi = None;
        let p = profile_corpus(&rs);
        assert_eq!(p.duplicate_histogram, BTreeMap::from([(1, 2), (3, 1)]));
        assert_eq!(p.field_completeness["doi"], 0.8);
        assert_eq!(p.field_completeness["language"], 0.0);
        assert!(p.field_completeness.values().all(|f| (0.0..=1.0).contains(f)));
    }
}
