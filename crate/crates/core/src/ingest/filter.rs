use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{
    detect_language, sort_by_date, CleanCorpus, CorpusRecord, DatePrecision, DateWindow,
    LanguageDetector, Provenance, RecordField,
};

/// Which records survive the language stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LanguagePolicy {
    /// Language tag to keep; `None` keeps everything.
    pub require: Option<String>,
    pub detector: LanguageDetector,
}

impl Default for LanguagePolicy {
    fn default() -> Self {
        Self { require: Some("en".into()), detector: LanguageDetector::default() }
    }
}

impl LanguagePolicy {
    pub fn any() -> Self {
        Self { require: None, detector: LanguageDetector::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterSpec {
    /// Fields that must be non-null. `abstract` and `publish_date` are
    /// always enforced in addition to these.
    pub required: BTreeSet<RecordField>,
    pub window: DateWindow,
    pub language: LanguagePolicy,
}

impl FilterSpec {
    pub fn new(window: DateWindow) -> Self {
        Self { required: BTreeSet::new(), window, language: LanguagePolicy::default() }
    }

    fn effective_required(&self) -> impl Iterator<Item = RecordField> + '_ {
        [RecordField::Abstract, RecordField::PublishDate]
            .into_iter()
            .chain(self.required.iter().copied())
    }
}

/// Applies the stages missing-fields, date-precision, window, language in
/// that order and counts each drop. The result is sorted by date then id;
/// duplicates are left for [`super::deduplicate`].
pub fn filter_records(records: Vec<CorpusRecord>, spec: &FilterSpec) -> CleanCorpus {
    let mut prov = Provenance { raw_records: records.len(), ..Provenance::default() };
    let mut kept = Vec::with_capacity(records.len());
    for r in records {
        if !spec.effective_required().all(|f| r.has_field(f)) {
            prov.missing_fields += 1;
            continue;
        }
        let date = r.publish_date.expect("publish_date is always required");
        if date.precision != DatePrecision::Day {
            prov.date_precision += 1;
            continue;
        }
        if !spec.window.contains(date.date) {
            prov.window += 1;
            continue;
        }
        if let Some(want) = &spec.language.require {
            let text = format!("{} {}", r.title, r.abstract_text);
            let got = detect_language(&text, r.language.as_deref(), &spec.language.detector);
            if !got.eq_ignore_ascii_case(want) {
                prov.language += 1;
                continue;
            }
        }
        kept.push(r);
    }
    sort_by_date(&mut kept);
    CleanCorpus { records: kept, window: spec.window, provenance: prov }
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::PublishDate;
    use super::*;

    fn window() -> DateWindow {
        DateWindow::new(date("2019-12-01"), date("2022-06-30")).unwrap()
    }

    #[test]
    fn missing_required_doi_is_dropped() {
        let mut r = record("a", "ka", "2020-05-01");
        r.doi = None;
        let mut spec = FilterSpec::new(window());
        spec.required.insert(RecordField::Doi);
        let out = filter_records(vec![r], &spec);
        assert!(out.records.is_empty());
        assert_eq!(out.provenance.missing_fields, 1);
    }

    #[test]
    fn after_window_is_dropped() {
        let out = filter_records(vec![record("a", "ka", "2022-07-15")], &FilterSpec::new(window()));
        assert!(out.records.is_empty());
        assert_eq!(out.provenance.window, 1);
    }

    #[test]
    fn six_record_fixture() {
        let year_only = record("y", "ky", "2020");
        let mut german = record("g", "kg", "2020-04-01");
        german.language = Some("de".into());
        let mut no_abstract = record("n", "kn", "2020-04-02");
        no_abstract.abstract_text.clear();
        let valid = vec![
            record("v3", "k3", "2021-01-01"),
            record("v1", "k1", "2020-01-01"),
            record("v2", "k2", "2020-06-01"),
        ];
        let mut all = vec![year_only, german, no_abstract];
        all.extend(valid);
        let out = filter_records(all, &FilterSpec::new(window()));
        let ids: Vec<_> = out.records.iter().map(|r| r.record_id.as_str()).collect();
        assert_eq!(ids, ["v1", "v2", "v3"]);
        let p = &out.provenance;
        assert_eq!((p.missing_fields, p.date_precision, p.window, p.language), (1, 1, 0, 1));
        assert_eq!(p.raw_records, out.records.len() + p.total_dropped());
    }

    #[test]
    fn stage_order_is_fixed() {
        // Missing abstract and year-only date: counted once, at the first stage.
        let mut r = record("a", "ka", "2020");
        r.abstract_text.clear();
        let out = filter_records(vec![r], &FilterSpec::new(window()));
        assert_eq!(out.provenance.missing_fields, 1);
        assert_eq!(out.provenance.date_precision, 0);
    }

    #[test]
    fn undeclared_non_english_text_is_dropped() {
        let mut r = record("a", "ka", "2020-02-02");
        r.title = "Ein Titel".into();
        r.abstract_text = "Das Virus verbreitet sich schnell in Europa und Asien waehrend \
            Forscher neue Impfstoffe gegen Erkrankung entwickeln koennen diese bald getestet werden"
            .into();
        let out = filter_records(vec![r.clone()], &FilterSpec::new(window()));
        assert_eq!(out.provenance.language, 1);
        let mut spec = FilterSpec::new(window());
        spec.language = LanguagePolicy::any();
        assert_eq!(filter_records(vec![r], &spec).records.len(), 1);
    }

    #[test]
    fn month_precision_is_dropped_too() {
        let mut r = record("a", "ka", "2020-03-01");
        r.publish_date = PublishDate::parse("2020-03");
        let out = filter_records(vec![r], &FilterSpec::new(window()));
        assert_eq!(out.provenance.date_precision, 1);
    }
}
