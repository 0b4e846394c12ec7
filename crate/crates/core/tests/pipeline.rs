mod common;

use std::collections::BTreeMap;

use topicscope::dynamics::BinWidth;
use topicscope::ingest::DateWindow;
use topicscope::represent::SearchStatus;
use topicscope::synth::{add_months, TOPIC_WORDS};

/// Planted topic holding the majority of each fitted topic.
fn majority(planted: &topicscope::synth::PlantedCorpus, model: &topicscope::model::TopicModel) -> Vec<i32> {
    let truth: BTreeMap<&str, i32> =
        planted.records.iter().zip(&planted.truth).map(|(r, &t)| (r.record_id.as_str(), t)).collect();
    (0..model.n_topics())
        .map(|topic| {
            let mut tally: BTreeMap<i32, usize> = BTreeMap::new();
            for (id, &l) in model.doc_ids.iter().zip(model.assignment.labels()) {
                if l == topic as i32 {
                    *tally.entry(truth[id.as_str()]).or_default() += 1;
                }
            }
            tally.into_iter().max_by_key(|&(t, c)| (c, std::cmp::Reverse(t))).unwrap().0
        })
        .collect()
}

#[test]
fn planted_topics_are_recovered_with_their_keywords() {
    let (planted, model) = common::fitted(11);
    assert_eq!(model.info.documents, 1200, "duplicates and empty abstracts are dropped");
    assert_eq!(model.n_topics(), 5);
    let owners = majority(&planted, &model);
    let mut seen = owners.clone();
    seen.sort();
    assert_eq!(seen, vec![0, 1, 2, 3, 4]);
    for (topic, &owner) in owners.iter().enumerate() {
        let card = model.topic_card(topic, 5).unwrap();
        let terms: Vec<&str> = card.terms.iter().map(|t| t.term.as_str()).collect();
        assert!(terms.contains(&TOPIC_WORDS[owner as usize][0]), "topic {topic}: {terms:?}");
    }
}

#[test]
fn search_and_window_tests_on_a_fitted_model() {
    let (planted, model) = common::fitted(12);
    let owners = majority(&planted, &model);
    let stepped = owners.iter().position(|&o| o == 0).unwrap();

    let hit = model.search("genome sequencing", 3).unwrap();
    assert_eq!(hit.status, SearchStatus::Ok);
    assert_eq!(owners[hit.topics[0].topic_id], 3);
    let miss = model.search("zzzunknown", 3).unwrap();
    assert_eq!(miss.status, SearchStatus::NoKnownTerms);

    let start = planted.spec.start;
    let w1 = DateWindow::new(add_months(start, 1), add_months(start, 14)).unwrap();
    let w2 = DateWindow::new(add_months(start, 16), add_months(start, 29)).unwrap();
    let t = model.test_windows(stepped, &w1, &w2, BinWidth::new(2).unwrap(), 0.05).unwrap();
    assert!(t.result.p_value < 0.01, "p = {}", t.result.p_value);
    assert!(!t.overlapping);
}

#[test]
fn series_conserve_documents() {
    let (_, model) = common::fitted(13);
    for w in BinWidth::ALL {
        let ts = model.series(w);
        for b in 0..ts.n_bins() {
            let sum: u32 = (0..ts.n_topics()).map(|t| ts.counts(t).unwrap()[b]).sum::<u32>() + ts.outliers()[b];
            assert_eq!(sum, ts.totals()[b]);
            let share: f64 = (0..ts.n_topics()).map(|t| ts.intensity(t, b)).sum();
            assert!(share <= 1.0 + 1e-9);
        }
        assert_eq!(ts.totals().iter().sum::<u32>() as usize, model.info.documents);
    }
    let (w1, w2) = (model.series(BinWidth::new(1).unwrap()), model.series(BinWidth::new(2).unwrap()));
    for t in 0..model.n_topics() {
        let c1 = w1.counts(t).unwrap();
        for (b, &c) in w2.counts(t).unwrap().iter().enumerate() {
            let pair: u32 = c1[2 * b..(2 * b + 2).min(c1.len())].iter().sum();
            assert_eq!(c, pair);
        }
    }
}

#[test]
fn refits_are_identical() {
    let (_, a) = common::fitted(14);
    let (_, b) = common::fitted(14);
    assert_eq!(a.assignment, b.assignment);
    assert_eq!(a.vocab, b.vocab);
    assert_eq!(a.weights, b.weights);
    assert_eq!(a, b);
}

#[test]
fn heatmap_has_a_row_per_topic() {
    let (_, model) = common::fitted(15);
    let csv = model.heatmap_csv(BinWidth::new(2).unwrap()).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("topic,2020-01/2020-02,2020-03/2020-04"));
    assert_eq!(lines.len(), 1 + model.n_topics());
    assert_eq!(lines[0].split(',').count(), 1 + 15);
}
