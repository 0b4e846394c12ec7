use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{top_terms, tokenize, RepresentError, SparseWeights, Vocabulary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermWeight {
    pub term: String,
    pub weight: f64,
}

/// A topic as shown to a reader: size, strongest terms and, for search
/// results, the query similarity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicCard {
    pub topic_id: usize,
    pub size: usize,
    pub terms: Vec<TermWeight>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub similarity: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    Ok,
    /// The query had tokens but none of them is in the vocabulary.
    NoKnownTerms,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub status: SearchStatus,
    /// Query tokens absent from the vocabulary.
    pub unknown_terms: Vec<String>,
    pub topics: Vec<TopicCard>,
}

/// Ranks topics by cosine similarity between the query's token counts and
/// each topic's weight row. Topics sharing no term with the query are left
/// out; ties go to the smaller topic id. Each card carries the topic's top
/// `card_terms` terms.
pub fn search_topics(
    weights: &SparseWeights,
    vocab: &Vocabulary,
    sizes: &[usize],
    query: &str,
    n: usize,
    card_terms: usize,
) -> Result<SearchResult, RepresentError> {
    let tokens = tokenize(query);
    if tokens.is_empty() {
        return Err(RepresentError::NoSearchableTerms);
    }
    let mut q: BTreeMap<u32, f64> = BTreeMap::new();
    let mut unknown = Vec::new();
    for t in tokens {
        match vocab.get(&t) {
            Some(i) => *q.entry(i).or_default() += 1.0,
            None if !unknown.contains(&t) => unknown.push(t),
            None => {}
        }
    }
    if q.is_empty() {
        return Ok(SearchResult { status: SearchStatus::NoKnownTerms, unknown_terms: unknown, topics: Vec::new() });
    }
    let q_norm = q.values().map(|v| v * v).sum::<f64>().sqrt();
    let mut scored: Vec<(usize, f64)> = (0..weights.n_rows())
        .filter_map(|topic| {
            let dot: f64 = q.iter().map(|(&t, &c)| c * weights.get(topic, t)).sum();
            let denom = q_norm * weights.row_norm(topic);
            (dot > 0.0 && denom > 0.0).then(|| (topic, (dot / denom).clamp(0.0, 1.0)))
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(n);
    let topics = scored
        .into_iter()
        .map(|(topic, sim)| {
            Ok(TopicCard {
                topic_id: topic,
                size: sizes.get(topic).copied().unwrap_or(0),
                terms: top_terms(weights, vocab, topic, card_terms)?,
                similarity: Some(sim),
            })
        })
        .collect::<Result<_, RepresentError>>()?;
    Ok(SearchResult { status: SearchStatus::Ok, unknown_terms: unknown, topics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::represent::{build_class_counts, class_tfidf};
    use proptest::prelude::*;

    fn fixture() -> (SparseWeights, Vocabulary, Vec<usize>) {
        let docs = [
            "ventilator intensive care ventilator",
            "ventilator oxygen",
            "vaccine antibody response",
            "vaccine trial efficacy vaccine",
            "mask transmission aerosol",
            "mask distancing",
        ];
        let (vocab, counts) = build_class_counts(&docs, &[0, 0, 1, 1, 2, 2]).unwrap();
        let model = class_tfidf(&vocab, &counts, true).unwrap();
        (model.weights, vocab, vec![2, 2, 2])
    }

    #[test]
    fn dominant_term_ranks_its_topic_first() {
        let (w, v, sizes) = fixture();
        let r = search_topics(&w, &v, &sizes, "vaccine", 6, 50).unwrap();
        assert_eq!(r.status, SearchStatus::Ok);
        assert_eq!(r.topics.len(), 1);
        assert_eq!(r.topics[0].topic_id, 1);
        assert!(r.topics[0].terms.iter().any(|t| t.term == "vaccine"));
        let r = search_topics(&w, &v, &sizes, "Ventilator and masks, mask", 6, 50).unwrap();
        assert_eq!(r.topics.iter().map(|c| c.topic_id).collect::<Vec<_>>(), vec![2, 0]);
        assert_eq!(r.unknown_terms, vec!["masks"]);
    }

    #[test]
    fn stopword_query_is_an_error_and_oov_is_a_status() {
        let (w, v, sizes) = fixture();
        assert_eq!(search_topics(&w, &v, &sizes, "the of and", 6, 50).unwrap_err(), RepresentError::NoSearchableTerms);
        assert_eq!(search_topics(&w, &v, &sizes, "", 6, 50).unwrap_err(), RepresentError::NoSearchableTerms);
        let r = search_topics(&w, &v, &sizes, "zebra giraffe", 6, 50).unwrap();
        assert_eq!(r.status, SearchStatus::NoKnownTerms);
        assert!(r.topics.is_empty());
    }

    #[test]
    fn result_count_and_order() {
        let (w, v, sizes) = fixture();
        let r = search_topics(&w, &v, &sizes, "ventilator vaccine mask", 2, 3).unwrap();
        assert_eq!(r.topics.len(), 2);
        assert!(r.topics.iter().all(|c| c.terms.len() <= 3));
        let sims: Vec<f64> = r.topics.iter().map(|c| c.similarity.unwrap()).collect();
        assert!(sims[0] >= sims[1]);
    }

    proptest! {
        #[test]
        fn repeating_the_query_keeps_similarities(reps in 1usize..6, pick in prop::sample::subsequence(
            vec!["ventilator", "oxygen", "vaccine", "trial", "mask", "aerosol", "care"], 1..5)) {
            let (w, v, sizes) = fixture();
            let q = pick.join(" ");
            let once = search_topics(&w, &v, &sizes, &q, 6, 5).unwrap();
            let many = search_topics(&w, &v, &sizes, &vec![q.as_str(); reps].join(" "), 6, 5).unwrap();
            prop_assert_eq!(once.topics.len(), many.topics.len());
            for (a, b) in once.topics.iter().zip(&many.topics) {
                prop_assert_eq!(a.topic_id, b.topic_id);
                let (sa, sb) = (a.similarity.unwrap(), b.similarity.unwrap());
                prop_assert!((sa - sb).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&sa));
            }
        }
    }
}
