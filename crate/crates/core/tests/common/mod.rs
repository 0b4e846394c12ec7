#![allow(dead_code)]

use topicscope::cluster::DensityParams;
use topicscope::dynamics::{CasePoint, EventMark, OverlaySeries};
use topicscope::model::TopicModel;
use topicscope::pipeline::{fit, FitParams};
use topicscope::synth::{planted_corpus, PlantedCorpus, PlantedSpec};

pub fn small_spec(seed: u64) -> PlantedSpec {
    PlantedSpec { documents: 1200, topics: 5, dim: 32, extras: 12, center_scale: 1.2, seed, ..PlantedSpec::default() }
}

pub fn params() -> FitParams {
    FitParams { reduce_k: 6, cluster: DensityParams::new(60).with_min_samples(10), reduce_frequent_words: true }
}

pub fn overlays() -> OverlaySeries {
    let d = |s: &str| s.parse().unwrap();
    OverlaySeries {
        cases: vec![
            CasePoint { date: d("2020-03-01"), value: 120.0 },
            CasePoint { date: d("2021-01-10"), value: 5400.5 },
        ],
        events: vec![EventMark { date: d("2020-03-11"), label: "lockdown, phase 1".into() }],
    }
}

pub fn fitted(seed: u64) -> (PlantedCorpus, TopicModel) {
    let spec = small_spec(seed);
    let planted = planted_corpus(&spec);
    let corpus = planted.clean();
    let model = fit(&corpus, &planted.embeddings, &params(), overlays(), "cfg", "2026-01-01T00:00:00Z".into()).unwrap();
    (planted, model)
}
