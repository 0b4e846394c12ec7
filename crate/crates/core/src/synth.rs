//! Seeded synthetic corpora with planted topics, for tests, benchmarks and
//! the guide.
//!
//! Each planted topic owns a small vocabulary whose first word is its
//! keyword; its documents repeat the keyword, sample the rest of the topic
//! vocabulary and pad with shared background words and stopwords. Topic
//! embeddings are Gaussian clouds around random centers; noise documents
//! draw words from every topic and sit in a wider cloud around the origin.
//! One topic's share of documents steps up at a chosen month while the
//! noise share steps down by the same amount, so every other topic keeps a
//! constant share.

use chrono::{Datelike, Duration, NaiveDate};

use crate::embedstore::EmbeddingMatrix;
use crate::ingest::{CleanCorpus, CorpusRecord, DateWindow, FilterSpec, PublishDate};
use crate::matrix::Matrix;
use crate::rng::SeededRng;

pub const TOPIC_WORDS: [[&str; 12]; 10] = [
    ["ventilator", "intubation", "icu", "oxygenation", "respiratory", "mechanical", "sedation", "ards", "prone", "extubation", "hypoxemia", "tracheostomy"],
    ["vaccine", "immunization", "antibody", "dose", "booster", "efficacy", "adjuvant", "mrna", "seroconversion", "immunogenicity", "placebo", "recipients"],
    ["transmission", "aerosol", "droplet", "mask", "distancing", "household", "superspreading", "airborne", "indoor", "quarantine", "contacts", "secondary"],
    ["genome", "sequencing", "mutation", "variant", "phylogenetic", "lineage", "spike", "recombination", "nucleotide", "clade", "polymerase", "substitution"],
    ["anxiety", "depression", "lockdown", "wellbeing", "loneliness", "psychological", "stress", "insomnia", "resilience", "burnout", "counselling", "isolation"],
    ["pediatric", "children", "infants", "kawasaki", "school", "adolescents", "neonatal", "multisystem", "inflammatory", "daycare", "parents", "vertical"],
    ["pcr", "antigen", "assay", "swab", "sensitivity", "specificity", "serology", "diagnostic", "rapid", "saliva", "testing", "detection"],
    ["economic", "unemployment", "gdp", "market", "supply", "fiscal", "recession", "income", "businesses", "trade", "tourism", "stimulus"],
    ["remdesivir", "hydroxychloroquine", "dexamethasone", "antiviral", "tocilizumab", "ivermectin", "favipiravir", "lopinavir", "repurposing", "docking", "inhibitor", "protease"],
    ["cardiac", "myocarditis", "thrombosis", "coagulation", "anticoagulation", "troponin", "arrhythmia", "embolism", "endothelial", "stroke", "heparin", "dimer"],
];

const BACKGROUND: [&str; 48] = [
    "study", "patients", "results", "data", "analysis", "clinical", "model", "health", "hospital", "disease",
    "infection", "pandemic", "coronavirus", "covid-19", "sars-cov-2", "cases", "outcomes", "risk", "group", "cohort",
    "review", "evidence", "treatment", "care", "public", "population", "factors", "associated", "significant", "increased",
    "reported", "compared", "included", "higher", "lower", "methods", "findings", "research", "global", "impact",
    "management", "early", "severe", "conditions", "rate", "levels", "period", "countries",
];

const FILLER: [&str; 20] = [
    "the", "of", "and", "in", "to", "with", "was", "were", "for", "that",
    "this", "from", "by", "on", "as", "we", "our", "these", "which", "during",
];

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedSpec {
    pub documents: usize,
    /// At most 10.
    pub topics: usize,
    pub dim: usize,
    pub start: NaiveDate,
    pub months: u32,
    pub stepped_topic: usize,
    /// Month offset (from `start`) at which the step happens.
    pub step_month: u32,
    /// Share of documents in the stepped topic before and after the step.
    pub stepped_share: (f64, f64),
    /// Share of noise documents before and after the step.
    pub noise_share: (f64, f64),
    /// Scale of topic centers relative to unit within-topic noise.
    pub center_scale: f64,
    pub noise_sd: f64,
    /// Extra rows exercising preparation: duplicates of existing records
    /// and records without an abstract.
    pub extras: usize,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            documents: 5000,
            topics: 10,
            dim: 768,
            start: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            months: 30,
            stepped_topic: 0,
            step_month: 15,
            stepped_share: (0.03, 0.12),
            noise_share: (0.25, 0.16),
            center_scale: 0.3,
            noise_sd: 2.0,
            extras: 0,
            seed: 2020,
        }
    }
}

impl PlantedSpec {
    pub fn window(&self) -> DateWindow {
        DateWindow::new(self.start, add_months(self.start, self.months) - Duration::days(1)).unwrap()
    }

    pub fn step_date(&self) -> NaiveDate {
        add_months(self.start, self.step_month)
    }

    pub fn keyword(&self, topic: usize) -> &'static str {
        TOPIC_WORDS[topic][0]
    }

    /// Share of a stationary topic.
    pub fn stationary_share(&self) -> f64 {
        (1.0 - self.stepped_share.0 - self.noise_share.0) / (self.topics - 1) as f64
    }
}

pub fn add_months(d: NaiveDate, months: u32) -> NaiveDate {
    let m0 = d.month0() + months;
    NaiveDate::from_ymd_opt(d.year() + (m0 / 12) as i32, m0 % 12 + 1, 1).unwrap()
}

#[derive(Clone, Debug)]
pub struct PlantedCorpus {
    pub spec: PlantedSpec,
    pub records: Vec<CorpusRecord>,
    pub embeddings: EmbeddingMatrix,
    /// Planted topic per record (`-1` for noise), aligned with `records`.
    pub truth: Vec<i32>,
}

fn pick<'a>(rng: &mut SeededRng, words: &[&'a str]) -> &'a str {
    words[rng.index(words.len())]
}

fn draw_topic(rng: &mut SeededRng, spec: &PlantedSpec, after_step: bool) -> i32 {
    let (stepped, noise) = if after_step {
        (spec.stepped_share.1, spec.noise_share.1)
    } else {
        (spec.stepped_share.0, spec.noise_share.0)
    };
    let u = rng.unit_f64();
    if u < noise {
        return -1;
    }
    if u < noise + stepped {
        return spec.stepped_topic as i32;
    }
    let others: Vec<usize> = (0..spec.topics).filter(|&t| t != spec.stepped_topic).collect();
    let share = (1.0 - noise - stepped) / others.len() as f64;
    let i = (((u - noise - stepped) / share) as usize).min(others.len() - 1);
    others[i] as i32
}

fn abstract_text(rng: &mut SeededRng, topic: i32, topics: usize) -> String {
    let mut words: Vec<&str> = Vec::new();
    match topic {
        t if t >= 0 => {
            let own = &TOPIC_WORDS[t as usize];
            words.extend([own[0]; 3]);
            for _ in 0..8 {
                words.push(pick(rng, &own[1..]));
            }
        }
        _ => {
            for _ in 0..6 {
                let t = rng.index(topics);
                words.push(pick(rng, &TOPIC_WORDS[t]));
            }
        }
    }
    for _ in 0..15 {
        words.push(pick(rng, &BACKGROUND));
    }
    for _ in 0..20 {
        words.push(pick(rng, &FILLER));
    }
    // Fisher-Yates so word order carries no signal.
    for i in (1..words.len()).rev() {
        let j = rng.index(i + 1);
        words.swap(i, j);
    }
    let mut text = words.join(" ");
    text.push('.');
    text
}

pub fn planted_corpus(spec: &PlantedSpec) -> PlantedCorpus {
    assert!(spec.topics >= 2 && spec.topics <= TOPIC_WORDS.len(), "2 to 10 planted topics");
    assert!(spec.stepped_topic < spec.topics);
    let mut rng = SeededRng::new(spec.seed);
    let window = spec.window();
    let span = (window.end - window.start).num_days() + 1;
    let step = spec.step_date();

    let centers: Vec<Vec<f64>> = (0..spec.topics)
        .map(|_| (0..spec.dim).map(|_| spec.center_scale * rng.normal()).collect())
        .collect();

    let mut records = Vec::with_capacity(spec.documents + spec.extras);
    let mut truth = Vec::with_capacity(spec.documents + spec.extras);
    let mut ids = Vec::with_capacity(spec.documents + spec.extras);
    let mut vectors = Vec::with_capacity((spec.documents + spec.extras) * spec.dim);
    for i in 0..spec.documents {
        let date = window.start + Duration::days(rng.below(span as u64) as i64);
        let topic = draw_topic(&mut rng, spec, date >= step);
        let id = format!("doc{i:05}");
        let mut r = CorpusRecord::new(id.clone(), format!("grp{i:05}"));
        let keyword = if topic >= 0 { TOPIC_WORDS[topic as usize][0] } else { "survey" };
        r.title = format!("Notes on {keyword} {}", pick(&mut rng, &BACKGROUND));
        r.abstract_text = abstract_text(&mut rng, topic, spec.topics);
        r.publish_date = Some(PublishDate::day(date));
        r.doi = Some(format!("10.5555/synth.{i}"));
        r.journal = Some(format!("Journal {}", 1 + rng.below(12)));
        r.authors = Some(vec![format!("Author {}", rng.below(500)), format!("Author {}", rng.below(500))]);
        match topic {
            t if t >= 0 => vectors.extend(centers[t as usize].iter().map(|c| c + rng.normal())),
            _ => vectors.extend((0..spec.dim).map(|_| spec.noise_sd * rng.normal())),
        }
        ids.push(id);
        records.push(r);
        truth.push(topic);
    }
    for e in 0..spec.extras {
        let src = rng.index(spec.documents);
        let mut r = records[src].clone();
        let id = format!("extra{e:04}");
        r.record_id = id.clone();
        if e % 2 == 1 {
            // A less complete duplicate of an existing group.
            r.doi = None;
        } else {
            r.dup_group_key = format!("solo{e:04}");
            r.abstract_text = String::new();
        }
        let row: Vec<f64> = vectors[src * spec.dim..(src + 1) * spec.dim].to_vec();
        vectors.extend(row);
        ids.push(id);
        truth.push(truth[src]);
        records.push(r);
    }
    let n = ids.len();
    let embeddings = EmbeddingMatrix::new(ids, Matrix::new(n, spec.dim, vectors)).expect("synthetic embeddings are valid");
    PlantedCorpus { spec: spec.clone(), records, embeddings, truth }
}

impl PlantedCorpus {
    /// Metadata as CSV with the default schema column names.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["record_id", "dup_group_key", "title", "abstract", "publish_date", "doi", "journal", "authors", "language"])
            .unwrap();
        for r in &self.records {
            w.write_record([
                r.record_id.as_str(),
                r.dup_group_key.as_str(),
                r.title.as_str(),
                r.abstract_text.as_str(),
                &r.publish_date.map(|d| d.to_string()).unwrap_or_default(),
                r.doi.as_deref().unwrap_or(""),
                r.journal.as_deref().unwrap_or(""),
                &r.authors.as_ref().map(|a| a.join(";")).unwrap_or_default(),
                r.language.as_deref().unwrap_or(""),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    /// Records after the default filter (English, inside the window) and
    /// deduplication.
    pub fn clean(&self) -> CleanCorpus {
        CleanCorpus::prepare(self.records.clone(), &FilterSpec::new(self.spec.window()))
    }

    pub fn truth_of(&self, record_id: &str) -> Option<i32> {
        self.records.iter().position(|r| r.record_id == record_id).map(|i| self.truth[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::represent::tokenize;
    use crate::stopwords::is_stopword;

    #[test]
    fn vocabularies_survive_tokenization() {
        for list in TOPIC_WORDS.iter() {
            for w in list {
                assert_eq!(tokenize(w), vec![w.to_string()], "{w}");
            }
        }
        for w in BACKGROUND {
            assert!(!is_stopword(w), "{w}");
        }
        for w in FILLER {
            assert!(is_stopword(w), "{w}");
        }
    }

    #[test]
    fn shares_and_window() {
        let spec = PlantedSpec { documents: 4000, dim: 8, ..PlantedSpec::default() };
        assert_eq!(spec.window().end, NaiveDate::from_ymd_opt(2022, 6, 30).unwrap());
        assert_eq!(spec.step_date(), NaiveDate::from_ymd_opt(2021, 4, 1).unwrap());
        assert!((spec.stationary_share() - 0.08).abs() < 1e-12);
        let c = planted_corpus(&spec);
        let after: Vec<usize> = (0..c.records.len()).filter(|&i| c.records[i].day().unwrap() >= spec.step_date()).collect();
        let before: Vec<usize> = (0..c.records.len()).filter(|&i| c.records[i].day().unwrap() < spec.step_date()).collect();
        let share = |idx: &[usize], t: i32| idx.iter().filter(|&&i| c.truth[i] == t).count() as f64 / idx.len() as f64;
        assert!((share(&before, 0) - 0.03).abs() < 0.015);
        assert!((share(&after, 0) - 0.12).abs() < 0.03);
        assert!((share(&before, 3) - share(&after, 3)).abs() < 0.03);
    }

    #[test]
    fn deterministic() {
        let spec = PlantedSpec { documents: 50, dim: 4, extras: 4, ..PlantedSpec::default() };
        let (a, b) = (planted_corpus(&spec), planted_corpus(&spec));
        assert_eq!(a.records, b.records);
        assert_eq!(a.embeddings, b.embeddings);
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.records.len(), 54);
    }
}
