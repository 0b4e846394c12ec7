//! Run configuration: one TOML file with a section per stage.
//!
//! ```toml
//! seed = 42
//!
//! [corpus]
//! path = "metadata.csv"
//!
//! [filter]
//! window = ["2019-12-01", "2022-01-31"]
//! required = ["title", "doi"]
//!
//! [embeddings]
//! path = "embeddings.emb"
//!
//! [reduce]
//! k = 5
//!
//! [grid]
//! reduce_k = [5, 10]
//! min_cluster_size = [50, 100]
//! min_samples = [10]
//!
//! [cluster]
//! min_cluster_size = 100
//! min_samples = 10
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cluster::{DensityParams, Metric, Selection};
use crate::embedstore::EmbeddingFormat;
use crate::error::Error;
use crate::ingest::fetch::FetchConfig;
use crate::ingest::{DateWindow, FilterSpec, LanguageDetector, LanguagePolicy, RecordField, Schema, SourceFormat};
use crate::tune::Grid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub corpus: CorpusSection,
    pub filter: FilterSection,
    pub embeddings: EmbeddingsSection,
    pub reduce: ReduceSection,
    #[serde(default)]
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub cluster: Option<ClusterSection>,
    #[serde(default)]
    pub represent: RepresentSection,
    #[serde(default)]
    pub overlays: OverlaySection,
    #[serde(default)]
    pub serve: ServeSection,
    #[serde(default)]
    pub fetch: Option<FetchConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub path: PathBuf,
    /// Inferred from the file extension when absent.
    #[serde(default)]
    pub format: Option<SourceFormat>,
    #[serde(default)]
    pub schema: Schema,
}

impl CorpusSection {
    pub fn source_format(&self) -> Result<SourceFormat, Error> {
        self.format
            .or_else(|| SourceFormat::from_path(&self.path))
            .ok_or_else(|| Error::Config(format!("corpus.format: cannot infer format of {}", self.path.display())))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    /// Inclusive `[start, end]`.
    pub window: [NaiveDate; 2],
    #[serde(default)]
    pub required: Vec<RecordField>,
    /// Language tag to keep, or `"any"`.
    #[serde(default = "default_language")]
    pub language: String,
    #[serde(default)]
    pub detector: LanguageDetector,
}

fn default_language() -> String {
    "en".into()
}

impl FilterSection {
    pub fn window(&self) -> Result<DateWindow, Error> {
        DateWindow::new(self.window[0], self.window[1]).map_err(|e| Error::Config(format!("filter.window: {e}")))
    }

    pub fn spec(&self) -> Result<FilterSpec, Error> {
        let language = LanguagePolicy {
            require: (self.language != "any").then(|| self.language.clone()),
            detector: self.detector,
        };
        Ok(FilterSpec { required: self.required.iter().copied().collect::<BTreeSet<_>>(), window: self.window()?, language })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingsSection {
    pub path: PathBuf,
    #[serde(default)]
    pub format: Option<EmbeddingFormat>,
}

impl EmbeddingsSection {
    pub fn embedding_format(&self) -> Result<EmbeddingFormat, Error> {
        match self.format {
            Some(f) => Ok(f),
            None => EmbeddingFormat::from_path(&self.path).map_err(|e| Error::Config(format!("embeddings.format: {e}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReduceSection {
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub reduce_k: Vec<usize>,
    pub min_cluster_size: Vec<usize>,
    #[serde(default)]
    pub min_samples: Vec<usize>,
    #[serde(default)]
    pub metric: Option<Vec<Metric>>,
    #[serde(default)]
    pub selection: Option<Vec<Selection>>,
    #[serde(default = "default_fraction")]
    pub subsample_fraction: f64,
}

impl GridSection {
    pub fn grid(&self) -> Grid {
        Grid {
            reduce_k: self.reduce_k.clone(),
            min_cluster_size: self.min_cluster_size.clone(),
            min_samples: self.min_samples.clone(),
            metric: self.metric.clone().unwrap_or_else(|| vec![Metric::Euclidean]),
            selection: self.selection.clone().unwrap_or_else(|| vec![Selection::Leaf]),
        }
    }
}

fn default_fraction() -> f64 {
    0.25
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSection {
    pub min_cluster_size: usize,
    /// Defaults to `min_cluster_size`.
    #[serde(default)]
    pub min_samples: Option<usize>,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default)]
    pub selection: Selection,
}

impl ClusterSection {
    pub fn params(&self) -> DensityParams {
        DensityParams {
            min_cluster_size: self.min_cluster_size,
            min_samples: self.min_samples.unwrap_or(self.min_cluster_size),
            metric: self.metric,
            selection: self.selection,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepresentSection {
    /// Terms kept per topic in exports.
    pub top_n: usize,
    pub reduce_frequent_words: bool,
    /// Only unigrams are supported.
    pub ngram: usize,
}

impl Default for RepresentSection {
    fn default() -> Self {
        Self { top_n: 30, reduce_frequent_words: true, ngram: 1 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverlaySection {
    pub cases: Option<PathBuf>,
    pub events: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSection {
    pub bind_addr: String,
    pub cors_origins: Vec<String>,
    pub model_dir: Option<PathBuf>,
}

impl Default for ServeSection {
    fn default() -> Self {
        Self { bind_addr: "127.0.0.1:8080".into(), cors_origins: Vec::new(), model_dir: None }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, Error> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), Error> {
        self.filter.window()?;
        if self.reduce.k == 0 {
            return Err(Error::Config("reduce.k must be positive".into()));
        }
        if self.represent.ngram != 1 {
            return Err(Error::Config("represent.ngram: only 1 is supported".into()));
        }
        if let Some(c) = &self.cluster {
            c.params().validate().map_err(|e| Error::Config(format!("cluster: {e}")))?;
        }
        if let Some(g) = &self.grid {
            g.grid().combinations().map_err(|e| Error::Config(format!("grid: {e}")))?;
        }
        Ok(())
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus.path);
        fix(&mut self.embeddings.path);
        for p in [&mut self.overlays.cases, &mut self.overlays.events, &mut self.serve.model_dir].into_iter().flatten() {
            fix(p);
        }
    }

    /// SHA-256 over the canonical JSON form (object keys sorted).
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = serde_json::to_string(&value).expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
