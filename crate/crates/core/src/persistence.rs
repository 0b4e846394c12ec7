//! Versioned on-disk model artifact: a directory holding `manifest.json`
//! and one little-endian binary blob per array. The layout is described in
//! `FORMAT.md` at the repository root.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{ClusterAssignment, CondensedNode, CondensedTree};
use crate::dynamics::{BinWidth, OverlaySeries, TopicTimeSeries};
use crate::matrix::Matrix;
use crate::model::{ModelInfo, TopicModel};
use crate::reduce::Projection;
use crate::represent::{SparseWeights, Vocabulary};
use crate::stopwords::stopword_hash;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0} already exists and is not empty (use force to overwrite)")]
    Exists(String),
    #[error("unsupported artifact format version {found} (this build reads {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("truncated blob {0}")]
    Truncated(String),
    #[error("blob {name}: {message}")]
    Blob { name: String, message: String },
    #[error("artifact built with stopword list {found}, this build ships {expected}")]
    Stopwords { found: String, expected: String },
    #[error("inconsistent artifact: {0}")]
    Inconsistent(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PersistError + '_ {
    move |source| PersistError::Io { path: path.display().to_string(), source }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    I32,
    U32,
    U64,
    U8,
    /// Newline-separated UTF-8 strings; shape is the line count.
    Text,
}

impl Dtype {
    fn width(self) -> Option<usize> {
        match self {
            Dtype::F32 | Dtype::I32 | Dtype::U32 => Some(4),
            Dtype::U64 => Some(8),
            Dtype::U8 => Some(1),
            Dtype::Text => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlobEntry {
    pub name: String,
    pub file: String,
    pub dtype: Dtype,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub documents: usize,
    pub topics: usize,
    pub vocabulary: usize,
    pub nonzeros: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub created_at: String,
    pub config_hash: String,
    pub stopword_list: String,
    pub stopword_hash: String,
    pub counts: Counts,
    pub window: crate::ingest::DateWindow,
    pub outliers: usize,
    pub reduce_frequent_words: bool,
    pub avg_tokens: f64,
    pub embedding_dim: usize,
    pub reduced_dim: usize,
    pub projection_degenerate: bool,
    pub bin_widths: Vec<u32>,
    pub blobs: Vec<BlobEntry>,
}

enum Data<'a> {
    F32(Vec<f32>),
    I32(Vec<i32>),
    U32(Vec<u32>),
    U64(Vec<u64>),
    U8(Vec<u8>),
    Text(&'a [String]),
}

struct Writer<'a> {
    dir: &'a Path,
    entries: Vec<BlobEntry>,
}

impl Writer<'_> {
    fn put(&mut self, name: &str, shape: Vec<usize>, data: Data) -> Result<(), PersistError> {
        let (dtype, bytes, ext) = match data {
            Data::F32(v) => (Dtype::F32, v.iter().flat_map(|x| x.to_le_bytes()).collect(), "f32"),
            Data::I32(v) => (Dtype::I32, v.iter().flat_map(|x| x.to_le_bytes()).collect(), "i32"),
            Data::U32(v) => (Dtype::U32, v.iter().flat_map(|x| x.to_le_bytes()).collect(), "u32"),
            Data::U64(v) => (Dtype::U64, v.iter().flat_map(|x| x.to_le_bytes()).collect(), "u64"),
            Data::U8(v) => (Dtype::U8, v, "u8"),
            Data::Text(lines) => {
                if let Some(l) = lines.iter().find(|l| l.contains('\n') || l.contains('\r')) {
                    return Err(PersistError::Blob { name: name.into(), message: format!("line break inside `{l}`") });
                }
                let mut s = String::new();
                for l in lines {
                    s.push_str(l);
                    s.push('\n');
                }
                (Dtype::Text, s.into_bytes(), "txt")
            }
        };
        let file = format!("{name}.{ext}");
        let path = self.dir.join(&file);
        fs::write(&path, bytes).map_err(io_err(&path))?;
        self.entries.push(BlobEntry { name: name.into(), file, dtype, shape });
        Ok(())
    }
}

fn f32s(v: impl IntoIterator<Item = f64>) -> Vec<f32> {
    v.into_iter().map(|x| x as f32).collect()
}

fn days(d: NaiveDate) -> i32 {
    (d - NaiveDate::from_ymd_opt(1970, 1, 1).unwrap()).num_days() as i32
}

fn from_days(n: i32) -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).unwrap() + chrono::Duration::days(n as i64)
}

fn write_blobs(model: &TopicModel, dir: &Path) -> Result<Vec<BlobEntry>, PersistError> {
    let mut w = Writer { dir, entries: Vec::new() };
    let p = &model.projection;
    let (d, k) = (p.basis.rows(), p.basis.cols());
    w.put("projection_mean", vec![d], Data::F32(f32s(p.mean.iter().copied())))?;
    w.put("projection_basis", vec![d, k], Data::F32(f32s(p.basis.as_slice().iter().copied())))?;
    w.put("projection_evr", vec![k], Data::F32(f32s(p.explained_variance_ratio.iter().copied())))?;

    let n = model.doc_ids.len();
    w.put("labels", vec![n], Data::I32(model.assignment.labels().to_vec()))?;
    w.put("doc_ids", vec![n], Data::Text(&model.doc_ids))?;
    w.put("doc_dates", vec![n], Data::I32(model.doc_dates.iter().map(|&d| days(d)).collect()))?;

    let t = &model.tree;
    let m = t.nodes.len();
    w.put("tree_parent", vec![m], Data::I32(t.nodes.iter().map(|c| c.parent.map_or(-1, |p| p as i32)).collect()))?;
    w.put("tree_birth", vec![m], Data::F32(f32s(t.nodes.iter().map(|c| c.birth_lambda))))?;
    w.put("tree_death", vec![m], Data::F32(f32s(t.nodes.iter().map(|c| c.death_lambda))))?;
    w.put("tree_size", vec![m], Data::U32(t.nodes.iter().map(|c| c.size as u32).collect()))?;
    w.put("tree_stability", vec![m], Data::F32(f32s(t.nodes.iter().map(|c| c.stability))))?;
    w.put("tree_selected", vec![m], Data::U8(t.nodes.iter().map(|c| c.selected as u8).collect()))?;
    w.put("point_cluster", vec![n], Data::U32(t.point_cluster.iter().map(|&c| c as u32).collect()))?;
    w.put("point_lambda", vec![n], Data::F32(f32s(t.point_lambda.iter().copied())))?;

    let v = model.vocab.len();
    w.put("vocab", vec![v], Data::Text(model.vocab.terms()))?;
    w.put("vocab_freq", vec![v], Data::U64(model.vocab.term_frequencies().to_vec()))?;
    let ws = &model.weights;
    w.put("weights_indptr", vec![ws.n_rows() + 1], Data::U32(ws.indptr().to_vec()))?;
    w.put("weights_indices", vec![ws.indices().len()], Data::U32(ws.indices().to_vec()))?;
    w.put("weights_values", vec![ws.values().len()], Data::F32(f32s(ws.values().iter().copied())))?;

    let topics = model.n_topics();
    w.put("topic_sizes", vec![topics], Data::U32(model.topic_sizes.iter().map(|&s| s as u32).collect()))?;
    w.put(
        "topic_centroids",
        vec![topics, model.centroids.cols()],
        Data::F32(f32s(model.centroids.as_slice().iter().copied())),
    )?;
    for ts in &model.series {
        // Rows: one per topic, then the outlier row.
        let mut flat: Vec<u32> = ts.all_counts().iter().flatten().copied().collect();
        flat.extend_from_slice(ts.outliers());
        w.put(&format!("series_w{}", ts.width().weeks()), vec![topics + 1, ts.n_bins()], Data::U32(flat))?;
    }
    let overlays = serde_json::to_vec_pretty(&model.overlays).expect("overlays serialize");
    let path = dir.join("overlays.json");
    fs::write(&path, overlays).map_err(io_err(&path))?;
    Ok(w.entries)
}

fn is_nonempty_dir(dir: &Path) -> bool {
    fs::read_dir(dir).map(|mut it| it.next().is_some()).unwrap_or(false)
}

/// Writes the artifact into a sibling temporary directory (manifest last)
/// and renames it into place. An existing non-empty `dir` is only replaced
/// when `force` is set.
pub fn save_model(model: &TopicModel, dir: &Path, force: bool) -> Result<Manifest, PersistError> {
    if dir.exists() && !dir.is_dir() || is_nonempty_dir(dir) && !force {
        return Err(PersistError::Exists(dir.display().to_string()));
    }
    let name = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into());
    let parent = dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent).map_err(io_err(parent))?;
    let tmp: PathBuf = parent.join(format!(".{name}.tmp-{}", std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(io_err(&tmp))?;
    }
    fs::create_dir(&tmp).map_err(io_err(&tmp))?;
    let result = (|| {
        let blobs = write_blobs(model, &tmp)?;
        let info = &model.info;
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            created_at: info.created_at.clone(),
            config_hash: info.config_hash.clone(),
            stopword_list: info.stopword_list.clone(),
            stopword_hash: info.stopword_hash.clone(),
            counts: Counts {
                documents: model.doc_ids.len(),
                topics: model.n_topics(),
                vocabulary: model.vocab.len(),
                nonzeros: model.weights.values().len(),
            },
            window: info.window,
            outliers: info.outliers,
            reduce_frequent_words: info.reduce_frequent_words,
            avg_tokens: info.avg_tokens,
            embedding_dim: info.embedding_dim,
            reduced_dim: info.reduced_dim,
            projection_degenerate: model.projection.degenerate,
            bin_widths: model.series.iter().map(|s| s.width().weeks()).collect(),
            blobs,
        };
        let path = tmp.join(MANIFEST);
        fs::write(&path, serde_json::to_vec_pretty(&manifest).expect("manifest serializes")).map_err(io_err(&path))?;
        Ok(manifest)
    })();
    let manifest = match result {
        Ok(m) => m,
        Err(e) => {
            let _ = fs::remove_dir_all(&tmp);
            return Err(e);
        }
    };
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::rename(&tmp, dir).map_err(io_err(dir))?;
    Ok(manifest)
}

struct Reader<'a> {
    dir: &'a Path,
    manifest: &'a Manifest,
}

impl Reader<'_> {
    fn entry(&self, name: &str) -> Result<&BlobEntry, PersistError> {
        self.manifest
            .blobs
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| PersistError::Manifest(format!("missing blob {name}")))
    }

    fn bytes(&self, name: &str, dtype: Dtype) -> Result<(Vec<u8>, &BlobEntry), PersistError> {
        let e = self.entry(name)?;
        if e.dtype != dtype {
            return Err(PersistError::Blob { name: name.into(), message: format!("expected {dtype:?}, found {:?}", e.dtype) });
        }
        if e.file.contains('/') || e.file.contains('\\') || e.file.starts_with('.') {
            return Err(PersistError::Manifest(format!("blob file name `{}` escapes the artifact", e.file)));
        }
        let path = self.dir.join(&e.file);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        if let Some(width) = dtype.width() {
            let want = e.shape.iter().product::<usize>() * width;
            if bytes.len() < want {
                return Err(PersistError::Truncated(name.into()));
            }
            if bytes.len() > want {
                return Err(PersistError::Blob { name: name.into(), message: format!("{} bytes, expected {want}", bytes.len()) });
            }
        }
        Ok((bytes, e))
    }

    fn f32(&self, name: &str) -> Result<(Vec<f64>, Vec<usize>), PersistError> {
        let (b, e) = self.bytes(name, Dtype::F32)?;
        Ok((b.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect(), e.shape.clone()))
    }

    fn i32(&self, name: &str) -> Result<Vec<i32>, PersistError> {
        let (b, _) = self.bytes(name, Dtype::I32)?;
        Ok(b.chunks_exact(4).map(|c| i32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn u32(&self, name: &str) -> Result<(Vec<u32>, Vec<usize>), PersistError> {
        let (b, e) = self.bytes(name, Dtype::U32)?;
        Ok((b.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect(), e.shape.clone()))
    }

    fn u64(&self, name: &str) -> Result<Vec<u64>, PersistError> {
        let (b, _) = self.bytes(name, Dtype::U64)?;
        Ok(b.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn u8(&self, name: &str) -> Result<Vec<u8>, PersistError> {
        Ok(self.bytes(name, Dtype::U8)?.0)
    }

    fn text(&self, name: &str) -> Result<Vec<String>, PersistError> {
        let (b, e) = self.bytes(name, Dtype::Text)?;
        let s = String::from_utf8(b).map_err(|_| PersistError::Blob { name: name.into(), message: "not UTF-8".into() })?;
        let lines: Vec<String> = s.lines().map(str::to_string).collect();
        let want = e.shape.first().copied().unwrap_or(0);
        if lines.len() < want || (!s.is_empty() && !s.ends_with('\n')) {
            return Err(PersistError::Truncated(name.into()));
        }
        if lines.len() != want {
            return Err(PersistError::Blob { name: name.into(), message: format!("{} lines, expected {want}", lines.len()) });
        }
        Ok(lines)
    }
}

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<(), PersistError> {
    if cond {
        Ok(())
    } else {
        Err(PersistError::Inconsistent(what()))
    }
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, PersistError> {
    let path = dir.join(MANIFEST);
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    let value: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| PersistError::Manifest(e.to_string()))?;
    let version = value.get("format_version").and_then(|v| v.as_u64());
    match version {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => return Err(PersistError::Version { found: v as u32 }),
        None => return Err(PersistError::Manifest("format_version missing".into())),
    }
    serde_json::from_value(value).map_err(|e| PersistError::Manifest(e.to_string()))
}

/// Loads and validates an artifact written by [`save_model`].
pub fn load_model(dir: &Path) -> Result<TopicModel, PersistError> {
    let manifest = read_manifest(dir)?;
    if manifest.stopword_hash != stopword_hash() {
        return Err(PersistError::Stopwords { found: manifest.stopword_list.clone(), expected: crate::stopwords::STOPWORD_LIST_ID.into() });
    }
    let r = Reader { dir, manifest: &manifest };
    let c = &manifest.counts;

    let (mean, _) = r.f32("projection_mean")?;
    let (basis, shape) = r.f32("projection_basis")?;
    let (evr, _) = r.f32("projection_evr")?;
    check(shape.len() == 2 && shape[0] == mean.len() && shape[1] == evr.len(), || "projection shapes disagree".into())?;
    let projection = Projection {
        mean,
        basis: Matrix::new(shape[0], shape[1], basis),
        explained_variance_ratio: evr,
        degenerate: manifest.projection_degenerate,
    };

    let labels = r.i32("labels")?;
    let doc_ids = r.text("doc_ids")?;
    let doc_dates: Vec<NaiveDate> = r.i32("doc_dates")?.into_iter().map(from_days).collect();
    check(labels.len() == c.documents && doc_ids.len() == c.documents && doc_dates.len() == c.documents, || {
        format!("manifest lists {} documents but document blobs disagree", c.documents)
    })?;
    check(labels.iter().all(|&l| l >= -1 && l < c.topics as i32), || "labels out of range".into())?;
    let raw: Vec<i64> = labels.iter().map(|&l| l as i64).collect();
    let assignment = ClusterAssignment::from_raw(&raw);
    check(assignment.labels() == labels.as_slice() && assignment.n_clusters() == c.topics, || {
        format!("labels are not canonical for {} topics", c.topics)
    })?;

    let parent = r.i32("tree_parent")?;
    let (birth, _) = r.f32("tree_birth")?;
    let (death, _) = r.f32("tree_death")?;
    let (size, _) = r.u32("tree_size")?;
    let (stability, _) = r.f32("tree_stability")?;
    let selected = r.u8("tree_selected")?;
    let m = parent.len();
    check([birth.len(), death.len(), size.len(), stability.len(), selected.len()].iter().all(|&l| l == m), || {
        "tree blobs disagree in length".into()
    })?;
    check(parent.iter().enumerate().all(|(i, &p)| if i == 0 { p == -1 } else { p >= 0 && (p as usize) < i }), || {
        "tree parents out of order".into()
    })?;
    let mut nodes: Vec<CondensedNode> = (0..m)
        .map(|i| CondensedNode {
            parent: (parent[i] >= 0).then(|| parent[i] as usize),
            birth_lambda: birth[i],
            death_lambda: death[i],
            size: size[i] as usize,
            stability: stability[i],
            children: Vec::new(),
            selected: selected[i] != 0,
        })
        .collect();
    for i in 1..m {
        let p = parent[i] as usize;
        nodes[p].children.push(i);
    }
    let (point_cluster, _) = r.u32("point_cluster")?;
    let (point_lambda, _) = r.f32("point_lambda")?;
    check(point_cluster.len() == c.documents && point_lambda.len() == c.documents, || "tree point blobs disagree".into())?;
    check(point_cluster.iter().all(|&p| (p as usize) < m.max(1)), || "point cluster out of range".into())?;
    let tree = CondensedTree { nodes, point_cluster: point_cluster.into_iter().map(|p| p as usize).collect(), point_lambda };

    let terms = r.text("vocab")?;
    let freqs = r.u64("vocab_freq")?;
    check(terms.len() == c.vocabulary, || format!("manifest lists {} terms, vocabulary blob has {}", c.vocabulary, terms.len()))?;
    let vocab = Vocabulary::new(terms, freqs).map_err(|e| PersistError::Inconsistent(e.to_string()))?;
    let (indptr, _) = r.u32("weights_indptr")?;
    let (indices, _) = r.u32("weights_indices")?;
    let (values, _) = r.f32("weights_values")?;
    check(indptr.len() == c.topics + 1 && values.len() == c.nonzeros, || "weight matrix disagrees with manifest counts".into())?;
    let weights = SparseWeights::new(c.vocabulary, indptr, indices, values).map_err(|e| PersistError::Inconsistent(e.to_string()))?;

    let (sizes, _) = r.u32("topic_sizes")?;
    let topic_sizes: Vec<usize> = sizes.into_iter().map(|s| s as usize).collect();
    check(topic_sizes == assignment.sizes(), || "topic sizes disagree with labels".into())?;
    let (cent, cshape) = r.f32("topic_centroids")?;
    check(cshape == vec![c.topics, projection.basis.cols()], || "centroid shape disagrees".into())?;
    let centroids = Matrix::new(cshape[0], cshape[1], cent);

    let mut series = Vec::new();
    for &w in &manifest.bin_widths {
        let width = BinWidth::new(w).map_err(|e| PersistError::Manifest(e.to_string()))?;
        let (flat, shape) = r.u32(&format!("series_w{w}"))?;
        check(shape.len() == 2 && shape[0] == c.topics + 1, || format!("series_w{w} shape disagrees"))?;
        let bins = shape[1];
        let mut rows: Vec<Vec<u32>> = flat.chunks(bins.max(1)).map(<[u32]>::to_vec).collect();
        if bins == 0 {
            rows = vec![Vec::new(); c.topics + 1];
        }
        let outliers = rows.pop().unwrap_or_default();
        let ts = TopicTimeSeries::from_counts(width, manifest.window.start, rows, outliers)
            .map_err(|e| PersistError::Inconsistent(e.to_string()))?;
        check(ts.totals().iter().map(|&t| t as usize).sum::<usize>() == c.documents, || format!("series_w{w} does not cover every document"))?;
        series.push(ts);
    }
    check(manifest.bin_widths == vec![1, 2, 3, 4], || "artifact must hold series for widths 1 to 4".into())?;

    let opath = dir.join("overlays.json");
    let overlays: OverlaySeries = serde_json::from_slice(&fs::read(&opath).map_err(io_err(&opath))?)
        .map_err(|e| PersistError::Blob { name: "overlays".into(), message: e.to_string() })?;

    let info = ModelInfo {
        created_at: manifest.created_at.clone(),
        config_hash: manifest.config_hash.clone(),
        stopword_list: manifest.stopword_list.clone(),
        stopword_hash: manifest.stopword_hash.clone(),
        window: manifest.window,
        documents: c.documents,
        topics: c.topics,
        outliers: assignment.outlier_count(),
        vocabulary: c.vocabulary,
        reduce_frequent_words: manifest.reduce_frequent_words,
        avg_tokens: manifest.avg_tokens,
        embedding_dim: manifest.embedding_dim,
        reduced_dim: manifest.reduced_dim,
    };
    check(info.outliers == manifest.outliers, || "outlier count disagrees with labels".into())?;
    Ok(TopicModel {
        info,
        projection,
        doc_ids,
        doc_dates,
        assignment,
        tree,
        vocab,
        weights,
        topic_sizes,
        centroids,
        series,
        overlays,
    })
}
