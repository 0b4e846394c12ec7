//! Precomputed document embeddings: loading, alignment with the corpus and
//! seeded subsampling.
//!
//! Binary layout (`EMB1`): the 4 magic bytes, `n` and `d` as little-endian
//! `u32`, `n * d` little-endian `f32` values row-major, then `n` ids separated
//! by `\n` (UTF-8, optional trailing newline).

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::ingest::CorpusRecord;
use crate::matrix::Matrix;
use crate::rng::SeededRng;

/// Dimensionality of the reference embedding model.
pub const REFERENCE_DIM: usize = 768;
pub const MAGIC: &[u8; 4] = b"EMB1";

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding file: {0}")]
    Io(#[from] std::io::Error),
    #[error("embedding file is malformed: {0}")]
    Malformed(String),
    #[error("row {row}: expected {expected} values, found {found}")]
    Dimension { row: usize, expected: usize, found: usize },
    #[error("row {row}: non-finite value at column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("row {row}: duplicate id `{id}`")]
    DuplicateId { row: usize, id: String },
    #[error("corpus and embeddings share no record ids")]
    EmptyIntersection,
    #[error("unknown embedding format `{0}`")]
    UnknownFormat(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingFormat {
    Binary,
    Csv,
    Jsonl,
}

impl EmbeddingFormat {
    pub fn from_path(path: &Path) -> Result<Self, EmbedError> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("emb" | "bin") => Ok(Self::Binary),
            Some("csv") => Ok(Self::Csv),
            Some("jsonl" | "ndjson") => Ok(Self::Jsonl),
            other => Err(EmbedError::UnknownFormat(other.unwrap_or("").to_string())),
        }
    }
}

/// Dense `n x d` embeddings with one id per row.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    vectors: Matrix,
}

impl EmbeddingMatrix {
    /// Validates shape, finiteness and id uniqueness.
    pub fn new(ids: Vec<String>, vectors: Matrix) -> Result<Self, EmbedError> {
        if ids.len() != vectors.rows() {
            return Err(EmbedError::Malformed(format!(
                "{} ids for {} rows",
                ids.len(),
                vectors.rows()
            )));
        }
        for (row, r) in vectors.iter_rows().enumerate() {
            if let Some(col) = r.iter().position(|v| !v.is_finite()) {
                return Err(EmbedError::NonFinite { row, col });
            }
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for (row, id) in ids.iter().enumerate() {
            if !seen.insert(id.as_str()) {
                return Err(EmbedError::DuplicateId { row, id: id.clone() });
            }
        }
        Ok(Self { ids, vectors })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    /// True when `d` differs from the 768 dimensions of the reference model.
    pub fn nonstandard_dim(&self) -> bool {
        self.dim() != REFERENCE_DIM
    }

    pub fn select(&self, rows: &[usize]) -> EmbeddingMatrix {
        EmbeddingMatrix {
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            vectors: self.vectors.select_rows(rows),
        }
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<(), EmbedError> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.len() as u32).to_le_bytes())?;
        w.write_all(&(self.dim() as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.vectors.as_slice().len() * 4);
        for v in self.vectors.as_slice() {
            buf.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
        for id in &self.ids {
            w.write_all(id.as_bytes())?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_binary(&self, path: &Path) -> Result<(), EmbedError> {
        self.write_binary(std::io::BufWriter::new(fs::File::create(path)?))
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self, EmbedError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(EmbedError::Malformed("missing EMB1 magic".into()));
        }
        let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = n
            .checked_mul(d)
            .and_then(|c| c.checked_mul(4))
            .ok_or_else(|| EmbedError::Malformed("header size overflows".into()))?;
        if bytes.len() < 12 + body {
            return Err(EmbedError::Malformed(format!(
                "header declares {n}x{d} floats ({body} bytes) but only {} follow",
                bytes.len() - 12
            )));
        }
        let data: Vec<f64> = bytes[12..12 + body]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        let tail = std::str::from_utf8(&bytes[12 + body..])
            .map_err(|_| EmbedError::Malformed("id block is not UTF-8".into()))?;
        let tail = tail.strip_suffix('\n').unwrap_or(tail);
        let ids: Vec<String> = if n == 0 && tail.is_empty() {
            Vec::new()
        } else {
            tail.split('\n').map(str::to_string).collect()
        };
        if ids.len() != n {
            return Err(EmbedError::Malformed(format!("expected {n} ids, found {}", ids.len())));
        }
        Self::new(ids, Matrix::new(n, d, data))
    }

    /// CSV with header `id,v0,...,v{d-1}`.
    pub fn read_csv<R: Read>(r: R) -> Result<Self, EmbedError> {
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(r);
        let header = reader.headers().map_err(|e| EmbedError::Malformed(e.to_string()))?.clone();
        if header.get(0) != Some("id") {
            return Err(EmbedError::Malformed("CSV header must start with `id`".into()));
        }
        let d = header.len() - 1;
        let mut ids = Vec::new();
        let mut data = Vec::new();
        for (row, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| EmbedError::Malformed(format!("row {row}: {e}")))?;
            if rec.len() - 1 != d {
                return Err(EmbedError::Dimension { row, expected: d, found: rec.len() - 1 });
            }
            ids.push(rec[0].to_string());
            for (col, cell) in rec.iter().skip(1).enumerate() {
                let v: f64 = cell.trim().parse().map_err(|_| {
                    EmbedError::Malformed(format!("row {row}, column {col}: `{cell}` is not a number"))
                })?;
                data.push(v);
            }
        }
        let n = ids.len();
        Self::new(ids, Matrix::new(n, d, data))
    }

    /// JSON lines of `{"id": ..., "vector": [...]}`.
    pub fn read_jsonl<R: Read>(r: R) -> Result<Self, EmbedError> {
        #[derive(Deserialize)]
        struct Row {
            id: String,
            vector: Vec<f64>,
        }
        let mut ids = Vec::new();
        let mut data = Vec::new();
        let mut d = None;
        for (row, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Row = serde_json::from_str(&line)
                .map_err(|e| EmbedError::Malformed(format!("row {row}: {e}")))?;
            let expected = *d.get_or_insert(parsed.vector.len());
            if parsed.vector.len() != expected {
                return Err(EmbedError::Dimension { row, expected, found: parsed.vector.len() });
            }
            ids.push(parsed.id);
            data.extend(parsed.vector);
        }
        let n = ids.len();
        Self::new(ids, Matrix::new(n, d.unwrap_or(0), data))
    }
}

pub fn load_embeddings(path: &Path, format: EmbeddingFormat) -> Result<EmbeddingMatrix, EmbedError> {
    let file = BufReader::new(fs::File::open(path)?);
    let emb = match format {
        EmbeddingFormat::Binary => EmbeddingMatrix::read_binary(file)?,
        EmbeddingFormat::Csv => EmbeddingMatrix::read_csv(file)?,
        EmbeddingFormat::Jsonl => EmbeddingMatrix::read_jsonl(file)?,
    };
    if emb.nonstandard_dim() {
        log::warn!("{}: embedding dimension {} differs from {REFERENCE_DIM}", path.display(), emb.dim());
    }
    Ok(emb)
}

/// Corpus records and embeddings restricted to their shared ids, both in
/// corpus order.
#[derive(Clone, Debug, PartialEq)]
pub struct Aligned {
    pub records: Vec<CorpusRecord>,
    pub embeddings: EmbeddingMatrix,
    pub corpus_only: usize,
    pub embedding_only: usize,
}

pub fn align(records: &[CorpusRecord], emb: &EmbeddingMatrix) -> Result<Aligned, EmbedError> {
    let position: HashMap<&str, usize> =
        emb.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut kept = Vec::new();
    let mut rows = Vec::new();
    for r in records {
        if let Some(&i) = position.get(r.record_id.as_str()) {
            kept.push(r.clone());
            rows.push(i);
        }
    }
    if kept.is_empty() {
        return Err(EmbedError::EmptyIntersection);
    }
    Ok(Aligned {
        corpus_only: records.len() - kept.len(),
        embedding_only: emb.len() - rows.len(),
        records: kept,
        embeddings: emb.select(&rows),
    })
}

/// Number of rows a subsample of `fraction` keeps: `ceil(fraction * n)`.
pub fn subsample_size(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).ceil() as usize).min(n)
}

/// Row indices of a seeded subsample, ascending. `fraction` is clamped to
/// `(0, 1]`.
pub fn subsample_rows(n: usize, fraction: f64, seed: u64) -> Vec<usize> {
    let fraction = fraction.clamp(f64::MIN_POSITIVE, 1.0);
    if fraction >= 1.0 {
        return (0..n).collect();
    }
    SeededRng::new(seed).sample_indices(n, subsample_size(n, fraction))
}

pub fn subsample(emb: &EmbeddingMatrix, fraction: f64, seed: u64) -> EmbeddingMatrix {
    emb.select(&subsample_rows(emb.len(), fraction, seed))
}
