//! Grid search over reduction dimension and density-clustering parameters,
//! scored by cluster validity on seeded subsamples.
//!
//! Trial `i` (in grid enumeration order) draws its own subsample with seed
//! `base_seed + i`, fits the projection on that subsample, clusters it and
//! scores it. Trials are independent, so they run in parallel and the
//! result does not depend on the worker count.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{dbcv, density_cluster, DensityParams, Metric, Selection};
use crate::embedstore::subsample_rows;
use crate::matrix::Matrix;
use crate::reduce::{pca_fit, pca_transform};

#[derive(Debug, Error, PartialEq)]
pub enum TuneError {
    #[error("grid list `{0}` is empty")]
    EmptyGrid(&'static str),
    #[error("subsample fraction must be in (0, 1], got {0}")]
    BadFraction(f64),
    #[error("no valid configuration: every trial had undefined validity")]
    NoValidConfiguration,
}

/// Value lists per parameter. An empty `min_samples` list means "same as
/// `min_cluster_size`".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub reduce_k: Vec<usize>,
    pub min_cluster_size: Vec<usize>,
    #[serde(default)]
    pub min_samples: Vec<usize>,
    #[serde(default = "default_metrics")]
    pub metric: Vec<Metric>,
    #[serde(default = "default_selections")]
    pub selection: Vec<Selection>,
}

fn default_metrics() -> Vec<Metric> {
    vec![Metric::Euclidean]
}

fn default_selections() -> Vec<Selection> {
    vec![Selection::Leaf]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrialParams {
    pub reduce_k: usize,
    pub cluster: DensityParams,
}

impl Grid {
    /// Cartesian product in key order reduce_k, min_cluster_size,
    /// min_samples, metric, selection, the last varying fastest.
    pub fn combinations(&self) -> Result<Vec<TrialParams>, TuneError> {
        for (name, empty) in [
            ("reduce_k", self.reduce_k.is_empty()),
            ("min_cluster_size", self.min_cluster_size.is_empty()),
            ("metric", self.metric.is_empty()),
            ("selection", self.selection.is_empty()),
        ] {
            if empty {
                return Err(TuneError::EmptyGrid(name));
            }
        }
        let mut out = Vec::new();
        for &reduce_k in &self.reduce_k {
            for &mcs in &self.min_cluster_size {
                let samples: Vec<usize> = if self.min_samples.is_empty() { vec![mcs] } else { self.min_samples.clone() };
                for &ms in &samples {
                    for &metric in &self.metric {
                        for &selection in &self.selection {
                            out.push(TrialParams {
                                reduce_k,
                                cluster: DensityParams { min_cluster_size: mcs, min_samples: ms, metric, selection },
                            });
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub params: TrialParams,
    /// `None` when validity is undefined for the trial's clustering.
    pub dbcv: Option<f64>,
    pub clusters: usize,
    pub outlier_fraction: f64,
    pub seed: u64,
    pub millis: u64,
    /// Why the score is undefined, when it is.
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneOutcome {
    pub best: TrialResult,
    pub trials: Vec<TrialResult>,
}

fn run_trial(x: &Matrix, trial: usize, params: TrialParams, fraction: f64, seed: u64) -> TrialResult {
    let started = Instant::now();
    let rows = subsample_rows(x.rows(), fraction, seed);
    let sample = x.select_rows(&rows);
    let mut result = TrialResult {
        trial,
        params,
        dbcv: None,
        clusters: 0,
        outlier_fraction: 1.0,
        seed,
        millis: 0,
        note: None,
    };
    let scored = (|| -> Result<(usize, f64, f64), String> {
        let projection = pca_fit(&sample, params.reduce_k).map_err(|e| e.to_string())?;
        let reduced = pca_transform(&projection, &sample).map_err(|e| e.to_string())?;
        let fit = density_cluster(&reduced, &params.cluster).map_err(|e| e.to_string())?;
        let a = &fit.assignment;
        let score = dbcv(&reduced, a.labels(), params.cluster.metric);
        let (clusters, outliers) = (a.n_clusters(), a.outlier_fraction());
        match score {
            Ok(v) => Ok((clusters, outliers, v)),
            Err(e) => {
                result.clusters = clusters;
                result.outlier_fraction = outliers;
                Err(e.to_string())
            }
        }
    })();
    match scored {
        Ok((clusters, outliers, v)) => {
            result.clusters = clusters;
            result.outlier_fraction = outliers;
            result.dbcv = Some(v);
        }
        Err(note) => result.note = Some(note),
    }
    result.millis = started.elapsed().as_millis() as u64;
    result
}

/// Undefined scores rank below every defined one; ties go to the earlier
/// trial.
pub fn best_trial(trials: &[TrialResult]) -> Option<&TrialResult> {
    let mut best: Option<&TrialResult> = None;
    for t in trials {
        if let Some(v) = t.dbcv {
            if best.is_none_or(|b| v > b.dbcv.unwrap()) {
                best = Some(t);
            }
        }
    }
    best
}

pub fn grid_search(x: &Matrix, grid: &Grid, fraction: f64, base_seed: u64) -> Result<TuneOutcome, TuneError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(TuneError::BadFraction(fraction));
    }
    let combos = grid.combinations()?;
    let trials: Vec<TrialResult> = combos
        .par_iter()
        .enumerate()
        .map(|(i, &p)| run_trial(x, i, p, fraction, base_seed.wrapping_add(i as u64)))
        .collect();
    let best = best_trial(&trials).ok_or(TuneError::NoValidConfiguration)?.clone();
    Ok(TuneOutcome { best, trials })
}

pub const TRIALS_CSV_HEADER: &str =
    "trial,reduce_k,min_cluster_size,min_samples,metric,selection,dbcv,clusters,outlier_fraction,seed,ms";

/// One row per trial; the `dbcv` cell is empty when undefined.
pub fn trials_csv(trials: &[TrialResult]) -> String {
    let mut out = String::from(TRIALS_CSV_HEADER);
    out.push('\n');
    for t in trials {
        let c = &t.params.cluster;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{:.6},{},{}\n",
            t.trial,
            t.params.reduce_k,
            c.min_cluster_size,
            c.min_samples,
            c.metric.name(),
            c.selection.name(),
            t.dbcv.map(|v| format!("{v:.12}")).unwrap_or_default(),
            t.clusters,
            t.outlier_fraction,
            t.seed,
            t.millis
        ));
    }
    out
}

/// Reads back a table written by [`trials_csv`] (scores and params only).
pub fn parse_trials_csv(text: &str) -> Result<Vec<TrialResult>, String> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    if headers.iter().collect::<Vec<_>>().join(",") != TRIALS_CSV_HEADER {
        return Err(format!("unexpected header `{}`", headers.iter().collect::<Vec<_>>().join(",")));
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| format!("line {line}: {e}"))?;
        let bad = |col: &str| format!("line {line}: bad {col}");
        let num = |j: usize, col: &str| rec[j].parse::<usize>().map_err(|_| bad(col));
        let cluster = DensityParams {
            min_cluster_size: num(2, "min_cluster_size")?,
            min_samples: num(3, "min_samples")?,
            metric: rec[4].parse().map_err(|_| bad("metric"))?,
            selection: rec[5].parse().map_err(|_| bad("selection"))?,
        };
        out.push(TrialResult {
            trial: num(0, "trial")?,
            params: TrialParams { reduce_k: num(1, "reduce_k")?, cluster },
            dbcv: if rec[6].is_empty() { None } else { Some(rec[6].parse().map_err(|_| bad("dbcv"))?) },
            clusters: num(7, "clusters")?,
            outlier_fraction: rec[8].parse().map_err(|_| bad("outlier_fraction"))?,
            seed: rec[9].parse().map_err(|_| bad("seed"))?,
            millis: rec[10].parse().map_err(|_| bad("ms"))?,
            note: None,
        });
    }
    Ok(out)
}
