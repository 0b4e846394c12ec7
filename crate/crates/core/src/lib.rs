//! Temporal topic mining over embedded document corpora.
//!
//! The crate is organised as a sequence of stages, each usable on its own:
//!
//! * [`ingest`] parses corpus metadata, filters incomplete or out-of-window
//!   records, deduplicates by group key and profiles the corpus.
//! * [`embedstore`] loads, aligns and subsamples precomputed embeddings.
//! * [`reduce`] fits a deterministic PCA projection.
//! * [`cluster`] holds k-means with silhouette selection, hierarchical
//!   density clustering with leaf / excess-of-mass extraction, and the
//!   density-based cluster validity index.
//! * [`tune`] grid-searches reduction and clustering parameters on seeded
//!   subsamples, maximizing cluster validity.
//! * [`represent`] tokenizes text, builds class-based TF-IDF term weights and
//!   answers keyword topic searches.
//! * [`dynamics`] bins documents in time and turns topic counts into
//!   per-bin intensities.
//! * [`stats`] implements the tie-corrected Kruskal-Wallis test.
//! * [`model`] and [`persistence`] bundle every fitted stage into a
//!   versioned on-disk artifact.
//!
//! The [`pipeline`] module wires the stages together the way the command
//! line tool runs them.

#![allow(clippy::needless_range_loop)]

pub mod cluster;
pub mod config;
pub mod dynamics;
pub mod embedstore;
pub mod error;
pub mod ingest;
pub mod matrix;
pub mod model;
pub mod persistence;
pub mod pipeline;
pub mod reduce;
pub mod represent;
pub mod rng;
pub mod stats;
pub mod stopwords;
pub mod synth;
pub mod tune;

pub use error::{Error, Result};
pub use matrix::Matrix;

// The guide under `book/` is compiled here so its snippets run with
// `cargo test --doc`.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/preparation.md")]
    mod preparation {}
    #[doc = include_str!("../../../book/src/clustering.md")]
    mod clustering {}
    #[doc = include_str!("../../../book/src/validity.md")]
    mod validity {}
    #[doc = include_str!("../../../book/src/representation.md")]
    mod representation {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/testing.md")]
    mod testing {}
    #[doc = include_str!("../../../book/src/artifact.md")]
    mod artifact {}
}
