//! The shipped English stopword list.
//!
//! Fitted models record [`STOPWORD_LIST_ID`] and [`stopword_hash`]; a model
//! built against a different list is rejected on load.

use std::collections::HashSet;
use std::sync::LazyLock;

use sha2::{Digest, Sha256};

pub const STOPWORD_LIST_ID: &str = "en-318-v1";

const RAW: &str = include_str!("../data/stopwords_en.txt");

static STOPWORDS: LazyLock<HashSet<&'static str>> =
    LazyLock::new(|| RAW.lines().map(str::trim).filter(|w| !w.is_empty()).collect());

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.contains(token)
}

pub fn stopword_count() -> usize {
    STOPWORDS.len()
}

/// Hex SHA-256 of the list file as shipped.
pub fn stopword_hash() -> String {
    hex::encode(Sha256::digest(RAW.as_bytes()))
}
