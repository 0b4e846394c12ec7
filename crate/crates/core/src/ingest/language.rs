use serde::{Deserialize, Serialize};

use crate::represent::raw_tokens;
use crate::stopwords::is_stopword;

pub const UNKNOWN_LANGUAGE: &str = "unknown";

/// Stopword-ratio language heuristic. Text is tagged `en` when at least
/// `min_tokens` tokens are present and the share of English stopwords
/// among them exceeds `threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LanguageDetector {
    pub threshold: f64,
    pub min_tokens: usize,
}

impl Default for LanguageDetector {
    fn default() -> Self {
        Self { threshold: 0.08, min_tokens: 20 }
    }
}

/// A declared tag always wins and is returned unchanged.
pub fn detect_language(text: &str, declared: Option<&str>, detector: &LanguageDetector) -> String {
    if let Some(tag) = declared.map(str::trim).filter(|t| !t.is_empty()) {
        return tag.to_string();
    }
    let tokens = raw_tokens(text);
    if tokens.is_empty() || tokens.len() < detector.min_tokens {
        return UNKNOWN_LANGUAGE.into();
    }
    let stop = tokens.iter().filter(|t| is_stopword(t)).count();
    if stop as f64 / tokens.len() as f64 > detector.threshold {
        "en".into()
    } else {
        UNKNOWN_LANGUAGE.into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_unknown() {
        assert_eq!(detect_language("", None, &LanguageDetector::default()), UNKNOWN_LANGUAGE);
    }

    #[test]
    fn declared_tag_passes_through() {
        let d = LanguageDetector::default();
        assert_eq!(detect_language("", Some("en"), &d), "en");
        assert_eq!(detect_language("the of and the", Some("de"), &d), "de");
    }

    #[test]
    fn stopword_ratio_decides() {
        // 25 stopwords among 100 tokens: 0.25 > 0.08.
        let mut words = vec!["the"; 10];
        words.extend(["of"; 10]);
        words.extend(["and"; 5]);
        words.extend(["coronavirus"; 40]);
        words.extend(["replication"; 35]);
        let text = words.join(" ");
        assert_eq!(raw_tokens(&text).len(), 100);
        assert_eq!(detect_language(&text, None, &LanguageDetector::default()), "en");

        // Same length with a single stopword: 0.01.
        let text = std::iter::once("the").chain(["virus"; 99]).collect::<Vec<_>>().join(" ");
        assert_eq!(detect_language(&text, None, &LanguageDetector::default()), UNKNOWN_LANGUAGE);
    }

    #[test]
    fn short_text_is_unknown() {
        let text = "the of and the of and the of and";
        assert_eq!(detect_language(text, None, &LanguageDetector::default()), UNKNOWN_LANGUAGE);
    }
}
