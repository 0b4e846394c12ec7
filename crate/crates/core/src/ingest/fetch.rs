//! Paged corpus download from a JSON HTTP endpoint.
//!
//! The transport is abstracted behind [`PageSource`] so the paging logic is
//! testable without a network; the command line tool supplies an HTTP
//! implementation. Each page must be a JSON array of record objects (or an
//! object holding such an array under [`FetchConfig::records_field`]). Records
//! are written out as JSON lines, ready for [`super::parse_metadata`].

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use url::Url;

use super::IngestError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Paging {
    /// The page parameter carries a page number starting at `first_page`.
    #[default]
    Page,
    /// The page parameter carries a record offset starting at `first_page`.
    Offset,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FetchConfig {
    pub base_url: String,
    pub query: String,
    pub page_param: String,
    pub page_size: u32,
    /// Environment variable holding the API key, if the endpoint needs one.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_query_param")]
    pub query_param: String,
    #[serde(default = "default_size_param")]
    pub size_param: String,
    #[serde(default = "default_key_param")]
    pub api_key_param: String,
    #[serde(default)]
    pub paging: Paging,
    #[serde(default = "default_first_page")]
    pub first_page: u64,
    #[serde(default)]
    pub records_field: Option<String>,
    #[serde(default = "default_max_pages")]
    pub max_pages: u32,
}

fn default_query_param() -> String {
    "q".into()
}
fn default_size_param() -> String {
    "page_size".into()
}
fn default_key_param() -> String {
    "api_key".into()
}
fn default_first_page() -> u64 {
    1
}
fn default_max_pages() -> u32 {
    1000
}

impl FetchConfig {
    pub fn api_key(&self) -> Option<String> {
        self.api_key_env.as_deref().and_then(|v| std::env::var(v).ok())
    }

    /// URL of the zero-based `page`.
    pub fn page_url(&self, page: u32, api_key: Option<&str>) -> Result<Url, IngestError> {
        let mut url = Url::parse(&self.base_url)
            .map_err(|e| IngestError::Fetch { page, message: format!("bad base_url: {e}") })?;
        let position = match self.paging {
            Paging::Page => self.first_page + page as u64,
            Paging::Offset => self.first_page + page as u64 * self.page_size as u64,
        };
        {
            let mut q = url.query_pairs_mut();
            q.append_pair(&self.query_param, &self.query);
            q.append_pair(&self.page_param, &position.to_string());
            q.append_pair(&self.size_param, &self.page_size.to_string());
            if let Some(key) = api_key {
                q.append_pair(&self.api_key_param, key);
            }
        }
        Ok(url)
    }
}

pub trait PageSource {
    fn get(&mut self, url: &Url) -> Result<String, String>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FetchReport {
    pub pages: u32,
    pub records: usize,
}

/// Requests pages until one comes back short or empty, or `max_pages` is hit.
pub fn fetch_corpus<S: PageSource, W: Write>(
    cfg: &FetchConfig,
    api_key: Option<&str>,
    source: &mut S,
    mut sink: W,
) -> Result<FetchReport, IngestError> {
    let mut report = FetchReport::default();
    for page in 0..cfg.max_pages {
        let url = cfg.page_url(page, api_key)?;
        let body = source.get(&url).map_err(|message| IngestError::Fetch { page, message })?;
        let fail = |message: String| IngestError::Fetch { page, message };
        let parsed: Value = serde_json::from_str(&body).map_err(|e| fail(e.to_string()))?;
        let items = match (&cfg.records_field, parsed) {
            (None, Value::Array(items)) => items,
            (Some(field), Value::Object(mut m)) => match m.remove(field) {
                Some(Value::Array(items)) => items,
                _ => return Err(fail(format!("response has no array field `{field}`"))),
            },
            _ => return Err(fail("response is not a JSON array".into())),
        };
        report.pages += 1;
        for item in &items {
            serde_json::to_writer(&mut sink, item).map_err(std::io::Error::other)?;
            sink.write_all(b"\n")?;
        }
        report.records += items.len();
        if (items.len() as u32) < cfg.page_size {
            break;
        }
    }
    sink.flush()?;
    Ok(report)
}
