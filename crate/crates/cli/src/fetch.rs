use std::io::BufWriter;
use std::io::Write;
use std::time::Duration;

use log::info;
use url::Url;

use topicscope::ingest::fetch::{fetch_corpus, PageSource};

use crate::{load_config, print_json, CliError, FetchArgs};

struct HttpSource {
    client: reqwest::blocking::Client,
}

impl PageSource for HttpSource {
    fn get(&mut self, url: &Url) -> Result<String, String> {
        let resp = self.client.get(url.as_str()).send().map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("HTTP {status}"));
        }
        resp.text().map_err(|e| e.to_string())
    }
}

pub fn run(a: &FetchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(&a.config)?;
    let fc = cfg.fetch.as_ref().ok_or_else(|| CliError::usage("config has no [fetch] section"))?;
    let api_key = fc.api_key();
    if fc.api_key_env.is_some() && api_key.is_none() {
        return Err(CliError::usage(format!("environment variable {} is not set", fc.api_key_env.as_deref().unwrap_or_default())));
    }
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(60))
        .build()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let file = std::fs::File::create(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    let report = fetch_corpus(fc, api_key.as_deref(), &mut HttpSource { client }, BufWriter::new(file))?;
    info!("fetched {} records in {} pages", report.records, report.pages);
    print_json(out, &report)
}
