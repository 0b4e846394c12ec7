#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use topicscope::synth::{planted_corpus, PlantedCorpus, PlantedSpec};

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_topicscope"));
    c.env("RUST_LOG", "warn");
    c
}

pub fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

pub fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "exit {:?}\nstderr: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[derive(Clone, Debug)]
pub struct ClusterChoice {
    pub reduce_k: usize,
    pub min_cluster_size: usize,
    pub min_samples: usize,
}

/// A directory holding metadata.csv, embeddings.emb, overlays and
/// config.toml for a planted corpus.
pub struct Workspace {
    pub tmp: tempfile::TempDir,
    pub planted: PlantedCorpus,
}

impl Workspace {
    pub fn new(spec: &PlantedSpec, cluster: &ClusterChoice) -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let planted = planted_corpus(spec);
        let root = tmp.path();
        std::fs::write(root.join("metadata.csv"), planted.to_csv()).unwrap();
        planted.embeddings.save_binary(&root.join("embeddings.emb")).unwrap();
        std::fs::write(root.join("cases.csv"), "date,value\n2021-06-01,900\n2020-02-01,3\n").unwrap();
        std::fs::write(root.join("events.csv"), "2021-04-01,step\n").unwrap();
        let w = spec.window();
        let config = format!(
            r#"seed = {seed}

[corpus]
path = "metadata.csv"

[filter]
window = ["{start}", "{end}"]
required = ["title"]

[embeddings]
path = "embeddings.emb"

[reduce]
k = {k}

[grid]
reduce_k = [{k}]
min_cluster_size = [{mcs}]
min_samples = [{ms}]
subsample_fraction = 0.5

[cluster]
min_cluster_size = {mcs}
min_samples = {ms}
selection = "leaf"

[overlays]
cases = "cases.csv"
events = "events.csv"

[serve]
bind_addr = "127.0.0.1:0"
"#,
            seed = spec.seed,
            start = w.start,
            end = w.end,
            k = cluster.reduce_k,
            mcs = cluster.min_cluster_size,
            ms = cluster.min_samples,
        );
        std::fs::write(root.join("config.toml"), config).unwrap();
        Self { tmp, planted }
    }

    pub fn path(&self) -> &Path {
        self.tmp.path()
    }

    pub fn join(&self, p: &str) -> PathBuf {
        self.tmp.path().join(p)
    }

    pub fn run(&self, args: &[&str]) -> Output {
        run(self.path(), args)
    }

    pub fn prepare(&self, out: &str) -> serde_json::Value {
        stdout_json(&self.run(&["prepare", "--config", "config.toml", "--out", out]))
    }

    pub fn fit(&self, corpus: &str, out: &str) -> serde_json::Value {
        stdout_json(&self.run(&["fit", "--config", "config.toml", "--corpus", corpus, "--out", out]))
    }
}

/// A running `serve` process, killed on drop.
pub struct Server {
    child: Child,
    pub base: String,
}

impl Server {
    pub fn start(dir: &Path, model: &str) -> Self {
        let mut child = bin()
            .current_dir(dir)
            .args(["serve", "--config", "config.toml", "--model", model])
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let base = line.trim().strip_prefix("listening on ").unwrap_or_else(|| panic!("unexpected banner `{line}`")).to_string();
        Self { child, base }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
