mod common;

use std::fs;

use common::{run, stdout_json, ClusterChoice, Server, Workspace};
use topicscope::synth::PlantedSpec;

fn small() -> Workspace {
    let spec = PlantedSpec { documents: 1200, topics: 5, dim: 32, center_scale: 1.2, extras: 20, seed: 5, ..PlantedSpec::default() };
    Workspace::new(&spec, &ClusterChoice { reduce_k: 6, min_cluster_size: 60, min_samples: 10 })
}

fn code(out: &std::process::Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &std::process::Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn prepare_reports_provenance_and_is_idempotent() {
    let ws = small();
    let p = ws.prepare("corpus");
    assert_eq!(p["raw_records"], 1220);
    assert_eq!(p["missing_fields"], 10);
    assert_eq!(p["duplicates"], 10);
    assert_eq!(p["window"], 0);
    assert_eq!(p["malformed_rows"], 0);
    ws.prepare("corpus2");
    for f in ["corpus.jsonl", "provenance.json", "profile.json"] {
        assert_eq!(fs::read(ws.join("corpus").join(f)).unwrap(), fs::read(ws.join("corpus2").join(f)).unwrap(), "{f}");
    }
    let profile: serde_json::Value = serde_json::from_slice(&fs::read(ws.join("corpus/profile.json")).unwrap()).unwrap();
    assert!(profile.is_object());
}

#[test]
fn config_errors_exit_with_2() {
    let ws = small();
    let text = fs::read_to_string(ws.join("config.toml")).unwrap().replacen("seed = 5\n", "", 1);
    fs::write(ws.join("broken.toml"), text).unwrap();
    let out = ws.run(&["prepare", "--config", "broken.toml", "--out", "c"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("seed"), "{}", stderr(&out));

    let out = ws.run(&["prepare", "--config", "absent.toml", "--out", "c"]);
    assert_eq!(code(&out), 2);
    let out = ws.run(&["prepare", "--out", "c"]);
    assert_eq!(code(&out), 2, "clap usage error");
}

#[test]
fn tune_fit_test_export() {
    let ws = small();
    ws.prepare("corpus");

    let tune = |out: &str| stdout_json(&ws.run(&["tune", "--config", "config.toml", "--corpus", "corpus", "--out", out]));
    let best = tune("trials.csv");
    assert_eq!(best["trials"], 1);
    assert!(best["best"]["dbcv"].as_f64().is_some());
    tune("trials2.csv");
    let strip_ms = |p: &str| -> Vec<String> {
        fs::read_to_string(ws.join(p)).unwrap().lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
    };
    let rows = strip_ms("trials.csv");
    assert_eq!(rows.len(), 2, "header plus one trial");
    assert_eq!(rows, strip_ms("trials2.csv"));

    let summary = ws.fit("corpus", "model");
    assert_eq!(summary["documents"], 1200);
    assert_eq!(summary["topics"], 5);

    let refused = ws.run(&["fit", "--config", "config.toml", "--corpus", "corpus", "--out", "model"]);
    assert_eq!(code(&refused), 2, "{}", stderr(&refused));
    let forced = ws.run(&["fit", "--config", "config.toml", "--corpus", "corpus", "--out", "model", "--force", "--trials", "trials.csv"]);
    stdout_json(&forced);
    let missing = ws.run(&["fit", "--config", "config.toml", "--corpus", "corpus", "--out", "m2", "--emb", "nope.emb"]);
    assert_eq!(code(&missing), 2);
    assert!(stderr(&missing).contains("nope.emb"));

    let test = |extra: &[&str]| {
        let mut args = vec!["test", "--model", "model", "--topic", "0", "--w1", "2020-02-01,2020-12-31", "--w2", "2021-05-01,2022-03-31"];
        args.extend_from_slice(extra);
        ws.run(&args)
    };
    let t = stdout_json(&test(&[]));
    assert_eq!(t["alpha"], 0.05);
    assert_eq!(t["bin_weeks"], 2);
    assert_eq!(t["window1"], serde_json::json!(["2020-02-01", "2020-12-31"]));
    assert!(t["result"]["p_value"].as_f64().is_some());
    let t = stdout_json(&test(&["--alpha", "0.2", "--bins", "4"]));
    assert_eq!(t["result"]["alpha"], 0.2);
    assert_eq!(t["bin_weeks"], 4);

    let bad = ws.run(&["test", "--model", "model", "--topic", "0", "--w1", "2020-12-31,2020-02-01", "--w2", "2021-05-01,2022-03-31"]);
    assert_eq!(code(&bad), 3);
    let narrow = ws.run(&["test", "--model", "model", "--topic", "0", "--w1", "2020-02-01,2020-02-03", "--w2", "2021-05-01,2022-03-31"]);
    assert_eq!(code(&narrow), 3);
    assert!(stderr(&narrow).contains("window 1"), "{}", stderr(&narrow));
    let unknown = ws.run(&["test", "--model", "model", "--topic", "77", "--w1", "2020-02-01,2020-12-31", "--w2", "2021-05-01,2022-03-31"]);
    assert_eq!(code(&unknown), 3);
    let no_model = ws.run(&["test", "--model", "nowhere", "--topic", "0", "--w1", "2020-02-01,2020-12-31", "--w2", "2021-05-01,2022-03-31"]);
    assert_eq!(code(&no_model), 2);

    stdout_json(&ws.run(&["export", "--model", "model", "--out", "export"]));
    let topics: serde_json::Value = serde_json::from_slice(&fs::read(ws.join("export/topics.json")).unwrap()).unwrap();
    assert_eq!(topics.as_array().unwrap().len(), 5);
    assert_eq!(topics[0]["terms"].as_array().unwrap().len(), 30);
    for w in 1..=4 {
        let s: serde_json::Value = serde_json::from_slice(&fs::read(ws.join(&format!("export/series_w{w}.json"))).unwrap()).unwrap();
        assert_eq!(s["bin_weeks"], w);
        assert_eq!(s["topics"].as_array().unwrap().len(), 5);
    }
    let heat = fs::read_to_string(ws.join("export/heatmap.csv")).unwrap();
    assert!(heat.starts_with("topic,2020-01/2020-02,"));
    let docs = fs::read_to_string(ws.join("export/documents.csv")).unwrap();
    assert_eq!(docs.lines().count(), 1201);
}

#[test]
fn cli_test_matches_the_http_endpoint() {
    let ws = small();
    ws.prepare("corpus");
    ws.fit("corpus", "model");
    let server = Server::start(ws.path(), "model");
    let client = reqwest::blocking::Client::new();
    assert_eq!(client.get(server.url("/healthz")).send().unwrap().status(), 200);
    for (topic, w1, w2, bins) in [(0, "2020-02-01,2020-12-31", "2021-05-01,2022-03-31", 2), (3, "2020-01-01,2021-01-01", "2020-06-01,2022-06-30", 3)] {
        let cli = stdout_json(&ws.run(&["test", "--model", "model", "--topic", &topic.to_string(), "--w1", w1, "--w2", w2, "--bins", &bins.to_string()]));
        let split = |w: &str| w.split(',').map(str::to_string).collect::<Vec<_>>();
        let body = serde_json::json!({"topic_id": topic, "window1": split(w1), "window2": split(w2), "bin_weeks": bins});
        let http: serde_json::Value = client.post(server.url("/api/v1/tests")).json(&body).send().unwrap().json().unwrap();
        assert_eq!(cli, http);
    }
}

#[test]
fn serve_errors() {
    let ws = small();
    let out = ws.run(&["serve", "--model", "missing"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("missing"));

    ws.prepare("corpus");
    ws.fit("corpus", "model");
    let first = Server::start(ws.path(), "model");
    let addr = first.base.trim_start_matches("http://").to_string();
    let out = ws.run(&["serve", "--model", "model", "--bind", &addr]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains(&format!("cannot bind {addr}")), "{}", stderr(&out));
}

#[test]
fn fetch_requires_a_section() {
    let ws = small();
    let out = ws.run(&["fetch", "--config", "config.toml", "--out", "raw.jsonl"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("[fetch]"));
}

#[test]
fn threads_flag_is_global() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--threads", "2", "profile", "--config", "none.toml"]);
    assert_eq!(code(&out), 2);
    let out = run(dir.path(), &["--help"]);
    assert!(out.status.success());
    let help = String::from_utf8_lossy(&out.stdout);
    for cmd in ["fetch", "profile", "prepare", "tune", "fit", "test", "export", "serve"] {
        assert!(help.contains(cmd), "{cmd}");
    }
}
