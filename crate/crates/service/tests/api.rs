use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use axum::body::{to_bytes, Body};
use axum::http::{header, Request, StatusCode};
use axum::Router;
use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use tower::ServiceExt;

use topicscope::cluster::DensityParams;
use topicscope::dynamics::{BinWidth, CasePoint, EventMark, OverlaySeries, TopicTimeSeries};
use topicscope::model::TopicModel;
use topicscope::pipeline::{fit, FitParams};
use topicscope::represent::{SearchResult, SearchStatus, SparseWeights, Vocabulary};
use topicscope::synth::{add_months, planted_corpus, PlantedCorpus, PlantedSpec};
use topicscope_service::{router, ErrorBody, ModelSummary, NearestResponse, SeriesResponse, TestResponse};

struct Fixture {
    planted: PlantedCorpus,
    model: Arc<TopicModel>,
    /// Fitted topic holding most documents of each planted topic.
    topic_of: BTreeMap<i32, usize>,
}

fn d(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        // The stepped topic only appears after the step, so its early bins
        // are all zero.
        let spec = PlantedSpec {
            documents: 1200,
            topics: 4,
            dim: 32,
            center_scale: 1.2,
            stepped_share: (0.0, 0.15),
            noise_share: (0.2, 0.05),
            seed: 99,
            ..PlantedSpec::default()
        };
        let planted = planted_corpus(&spec);
        let overlays = OverlaySeries {
            cases: vec![CasePoint { date: d("2020-02-01"), value: 3.0 }, CasePoint { date: d("2021-06-01"), value: 900.0 }],
            events: vec![EventMark { date: d("2021-04-01"), label: "step".into() }],
        };
        let params = FitParams { reduce_k: 5, cluster: DensityParams::new(50).with_min_samples(10), reduce_frequent_words: true };
        let model = fit(&planted.clean(), &planted.embeddings, &params, overlays, "fixture", "2026-01-01T00:00:00Z".into()).unwrap();
        let mut tally: BTreeMap<(i32, usize), usize> = BTreeMap::new();
        for (id, &l) in model.doc_ids.iter().zip(model.assignment.labels()) {
            if l >= 0 {
                *tally.entry((planted.truth_of(id).unwrap(), l as usize)).or_default() += 1;
            }
        }
        let mut topic_of = BTreeMap::new();
        for planted_topic in 0..4 {
            let best = tally.iter().filter(|((p, _), _)| *p == planted_topic).max_by_key(|(_, &c)| c).map(|((_, t), _)| *t);
            topic_of.insert(planted_topic, best.expect("planted topic recovered"));
        }
        Fixture { planted, model: Arc::new(model), topic_of }
    })
}

fn app() -> Router {
    router(fixture().model.clone(), &[]).unwrap()
}

async fn call(app: Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn get(uri: &str) -> (StatusCode, Value) {
    call(app(), Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post(uri: &str, body: Value) -> (StatusCode, Value) {
    let req = Request::post(uri).header(header::CONTENT_TYPE, "application/json").body(Body::from(body.to_string())).unwrap();
    call(app(), req).await
}

fn typed<T: DeserializeOwned>(v: Value) -> T {
    serde_json::from_value(v).unwrap()
}

fn assert_error(got: (StatusCode, Value), status: u16, code: &str) {
    assert_eq!(got.0.as_u16(), status, "{}", got.1);
    let body: ErrorBody = typed(got.1);
    assert_eq!(body.code, code);
    assert!(!body.message.is_empty());
}

#[tokio::test]
async fn healthz_and_model_info() {
    let (status, body) = get("/healthz").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");

    let (status, body) = get("/api/v1/model").await;
    assert_eq!(status, StatusCode::OK);
    let summary: ModelSummary = typed(body.clone());
    let m = &fixture().model;
    assert_eq!(summary.counts.documents, m.doc_ids.len());
    assert_eq!(summary.counts.topics, m.n_topics());
    assert_eq!(summary.counts.vocabulary, m.vocab.len());
    assert_eq!(summary.bin_widths, vec![1, 2, 3, 4]);
    assert_eq!(body["window"], json!({"start": "2020-01-01", "end": "2022-06-30"}));
    assert_eq!(get("/api/v1/model").await.1, body);
}

#[tokio::test]
async fn search_ranks_the_matching_topic_first() {
    let f = fixture();
    let (status, body) = get("/api/v1/topics/search?q=genome%20sequencing&n=3").await;
    assert_eq!(status, StatusCode::OK);
    let r: SearchResult = typed(body);
    assert_eq!(r.status, SearchStatus::Ok);
    assert_eq!(r.topics[0].topic_id, f.topic_of[&3]);
    assert!(r.topics.len() <= 3);
    assert!(r.topics.iter().all(|c| c.terms.len() <= 50 && c.similarity.unwrap() > 0.0));

    let (_, body) = get("/api/v1/topics/search?q=qwertyuiop").await;
    let r: SearchResult = typed(body);
    assert_eq!(r.status, SearchStatus::NoKnownTerms);
    assert_eq!(r.unknown_terms, vec!["qwertyuiop".to_string()]);
    assert!(r.topics.is_empty());
}

#[tokio::test]
async fn search_rejects_empty_queries() {
    assert_error(get("/api/v1/topics/search?q=").await, 400, "no_searchable_terms");
    assert_error(get("/api/v1/topics/search").await, 400, "no_searchable_terms");
    assert_error(get("/api/v1/topics/search?q=the%20of").await, 400, "no_searchable_terms");
    assert_error(get("/api/v1/topics/search?q=x&n=many").await, 400, "bad_request");
}

#[tokio::test]
async fn search_caps_results_at_twenty() {
    // Same documents, but 25 topics that all weight one shared term.
    let mut m = (*fixture().model).clone();
    m.vocab = Vocabulary::new(vec!["shared".into()], vec![25]).unwrap();
    let indptr: Vec<u32> = (0..=25).collect();
    m.weights = SparseWeights::new(1, indptr, vec![0; 25], (1..=25).map(|v| v as f64).collect()).unwrap();
    m.topic_sizes = vec![10; 25];
    let app = router(Arc::new(m), &[]).unwrap();
    let (status, body) = call(app, Request::get("/api/v1/topics/search?q=shared&n=100").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    let r: SearchResult = typed(body);
    assert_eq!(r.topics.len(), 20);
    let ids: Vec<usize> = r.topics.iter().map(|c| c.topic_id).collect();
    assert_eq!(ids, (0..20).collect::<Vec<_>>(), "cosine is 1 for every topic; ties go to the smaller id");
}

#[tokio::test]
async fn series_matches_the_model() {
    let f = fixture();
    let t = f.topic_of[&1];
    let (status, body) = get(&format!("/api/v1/topics/{t}/series?bin_weeks=2")).await;
    assert_eq!(status, StatusCode::OK);
    let r: SeriesResponse = typed(body);
    let expected = f.model.topic_series(t, BinWidth::new(2).unwrap(), None).unwrap();
    assert_eq!(r.points, expected.points);
    assert_eq!((r.from, r.to), (d("2020-01-01"), d("2022-06-30")));
    assert_eq!(r.overlays, f.model.overlays);

    let (_, body) = get(&format!("/api/v1/topics/{t}/series?bin_weeks=4&from=2021-01-01&to=2021-12-31")).await;
    let r: SeriesResponse = typed(body);
    assert!(r.points.iter().all(|p| p.bin_start >= d("2021-01-01") && p.bin_start <= d("2021-12-31")));
    assert_eq!(r.overlays.cases.len(), 1);
    assert_eq!(r.overlays.events.len(), 1);
    assert_eq!(r.bin_weeks, 4);

    let (_, body) = get(&format!("/api/v1/topics/{t}/series")).await;
    assert_eq!(typed::<SeriesResponse>(body).bin_weeks, 2);
}

#[tokio::test]
async fn series_errors() {
    assert_error(get("/api/v1/topics/0/series?bin_weeks=5").await, 400, "bad_bin_width");
    assert_error(get("/api/v1/topics/0/series?bin_weeks=0").await, 400, "bad_bin_width");
    assert_error(get("/api/v1/topics/999/series?bin_weeks=2").await, 404, "topic_not_found");
    assert_error(get("/api/v1/topics/abc/series").await, 400, "bad_request");
    assert_error(get("/api/v1/topics/0/series?from=2021-05-01&to=2021-01-01").await, 400, "bad_window");
    let (status, body) = get("/api/v1/topics/0/series?from=2021-05-02&to=2021-05-03").await;
    assert_eq!(status, StatusCode::OK);
    assert!(typed::<SeriesResponse>(body).points.is_empty(), "no bin starts inside the range");
}

#[tokio::test]
async fn window_test_detects_the_step() {
    let f = fixture();
    let start = f.planted.spec.start;
    let (status, body) = post(
        "/api/v1/tests",
        json!({
            "topic_id": f.topic_of[&0],
            "window1": [add_months(start, 1), add_months(start, 14)],
            "window2": [add_months(start, 16), add_months(start, 29)],
            "bin_weeks": 2
        }),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let r: TestResponse = typed(body);
    assert!(r.result.significant);
    assert!(r.result.p_value < 0.01);
    assert_eq!(r.alpha, 0.05);
    assert_eq!(r.topic_id, f.topic_of[&0]);
    assert_eq!(r.window1, [add_months(start, 1), add_months(start, 14)]);
    assert!(!r.overlapping);

    let (_, body) = post(
        "/api/v1/tests",
        json!({"topic_id": f.topic_of[&0], "window1": ["2020-01-01", "2020-06-30"], "window2": ["2021-06-01", "2021-12-31"], "alpha": 0.001}),
    )
    .await;
    let r: TestResponse = typed(body);
    assert_eq!(r.result.alpha, 0.001);
    assert_eq!(r.bin_weeks, 2);
}

#[tokio::test]
async fn window_test_errors() {
    let f = fixture();
    let stepped = f.topic_of[&0];
    // Topic 0 never occurs, so every one of its intensities is 0.
    let mut m = (*f.model).clone();
    for ts in &mut m.series {
        let bins = ts.n_bins();
        let mut counts = vec![vec![0u32; bins]; ts.n_topics()];
        counts[1] = vec![3; bins];
        *ts = TopicTimeSeries::from_counts(ts.width(), ts.origin(), counts, vec![5; bins]).unwrap();
    }
    let constant = router(Arc::new(m), &[]).unwrap();
    let body = json!({"topic_id": 0, "window1": ["2020-01-01", "2020-06-30"], "window2": ["2020-07-01", "2020-12-31"]});
    let req = Request::post("/api/v1/tests").header(header::CONTENT_TYPE, "application/json").body(Body::from(body.to_string())).unwrap();
    assert_error(call(constant, req).await, 422, "degenerate_ties");
    assert_error(
        post("/api/v1/tests", json!({"topic_id": stepped, "window1": ["2020-01-01", "2020-01-05"], "window2": ["2020-07-01", "2020-12-31"]})).await,
        422,
        "window_too_narrow",
    );
    assert_error(
        post("/api/v1/tests", json!({"topic_id": 99, "window1": ["2020-01-01", "2020-06-30"], "window2": ["2020-07-01", "2020-12-31"]})).await,
        404,
        "topic_not_found",
    );
    assert_error(
        post("/api/v1/tests", json!({"topic_id": 0, "window1": ["2020-01-01", "2020-06-30"], "window2": ["2020-07-01", "2020-12-31"], "bin_weeks": 7})).await,
        400,
        "bad_bin_width",
    );
    assert_error(
        post("/api/v1/tests", json!({"topic_id": 0, "window1": ["2020-06-30", "2020-01-01"], "window2": ["2020-07-01", "2020-12-31"]})).await,
        400,
        "bad_window",
    );
    assert_error(
        post("/api/v1/tests", json!({"topic_id": 0, "window1": ["2020-01-01", "2020-06-30"], "window2": ["2020-07-01", "2020-12-31"], "alpha": 1.5})).await,
        400,
        "bad_alpha",
    );
    assert_error(post("/api/v1/tests", json!({"topic_id": 0})).await, 400, "bad_request");
    let req = Request::post("/api/v1/tests").header(header::CONTENT_TYPE, "application/json").body(Body::from("{not json")).unwrap();
    assert_error(call(app(), req).await, 400, "bad_request");
}

#[tokio::test]
async fn overlays_pass_through() {
    let (status, body) = get("/api/v1/overlays").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(typed::<OverlaySeries>(body), fixture().model.overlays);

    let mut m = (*fixture().model).clone();
    m.overlays = OverlaySeries::default();
    let app = router(Arc::new(m), &[]).unwrap();
    let (_, body) = call(app, Request::get("/api/v1/overlays").body(Body::empty()).unwrap()).await;
    assert_eq!(body, json!({"cases": [], "events": []}));
}

#[tokio::test]
async fn nearest_topics_by_embedding() {
    let f = fixture();
    let i = f.planted.truth.iter().position(|&t| t == 2).unwrap();
    let embedding = f.planted.embeddings.vectors().row(i).to_vec();
    let (status, body) = post("/api/v1/topics/nearest", json!({"embedding": embedding, "n": 2})).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let r: NearestResponse = typed(body);
    assert_eq!(r.topics.len(), 2);
    assert_eq!(r.topics[0].topic_id, f.topic_of[&2]);
    assert_error(post("/api/v1/topics/nearest", json!({"embedding": [1.0, 2.0]})).await, 400, "bad_embedding");
}

#[tokio::test]
async fn unknown_routes_and_methods() {
    assert_error(get("/api/v2/model").await, 404, "not_found");
    assert_error(post("/api/v1/model", json!({})).await, 405, "method_not_allowed");
}

#[tokio::test]
async fn responses_do_not_depend_on_request_order() {
    let uris = [
        "/api/v1/model",
        "/api/v1/topics/search?q=vaccine",
        "/api/v1/topics/1/series?bin_weeks=3",
        "/api/v1/topics/search?q=",
        "/api/v1/overlays",
    ];
    let mut forward = Vec::new();
    for u in uris {
        forward.push(get(u).await);
    }
    let mut backward = Vec::new();
    for u in uris.iter().rev() {
        backward.push(get(u).await);
    }
    backward.reverse();
    assert_eq!(forward, backward);
}

#[tokio::test]
async fn cors_headers_for_configured_origins() {
    let app = router(fixture().model.clone(), &["http://localhost:5173".to_string()]).unwrap();
    let req = Request::get("/api/v1/model").header(header::ORIGIN, "http://localhost:5173").body(Body::empty()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.headers()[header::ACCESS_CONTROL_ALLOW_ORIGIN], "http://localhost:5173");
    let req = Request::get("/api/v1/model").header(header::ORIGIN, "http://evil.example").body(Body::empty()).unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert!(!resp.headers().contains_key(header::ACCESS_CONTROL_ALLOW_ORIGIN));
    assert!(router(fixture().model.clone(), &["bad\norigin".to_string()]).is_err());
}

#[tokio::test]
async fn serves_over_tcp_and_reports_port_conflicts() {
    use tokio::io::{AsyncReadExt, AsyncWriteExt};

    let listener = topicscope_service::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(topicscope_service::serve(listener, app(), async {
        let _ = rx.await;
    }));

    let err = topicscope_service::bind(&addr.to_string()).await.unwrap_err();
    assert!(err.to_string().starts_with(&format!("cannot bind {addr}")), "{err}");

    let mut stream = tokio::net::TcpStream::connect(addr).await.unwrap();
    stream.write_all(b"GET /healthz HTTP/1.1\r\nHost: test\r\nConnection: close\r\n\r\n").await.unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).await.unwrap();
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");

    tx.send(()).unwrap();
    server.await.unwrap().unwrap();
}
