use std::path::Path;
use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use hashbridge_core::ingest::Corpus;
use hashbridge_core::rank::histogram;
use hashbridge_core::{train_corpus, ModelSnapshot, RankingOptions, ScoredHashtag, SearchEngine, TrainConfig};
use hashbridge_service::{export_csv, router, AppState, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn cfg() -> TrainConfig {
    TrainConfig {
        dim: 12,
        epochs: 3,
        walks_per_node: 3,
        walk_length: 10,
        window: 3,
        ..TrainConfig::default()
    }
}

fn snapshot() -> &'static ModelSnapshot {
    static SNAP: OnceLock<ModelSnapshot> = OnceLock::new();
    SNAP.get_or_init(|| {
        let corpus = Corpus::load(&fixture("posts.jsonl"), &fixture("categories.jsonl")).unwrap();
        train_corpus(&corpus, &cfg()).unwrap().0
    })
}

fn state() -> Arc<AppState> {
    Arc::new(AppState::with_snapshot(&ServiceConfig::default(), snapshot().clone()))
}

async fn call(state: &Arc<AppState>, method: &str, uri: &str) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri).body(Body::empty()).unwrap();
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn get_json(state: &Arc<AppState>, uri: &str) -> (StatusCode, Value) {
    let (s, b) = call(state, "GET", uri).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

fn engine() -> SearchEngine {
    SearchEngine::new(snapshot().clone(), Default::default())
}

#[tokio::test]
async fn unloaded_service_answers_503() {
    let st = Arc::new(AppState::new(&ServiceConfig::default()));
    for uri in [
        "/categories",
        "/topn?category=shoes",
        "/search?q=boot",
        "/trending?tag=x&from=0&to=1",
    ] {
        let (s, body) = get_json(&st, uri).await;
        assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE, "{uri}");
        assert_eq!(body["code"], "not_loaded");
        assert!(body["message"].is_string());
    }
}

#[tokio::test]
async fn categories_tree() {
    let st = state();
    let (s, a) = call(&st, "GET", "/categories").await;
    assert_eq!(s, StatusCode::OK);
    let tree: Value = serde_json::from_slice(&a).unwrap();
    fn size(v: &Value) -> usize {
        v.as_array().unwrap().iter().map(|n| 1 + size(&n["children"])).sum()
    }
    assert_eq!(size(&tree), 3);
    assert_eq!(tree.as_array().unwrap().len(), 1);
    assert_eq!(tree[0]["children"].as_array().unwrap().len(), 2);
    let (_, b) = call(&st, "GET", "/categories").await;
    assert_eq!(a, b);

    let corpus = Corpus::load(&fixture("posts.jsonl"), Path::new("/dev/null")).unwrap();
    let bare = train_corpus(&corpus, &cfg()).unwrap().0;
    let st = Arc::new(AppState::with_snapshot(&ServiceConfig::default(), bare));
    assert_eq!(get_json(&st, "/categories").await.1, Value::Array(vec![]));
}

#[tokio::test]
async fn topn_matches_library() {
    let st = state();
    let e = engine();
    for (uri, opts) in [
        ("/topn?category=shoes&n=10", RankingOptions::top(10)),
        (
            "/topn?category=beauty&n=5&min_posts=2&max_posts=4",
            RankingOptions {
                top_n: 5,
                min_post_count: Some(2),
                max_post_count: Some(4),
                ..RankingOptions::default()
            },
        ),
        ("/topn?category=fashion&n=1000", RankingOptions::top(1000)),
    ] {
        let (s, body) = get_json(&st, uri).await;
        assert_eq!(s, StatusCode::OK);
        let cat = uri.split("category=").nth(1).unwrap().split('&').next().unwrap();
        let lib = e.rank_for_category(cat, &opts).unwrap();
        assert_eq!(body, serde_json::to_value(&lib).unwrap(), "{uri}");
        let parsed: Vec<ScoredHashtag> = serde_json::from_value(body).unwrap();
        assert!(parsed.windows(2).all(|w| w[0].rerank_score >= w[1].rerank_score));
    }
    let all = e
        .rank_for_category("fashion", &RankingOptions::top(usize::MAX))
        .unwrap();
    let (_, body) = get_json(&st, "/topn?category=fashion&n=1000").await;
    assert_eq!(body.as_array().unwrap().len(), all.len());
    assert_eq!(get_json(&st, "/topn?category=shoes&n=0").await.1, Value::Array(vec![]));
}

#[tokio::test]
async fn topn_errors() {
    let st = state();
    for (uri, status, code) in [
        ("/topn?category=shoes&n=ten", StatusCode::BAD_REQUEST, "bad_request"),
        ("/topn?category=shoes&n=-1", StatusCode::BAD_REQUEST, "bad_request"),
        ("/topn?n=3", StatusCode::BAD_REQUEST, "bad_request"),
        (
            "/topn?category=shoes&min_posts=5&max_posts=1",
            StatusCode::BAD_REQUEST,
            "invalid_options",
        ),
        ("/topn?category=hats", StatusCode::NOT_FOUND, "unknown_category"),
        ("/export.csv?category=hats", StatusCode::NOT_FOUND, "unknown_category"),
    ] {
        let (s, body) = get_json(&st, uri).await;
        assert_eq!((s, body["code"].as_str()), (status, Some(code)), "{uri}");
    }
}

#[tokio::test]
async fn search_panels_mirror_scored_rows() {
    let st = state();
    let (s, body) = get_json(&st, "/search?q=leather%20boot&n=8").await;
    assert_eq!(s, StatusCode::OK);
    let panels = body.as_array().unwrap();
    assert!(!panels.is_empty());
    let lib = engine().search("leather boot", &RankingOptions::top(8)).unwrap();
    assert_eq!(panels.len(), lib.len());
    for (p, r) in panels.iter().zip(&lib) {
        assert_eq!(p["hashtag"], r.hashtag.as_str());
        assert_eq!(p["score"].as_f64().unwrap(), r.rerank_score);
        assert_eq!(p["similarity"].as_f64().unwrap(), r.similarity);
        assert_eq!(p["index_id"].as_u64().unwrap(), r.index_ref as u64);
        assert_eq!(p["post_count"].as_u64().unwrap(), r.post_count);
        assert!(p["search_volume"].is_null());
        let rec = snapshot().index.record(r.index_ref).unwrap();
        let ts: Vec<i64> = p["timestamps"]
            .as_array()
            .unwrap()
            .iter()
            .map(|t| t.as_i64().unwrap())
            .collect();
        assert_eq!(ts, rec.timestamps.iter().rev().take(5).copied().collect::<Vec<_>>());
    }
    let scores: Vec<f64> = panels.iter().map(|p| p["score"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    assert_eq!(get_json(&st, "/search?q=xylophone").await.1, Value::Array(vec![]));
    assert_eq!(get_json(&st, "/search?q=").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get_json(&st, "/search").await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn trending_endpoint() {
    let st = state();
    let rec = snapshot().index.records().max_by_key(|r| r.post_count).unwrap().clone();
    let tag = rec.text.trim_start_matches('#');
    let (from, to) = (rec.timestamps[0], rec.timestamps.last().unwrap() + 1);
    let (s, body) = get_json(&st, &format!("/trending?tag={tag}&from={from}&to={to}")).await;
    assert_eq!(s, StatusCode::OK);
    let buckets: Vec<u64> = body["buckets"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b.as_u64().unwrap())
        .collect();
    assert_eq!(buckets.iter().sum::<u64>(), rec.post_count);
    assert_eq!(buckets, histogram(&rec.timestamps, from, to).unwrap().to_vec());

    let (_, empty) = get_json(&st, &format!("/trending?tag=%23{tag}&from=0&to=1000")).await;
    assert_eq!(empty["trend"].as_f64(), Some(0.0));
    assert!(empty["buckets"].as_array().unwrap().iter().all(|b| b == 0));

    let (s, body) = get_json(&st, &format!("/trending?tag={tag}&from=10&to=10")).await;
    assert_eq!(
        (s, body["code"].as_str()),
        (StatusCode::BAD_REQUEST, Some("invalid_window"))
    );
    assert_eq!(
        get_json(&st, "/trending?tag=NoSuchTag&from=0&to=10").await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        get_json(&st, &format!("/trending?tag={tag}&from=x&to=10")).await.0,
        StatusCode::BAD_REQUEST
    );
}

#[tokio::test]
async fn export_round_trips_topn() {
    let st = state();
    let (s, body) = call(&st, "GET", "/export.csv?category=beauty&n=12").await;
    assert_eq!(s, StatusCode::OK);
    let (_, json) = get_json(&st, "/topn?category=beauty&n=12").await;
    let mut rdr = csv::Reader::from_reader(body.as_slice());
    assert_eq!(
        rdr.headers().unwrap(),
        vec!["hashtag", "similarity", "rerank_score", "post_count"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let arr = json.as_array().unwrap();
    assert_eq!(rows.len(), arr.len());
    for (row, j) in rows.iter().zip(arr) {
        assert_eq!(&row[0], j["hashtag"].as_str().unwrap());
        assert_eq!(row[1].parse::<f64>().unwrap(), j["similarity"].as_f64().unwrap());
        assert_eq!(row[2].parse::<f64>().unwrap(), j["rerank_score"].as_f64().unwrap());
        assert_eq!(row[3].parse::<u64>().unwrap(), j["post_count"].as_u64().unwrap());
    }
    let (_, header_only) = call(&st, "GET", "/export.csv?category=beauty&n=0").await;
    assert_eq!(
        String::from_utf8(header_only).unwrap(),
        "hashtag,similarity,rerank_score,post_count\n"
    );
}

#[test]
fn csv_quotes_commas_and_quotes() {
    let row = ScoredHashtag {
        hashtag: "#a,\"b\"".into(),
        similarity: 0.5,
        rerank_score: 1.0,
        post_count: 3,
        index_ref: 0,
        search_volume: None,
    };
    let out = export_csv(&[row]);
    assert_eq!(out.lines().nth(1), Some("\"#a,\"\"b\"\"\",0.5,1,3"));
}

#[tokio::test]
async fn reload_swaps_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("snap.bin");
    let config = ServiceConfig {
        snapshot: Some(path.clone()),
        ..ServiceConfig::default()
    };
    let st = Arc::new(AppState::new(&config));
    assert_eq!(
        call(&st, "POST", "/admin/reload").await.0,
        StatusCode::INTERNAL_SERVER_ERROR
    );
    assert_eq!(get_json(&st, "/categories").await.0, StatusCode::SERVICE_UNAVAILABLE);
    snapshot().save(&path).unwrap();
    let (s, body) = call(&st, "POST", "/admin/reload").await;
    assert_eq!(s, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    assert_eq!(get_json(&st, "/categories").await.0, StatusCode::OK);
    std::fs::write(&path, b"garbage").unwrap();
    let (s, body) = get_json(&st, "/admin/reload").await;
    assert_eq!(s, StatusCode::METHOD_NOT_ALLOWED, "{body}");
    let (s, body) = call(&st, "POST", "/admin/reload").await;
    assert_eq!(s, StatusCode::INTERNAL_SERVER_ERROR);
    assert!(String::from_utf8_lossy(&body).contains("load_failed"));
    // The previous engine keeps serving.
    assert_eq!(get_json(&st, "/topn?category=shoes&n=3").await.0, StatusCode::OK);
    let no_path = state();
    assert_eq!(call(&no_path, "POST", "/admin/reload").await.0, StatusCode::CONFLICT);
}
