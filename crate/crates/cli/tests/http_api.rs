use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::{Arc, RwLock};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use tweetsense::wsd::AnnotationService;
use tweetsense::{Cluster, EventCategory, KeywordLexicon, WsdConfig, WsdSession};
use tweetsense_cli::server::router;

const PRE: EventCategory = EventCategory::Pre;

fn fixture(journal: &Path) -> AnnotationService {
    let mut texts = HashMap::new();
    let mut queues = BTreeMap::new();
    let mut keyword_tweets: BTreeMap<EventCategory, BTreeSet<String>> = BTreeMap::new();
    for (cat, word, n) in [(PRE, "shelter", 30usize), (EventCategory::Uti, "power", 3)] {
        let mut clusters = Vec::new();
        for c in 0..n {
            let members: Vec<String> = (0..8).map(|m| format!("{}-{c:02}-{m}", cat.code())).collect();
            for (m, id) in members.iter().enumerate() {
                texts.insert(id.clone(), format!("heavy {word} number {m} in cluster {c}"));
                keyword_tweets.entry(cat).or_default().insert(id.clone());
            }
            clusters.push(Cluster {
                id: format!("{}/c{c:04}", cat.code()),
                members,
                top_words: vec![word.to_string(), "heavy".into()],
            });
        }
        queues.insert(cat, clusters);
    }
    let session = WsdSession::new(WsdConfig::default(), 11, KeywordLexicon::default(), queues, texts).unwrap();
    AnnotationService::open(session, journal, keyword_tweets).unwrap()
}

fn app(journal: &Path) -> Router {
    router(Arc::new(RwLock::new(fixture(journal))))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn decision(cluster_id: &str, category: &str, verdict: Value, at: i64) -> Value {
    json!({
        "cluster_id": cluster_id,
        "category": category,
        "verdict": verdict,
        "annotator_id": "tester",
        "decided_at": at,
    })
}

#[tokio::test]
async fn categories_report_progress() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir.path().join("decisions.jsonl"));
    let (s, v) = call(&app, Method::GET, "/categories", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["all_done"], false);
    let cats = v["categories"].as_array().unwrap();
    assert_eq!(cats.len(), 2);
    assert_eq!(cats[0]["category"], "PRE");
    assert_eq!(cats[0]["total_clusters"], 30);
    assert_eq!(cats[0]["pertinent"], 0);
}

#[tokio::test]
async fn twenty_pertinent_verdicts_finish_a_category() {
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("decisions.jsonl");
    let app = app(&journal);
    for i in 0..20 {
        let (s, view) = call(&app, Method::GET, "/queue/next?category=PRE", None).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(view["status"], "cluster");
        assert_eq!(view["samples"].as_array().unwrap().len(), 5);
        let sample = &view["samples"][0];
        let text = sample["text"].as_str().unwrap();
        let h = &sample["highlights"][0];
        let (a, b) = (h["start"].as_u64().unwrap() as usize, h["end"].as_u64().unwrap() as usize);
        assert_eq!(&text[a..b], "shelter");
        let id = view["cluster_id"].as_str().unwrap();
        let (s, p) = call(&app, Method::POST, "/decision", Some(decision(id, "PRE", json!({"kind": "pertinent"}), i))).await;
        assert_eq!(s, StatusCode::OK, "{p}");
        assert_eq!(p["pertinent"], i + 1);
    }
    let (_, view) = call(&app, Method::GET, "/queue/next?category=pre", None).await;
    assert_eq!(view, json!({"status": "done", "category": "PRE", "reason": "target_reached"}));
    let (_, v) = call(&app, Method::GET, "/categories", None).await;
    assert_eq!(v["categories"][0]["done"], true);
    assert_eq!(std::fs::read_to_string(&journal).unwrap().lines().count(), 20);
}

#[tokio::test]
async fn duplicate_submission_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("decisions.jsonl");
    let app = app(&journal);
    let d = decision("PRE/c0000", "PRE", json!({"kind": "other_sense"}), 1);
    let (s, _) = call(&app, Method::POST, "/decision", Some(d.clone())).await;
    assert_eq!(s, StatusCode::OK);
    let (s, body) = call(&app, Method::POST, "/decision", Some(d)).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert!(body["error"].as_str().unwrap().contains("already decided"));
    let (_, v) = call(&app, Method::GET, "/categories", None).await;
    assert_eq!(v["categories"][0]["decided"], 1);
    assert_eq!(std::fs::read_to_string(&journal).unwrap().lines().count(), 1);
}

#[tokio::test]
async fn reload_serves_the_same_samples() {
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("decisions.jsonl");
    let first = app(&journal);
    call(&first, Method::POST, "/decision", Some(decision("PRE/c0000", "PRE", json!({"kind": "pertinent"}), 1))).await;
    let (_, before) = call(&first, Method::GET, "/queue/next?category=PRE", None).await;
    drop(first);
    let second = app(&journal);
    let (_, after) = call(&second, Method::GET, "/queue/next?category=PRE", None).await;
    assert_eq!(before["cluster_id"], "PRE/c0001");
    assert_eq!(before, after);
    let (_, v) = call(&second, Method::GET, "/categories", None).await;
    assert_eq!(v["categories"][0]["pertinent"], 1);
}

#[tokio::test]
async fn malformed_requests() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir.path().join("decisions.jsonl"));
    assert_eq!(call(&app, Method::GET, "/queue/next?category=XYZ", None).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, Method::GET, "/queue/next", None).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, Method::GET, "/queue/next?category=HAZ", None).await.0, StatusCode::NOT_FOUND);
    let unknown = decision("PRE/c9999", "PRE", json!({"kind": "pertinent"}), 1);
    assert_eq!(call(&app, Method::POST, "/decision", Some(unknown)).await.0, StatusCode::NOT_FOUND);
    let wrong_cat = decision("PRE/c0000", "UTI", json!({"kind": "pertinent"}), 1);
    assert_eq!(call(&app, Method::POST, "/decision", Some(wrong_cat)).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    let same = decision("PRE/c0000", "PRE", json!({"kind": "other_category", "category": "PRE"}), 1);
    assert_eq!(call(&app, Method::POST, "/decision", Some(same)).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, body) = call(&app, Method::POST, "/decision", Some(json!({"cluster_id": "PRE/c0000"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(body["error"].is_string());
}

#[tokio::test]
async fn export_assembles_labels() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir.path().join("decisions.jsonl"));
    call(&app, Method::POST, "/decision", Some(decision("PRE/c0000", "PRE", json!({"kind": "pertinent"}), 1))).await;
    call(&app, Method::POST, "/decision", Some(decision("PRE/c0001", "PRE", json!({"kind": "other_sense"}), 2))).await;
    let relabel = decision("UTI/c0000", "UTI", json!({"kind": "other_category", "category": "HAZ"}), 3);
    call(&app, Method::POST, "/decision", Some(relabel)).await;
    let (s, v) = call(&app, Method::GET, "/export", None).await;
    assert_eq!(s, StatusCode::OK);
    let labeled = v["labeled"].as_array().unwrap();
    assert_eq!(labeled.len(), 24);
    let label_of = |id: &str| labeled.iter().find(|e| e["tweet_id"] == id).unwrap()["labels"].clone();
    assert_eq!(label_of("PRE-00-3"), json!(["PRE"]));
    assert_eq!(label_of("PRE-01-3"), json!(["OTHER"]));
    assert_eq!(label_of("UTI-00-0"), json!(["HAZ"]));
    let pre = &v["report"]["categories"][0];
    assert_eq!(pre["keyword_tweets"], 240);
    assert_eq!(pre["positives"], 8);
    assert_eq!(pre["removed"], 224);
}
