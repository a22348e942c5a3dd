use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use tower::ServiceExt;

use pathnat_cli::serve::{router, AnnotationState};
use pathnat_core::dataset::{
    build_questionnaire, default_qc_good_paths, read_judgments, sample_pairs, Answer, Choice, JudgmentStore,
    PathPair, Questionnaire,
};
use pathnat_core::graph::{Graph, RelationTable};

fn world_graph() -> Graph {
    let edges = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data/world/edges.tsv");
    Graph::load(edges, RelationTable::conceptnet()).unwrap()
}

fn pool(graph: &Graph) -> Vec<PathPair> {
    let paths = graph.sample_paths(None, 4, 40, 1).unwrap();
    sample_pairs(&paths, 100, 2, "p").unwrap()
}

fn state(store: JudgmentStore) -> (Arc<AnnotationState>, Graph, Vec<PathPair>) {
    let graph = world_graph();
    let pairs = pool(&graph);
    let state = AnnotationState::new(pairs.clone(), default_qc_good_paths(), world_graph(), store);
    (Arc::new(state), graph, pairs)
}

async fn call(state: &Arc<AnnotationState>, req: Request<Body>) -> (StatusCode, String) {
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn post(uri: &str, answers: &[Answer]) -> Request<Body> {
    let body: String = answers.iter().map(|a| serde_json::to_string(a).unwrap() + "\n").collect();
    Request::post(uri).body(Body::from(body)).unwrap()
}

/// Answers every item, getting QC items right unless `fail_qc`.
fn answers(q: &Questionnaire, fail_qc: bool) -> Vec<Answer> {
    q.items
        .iter()
        .map(|it| Answer {
            item_id: it.id.clone(),
            choice: match it.qc_answer {
                Some(good) if fail_qc => good.flipped(),
                Some(good) => good,
                None => Choice::First,
            },
        })
        .collect()
}

#[tokio::test]
async fn delivered_questionnaire_has_no_qc_marks() {
    let (state, _, _) = state(JudgmentStore::in_memory());
    let (status, body) = call(&state, get("/questionnaire?seed=4")).await;
    assert_eq!(status, StatusCode::OK);
    let lines: Vec<&str> = body.lines().collect();
    assert_eq!(lines.len(), 73);
    for l in &lines {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["id", "left", "right"]);
    }
    assert!(!body.contains("qc"));
    assert!(!body.contains("pair_id"));
    let (_, again) = call(&state, get("/questionnaire?seed=4")).await;
    assert_eq!(body, again);
}

#[tokio::test]
async fn accepted_sheet_stores_73_judgments() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("store.jsonl");
    let (state, graph, pairs) = state(JudgmentStore::open(&file).unwrap());
    let q = build_questionnaire(&pairs, &default_qc_good_paths(), &graph, 7).unwrap();

    let (status, body) = call(&state, post("/response?seed=7&annotator=ann1", &answers(&q, false))).await;
    assert_eq!(status, StatusCode::OK);
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["verdict"], "accept");
    assert_eq!(v["stored"], 73);
    assert_eq!(state.store().len(), 73);
    let on_disk = read_judgments(&std::fs::read_to_string(&file).unwrap(), None).unwrap();
    assert_eq!(on_disk.len(), 73);
    assert!(on_disk.iter().all(|j| j.annotator == "ann1"));

    let (_, progress) = call(&state, get("/progress")).await;
    let p: serde_json::Value = serde_json::from_str(&progress).unwrap();
    assert_eq!(p["judgments"], 73);
    assert_eq!(p["accepted_sheets"], 1);
    assert_eq!(p["rejected_sheets"], 0);
}

#[tokio::test]
async fn failed_qc_stores_nothing() {
    let (state, graph, pairs) = state(JudgmentStore::in_memory());
    let q = build_questionnaire(&pairs, &default_qc_good_paths(), &graph, 3).unwrap();
    let (status, body) = call(&state, post("/response?seed=3&annotator=ann2", &answers(&q, true))).await;
    assert_eq!(status, StatusCode::OK);
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["verdict"], "reject");
    assert_eq!(v["reason"], "qc_failed");
    assert_eq!(v["wrong"], 13);
    assert_eq!(v["stored"], 0);
    assert_eq!(state.store().len(), 0);

    let mut partial = answers(&q, false);
    partial.pop();
    let (_, body) = call(&state, post("/response?seed=3&annotator=ann2", &partial)).await;
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["reason"], "incomplete");
    let (_, progress) = call(&state, get("/progress")).await;
    let p: serde_json::Value = serde_json::from_str(&progress).unwrap();
    assert_eq!(p["judgments"], 0);
    assert_eq!(p["rejected_sheets"], 2);
}

#[tokio::test]
async fn malformed_requests_are_rejected() {
    let (state, _, _) = state(JudgmentStore::in_memory());
    let (status, _) = call(&state, get("/questionnaire?seed=abc")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let req = Request::post("/response?seed=1&annotator=x").body(Body::from("not json\n")).unwrap();
    let (status, body) = call(&state, req).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["error"]["kind"], "parse");
    let (status, _) = call(&state, post("/response?seed=1&annotator=%20", &[])).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}
