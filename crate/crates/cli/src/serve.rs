//! HTTP annotation service.
//!
//! * `GET /questionnaire?seed=N` returns the 73 delivered items as JSON lines.
//! * `POST /response?seed=N&annotator=ID` takes one answer per line and
//!   returns the verdict; accepted sheets are stored as judgments.
//! * `GET /progress` reports stored judgments and sheet counts.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;

use pathnat_core::dataset::{build_questionnaire, read_pairs, Answer, JudgmentStore, PathPair, Questionnaire, Verdict};
use pathnat_core::graph::{Graph, Path};

use crate::artifact::{read_text, CliError, CliResult};
use crate::{qc_good_paths, ServeArgs};

pub struct AnnotationState {
    pairs: Vec<PathPair>,
    qc_good: Vec<Path>,
    graph: Graph,
    store: JudgmentStore,
    questionnaires: Mutex<HashMap<u64, Arc<Questionnaire>>>,
    accepted: AtomicUsize,
    rejected: AtomicUsize,
}

impl AnnotationState {
    pub fn new(pairs: Vec<PathPair>, qc_good: Vec<Path>, graph: Graph, store: JudgmentStore) -> Self {
        AnnotationState {
            pairs,
            qc_good,
            graph,
            store,
            questionnaires: Mutex::new(HashMap::new()),
            accepted: AtomicUsize::new(0),
            rejected: AtomicUsize::new(0),
        }
    }

    pub fn store(&self) -> &JudgmentStore {
        &self.store
    }

    /// Questionnaires are a pure function of the seed; built once and cached.
    fn questionnaire(&self, seed: u64) -> CliResult<Arc<Questionnaire>> {
        if let Some(q) = self.questionnaires.lock().expect("cache lock").get(&seed) {
            return Ok(q.clone());
        }
        let q = Arc::new(build_questionnaire(&self.pairs, &self.qc_good, &self.graph, seed)?);
        self.questionnaires.lock().expect("cache lock").insert(seed, q.clone());
        Ok(q)
    }
}

pub fn router(state: Arc<AnnotationState>) -> Router {
    Router::new()
        .route("/questionnaire", get(get_questionnaire))
        .route("/response", post(post_response))
        .route("/progress", get(get_progress))
        .with_state(state)
}

fn error_response(status: StatusCode, e: CliError) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], e.record()).into_response()
}

fn ndjson(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response()
}

#[derive(Deserialize)]
struct SeedQuery {
    seed: u64,
}

async fn get_questionnaire(State(state): State<Arc<AnnotationState>>, Query(q): Query<SeedQuery>) -> Response {
    match state.questionnaire(q.seed) {
        Ok(questionnaire) => {
            let mut body = String::new();
            for item in questionnaire.delivered() {
                body.push_str(&serde_json::to_string(&item).expect("item serializes"));
                body.push('\n');
            }
            ndjson(body)
        }
        Err(e) => error_response(StatusCode::UNPROCESSABLE_ENTITY, e),
    }
}

#[derive(Deserialize)]
struct ResponseQuery {
    seed: u64,
    annotator: String,
}

async fn post_response(
    State(state): State<Arc<AnnotationState>>,
    Query(q): Query<ResponseQuery>,
    body: String,
) -> Response {
    if q.annotator.trim().is_empty() {
        return error_response(StatusCode::BAD_REQUEST, CliError::usage("annotator must not be empty"));
    }
    let answers: Result<Vec<Answer>, _> = body
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect();
    let answers = match answers {
        Ok(a) => a,
        Err(e) => return error_response(StatusCode::BAD_REQUEST, CliError::new("parse", e.to_string())),
    };
    let questionnaire = match state.questionnaire(q.seed) {
        Ok(x) => x,
        Err(e) => return error_response(StatusCode::UNPROCESSABLE_ENTITY, e),
    };
    let verdict = pathnat_core::dataset::validate_response(&questionnaire, &answers);
    let mut stored = 0;
    if verdict == Verdict::Accept {
        let ts = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let judgments = match questionnaire.judgments(&answers, &q.annotator, ts) {
            Ok(j) => j,
            Err(e) => return error_response(StatusCode::UNPROCESSABLE_ENTITY, e.into()),
        };
        stored = judgments.len();
        if let Err(e) = state.store.append(judgments) {
            return error_response(StatusCode::INTERNAL_SERVER_ERROR, e.into());
        }
        state.accepted.fetch_add(1, Ordering::Relaxed);
    } else {
        state.rejected.fetch_add(1, Ordering::Relaxed);
    }
    let mut out = serde_json::to_value(&verdict).expect("verdict serializes");
    out["stored"] = stored.into();
    Json(out).into_response()
}

async fn get_progress(State(state): State<Arc<AnnotationState>>) -> Response {
    Json(serde_json::json!({
        "judgments": state.store.len(),
        "accepted_sheets": state.accepted.load(Ordering::Relaxed),
        "rejected_sheets": state.rejected.load(Ordering::Relaxed),
    }))
    .into_response()
}

pub fn serve(a: ServeArgs) -> CliResult<()> {
    let graph = a.graph.load()?;
    let pairs = read_pairs(&read_text(&a.pairs)?)?;
    let qc_good = qc_good_paths(a.qc_good.as_ref())?;
    let store = match &a.store {
        Some(p) => JudgmentStore::open(p)?,
        None => JudgmentStore::in_memory(),
    };
    let state = Arc::new(AnnotationState::new(pairs, qc_good, graph, store));
    // fail fast if the pool cannot fill a questionnaire
    state.questionnaire(0)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::new("io", e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&a.listen)
            .await
            .map_err(|e| CliError::new("io", format!("bind {}: {e}", a.listen)))?;
        let addr = listener.local_addr().map_err(|e| CliError::new("io", e.to_string()))?;
        println!("{}", serde_json::json!({ "listening": addr.to_string() }));
        axum::serve(listener, router(state))
            .await
            .map_err(|e| CliError::new("io", e.to_string()))
    })
}
