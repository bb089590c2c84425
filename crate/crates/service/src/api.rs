//! HTTP routes. Every body, success or error, is canonical JSON so that
//! repeated reads return identical bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddr;
use std::sync::{Arc, PoisonError, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::Router;
use compass_core::micro_assessment::LevelInterval;
use compass_core::storage::{
    load_domain_model, load_item_pool, save_domain_model, save_individual, save_item_pool, to_canonical_bytes,
    PlanDocument,
};
use compass_core::{
    challenge_check, overlay, recommend_path, recommend_resources, start_session, AssessmentItem, ChallengeConfig,
    DecayParams, DomainModel, Error, EvidenceRecord, ItemPool, LoStatus, SessionConfig,
    SessionResult, SessionState, SessionStatus, TaxonomyCell, Timestamp, ValidationReport,
};
use serde::{Deserialize, Serialize};

use crate::store::Store;

pub type Clock = Arc<dyn Fn() -> Timestamp + Send + Sync>;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<RwLock<Store>>,
    pub clock: Clock,
    pub params: DecayParams,
}

impl AppState {
    pub fn new(store: Store) -> Self {
        AppState { store: Arc::new(RwLock::new(store)), clock: Arc::new(system_now), params: DecayParams::default() }
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }
}

pub fn system_now() -> Timestamp {
    Timestamp(chrono::Utc::now().timestamp())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/models/domain/{id}", put(put_domain).get(get_domain))
        .route("/models/items/{id}", put(put_items).get(get_items))
        .route("/learners/{id}", get(get_learner))
        .route("/learners/{id}/evidence", post(post_evidence))
        .route("/learners/{id}/overlay", get(get_overlay))
        .route("/learners/{id}/sessions", post(post_session))
        .route("/learners/{id}/recommendations", get(get_recommendations))
        .route("/learners/{id}/challenge", get(get_challenge))
        .route("/sessions/{sid}/next", get(get_next))
        .route("/sessions/{sid}/answers", post(post_answer))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "NOT_FOUND", "no such endpoint") })
        .with_state(state)
}

/// Serves until the listener fails or the future is dropped.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

/// Starts the service on a background thread with its own runtime and
/// returns the bound address.
pub fn spawn(addr: SocketAddr, state: AppState) -> std::io::Result<SocketAddr> {
    let std_listener = std::net::TcpListener::bind(addr)?;
    std_listener.set_nonblocking(true)?;
    let local = std_listener.local_addr()?;
    let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
    std::thread::spawn(move || {
        runtime.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(std_listener).expect("listener");
            if let Err(e) = serve(listener, state).await {
                tracing::error!("server stopped: {e}");
            }
        })
    });
    Ok(local)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: String,
    message: String,
    report: Option<ValidationReport>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<&'a ValidationReport>,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { status, code: code.to_owned(), message: message.into(), report: None }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "BAD_PARAMETER", message)
    }

    fn not_found(what: &str, id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "NOT_FOUND", format!("{what} {id} does not exist"))
    }

    fn invalid(report: ValidationReport) -> Self {
        ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            code: "VALIDATION_ERROR".into(),
            message: report.to_string(),
            report: Some(report),
        }
    }

    fn io(e: std::io::Error) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "IO_ERROR", e.to_string())
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::UnknownConcept(_) | Error::UnknownLo(_) => StatusCode::NOT_FOUND,
            Error::MergeConflict { .. }
            | Error::DuplicateEvidence { .. }
            | Error::WrongItem { .. }
            | Error::SessionClosed
            | Error::Exhausted => StatusCode::CONFLICT,
            Error::MergeCycle(_) | Error::NoItems(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Error::Invalid(report) => return ApiError::invalid(report.clone()),
            Error::BadResponse { .. }
            | Error::BadParameter(_)
            | Error::Parse { .. }
            | Error::Schema { .. }
            | Error::Version(_) => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = BTreeMap::from([(
            "error",
            ErrorBody { code: &self.code, message: &self.message, report: self.report.as_ref() },
        )]);
        (self.status, [(header::CONTENT_TYPE, "application/json")], to_canonical_bytes(&body)).into_response()
    }
}

type ApiResult<T = Response> = Result<T, ApiError>;

fn json_bytes(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

fn json<T: Serialize>(value: &T) -> Response {
    json_bytes(to_canonical_bytes(value))
}

fn check_id(id: &str) -> ApiResult<()> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.len() <= 128
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.'));
    if ok {
        Ok(())
    } else {
        Err(ApiError::bad_request(format!("invalid id {id:?}")))
    }
}

fn read<'a>(state: &'a AppState) -> std::sync::RwLockReadGuard<'a, Store> {
    state.store.read().unwrap_or_else(PoisonError::into_inner)
}

fn write<'a>(state: &'a AppState) -> std::sync::RwLockWriteGuard<'a, Store> {
    state.store.write().unwrap_or_else(PoisonError::into_inner)
}

type Params = Query<BTreeMap<String, String>>;

fn param<'a>(q: &'a BTreeMap<String, String>, name: &str) -> ApiResult<&'a str> {
    q.get(name).map(String::as_str).ok_or_else(|| ApiError::bad_request(format!("missing query parameter {name}")))
}

fn csv(value: Option<&String>) -> BTreeSet<String> {
    value
        .map(|v| v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_owned).collect())
        .unwrap_or_default()
}

fn now_param(state: &AppState, value: Option<&String>) -> ApiResult<Timestamp> {
    match value {
        Some(v) => Timestamp::parse(v).map_err(|e| ApiError::bad_request(format!("now: {e}"))),
        None => Ok((state.clock)()),
    }
}

fn domain<'s>(store: &'s Store, id: &str) -> ApiResult<&'s DomainModel> {
    store.domains.get(id).ok_or_else(|| ApiError::not_found("domain model", id))
}

/// Course concepts from `concepts=`, defaulting to every concept of the model.
fn course_of(model: &DomainModel, q: &BTreeMap<String, String>) -> ApiResult<BTreeSet<String>> {
    let course = csv(q.get("concepts"));
    if course.is_empty() {
        return Ok(model.concepts.keys().cloned().collect());
    }
    for id in &course {
        model.concept(id)?;
    }
    Ok(course)
}

async fn put_domain(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    check_id(&id)?;
    let model = load_domain_model(&body)?.value;
    if model.module_id != id {
        return Err(ApiError::bad_request(format!("module_id {} does not match path id {id}", model.module_id)));
    }
    let report = model.validate();
    if !report.ok {
        return Err(ApiError::invalid(report));
    }
    write(&state).put_domain(model).map_err(ApiError::io)?;
    Ok(json(&report))
}

async fn get_domain(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let store = read(&state);
    Ok(json_bytes(save_domain_model(domain(&store, &id)?)))
}

async fn put_items(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    check_id(&id)?;
    let pool = load_item_pool(&body)?.value;
    if pool.pool_id != id {
        return Err(ApiError::bad_request(format!("pool_id {} does not match path id {id}", pool.pool_id)));
    }
    let mut store = write(&state);
    let module = pool
        .module_id
        .as_deref()
        .ok_or_else(|| ApiError::bad_request("item pool must name its domain model in module_id"))?;
    let report = pool.validate(domain(&store, module)?);
    if !report.ok {
        return Err(ApiError::invalid(report));
    }
    store.put_pool(pool).map_err(ApiError::io)?;
    Ok(json(&report))
}

async fn get_items(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let store = read(&state);
    let pool = store.pools.get(&id).ok_or_else(|| ApiError::not_found("item pool", &id))?;
    Ok(json_bytes(save_item_pool(pool)))
}

async fn get_learner(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    check_id(&id)?;
    Ok(json_bytes(save_individual(&read(&state).learner(&id))))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EvidenceBody {
    List(Vec<EvidenceRecord>),
    Wrapped { evidence: Vec<EvidenceRecord> },
}

#[derive(Serialize)]
struct EvidenceAck {
    learner_id: String,
    appended: usize,
    evidence_count: usize,
}

async fn post_evidence(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    check_id(&id)?;
    let records = match serde_json::from_slice::<EvidenceBody>(&body) {
        Ok(EvidenceBody::List(r) | EvidenceBody::Wrapped { evidence: r }) => r,
        Err(e) => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "SCHEMA_ERROR",
                format!("expected a list of evidence records: {e}"),
            ))
        }
    };
    let mut store = write(&state);
    let mut learner = store.learner(&id);
    let appended = records.len();
    for rec in records {
        learner.insert(rec)?;
    }
    let ack = EvidenceAck { learner_id: id, appended, evidence_count: learner.evidence.len() };
    store.put_learner(learner).map_err(ApiError::io)?;
    Ok(json(&ack))
}

async fn get_overlay(State(state): State<AppState>, Path(id): Path<String>, Query(q): Params) -> ApiResult {
    check_id(&id)?;
    let now = now_param(&state, q.get("now"))?;
    let store = read(&state);
    let model = domain(&store, param(&q, "course")?)?;
    let course = course_of(model, &q)?;
    let report = overlay(model, &course, &store.learner(&id), now, &state.params)?;
    Ok(json(&report))
}

/// An item as shown to a learner.
#[derive(Serialize)]
struct PublicItem<'a> {
    id: &'a str,
    lo_id: &'a str,
    cell: TaxonomyCell,
    stem: &'a str,
    options: &'a [String],
    max_seconds: u32,
}

impl<'a> From<&'a AssessmentItem> for PublicItem<'a> {
    fn from(item: &'a AssessmentItem) -> Self {
        PublicItem {
            id: &item.id,
            lo_id: &item.lo_id,
            cell: item.cell,
            stem: &item.stem,
            options: &item.options,
            max_seconds: item.max_seconds,
        }
    }
}

#[derive(Serialize)]
struct LastAnswer<'a> {
    item_id: &'a str,
    correct: bool,
}

#[derive(Serialize)]
struct SessionView<'a> {
    session_id: &'a str,
    learner_id: &'a str,
    lo_id: &'a str,
    status: SessionStatus,
    interval: LevelInterval,
    items_used: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    item: Option<PublicItem<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<SessionResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    last_answer: Option<LastAnswer<'a>>,
}

fn session_view<'a>(session: &'a SessionState, pool: &'a ItemPool, last: Option<LastAnswer<'a>>) -> SessionView<'a> {
    let item = session.pending.as_deref().and_then(|id| pool.item(id)).map(PublicItem::from);
    SessionView {
        session_id: &session.session_id,
        learner_id: &session.learner_id,
        lo_id: &session.lo_id,
        status: session.status,
        interval: session.interval,
        items_used: session.asked.len(),
        item,
        result: (!session.is_active()).then(|| session.result()),
        last_answer: last,
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewSession {
    lo_id: String,
    budget: Option<u32>,
    confirmations: Option<u32>,
    pool_id: Option<String>,
}

fn pool_for<'s>(store: &'s Store, request: &NewSession) -> ApiResult<&'s ItemPool> {
    if let Some(id) = &request.pool_id {
        return store.pools.get(id).ok_or_else(|| ApiError::not_found("item pool", id));
    }
    store
        .pools
        .values()
        .find(|p| p.items.values().any(|i| i.lo_id == request.lo_id))
        .ok_or_else(|| Error::NoItems(request.lo_id.clone()).into())
}

async fn post_session(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    check_id(&id)?;
    let request: NewSession = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "SCHEMA_ERROR", e.to_string()))?;
    let mut store = write(&state);
    let pool = pool_for(&store, &request)?;
    let module = pool.module_id.as_deref().unwrap_or_default();
    let model = domain(&store, module)?;
    let defaults = SessionConfig::default();
    let config = SessionConfig {
        budget: request.budget.unwrap_or(defaults.budget),
        confirmations: request.confirmations.unwrap_or(defaults.confirmations),
    };
    let mut session = start_session(String::new(), pool, model, &store.learner(&id), &request.lo_id, config)?;
    session.session_id = store.allocate_session_id();
    let pool_id = session.pool_id.clone();
    store.put_session(session.clone()).map_err(ApiError::io)?;
    let pool = &store.pools[&pool_id];
    Ok((StatusCode::CREATED, json(&session_view(&session, pool, None))).into_response())
}

fn session_and_pool(store: &Store, sid: &str) -> ApiResult<(SessionState, ItemPool)> {
    let session = store.sessions.get(sid).ok_or_else(|| ApiError::not_found("session", sid))?;
    let pool = store.pools.get(&session.pool_id).ok_or_else(|| ApiError::not_found("item pool", &session.pool_id))?;
    Ok((session.clone(), pool.clone()))
}

async fn get_next(State(state): State<AppState>, Path(sid): Path<String>) -> ApiResult {
    {
        let store = read(&state);
        let session = store.sessions.get(&sid).ok_or_else(|| ApiError::not_found("session", &sid))?;
        if !session.is_active() || session.pending.is_some() {
            let pool = store.pools.get(&session.pool_id).ok_or_else(|| ApiError::not_found("item pool", &session.pool_id))?;
            return Ok(json(&session_view(session, pool, None)));
        }
    }
    let mut store = write(&state);
    let (mut session, pool) = session_and_pool(&store, &sid)?;
    match session.next_item(&pool) {
        Ok(_) | Err(Error::Exhausted | Error::SessionClosed) => {}
        Err(e) => return Err(e.into()),
    }
    store.put_session(session.clone()).map_err(ApiError::io)?;
    Ok(json(&session_view(&session, &pool, None)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Answer {
    item_id: String,
    chosen: BTreeSet<usize>,
    seconds: u32,
    now: Option<Timestamp>,
}

async fn post_answer(State(state): State<AppState>, Path(sid): Path<String>, body: Bytes) -> ApiResult {
    let answer: Answer = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "SCHEMA_ERROR", e.to_string()))?;
    let now = answer.now.unwrap_or_else(|| (state.clock)());
    let mut store = write(&state);
    let (mut session, pool) = session_and_pool(&store, &sid)?;
    if !session.is_active() {
        return Err(Error::SessionClosed.into());
    }
    if session.pending.as_deref() != Some(answer.item_id.as_str()) {
        return Err(Error::WrongItem { expected: session.pending.clone(), got: answer.item_id }.into());
    }
    let item = pool.item(&answer.item_id).ok_or_else(|| ApiError::not_found("item", &answer.item_id))?;
    let record = session.submit_answer(item, &answer.chosen, answer.seconds, now)?;
    let mut learner = store.learner(&session.learner_id);
    learner.insert(record.clone())?;
    if session.is_active() {
        match session.next_item(&pool) {
            Ok(_) | Err(Error::Exhausted | Error::SessionClosed) => {}
            Err(e) => return Err(e.into()),
        }
    }
    store.put_learner(learner).map_err(ApiError::io)?;
    store.put_session(session.clone()).map_err(ApiError::io)?;
    let last = LastAnswer { item_id: &record.item_id, correct: record.correct };
    Ok(json(&session_view(&session, &pool, Some(last))))
}

async fn get_recommendations(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Params,
) -> ApiResult {
    check_id(&id)?;
    let now = now_param(&state, q.get("now"))?;
    let k = match q.get("k") {
        Some(v) => v.parse::<usize>().map_err(|_| ApiError::bad_request(format!("k must be a number, got {v}")))?,
        None => 3,
    };
    let tags = csv(q.get("tags"));
    let store = read(&state);
    let model = domain(&store, param(&q, "course")?)?;
    let course = course_of(model, &q)?;
    let target = param(&q, "target")?;
    let report = overlay(model, &course, &store.learner(&id), now, &state.params)?;
    let plans = recommend_path(model, &course, &report, target, k)?;
    let mut resources = Vec::new();
    for step in &plans[0].steps {
        for lo in &model.concepts[step].outcomes {
            if report.status(&lo.id) != Some(LoStatus::Achieved) {
                resources.push(recommend_resources(model, &lo.id, &tags)?);
            }
        }
    }
    Ok(json(&PlanDocument { target_concept: target.to_owned(), plans, resources }))
}

async fn get_challenge(State(state): State<AppState>, Path(id): Path<String>, Query(q): Params) -> ApiResult {
    check_id(&id)?;
    let now = now_param(&state, q.get("now"))?;
    let store = read(&state);
    let module = param(&q, "course")?;
    let model = domain(&store, module)?;
    let concept = param(&q, "concept")?;
    let mut pool = ItemPool::new(format!("{module}-all"));
    for p in store.pools.values().filter(|p| p.module_id.as_deref() == Some(module)) {
        for item in p.items.values() {
            if !pool.items.contains_key(&item.id) {
                pool.add_item(item.clone());
            }
        }
    }
    let suggestion =
        challenge_check(model, &pool, concept, &store.learner(&id), now, &state.params, &ChallengeConfig::default())?;
    Ok(match suggestion {
        Some(s) => json(&s),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}
