//! HTTP API for the browser front end.
//!
//! | method | path | body / result |
//! |---|---|---|
//! | POST | `/sessions` | `{participant_id}` → session id and plan summary |
//! | GET | `/sessions/{id}` | progress |
//! | GET | `/sessions/{id}/next` | next trial descriptor with timing constants |
//! | POST | `/sessions/{id}/trials` | a trial result; 409 with the prior record on duplicates |
//! | GET | `/sessions/{id}/blocks/{block}/score` | accuracy and bonus of a finished block |
//! | POST | `/sessions/{id}/close` | ends the session |
//! | GET | `/sessions/{id}/export` | observation log of the main blocks |
//! | GET | `/images/{stimulus_id}` | PNG stimulus |

use std::collections::HashSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use clap::Args;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use laionc_core::builder::{read_manifest, read_source_list};
use laionc_core::imgcore::preprocess;
use laionc_core::session::{
    plan_session, warmup_augment, BlockKind, PlanConfig, RecordOutcome, SessionStore, StimulusCatalog, TrialResult,
    WarmupAugmentation, WarmupSource,
};
use laionc_core::{Error, ImageBuffer, Taxonomy};

use crate::commands::load_taxonomy;
use crate::config::{flags, resolve};
use crate::{record_run, GlobalArgs};

struct Cohort {
    next_index: usize,
    shown: HashSet<String>,
}

pub struct AppState {
    store: SessionStore,
    catalog: StimulusCatalog,
    main_ids: HashSet<String>,
    plan_cfg: PlanConfig,
    seed: u64,
    dataset_root: PathBuf,
    cohort: Mutex<Cohort>,
}

impl AppState {
    pub fn new(
        store: SessionStore,
        catalog: StimulusCatalog,
        plan_cfg: PlanConfig,
        seed: u64,
        dataset_root: PathBuf,
    ) -> laionc_core::Result<Self> {
        // Stimuli of earlier sessions stay excluded across restarts.
        let mut shown = HashSet::new();
        let ids = store.session_ids();
        for id in &ids {
            shown.extend(store.plan(id)?.main_trials().map(|(_, _, t)| t.stimulus_id.clone()));
        }
        let main_ids = catalog.entries().iter().map(|e| e.stimulus_id.clone()).collect();
        Ok(AppState {
            store,
            catalog,
            main_ids,
            plan_cfg,
            seed,
            dataset_root,
            cohort: Mutex::new(Cohort {
                next_index: ids.len(),
                shown,
            }),
        })
    }

    pub fn store(&self) -> &SessionStore {
        &self.store
    }
}

pub struct ApiError(StatusCode, String);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::UnknownSession(_) => StatusCode::NOT_FOUND,
            Error::SessionClosed(_) => StatusCode::CONFLICT,
            Error::Io { .. } | Error::Image(_) | Error::Json(_) | Error::Csv(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({"error": self.1}))).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub participant_id: String,
    /// Position in the distortion assignment; next free slot by default.
    #[serde(default)]
    pub participant_index: Option<usize>,
}

async fn create_session(State(app): State<Arc<AppState>>, Json(req): Json<CreateSession>) -> ApiResult<Json<Value>> {
    if req.participant_id.trim().is_empty() {
        return Err(ApiError(StatusCode::BAD_REQUEST, "participant_id is empty".into()));
    }
    let plan = {
        let mut cohort = app.cohort.lock();
        let index = req.participant_index.unwrap_or(cohort.next_index);
        let plan = plan_session(&req.participant_id, index, &app.catalog, &app.plan_cfg, app.seed, &cohort.shown)?;
        cohort.shown.extend(plan.main_trials().map(|(_, _, t)| t.stimulus_id.clone()));
        cohort.next_index = cohort.next_index.max(index + 1);
        plan
    };
    let blocks: Vec<Value> = plan
        .blocks
        .iter()
        .map(|b| json!({"index": b.index, "kind": b.kind, "distortion": b.distortion, "trials": b.trials.len()}))
        .collect();
    let summary = json!({
        "participant_id": plan.participant_id,
        "distortions": plan.distortions,
        "total_trials": plan.trial_count(),
        "blocks": blocks,
        "timing": plan.timing,
        "bonus": plan.bonus,
    });
    let id = app.store.create(plan)?;
    Ok(Json(json!({"session_id": id, "plan": summary})))
}

async fn session_status(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let s = app.store.status(&id)?;
    Ok(Json(json!({
        "session_id": s.session_id, "participant_id": s.participant_id,
        "resolved": s.resolved, "total": s.total, "closed": s.closed, "complete": s.complete(),
    })))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct TrialDescriptor {
    pub block: usize,
    pub trial: usize,
    pub block_kind: BlockKind,
    pub block_trials: usize,
    pub stimulus_id: String,
    pub image_url: String,
    pub timing: laionc_core::session::Timing,
}

async fn next_trial(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let Some((block, trial, t)) = app.store.next_trial(&id)? else {
        return Ok(Json(json!({"done": true})));
    };
    let plan = app.store.plan(&id)?;
    let b = &plan.blocks[block];
    let d = TrialDescriptor {
        block,
        trial,
        block_kind: b.kind,
        block_trials: b.trials.len(),
        image_url: format!("/images/{}", t.stimulus_id),
        stimulus_id: t.stimulus_id,
        timing: plan.timing.clone(),
    };
    let mut v = serde_json::to_value(d).map_err(Error::from)?;
    v["done"] = json!(false);
    Ok(Json(v))
}

async fn post_trial(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(result): Json<TrialResult>,
) -> ApiResult<Response> {
    Ok(match app.store.record(&id, result)? {
        RecordOutcome::Recorded => (StatusCode::CREATED, Json(json!({"status": "recorded"}))).into_response(),
        RecordOutcome::Duplicate(prior) => {
            (StatusCode::CONFLICT, Json(json!({"status": "duplicate", "prior": prior}))).into_response()
        }
    })
}

async fn block_score(
    State(app): State<Arc<AppState>>,
    UrlPath((id, block)): UrlPath<(String, usize)>,
) -> ApiResult<Json<Value>> {
    let s = app.store.score(&id, block)?;
    Ok(Json(serde_json::to_value(s).map_err(Error::from)?))
}

async fn close_session(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    app.store.close(&id)?;
    Ok(Json(json!({"status": "closed"})))
}

async fn export(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let ex = app.store.export(&id)?;
    Ok(Json(json!({
        "observer_id": ex.log.observer_id,
        "records": ex.log.records,
        "complete": ex.complete,
        "missing": ex.missing,
    })))
}

fn render_warmup(source: &WarmupSource, condition: &str) -> laionc_core::Result<Vec<u8>> {
    let img = preprocess(&ImageBuffer::load(&source.path)?)?;
    let img = match WarmupAugmentation::from_token(condition) {
        Some(aug) => warmup_augment(&img, aug),
        None => img,
    };
    img.encode_png()
}

async fn image(State(app): State<Arc<AppState>>, UrlPath(stimulus): UrlPath<String>) -> ApiResult<Response> {
    let not_found = || ApiError(StatusCode::NOT_FOUND, format!("no stimulus {stimulus:?}"));
    let bytes = if let Some(rest) = stimulus.strip_prefix("warmup/") {
        let (condition, image_id) = rest.split_once('/').ok_or_else(not_found)?;
        if condition != "clean" && WarmupAugmentation::from_token(condition).is_none() {
            return Err(not_found());
        }
        let source = app.catalog.warmup_source(image_id).ok_or_else(not_found)?.clone();
        let condition = condition.to_string();
        tokio::task::spawn_blocking(move || render_warmup(&source, &condition))
            .await
            .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??
    } else {
        // Only catalogued paths are served, so the URL cannot escape the dataset root.
        if !app.main_ids.contains(&stimulus) {
            return Err(not_found());
        }
        let path = app.dataset_root.join(&stimulus);
        tokio::task::spawn_blocking(move || std::fs::read(&path).map_err(|e| Error::Io { path, source: e }))
            .await
            .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??
    };
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

pub fn router(app: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_status))
        .route("/sessions/{id}/next", get(next_trial))
        .route("/sessions/{id}/trials", post(post_trial))
        .route("/sessions/{id}/blocks/{block}/score", get(block_score))
        .route("/sessions/{id}/close", post(close_session))
        .route("/sessions/{id}/export", get(export))
        .route("/images/{*stimulus}", get(image))
        .with_state(app)
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long)]
    pub addr: Option<String>,
    /// Session journal directory.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Dataset manifest the main-block stimuli come from.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

fn default_addr() -> String {
    "127.0.0.1:8080".to_string()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeConfig {
    #[serde(default = "default_addr")]
    pub addr: String,
    pub store: PathBuf,
    pub manifest: PathBuf,
    /// Directory the manifest paths are relative to; the manifest's own by default.
    #[serde(default)]
    pub dataset_root: Option<PathBuf>,
    /// Source list (path, fine_class, source_id) of clean practice images.
    #[serde(default)]
    pub warmup_sources: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub plan: PlanConfig,
    #[serde(default)]
    pub taxonomy: Option<PathBuf>,
}

pub fn warmup_from_source_list(path: &Path, tax: &Taxonomy) -> Result<Vec<WarmupSource>> {
    read_source_list(path)?
        .into_iter()
        .map(|r| {
            let superclass = tax
                .superclass_of(&r.fine_class)
                .with_context(|| format!("warm-up source {}: unmapped class {}", r.source_id, r.fine_class))?
                .to_string();
            Ok(WarmupSource {
                image_id: format!("{}_{}", r.fine_class, r.source_id),
                superclass,
                path: r.path,
            })
        })
        .collect()
}

pub fn serve(g: &GlobalArgs, a: ServeArgs) -> Result<()> {
    let (cfg, effective): (ServeConfig, Value) = resolve(
        json!({}),
        g.config.as_deref(),
        &g.set,
        flags(vec![
            ("addr", a.addr.map(Value::from)),
            ("store", a.store.map(|p| json!(p))),
            ("manifest", a.manifest.map(|p| json!(p))),
            ("seed", g.seed.map(Value::from)),
        ]),
    )?;
    record_run(g, "serve", cfg.seed, &effective)?;
    let tax = load_taxonomy(cfg.taxonomy.as_deref())?;
    let manifest = read_manifest(&cfg.manifest)?;
    let warmup = match &cfg.warmup_sources {
        Some(p) => warmup_from_source_list(p, &tax)?,
        None => Vec::new(),
    };
    let catalog = StimulusCatalog::from_manifest(&tax, &manifest, warmup)?;
    let root = cfg
        .dataset_root
        .clone()
        .unwrap_or_else(|| cfg.manifest.parent().unwrap_or(Path::new("")).to_path_buf());
    let store = SessionStore::open(&cfg.store, tax)?;
    let app = Arc::new(AppState::new(store, catalog, cfg.plan.clone(), cfg.seed, root)?);
    let addr: SocketAddr = cfg.addr.parse().with_context(|| format!("bad address {:?}", cfg.addr))?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        println!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, router(app))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        anyhow::Ok(())
    })
}
