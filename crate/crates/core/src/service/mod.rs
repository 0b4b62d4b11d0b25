//! HTTP annotation backend.
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/health` | liveness and counts |
//! | GET | `/session/{annotator}/next` | next clip in the annotator's queue |
//! | POST | `/annotations` | submit an event |
//! | PUT | `/annotations/{vid}/{annotator}` | fine-tune a stored event |
//! | GET | `/export.csv` | events in the aggregation CSV schema; `X-Export-Incomplete` counts under-annotated clips |
//! | GET | `/export.json` | events, aggregated labels and incomplete clips |
//! | GET | `/clips/{vid}/video` | clip media |

pub mod store;

use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::aggregate::{aggregate_all, write_annotations_csv, AggregatedLabel, AnnotationEvent};
use crate::corpus::{load_manifest, Corpus, TIME_EPS};
use crate::windows::clip_rng;
use store::{EventLog, StoreError};

pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    /// Corpus manifest whose clips are annotated.
    pub corpus: PathBuf,
    /// Append-only event log.
    pub log: PathBuf,
    pub seed: u64,
    /// Registered annotator ids. Empty accepts any well-formed id.
    pub annotators: Vec<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: DEFAULT_PORT,
            corpus: PathBuf::from("corpus/manifest.json"),
            log: PathBuf::from("annotations.jsonl"),
            seed: 0,
            annotators: Vec::new(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("environment variable {name}={value:?} is not a valid {what}")]
    Env { name: &'static str, value: String, what: &'static str },
}

impl ServiceConfig {
    /// Reads a TOML file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let mut cfg: Self = toml::from_str(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.corpus, &mut cfg.log] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Applies `XNEC_BIND`, `XNEC_PORT`, `XNEC_CORPUS`, `XNEC_LOG` and
    /// `XNEC_SEED` from `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = lookup("XNEC_BIND") {
            self.bind = v;
        }
        if let Some(v) = lookup("XNEC_PORT") {
            self.port = v.parse().map_err(|_| ConfigError::Env { name: "XNEC_PORT", value: v, what: "port" })?;
        }
        if let Some(v) = lookup("XNEC_CORPUS") {
            self.corpus = v.into();
        }
        if let Some(v) = lookup("XNEC_LOG") {
            self.log = v.into();
        }
        if let Some(v) = lookup("XNEC_SEED") {
            self.seed = v.parse().map_err(|_| ConfigError::Env { name: "XNEC_SEED", value: v, what: "seed" })?;
        }
        Ok(())
    }

    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
struct ClipInfo {
    duration: f64,
    frame_count: usize,
    video: PathBuf,
}

pub struct AppState {
    clips: BTreeMap<String, ClipInfo>,
    log: EventLog,
    seed: u64,
    annotators: Option<BTreeSet<String>>,
}

impl AppState {
    pub fn new(corpus: &Corpus, log: EventLog, seed: u64, annotators: &[String]) -> Self {
        let clips = corpus
            .clips
            .iter()
            .map(|c| {
                let info = ClipInfo { duration: c.duration(), frame_count: c.frame_count(), video: corpus.resolve(&c.video_path) };
                (c.vid.clone(), info)
            })
            .collect();
        let annotators = (!annotators.is_empty()).then(|| annotators.iter().cloned().collect());
        Self { clips, log, seed, annotators }
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    /// The annotator's clip order: every clip once, shuffled per annotator.
    pub fn queue(&self, annotator: &str) -> Vec<String> {
        let mut q: Vec<String> = self.clips.keys().cloned().collect();
        q.shuffle(&mut clip_rng(self.seed, annotator));
        q
    }

    /// First clip in the queue the annotator has not submitted.
    pub fn next_clip(&self, annotator: &str) -> Option<String> {
        let done = self.log.annotated_by(annotator);
        self.queue(annotator).into_iter().find(|v| !done.contains(v))
    }

    fn check_annotator(&self, id: &str) -> Result<(), ApiError> {
        let well_formed = !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        if !well_formed {
            return Err(ApiError::validation("annotator_id", "must be 1-64 characters of [A-Za-z0-9_-]"));
        }
        if let Some(known) = &self.annotators {
            if !known.contains(id) {
                return Err(ApiError::new(StatusCode::NOT_FOUND, "unknown_annotator", Some("annotator_id"), format!("annotator {id} is not registered")));
            }
        }
        Ok(())
    }

    fn validate(&self, event: &AnnotationEvent) -> Result<(), ApiError> {
        self.check_annotator(&event.annotator_id)?;
        let clip = self
            .clips
            .get(&event.vid)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_clip", Some("vid"), format!("no clip {}", event.vid)))?;
        if !(event.moment.is_finite() && event.moment >= 0.0 && event.moment <= clip.duration + TIME_EPS) {
            return Err(ApiError::validation("moment", format!("must lie in [0, {}] seconds", clip.duration)));
        }
        if !(event.score.is_finite() && (0.0..=1.0).contains(&event.score)) {
            return Err(ApiError::validation("score", "must lie in [0, 1]"));
        }
        if event.explanation.trim().is_empty() {
            return Err(ApiError::validation("explanation", "must not be empty"));
        }
        Ok(())
    }

    /// Validates and stores a new submission. A clip the annotator already
    /// submitted may be resubmitted; otherwise it must be their current clip.
    pub fn submit(&self, event: AnnotationEvent) -> Result<u64, ApiError> {
        self.validate(&event)?;
        if self.log.get(&event.vid, &event.annotator_id).is_none() {
            let current = self.next_clip(&event.annotator_id);
            if current.as_deref() != Some(event.vid.as_str()) {
                let detail = match current {
                    Some(c) => format!("annotator {} is assigned {c}, not {}", event.annotator_id, event.vid),
                    None => format!("annotator {} has finished every clip", event.annotator_id),
                };
                return Err(ApiError::new(StatusCode::CONFLICT, "not_assigned", Some("vid"), detail));
            }
        }
        Ok(self.log.append(event)?)
    }

    pub fn export(&self) -> ExportSummary {
        let events = self.log.snapshot();
        let summary = aggregate_all(&events).unwrap_or_else(|e| {
            log::error!("aggregation failed: {e}");
            Default::default()
        });
        let counted: BTreeMap<&str, usize> = events.iter().fold(BTreeMap::new(), |mut m, e| {
            *m.entry(e.vid.as_str()).or_default() += 1;
            m
        });
        let incomplete: Vec<String> = self
            .clips
            .keys()
            .filter(|v| counted.get(v.as_str()).copied().unwrap_or(0) < crate::aggregate::MIN_ANNOTATIONS)
            .cloned()
            .collect();
        ExportSummary { complete: incomplete.is_empty(), incomplete, labels: summary.labels, events }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExportSummary {
    /// Every clip has at least the minimum number of annotations.
    pub complete: bool,
    pub incomplete: Vec<String>,
    pub labels: BTreeMap<String, AggregatedLabel>,
    pub events: Vec<AnnotationEvent>,
}

/// Error body: `{"error": kind, "field": name-or-null, "message": text}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    field: Option<&'static str>,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, field: Option<&'static str>, message: impl Into<String>) -> Self {
        Self { status, kind, field, message: message.into() }
    }

    fn validation(field: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", Some(field), format!("{field} {}", message.into()))
    }

    pub fn status(&self) -> StatusCode {
        self.status
    }

    pub fn field(&self) -> Option<&'static str> {
        self.field
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        log::error!("{e}");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", None, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.kind, "field": self.field, "message": self.message }))).into_response()
    }
}

type Shared = Arc<AppState>;

fn parse_object(body: &[u8]) -> Result<Map<String, Value>, ApiError> {
    match serde_json::from_slice::<Value>(body) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(ApiError::new(StatusCode::BAD_REQUEST, "malformed", None, "body must be a JSON object")),
        Err(e) => Err(ApiError::new(StatusCode::BAD_REQUEST, "malformed", None, format!("invalid JSON: {e}"))),
    }
}

fn field_str(m: &Map<String, Value>, name: &'static str) -> Result<Option<String>, ApiError> {
    match m.get(name) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(ApiError::validation(name, "must be a string")),
    }
}

fn field_num(m: &Map<String, Value>, name: &'static str) -> Result<Option<f64>, ApiError> {
    match m.get(name) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v.as_f64().map(Some).ok_or_else(|| ApiError::validation(name, "must be a number")),
    }
}

fn required<T>(v: Option<T>, name: &'static str) -> Result<T, ApiError> {
    v.ok_or_else(|| ApiError::validation(name, "is required"))
}

async fn health(State(s): State<Shared>) -> Json<Value> {
    Json(json!({ "status": "ok", "clips": s.clips.len(), "events": s.log.len() }))
}

async fn next(State(s): State<Shared>, UrlPath(annotator): UrlPath<String>) -> Result<Json<Value>, ApiError> {
    s.check_annotator(&annotator)?;
    let total = s.clips.len();
    let completed = s.log.annotated_by(&annotator).len();
    let progress = json!({ "completed": completed, "total": total });
    Ok(Json(match s.next_clip(&annotator) {
        None => json!({ "annotator_id": annotator, "done": true, "clip": null, "progress": progress }),
        Some(vid) => {
            let c = &s.clips[&vid];
            json!({
                "annotator_id": annotator,
                "done": false,
                "clip": {
                    "vid": vid,
                    "duration": c.duration,
                    "frame_count": c.frame_count,
                    "video_url": format!("/clips/{vid}/video"),
                },
                "progress": progress,
            })
        }
    }))
}

async fn store_blocking(s: Shared, event: AnnotationEvent) -> Result<(AnnotationEvent, u64), ApiError> {
    tokio::task::spawn_blocking(move || s.submit(event.clone()).map(|seq| (event, seq)))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", None, e.to_string()))?
}

async fn create(State(s): State<Shared>, body: Bytes) -> Result<(StatusCode, Json<Value>), ApiError> {
    let m = parse_object(&body)?;
    let event = AnnotationEvent {
        vid: required(field_str(&m, "vid")?, "vid")?,
        annotator_id: required(field_str(&m, "annotator_id")?, "annotator_id")?,
        moment: required(field_num(&m, "moment")?, "moment")?,
        score: required(field_num(&m, "score")?, "score")?,
        explanation: required(field_str(&m, "explanation")?, "explanation")?,
    };
    let (event, seq) = store_blocking(s, event).await?;
    Ok((StatusCode::CREATED, Json(json!({ "status": "stored", "seq": seq, "event": event }))))
}

/// Fine-tuning: fields present in the body replace the stored ones.
async fn fine_tune(
    State(s): State<Shared>,
    UrlPath((vid, annotator)): UrlPath<(String, String)>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let m = parse_object(&body)?;
    s.check_annotator(&annotator)?;
    let prior = s.log.get(&vid, &annotator).ok_or_else(|| {
        ApiError::new(StatusCode::NOT_FOUND, "no_annotation", Some("vid"), format!("{annotator} has not annotated {vid}"))
    })?;
    for key in m.keys() {
        if !matches!(key.as_str(), "moment" | "score" | "explanation" | "vid" | "annotator_id") {
            return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", None, format!("unknown field {key}")));
        }
    }
    if field_str(&m, "vid")?.is_some_and(|v| v != vid) {
        return Err(ApiError::validation("vid", "must match the URL"));
    }
    if field_str(&m, "annotator_id")?.is_some_and(|a| a != annotator) {
        return Err(ApiError::validation("annotator_id", "must match the URL"));
    }
    let event = AnnotationEvent {
        moment: field_num(&m, "moment")?.unwrap_or(prior.moment),
        score: field_num(&m, "score")?.unwrap_or(prior.score),
        explanation: field_str(&m, "explanation")?.unwrap_or(prior.explanation),
        ..prior
    };
    let (event, seq) = store_blocking(s, event).await?;
    Ok(Json(json!({ "status": "stored", "seq": seq, "event": event })))
}

async fn export_csv(State(s): State<Shared>) -> Result<Response, ApiError> {
    let summary = s.export();
    let mut buf = Vec::new();
    write_annotations_csv(&mut buf, &summary.events)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", None, e.to_string()))?;
    let incomplete = summary.incomplete.len().to_string();
    Ok((
        [(header::CONTENT_TYPE, "text/csv; charset=utf-8".to_string()), (header::HeaderName::from_static("x-export-incomplete"), incomplete)],
        buf,
    )
        .into_response())
}

async fn export_json(State(s): State<Shared>) -> Json<ExportSummary> {
    Json(s.export())
}

async fn clip_video(State(s): State<Shared>, UrlPath(vid): UrlPath<String>) -> Result<Response, ApiError> {
    let clip = s
        .clips
        .get(&vid)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_clip", Some("vid"), format!("no clip {vid}")))?;
    let bytes = tokio::fs::read(&clip.video)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "media", None, e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "application/octet-stream")], bytes).into_response())
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/session/:annotator/next", get(next))
        .route("/annotations", post(create))
        .route("/annotations/:vid/:annotator", put(fine_tune))
        .route("/export.csv", get(export_csv))
        .route("/export.json", get(export_json))
        .route("/clips/:vid/video", get(clip_video))
        .with_state(state)
}

/// Opens the corpus and log named by `config`.
pub fn open_state(config: &ServiceConfig) -> anyhow::Result<Shared> {
    let corpus = load_manifest(&config.corpus)?;
    let (log, recovery) = EventLog::open(&config.log)?;
    log::info!("{}: {} records replayed", config.log.display(), recovery.records);
    Ok(Arc::new(AppState::new(&corpus, log, config.seed, &config.annotators)))
}

/// Serves until interrupted. The bound address is printed to stdout as
/// `listening on ADDR` once the socket accepts connections.
pub async fn serve(config: ServiceConfig) -> anyhow::Result<()> {
    let state = open_state(&config)?;
    let listener = tokio::net::TcpListener::bind((config.bind.as_str(), config.port)).await?;
    let addr: SocketAddr = listener.local_addr()?;
    {
        use std::io::Write;
        let mut out = std::io::stdout().lock();
        writeln!(out, "listening on {addr}")?;
        out.flush()?;
    }
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
