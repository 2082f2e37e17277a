//! The `/api/v1` HTTP interface.
//!
//! Request bodies are parsed by the `parse_*` functions, which never panic
//! on arbitrary bytes and report failures as [`ApiError`]s carrying a
//! machine-readable code. Handlers share one immutable database; the session
//! store is the only mutable state.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use fusionloc::db::RpDatabase;
use fusionloc::pose::{build_frustum, eye_pose, visible_objects};
use fusionloc::synth::{observe, World};
use fusionloc::{Error, Fingerprint, KeypointSet, LocalizationResult, Locator, Method, Query, Subarea, Vec3, VirtualObject};
use serde::{Deserialize, Serialize};

use crate::session::{Action, Session, SessionStore};

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    /// Distance covered by one forward/back step, meters.
    pub step_m: f64,
    /// Rotation of one turn action, degrees.
    pub turn_deg: f64,
    pub idle_timeout: Duration,
    /// Method used when a request names none.
    pub default_method: Method,
    pub default_device: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            step_m: 0.5,
            turn_deg: 15.0,
            idle_timeout: Duration::from_secs(600),
            default_method: Method::CombinedDr,
            default_device: "device-0".into(),
        }
    }
}

/// A failed request: HTTP status, stable code and a human message.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }

    fn malformed(e: serde_json::Error) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "malformed_body", e.to_string())
    }

    fn unknown_session(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_session", format!("no live session {id:?}"))
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({}): {}", self.code, self.status.as_u16(), self.message)
    }
}

impl std::error::Error for ApiError {}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, code) = match &e {
            Error::InvalidArgument(_) => (StatusCode::BAD_REQUEST, "invalid_argument"),
            Error::Schema(_) => (StatusCode::BAD_REQUEST, "invalid_body"),
            Error::DegenerateInput(_) => (StatusCode::BAD_REQUEST, "degenerate_input"),
            Error::InsufficientMatches { .. } | Error::DegenerateGeometry => {
                (StatusCode::BAD_REQUEST, "insufficient_features")
            }
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        Self::new(status, code, e.to_string())
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    message: &'a str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.code, message: &self.message })).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizeRequest {
    pub fingerprint: Fingerprint,
    pub keypoints: KeypointSet,
    pub heading: f64,
    pub device_id: String,
    #[serde(default)]
    pub method: Option<Method>,
}

impl LocalizeRequest {
    pub fn query(&self) -> Query {
        Query {
            fingerprint: self.fingerprint.clone(),
            keypoints: self.keypoints.clone(),
            heading: self.heading,
            device_id: self.device_id.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionRequest {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub device_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRequest {
    pub action: Action,
    #[serde(default)]
    pub method: Option<Method>,
}

/// Parses and validates a `/localize` body.
pub fn parse_localize_request(body: &[u8]) -> Result<LocalizeRequest, ApiError> {
    let req: LocalizeRequest = serde_json::from_slice(body).map_err(ApiError::malformed)?;
    req.query().validate()?;
    Ok(req)
}

/// Parses a `/session` body. An empty body means "all defaults".
pub fn parse_session_request(body: &[u8]) -> Result<SessionRequest, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(SessionRequest::default());
    }
    serde_json::from_slice(body).map_err(ApiError::malformed)
}

/// Parses a `/session/{id}/step` body.
pub fn parse_step_request(body: &[u8]) -> Result<StepRequest, ApiError> {
    serde_json::from_slice(body).map_err(ApiError::malformed)
}

/// An object in view with its coordinates in the viewer's local frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibleObject {
    pub id: u32,
    pub label: String,
    pub forward: f64,
    pub right: f64,
    pub up: f64,
    pub bearing: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizeResponse {
    #[serde(flatten)]
    pub result: LocalizationResult,
    pub visible_objects: Vec<VisibleObject>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResponse {
    pub session_id: String,
    pub true_position: Vec3,
    pub heading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResponse {
    pub true_position: Vec3,
    pub heading: f64,
    pub estimate: LocalizationResult,
    /// Objects in view from the estimated RP along the true heading.
    pub visible_objects: Vec<VisibleObject>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapRp {
    pub id: u32,
    pub position: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSubarea {
    pub id: u32,
    pub member_rp_ids: Vec<u32>,
}

/// Map geometry without fingerprints or keypoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapView {
    pub width: f64,
    pub depth: f64,
    pub interval: f64,
    pub rps: Vec<MapRp>,
    pub subareas: Vec<MapSubarea>,
    pub objects: Vec<VirtualObject>,
}

impl MapView {
    pub fn of(db: &RpDatabase) -> Self {
        let m = &db.map;
        Self {
            width: m.width,
            depth: m.depth,
            interval: m.interval,
            rps: m.rps.iter().map(|rp| MapRp { id: rp.id, position: rp.position }).collect(),
            subareas: m
                .subareas
                .iter()
                .map(|s: &Subarea| MapSubarea { id: s.id, member_rp_ids: s.member_rp_ids.clone() })
                .collect(),
            objects: m.objects.clone(),
        }
    }
}

/// Objects visible from the RP of `result` along `heading`.
pub fn objects_in_view(db: &RpDatabase, result: &LocalizationResult, heading: f64) -> Vec<VisibleObject> {
    let Some(rp) = db.map.rp(result.rp_id) else {
        return Vec::new();
    };
    let cfg = &db.build_config.pose;
    let pose = eye_pose(rp, heading, cfg);
    visible_objects(&pose, &build_frustum(&pose, cfg), &db.map.objects)
        .into_iter()
        .map(|(o, l)| VisibleObject {
            id: o.id,
            label: o.label,
            forward: l.forward,
            right: l.right,
            up: l.up,
            bearing: l.bearing,
            distance: l.distance,
        })
        .collect()
}

/// Localizes one request and attaches the objects in view.
pub fn localize_request(
    db: &RpDatabase,
    locator: &Locator<'_>,
    req: &LocalizeRequest,
    default_method: Method,
) -> Result<LocalizeResponse, ApiError> {
    let result = locator.localize(&req.query(), req.method.unwrap_or(default_method))?;
    let visible_objects = objects_in_view(db, &result, req.heading);
    Ok(LocalizeResponse { result, visible_objects })
}

/// Everything the handlers share.
pub struct AppState {
    db: RpDatabase,
    world: World,
    rp_medoids: Vec<usize>,
    config: ServiceConfig,
    sessions: SessionStore,
}

impl AppState {
    /// Prepares a database for serving. The synthetic world used by sessions
    /// is regenerated from the database's build configuration.
    pub fn new(db: RpDatabase, config: ServiceConfig) -> fusionloc::Result<Self> {
        db.validate()?;
        db.require_subareas()?;
        let synth = &db.build_config.synth;
        let world = World::generate(db.map.width, db.map.depth, synth)?;
        let rp_medoids = {
            let locator = Locator::new(&db.map, db.build_config.cluster.clone(), db.build_config.matching.clone())?;
            locator.rp_medoids().to_vec()
        };
        let sessions = SessionStore::new(synth.seed, config.idle_timeout);
        Ok(Self { db, world, rp_medoids, config, sessions })
    }

    pub fn db(&self) -> &RpDatabase {
        &self.db
    }

    pub fn sessions(&self) -> &SessionStore {
        &self.sessions
    }

    pub fn locator(&self) -> Locator<'_> {
        let b = &self.db.build_config;
        Locator::with_medoids(&self.db.map, b.cluster.clone(), b.matching.clone(), self.rp_medoids.clone())
            .expect("medoids were computed from this map")
    }

    pub fn localize(&self, req: &LocalizeRequest) -> Result<LocalizeResponse, ApiError> {
        localize_request(&self.db, &self.locator(), req, self.config.default_method)
    }

    pub fn create_session(&self, req: SessionRequest) -> SessionResponse {
        let device = req.device_id.unwrap_or_else(|| self.config.default_device.clone());
        let s = self.sessions.create(req.seed, device, &self.db.map, &self.db.build_config.synth.headings());
        SessionResponse { session_id: s.id, true_position: s.true_position, heading: s.heading }
    }

    /// Applies one action, observes at the new pose and localizes.
    pub fn step(&self, id: &str, req: StepRequest) -> Result<StepResponse, ApiError> {
        let method = req.method.unwrap_or(self.config.default_method);
        self.sessions
            .with_session(id, |s| self.step_session(s, req.action, method))
            .ok_or_else(|| ApiError::unknown_session(id))?
    }

    fn step_session(&self, s: &mut Session, action: Action, method: Method) -> Result<StepResponse, ApiError> {
        s.apply(action, self.config.step_m, self.config.turn_deg, &self.db.map);
        let b = &self.db.build_config;
        let query = observe(&self.world, s.true_position, s.heading, &s.device_id, &b.synth, &b.pose, &mut s.observation_rng());
        let estimate = self.locator().localize(&query, method)?;
        let visible_objects = objects_in_view(&self.db, &estimate, s.heading);
        s.last_result = Some(estimate.clone());
        Ok(StepResponse { true_position: s.true_position, heading: s.heading, estimate, visible_objects })
    }
}

type Shared = Arc<AppState>;

/// Runs CPU-bound work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn map_view(State(state): State<Shared>) -> Json<MapView> {
    Json(MapView::of(state.db()))
}

async fn localize(State(state): State<Shared>, body: Bytes) -> Result<Json<LocalizeResponse>, ApiError> {
    let req = parse_localize_request(&body)?;
    blocking(move || state.localize(&req)).await.map(Json)
}

async fn create_session(State(state): State<Shared>, body: Bytes) -> Result<Json<SessionResponse>, ApiError> {
    let req = parse_session_request(&body)?;
    Ok(Json(state.create_session(req)))
}

async fn step(State(state): State<Shared>, Path(id): Path<String>, body: Bytes) -> Result<Json<StepResponse>, ApiError> {
    let req = parse_step_request(&body)?;
    blocking(move || state.step(&id, req)).await.map(Json)
}

async fn delete_session(State(state): State<Shared>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    if state.sessions().remove(&id) {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::unknown_session(&id))
    }
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/api/v1/health", get(health))
        .route("/api/v1/map", get(map_view))
        .route("/api/v1/localize", post(localize))
        .route("/api/v1/session", post(create_session))
        .route("/api/v1/session/{id}/step", post(step))
        .route("/api/v1/session/{id}", axum::routing::delete(delete_session))
        .fallback(not_found)
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state))).await
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_session_body_means_defaults() {
        assert_eq!(parse_session_request(b"").unwrap(), SessionRequest::default());
        assert_eq!(parse_session_request(b" \n").unwrap(), SessionRequest::default());
        assert_eq!(parse_session_request(br#"{"seed":5}"#).unwrap().seed, Some(5));
        assert_eq!(parse_session_request(br#"{"seed":-1}"#).unwrap_err().code, "malformed_body");
    }

    #[test]
    fn step_actions_use_snake_case() {
        assert_eq!(parse_step_request(br#"{"action":"turn_left"}"#).unwrap().action, Action::TurnLeft);
        let r = parse_step_request(br#"{"action":"back","method":"wifi_only"}"#).unwrap();
        assert_eq!((r.action, r.method), (Action::Back, Some(Method::WifiOnly)));
        assert!(parse_step_request(br#"{"action":"jump"}"#).is_err());
        assert!(parse_step_request(br#"{"action":"forward","extra":1}"#).is_err());
    }

    #[test]
    fn localize_body_is_validated_after_parsing() {
        let ok = br#"{"fingerprint":{"ap-00":-50.0},"keypoints":[],"heading":10.0,"device_id":"d"}"#;
        assert_eq!(parse_localize_request(ok).unwrap().method, None);
        let bad_heading = br#"{"fingerprint":{"ap-00":-50.0},"keypoints":[],"heading":400.0,"device_id":"d"}"#;
        let e = parse_localize_request(bad_heading).unwrap_err();
        assert_eq!((e.status, e.code), (StatusCode::BAD_REQUEST, "invalid_argument"));
        let e = parse_localize_request(b"{").unwrap_err();
        assert_eq!((e.status, e.code), (StatusCode::BAD_REQUEST, "malformed_body"));
    }

    #[test]
    fn library_errors_map_to_statuses() {
        assert_eq!(ApiError::from(Error::DegenerateInput("x".into())).status, StatusCode::BAD_REQUEST);
        assert_eq!(ApiError::from(Error::NoCandidate).status, StatusCode::INTERNAL_SERVER_ERROR);
    }
}
