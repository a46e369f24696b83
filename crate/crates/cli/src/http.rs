//! JSON-over-HTTP API. Reads share the project; writes take it exclusively,
//! queued in arrival order.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Multipart, Path, RawQuery, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::RwLock;
use upsilon_core::project::{ConditionRequest, Project};
use upsilon_core::{
    parse_observations, parse_phenomenon, parse_trial_csv, Error, ErrorKind, ObservationTable, OdeModel, TrialDataset,
};

pub type Shared = Arc<RwLock<Project>>;

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub detail: String,
}

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

pub fn status_of(e: &Error) -> StatusCode {
    match e.kind() {
        ErrorKind::Validation => StatusCode::BAD_REQUEST,
        ErrorKind::NotFound => StatusCode::NOT_FOUND,
        ErrorKind::Conflict => StatusCode::CONFLICT,
        ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { code: self.0.code().to_string(), detail: self.0.detail().to_string() };
        (status_of(&self.0), Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse_json<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError(Error::InvalidValue(format!("request body: {e}"))))
}

#[derive(Debug, Deserialize)]
struct PhiBody {
    phi: u32,
}

#[derive(Debug, Deserialize)]
struct TargetBody {
    phi: u32,
    upsilon: u32,
}

/// One of `csv`, `dataset` or `model` supplies the trial.
#[derive(Debug, Deserialize)]
struct TrialBody {
    phi: Option<u32>,
    upsilon: Option<u32>,
    csv: Option<String>,
    dataset: Option<TrialDataset>,
    model: Option<OdeModel>,
}

/// Observations come as an observation CSV, a parsed table, or bare
/// samples with a `t=Year,x=Lynx` style mapping.
#[derive(Debug, Deserialize)]
struct ConditionBody {
    phi: u32,
    csv: Option<String>,
    observations: Option<ObservationTable>,
    samples: Option<Vec<(f64, f64)>>,
    mapping: Option<String>,
    sigma: Option<f64>,
    at: Option<f64>,
    #[serde(default = "yes")]
    writeback: bool,
}

fn yes() -> bool {
    true
}

fn query_pairs(raw: Option<String>) -> Vec<(String, String)> {
    url::form_urlencoded::parse(raw.unwrap_or_default().as_bytes()).into_owned().collect()
}

async fn add_phenomenon(State(s): State<Shared>, body: Bytes) -> ApiResult<upsilon_core::PhenomenonDecl> {
    let decl = parse_phenomenon(&body)?;
    Ok(Json(s.write().await.add_phenomenon(decl)?))
}

async fn add_hypothesis(
    State(s): State<Shared>,
    mut form: Multipart,
) -> ApiResult<upsilon_core::project::HypothesisReport> {
    let bad = |e: String| ApiError(Error::InvalidDescriptor(e));
    let mut descriptor = None;
    let mut targets = Vec::new();
    while let Some(field) = form.next_field().await.map_err(|e| bad(e.to_string()))? {
        let name = field.name().unwrap_or_default().to_string();
        let data = field.bytes().await.map_err(|e| bad(e.to_string()))?;
        match name.as_str() {
            "descriptor" => descriptor = Some(data),
            "target" | "targets" => {
                for t in String::from_utf8_lossy(&data).split(',').map(str::trim).filter(|t| !t.is_empty()) {
                    targets.push(t.parse::<u32>().map_err(|_| bad(format!("bad target {t:?}")))?);
                }
            }
            other => return Err(bad(format!("unexpected form field {other:?}"))),
        }
    }
    let descriptor = descriptor.ok_or_else(|| bad("missing form field \"descriptor\"".into()))?;
    Ok(Json(s.write().await.add_hypothesis(&descriptor, &targets)?))
}

async fn add_target(State(s): State<Shared>, body: Bytes) -> ApiResult<(u32, u32)> {
    let b: TargetBody = parse_json(&body)?;
    Ok(Json(s.write().await.add_target(b.phi, b.upsilon)?))
}

fn trial_from(b: TrialBody) -> Result<TrialDataset, Error> {
    match (b.csv, b.dataset, b.model) {
        (Some(csv), None, None) => {
            let missing = || Error::MissingValue("csv trials need phi and upsilon".into());
            parse_trial_csv(&csv, b.phi.ok_or_else(missing)?, b.upsilon.ok_or_else(missing)?)
        }
        (None, Some(d), None) => Ok(d),
        (None, None, Some(m)) => crate::run::simulate(&m, b.phi, b.upsilon),
        _ => Err(Error::InvalidValue("give exactly one of csv, dataset, model".into())),
    }
}

async fn load_trial(State(s): State<Shared>, body: Bytes) -> ApiResult<upsilon_core::TrialReceipt> {
    let d = trial_from(parse_json(&body)?)?;
    Ok(Json(s.write().await.load_trial(&d)?))
}

async fn simulate(body: Bytes) -> ApiResult<TrialDataset> {
    let m: OdeModel = parse_json(&body)?;
    Ok(Json(crate::run::simulate(&m, None, None)?))
}

async fn u_intro(State(s): State<Shared>, body: Bytes) -> ApiResult<upsilon_core::uncertain::UIntroReport> {
    let b: PhiBody = parse_json(&body)?;
    Ok(Json(s.write().await.u_intro(b.phi)?))
}

async fn catalog(State(s): State<Shared>) -> Json<upsilon_core::CatalogView> {
    Json(s.read().await.catalog_view())
}

async fn relation(
    State(s): State<Shared>,
    Path(name): Path<String>,
    RawQuery(q): RawQuery,
) -> ApiResult<upsilon_core::relstore::Selection> {
    let mut predicate = Vec::new();
    for (k, v) in query_pairs(q) {
        if k != "filter" && k != "where" {
            return Err(ApiError(Error::InvalidValue(format!("unknown query parameter {k:?}"))));
        }
        for part in v.split(',').filter(|p| !p.trim().is_empty()) {
            predicate.push(crate::args::parse_pair(part).map_err(|e| ApiError(Error::InvalidValue(e)))?);
        }
    }
    Ok(Json(s.read().await.query(&name, &predicate)?))
}

async fn urelation(State(s): State<Shared>, Path(name): Path<String>) -> ApiResult<upsilon_core::project::ConfReport> {
    Ok(Json(s.read().await.conf(&name)?))
}

async fn predictions(
    State(s): State<Shared>,
    RawQuery(q): RawQuery,
) -> ApiResult<Vec<upsilon_core::WorldPosterior>> {
    let phi = query_pairs(q)
        .into_iter()
        .find(|(k, _)| k == "phi")
        .and_then(|(_, v)| v.parse::<u32>().ok())
        .ok_or_else(|| ApiError(Error::MissingValue("query parameter phi".into())))?;
    Ok(Json(s.read().await.predictions(phi)?))
}

fn condition_request(b: ConditionBody) -> Result<ConditionRequest, Error> {
    let observations = match (b.csv, b.observations, b.samples) {
        (Some(csv), None, None) => parse_observations(&csv)?,
        (None, Some(o), None) => o,
        (None, None, Some(samples)) => {
            let mut o = parse_observations(&format!("{}\n", b.mapping.as_deref().unwrap_or("t,x")))?;
            o.samples = samples;
            o
        }
        _ => return Err(Error::InvalidValue("give exactly one of csv, observations, samples".into())),
    };
    Ok(ConditionRequest { phi: b.phi, observations, sigma: b.sigma, at: b.at, writeback: b.writeback })
}

async fn condition(State(s): State<Shared>, body: Bytes) -> ApiResult<upsilon_core::PosteriorReport> {
    let req = condition_request(parse_json(&body)?)?;
    if req.writeback {
        Ok(Json(s.write().await.condition(&req)?))
    } else {
        Ok(Json(s.read().await.clone().condition(&req)?))
    }
}

async fn world_table(State(s): State<Shared>) -> Json<Vec<upsilon_core::uncertain::WorldEntry>> {
    Json(s.read().await.world_table())
}

pub fn router(project: Project) -> Router {
    let state: Shared = Arc::new(RwLock::new(project));
    Router::new()
        .route("/phenomena", post(add_phenomenon))
        .route("/hypotheses", post(add_hypothesis))
        .route("/targets", post(add_target))
        .route("/trials", post(load_trial))
        .route("/simulate", post(simulate))
        .route("/u-intro", post(u_intro))
        .route("/catalog", get(catalog))
        .route("/relations/{name}", get(relation))
        .route("/urelations/{name}", get(urelation))
        .route("/predictions", get(predictions))
        .route("/condition", post(condition))
        .route("/world-table", get(world_table))
        .with_state(state)
}

pub async fn serve(project: Project, host: &str, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind((host, port)).await?;
    eprintln!("serving {} on http://{}", project.root().display(), listener.local_addr()?);
    axum::serve(listener, router(project)).await
}
