use std::collections::HashMap;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use gtruth_core::export::render_groundtruth;
use gtruth_core::raster;
use gtruth_core::{
    AnnotationSession, GroupingRecipe, LabelDef, Phase, Polygon, Rect, Rgb, RoiMode, SessionError,
    ThresholdParams,
};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::trace::TraceLayer;

use crate::bundle::zip_bundle;
use crate::error::{ApiError, JsonBody};
use crate::state::{AppState, PreviewKind};

pub const DEFAULT_CROP_MARGIN: u32 = 8;

pub fn router(state: AppState) -> Router {
    let limit = state.config().max_upload_bytes.min(usize::MAX as u64) as usize;
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(summary).delete(delete_session))
        .route("/sessions/{id}/binarize", post(binarize))
        .route("/sessions/{id}/recipe", post(recipe))
        .route("/sessions/{id}/units", post(generate_units).get(list_units))
        .route("/sessions/{id}/units/{uid}/crop", get(unit_crop))
        .route("/sessions/{id}/labels", post(add_label).get(list_labels))
        .route("/sessions/{id}/labels/{index}", delete(delete_label))
        .route("/sessions/{id}/assign", post(assign))
        .route("/sessions/{id}/roi", post(roi))
        .route("/sessions/{id}/preview", get(preview))
        .route("/sessions/{id}/mask.png", get(mask_png))
        .route("/sessions/{id}/grouped.png", get(grouped_png))
        .route("/sessions/{id}/finalize", post(finalize))
        .route("/sessions/{id}/export.zip", get(export_zip))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "NotFound", "no such route") })
        .layer(DefaultBodyLimit::max(limit))
        .layer(TraceLayer::new_for_http())
        .with_state(state)
}

type ApiResult<T> = Result<T, ApiError>;

fn png(bytes: Bytes) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

fn confirm_flag(q: &HashMap<String, String>) -> bool {
    matches!(q.get("confirm").map(String::as_str), Some("true" | "1"))
}

fn parse_id<T: std::str::FromStr>(raw: &str, what: &str) -> ApiResult<T> {
    raw.parse()
        .map_err(|_| ApiError::bad_request(format!("invalid {what} {raw:?}")))
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
    pub width: u32,
    pub height: u32,
    pub phase: Phase,
}

async fn create_session(
    State(state): State<AppState>,
    mut multipart: Multipart,
) -> ApiResult<(StatusCode, Json<Created>)> {
    let upload_error = |e: axum::extract::multipart::MultipartError| {
        let code = if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
            "UploadTooLarge"
        } else {
            "BadUpload"
        };
        ApiError::new(e.status(), code, e.body_text())
    };
    let mut upload = None;
    while let Some(field) = multipart.next_field().await.map_err(upload_error)? {
        if field.name() == Some("image") || field.file_name().is_some() {
            let name = field.file_name().unwrap_or("upload").to_string();
            let bytes = field.bytes().await.map_err(upload_error)?;
            upload = Some((name, bytes));
            break;
        }
    }
    let (name, bytes) =
        upload.ok_or_else(|| ApiError::bad_request("multipart body has no image field"))?;
    let source = state
        .blocking(move || Ok(raster::decode_source(&bytes)?))
        .await?;
    let session = AnnotationSession::new(name, source);
    let created = Created {
        width: session.width(),
        height: session.height(),
        phase: session.phase(),
        id: String::new(),
    };
    let entry = state.insert(session);
    tracing::info!(session = %entry.id, "created session");
    Ok((
        StatusCode::CREATED,
        Json(Created {
            id: entry.id.clone(),
            ..created
        }),
    ))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SourceSummary {
    pub file: String,
    pub width: u32,
    pub height: u32,
    pub dpi: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Summary {
    pub id: String,
    pub created_at: u64,
    pub phase: Phase,
    pub version: u64,
    pub source: SourceSummary,
    pub threshold: Option<ThresholdParams>,
    pub threshold_used: Option<u8>,
    pub recipe: Option<GroupingRecipe>,
    pub epsilon: f64,
    pub units: usize,
    pub labeled: usize,
    pub next_unlabeled: Option<u32>,
    pub labels: Vec<LabelDef>,
}

async fn summary(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<Summary>> {
    let entry = state.get(&id)?;
    let version = entry.version();
    let out = state
        .peek(&entry, |s| Summary {
            id: entry.id.clone(),
            created_at: entry.created_unix(),
            phase: s.phase(),
            version,
            source: SourceSummary {
                file: s.source_name().to_string(),
                width: s.width(),
                height: s.height(),
                dpi: s.source().dpi,
            },
            threshold: s.threshold().cloned(),
            threshold_used: s.threshold_used(),
            recipe: s.recipe().cloned(),
            epsilon: s.epsilon(),
            units: s.units().len(),
            labeled: s.labeled_count(),
            next_unlabeled: s.next_unlabeled(),
            labels: s.labels().labels().to_vec(),
        })
        .await;
    Ok(Json(out))
}

async fn delete_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<StatusCode> {
    state
        .remove(&id)
        .ok_or_else(|| ApiError::session_not_found(&id))?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BinarizeResponse {
    pub threshold: Option<u8>,
    pub foreground: usize,
    pub preview: String,
}

async fn binarize(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
    JsonBody(params): JsonBody<ThresholdParams>,
) -> ApiResult<Json<BinarizeResponse>> {
    let entry = state.get(&id)?;
    let confirm = confirm_flag(&q);
    let (threshold, foreground) = state
        .write(&entry, move |s| {
            let t = s.binarize(&params, confirm)?;
            Ok((t, s.mask().map_or(0, |m| m.count())))
        })
        .await?;
    Ok(Json(BinarizeResponse {
        threshold,
        foreground,
        preview: format!("/sessions/{id}/mask.png"),
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RecipeResponse {
    pub foreground: usize,
    pub preview: String,
}

async fn recipe(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
    JsonBody(recipe): JsonBody<GroupingRecipe>,
) -> ApiResult<Json<RecipeResponse>> {
    let entry = state.get(&id)?;
    let confirm = confirm_flag(&q);
    let foreground = state
        .write(&entry, move |s| Ok(s.set_recipe(recipe, confirm)?.count()))
        .await?;
    Ok(Json(RecipeResponse {
        foreground,
        preview: format!("/sessions/{id}/grouped.png"),
    }))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct UnitsRequest {
    epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitView {
    pub id: u32,
    pub polygon: Polygon,
    pub bbox: Rect,
    pub area: u64,
    pub label: Option<u8>,
}

fn unit_views(s: &AnnotationSession) -> Vec<UnitView> {
    s.units()
        .iter()
        .map(|u| UnitView {
            id: u.id,
            polygon: u.polygon.clone(),
            bbox: u.bbox,
            area: u.pixels.area(),
            label: u.label,
        })
        .collect()
}

/// The body is optional; an empty one means default parameters.
async fn generate_units(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
    body: Bytes,
) -> ApiResult<Json<Vec<UnitView>>> {
    let req: UnitsRequest = if body.iter().all(u8::is_ascii_whitespace) {
        UnitsRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| {
            ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "InvalidBody",
                e.to_string(),
            )
        })?
    };
    let entry = state.get(&id)?;
    let confirm = confirm_flag(&q);
    let views = state
        .write(&entry, move |s| {
            s.generate_units(req.epsilon, confirm)?;
            Ok(unit_views(s))
        })
        .await?;
    Ok(Json(views))
}

async fn list_units(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<Vec<u32>>> {
    let entry = state.get(&id)?;
    let filter: fn(Option<u8>) -> bool = match q.get("status").map(String::as_str) {
        None | Some("all") => |_| true,
        Some("unlabeled") => |l| l.is_none(),
        Some("labeled") => |l| l.is_some(),
        Some(other) => return Err(ApiError::bad_request(format!("unknown status {other:?}"))),
    };
    let ids = state
        .peek(&entry, |s| {
            s.units()
                .iter()
                .filter(|u| filter(u.label))
                .map(|u| u.id)
                .collect()
        })
        .await;
    Ok(Json(ids))
}

async fn unit_crop(
    State(state): State<AppState>,
    Path((id, uid)): Path<(String, String)>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    let unit: u32 = parse_id(&uid, "unit id")?;
    let margin = match q.get("margin") {
        Some(m) => parse_id(m, "margin")?,
        None => DEFAULT_CROP_MARGIN,
    };
    let entry = state.get(&id)?;
    let bytes = state
        .cached_png(&entry, PreviewKind::Crop { unit, margin }, move |s| {
            Ok(s.unit_crop(unit, margin)?.to_png())
        })
        .await?;
    Ok(png(bytes))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelRequest {
    name: String,
    #[serde(default)]
    color: Option<Rgb>,
}

async fn add_label(
    State(state): State<AppState>,
    Path(id): Path<String>,
    JsonBody(req): JsonBody<LabelRequest>,
) -> ApiResult<(StatusCode, Json<LabelDef>)> {
    let entry = state.get(&id)?;
    let def = state
        .write(&entry, move |s| Ok(s.add_label(&req.name, req.color)?))
        .await?;
    Ok((StatusCode::CREATED, Json(def)))
}

async fn list_labels(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<Vec<LabelDef>>> {
    let entry = state.get(&id)?;
    Ok(Json(
        state.peek(&entry, |s| s.labels().labels().to_vec()).await,
    ))
}

async fn delete_label(
    State(state): State<AppState>,
    Path((id, index)): Path<(String, String)>,
) -> ApiResult<Json<LabelDef>> {
    let index: u8 = parse_id(&index, "label index")?;
    let entry = state.get(&id)?;
    Ok(Json(
        state
            .write(&entry, move |s| Ok(s.delete_label(index)?))
            .await?,
    ))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AssignRequest {
    unit: u32,
    label: u8,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AssignResponse {
    pub unit: u32,
    pub label: u8,
    pub next_unlabeled: Option<u32>,
}

async fn assign(
    State(state): State<AppState>,
    Path(id): Path<String>,
    JsonBody(req): JsonBody<AssignRequest>,
) -> ApiResult<Json<AssignResponse>> {
    let entry = state.get(&id)?;
    let next = state
        .write(&entry, move |s| {
            s.assign_label(req.unit, req.label)?;
            Ok(s.next_unlabeled())
        })
        .await?;
    Ok(Json(AssignResponse {
        unit: req.unit,
        label: req.label,
        next_unlabeled: next,
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoiRequest {
    rect: Rect,
    mode: RoiMode,
    #[serde(default)]
    label: Option<u8>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RoiResponse {
    pub affected: Vec<u32>,
    /// No unit lies fully inside the rectangle; nothing changed.
    pub empty_roi: bool,
}

async fn roi(
    State(state): State<AppState>,
    Path(id): Path<String>,
    JsonBody(req): JsonBody<RoiRequest>,
) -> ApiResult<Json<RoiResponse>> {
    let entry = state.get(&id)?;
    let out = state
        .write(&entry, move |s| {
            match s.annotate_roi(req.rect, req.mode, req.label) {
                Ok(affected) => Ok(RoiResponse {
                    affected,
                    empty_roi: false,
                }),
                Err(SessionError::EmptyRoi) => Ok(RoiResponse {
                    affected: Vec::new(),
                    empty_roi: true,
                }),
                Err(e) => Err(e.into()),
            }
        })
        .await?;
    Ok(Json(out))
}

async fn preview(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let entry = state.get(&id)?;
    let bytes = state
        .cached_png(&entry, PreviewKind::Preview, |s| {
            Ok(s.render_preview()?.to_png())
        })
        .await?;
    Ok(png(bytes))
}

fn missing(op: &'static str, s: &AnnotationSession) -> ApiError {
    SessionError::WrongPhase {
        op,
        phase: s.phase(),
    }
    .into()
}

async fn mask_png(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let entry = state.get(&id)?;
    let bytes = state
        .cached_png(&entry, PreviewKind::Mask, |s| {
            s.mask()
                .map(|m| m.to_png())
                .ok_or_else(|| missing("mask", s))
        })
        .await?;
    Ok(png(bytes))
}

async fn grouped_png(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let entry = state.get(&id)?;
    let bytes = state
        .cached_png(&entry, PreviewKind::Grouped, |s| {
            s.grouped()
                .map(|m| m.to_png())
                .ok_or_else(|| missing("grouped", s))
        })
        .await?;
    Ok(png(bytes))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FinalizeResponse {
    pub ok: bool,
    pub units: usize,
    pub labels: usize,
}

async fn finalize(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<FinalizeResponse>> {
    let entry = state.get(&id)?;
    let out = state
        .write(&entry, |s| {
            s.finalize()?;
            Ok(FinalizeResponse {
                ok: true,
                units: s.units().len(),
                labels: s.labels().len(),
            })
        })
        .await?;
    Ok(Json(out))
}

async fn export_zip(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let entry = state.get(&id)?;
    let (name, bytes) = state
        .read(&entry, |s, _| {
            let rendered = render_groundtruth(s)?;
            let zip = zip_bundle(&rendered).map_err(|e| ApiError::internal(e.to_string()))?;
            Ok((format!("{}_gt.zip", rendered.stem), zip))
        })
        .await?;
    let disposition = format!(
        "attachment; filename=\"{}\"",
        name.replace(['"', '\\'], "_")
    );
    Ok((
        [
            (header::CONTENT_TYPE, "application/zip".to_string()),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        bytes,
    )
        .into_response())
}
