use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vanity_core::colormodel::Palette;
use vanity_core::geometry::{LandmarkDocument, LandmarkSet};
use vanity_core::imageops::{decode_png_rgb8, encode_png_gray8, encode_png_rgb8, LabColor};
use vanity_core::recommender::{recommend, LabelSpace, MakeupLabel, RecommendationCard};
use vanity_core::synthesis::{synthesize, Intensities, MakeupSpec};

use crate::error::{ApiError, ApiResult};
use crate::{content_id, AppState, StoredImage, StoredResult};

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/images", post(upload))
        .route("/api/images/{id}/original.png", get(original))
        .route("/api/images/{id}/landmarks", put(put_landmarks).get(get_landmarks))
        .route("/api/images/{id}/landmarks:auto", post(auto_landmarks))
        .route("/api/images/{id}/recommendations", get(recommendations))
        .route("/api/images/{id}/synthesize", post(synthesize_image))
        .route("/api/images/{id}/compare", get(compare))
        .route("/api/results/{file}", get(result_png))
        .route("/api/templates/{file}", get(template_png))
        .route("/api/catalog", get(catalog))
        .with_state(state)
}

fn png_response(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png"), (header::CACHE_CONTROL, "public, max-age=31536000, immutable")], bytes)
        .into_response()
}

fn strip_png(file: &str) -> Option<&str> {
    file.strip_suffix(".png")
}

fn image(state: &AppState, id: &str) -> ApiResult<Arc<StoredImage>> {
    state.inner.images.get(id).map(|e| Arc::clone(e.value())).ok_or_else(|| ApiError::not_found("image", id))
}

fn landmarks(state: &AppState, id: &str) -> ApiResult<LandmarkSet> {
    image(state, id)?;
    state.inner.landmarks.get(id).map(|l| l.clone()).ok_or_else(|| ApiError::missing_landmarks(id))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ImageCreated {
    pub image_id: String,
}

async fn upload(State(state): State<AppState>, body: Body) -> ApiResult<Json<ImageCreated>> {
    let cap = state.inner.max_upload_bytes;
    let bytes = to_bytes(body, cap).await.map_err(|_| {
        ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "too_large", format!("upload exceeds {cap} bytes"))
    })?;
    if !bytes.starts_with(PNG_SIGNATURE) {
        return Err(ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, "not_png", "body is not a PNG image"));
    }
    let id = content_id(&bytes);
    if state.inner.images.contains_key(&id) {
        return Ok(Json(ImageCreated { image_id: id }));
    }
    let rgb = decode_png_rgb8(&bytes)
        .map_err(|e| ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, "not_png", format!("PNG decode failed: {e}")))?;
    let png = bytes.to_vec();
    let inserted = state.inner.images.entry(id.clone()).or_insert_with(|| Arc::new(StoredImage { png, rgb })).clone();
    state.persist_image(&id, &inserted.png);
    Ok(Json(ImageCreated { image_id: id }))
}

async fn original(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(png_response(image(&state, &id)?.png.clone()))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Ack {
    pub ok: bool,
}

fn attach(state: &AppState, id: &str, doc: LandmarkDocument) -> ApiResult<()> {
    let img = image(state, id)?;
    let lm = LandmarkSet::try_from(doc).map_err(|e| ApiError::unprocessable("invalid_landmarks", e.to_string()))?;
    if (lm.width(), lm.height()) != (img.rgb.width() as usize, img.rgb.height() as usize) {
        return Err(ApiError::unprocessable(
            "invalid_landmarks",
            format!(
                "landmarks are for a {}x{} image but the image is {}x{}",
                lm.width(),
                lm.height(),
                img.rgb.width(),
                img.rgb.height()
            ),
        ));
    }
    state.persist_landmarks(id, &lm);
    state.inner.landmarks.insert(id.to_string(), lm);
    Ok(())
}

async fn put_landmarks(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<LandmarkDocument>, JsonRejection>,
) -> ApiResult<Json<Ack>> {
    image(&state, &id)?;
    let Json(doc) = body.map_err(|e| ApiError::unprocessable("invalid_landmarks", e.body_text()))?;
    attach(&state, &id, doc)?;
    Ok(Json(Ack { ok: true }))
}

async fn get_landmarks(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<LandmarkDocument>> {
    Ok(Json(landmarks(&state, &id)?.to_document()))
}

async fn auto_landmarks(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<LandmarkDocument>> {
    let img = image(&state, &id)?;
    let (client, url) = state.inner.provider.as_ref().ok_or_else(|| {
        ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "provider_unavailable", "no landmark provider configured")
    })?;
    let bad_gateway = |m: String| ApiError::new(StatusCode::BAD_GATEWAY, "provider_failed", m);
    let resp = client
        .post(url)
        .header(header::CONTENT_TYPE.as_str(), "image/png")
        .body(img.png.clone())
        .send()
        .await
        .map_err(|e| bad_gateway(format!("provider request failed: {e}")))?;
    if !resp.status().is_success() {
        return Err(bad_gateway(format!("provider answered {}", resp.status())));
    }
    let body = resp.bytes().await.map_err(|e| bad_gateway(format!("provider body: {e}")))?;
    let doc: LandmarkDocument =
        serde_json::from_slice(&body).map_err(|e| bad_gateway(format!("malformed provider response: {e}")))?;
    attach(&state, &id, doc.clone()).map_err(|e| bad_gateway(format!("provider landmarks rejected: {}", e.message)))?;
    Ok(Json(doc))
}

#[derive(Debug, Deserialize)]
struct KQuery {
    k: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Recommendations {
    pub image_id: String,
    pub cards: Vec<RecommendationCard>,
}

async fn recommendations(
    State(state): State<AppState>,
    Path(id): Path<String>,
    query: Result<Query<KQuery>, QueryRejection>,
) -> ApiResult<Json<Recommendations>> {
    let Query(q) = query.map_err(|e| ApiError::unprocessable("invalid_query", e.body_text()))?;
    let img = image(&state, &id)?;
    let lm = landmarks(&state, &id)?;
    let k = q.k.unwrap_or(5);
    if k == 0 {
        return Err(ApiError::unprocessable("invalid_query", "k must be >= 1"));
    }
    let st = state.clone();
    let cards = tokio::task::spawn_blocking(move || recommend(&st.inner.model, &st.inner.db, &img.rgb, &lm, k))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| ApiError::unprocessable("recommendation_failed", e.to_string()))?;
    Ok(Json(Recommendations { image_id: id, cards }))
}

/// A palette color by index, or an arbitrary `#rrggbb`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColorRef {
    Index(usize),
    Hex(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitSpec {
    pub template_id: usize,
    pub eyeshadow_color: ColorRef,
    pub lip_color: ColorRef,
    pub foundation_color: ColorRef,
}

/// Exactly one of `label` and `spec`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesizeRequest {
    #[serde(default)]
    pub label: Option<MakeupLabel>,
    #[serde(default)]
    pub spec: Option<ExplicitSpec>,
    #[serde(default)]
    pub intensities: Intensities,
}

fn resolve_color(palette: &Palette, c: &ColorRef, slot: &str) -> ApiResult<LabColor> {
    match c {
        ColorRef::Index(i) => palette.centers.get(*i).copied().ok_or_else(|| {
            ApiError::unprocessable("invalid_spec", format!("{slot} index {i} out of range 0..{}", palette.len()))
        }),
        ColorRef::Hex(h) => LabColor::from_hex(h)
            .ok_or_else(|| ApiError::unprocessable("invalid_spec", format!("{slot} color {h:?} is not #rrggbb"))),
    }
}

fn resolve_spec(state: &AppState, req: &SynthesizeRequest) -> ApiResult<MakeupSpec> {
    let db = &state.inner.db;
    req.intensities.validate().map_err(|e| ApiError::unprocessable("invalid_spec", e.to_string()))?;
    match (&req.label, &req.spec) {
        (Some(label), None) => {
            db.spec_for(label, req.intensities).map_err(|e| ApiError::unprocessable("invalid_spec", e.to_string()))
        }
        (None, Some(spec)) => {
            let template = db.templates.get(spec.template_id).cloned().ok_or_else(|| {
                ApiError::unprocessable(
                    "invalid_spec",
                    format!("template id {} out of range 0..{}", spec.template_id, db.templates.len()),
                )
            })?;
            Ok(MakeupSpec {
                template,
                eyeshadow_color: resolve_color(&db.eyeshadow, &spec.eyeshadow_color, "eyeshadow_color")?,
                lip_color: resolve_color(&db.lip, &spec.lip_color, "lip_color")?,
                foundation_color: resolve_color(&db.foundation, &spec.foundation_color, "foundation_color")?,
                intensities: req.intensities,
            })
        }
        _ => Err(ApiError::unprocessable("invalid_spec", "give exactly one of `label` and `spec`")),
    }
}

fn result_id(image_id: &str, lm: &LandmarkSet, spec: &MakeupSpec) -> String {
    let mut h = Sha256::new();
    h.update(image_id.as_bytes());
    h.update(lm.to_text().as_bytes());
    h.update(spec.template.id.to_le_bytes());
    for c in [spec.eyeshadow_color, spec.lip_color, spec.foundation_color] {
        for v in c.to_array() {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    let it = spec.intensities;
    for v in [it.foundation, it.eyeshadow, it.lip] {
        h.update(v.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SynthesisCreated {
    pub result_id: String,
    pub cached: bool,
}

async fn synthesize_image(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<SynthesizeRequest>, JsonRejection>,
) -> ApiResult<Json<SynthesisCreated>> {
    let img = image(&state, &id)?;
    let Json(req) = body.map_err(|e| ApiError::unprocessable("invalid_spec", e.body_text()))?;
    let lm = landmarks(&state, &id)?;
    let spec = resolve_spec(&state, &req)?;
    let rid = result_id(&id, &lm, &spec);
    if state.inner.results.contains_key(&rid) {
        return Ok(Json(SynthesisCreated { result_id: rid, cached: true }));
    }
    let _permit = state.inner.workers.acquire().await.map_err(|e| ApiError::internal(e.to_string()))?;
    if state.inner.results.contains_key(&rid) {
        return Ok(Json(SynthesisCreated { result_id: rid, cached: true }));
    }
    let config = state.inner.synthesis;
    let png = tokio::task::spawn_blocking(move || {
        synthesize(&img.rgb, &lm, &spec, &config).map(|s| encode_png_rgb8(&s.after))
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?
    .map_err(|e| ApiError::unprocessable("synthesis_failed", e.to_string()))?;
    state.inner.results.entry(rid.clone()).or_insert_with(|| Arc::new(StoredResult { image_id: id, png }));
    Ok(Json(SynthesisCreated { result_id: rid, cached: false }))
}

async fn result_png(State(state): State<AppState>, Path(file): Path<String>) -> ApiResult<Response> {
    let rid = strip_png(&file).ok_or_else(|| ApiError::not_found("result", &file))?;
    let r = state
        .inner
        .results
        .get(rid)
        .map(|e| Arc::clone(e.value()))
        .ok_or_else(|| ApiError::not_found("result", rid))?;
    Ok(png_response(r.png.clone()))
}

#[derive(Debug, Deserialize)]
struct CompareQuery {
    result: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Comparison {
    pub before_url: String,
    pub after_url: String,
}

async fn compare(
    State(state): State<AppState>,
    Path(id): Path<String>,
    query: Result<Query<CompareQuery>, QueryRejection>,
) -> ApiResult<Json<Comparison>> {
    let Query(q) = query.map_err(|e| ApiError::unprocessable("invalid_query", e.body_text()))?;
    image(&state, &id)?;
    let belongs = state.inner.results.get(&q.result).is_some_and(|r| r.image_id == id);
    if !belongs {
        return Err(ApiError::not_found("result", &q.result));
    }
    Ok(Json(Comparison {
        before_url: format!("/api/images/{id}/original.png"),
        after_url: format!("/api/results/{}.png", q.result),
    }))
}

async fn template_png(State(state): State<AppState>, Path(file): Path<String>) -> ApiResult<Response> {
    let t = strip_png(&file)
        .and_then(|s| s.parse::<usize>().ok())
        .and_then(|i| state.inner.db.templates.get(i))
        .ok_or_else(|| ApiError::not_found("template", &file))?;
    Ok(png_response(encode_png_gray8(&t.alpha.to_gray8())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogTemplate {
    pub id: usize,
    pub thumbnail_url: String,
    pub mean_hex: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogColor {
    pub index: usize,
    pub hex: String,
    pub lab: LabColor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogResponse {
    pub label_space: LabelSpace,
    pub templates: Vec<CatalogTemplate>,
    pub eyeshadow: Vec<CatalogColor>,
    pub lip: Vec<CatalogColor>,
    pub foundation: Vec<CatalogColor>,
}

fn colors(p: &Palette) -> Vec<CatalogColor> {
    p.centers.iter().enumerate().map(|(index, &lab)| CatalogColor { index, hex: lab.to_hex(), lab }).collect()
}

async fn catalog(State(state): State<AppState>) -> ApiResult<Json<CatalogResponse>> {
    let db = &state.inner.db;
    Ok(Json(CatalogResponse {
        label_space: state.inner.model.labels,
        templates: db
            .templates
            .iter()
            .map(|t| CatalogTemplate {
                id: t.id,
                thumbnail_url: format!("/api/templates/{}.png", t.id),
                mean_hex: t.mean_color.to_hex(),
            })
            .collect(),
        eyeshadow: colors(&db.eyeshadow),
        lip: colors(&db.lip),
        foundation: colors(&db.foundation),
    }))
}
