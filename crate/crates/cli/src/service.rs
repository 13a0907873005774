//! Stateless HTTP API backing the interactive viewer.
//!
//! | route            | body / query          | reply            |
//! |------------------|-----------------------|------------------|
//! | `GET /health`    |                       | `{"status":"ok"}`|
//! | `POST /cutout`   | [`CutoutRequest`]     | [`CutoutResponse`] |
//! | `POST /pmap/oracle` | [`OracleRequest`]  | [`PmapResponse`] |
//! | `GET /synth?seed=N` |                    | [`SynthResponse`] |
//!
//! Failures reply `{"error": code, "detail": text}` with 400 for
//! undecodable input, 413 above the body cap, 422 for requests that decode
//! but cannot be served, and 500 otherwise.

use std::time::Instant;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Query};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pmap_cutout::cutout::{plain_grabcut_traced, pmap_grabcut_in_rect};
use pmap_cutout::eval::mask_iou;
use pmap_cutout::io::{
    decode_image, decode_mask, decode_pmap, encode_mask, encode_pmap, encode_png, PmapFormat,
};
use pmap_cutout::synth::{gen_scene, oracle_pmap, scene_pmap, OracleNoise, SceneSpec, SynthScene};
use pmap_cutout::{CutoutMask, Error, ProbMap};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::wire::{
    decode_b64, encode_b64, trace_entries, CutoutMode, CutoutRequest, CutoutResponse, ErrorBody,
    OracleRequest, PmapResponse, SynthResponse,
};

/// Largest accepted request body.
pub const MAX_BODY_BYTES: usize = 32 * 1024 * 1024;

/// Service-level failure: a machine-readable code, its HTTP status and a
/// human-readable detail.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub detail: String,
}

impl ApiError {
    fn malformed(detail: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            code: "MalformedRequest",
            detail: detail.into(),
        }
    }
}

/// HTTP status for an engine error code.
pub fn status_for(err: &Error) -> StatusCode {
    match err {
        Error::UnsupportedFormat(_) | Error::CorruptData(_) | Error::Parse { .. } => {
            StatusCode::BAD_REQUEST
        }
        Error::Io(_) | Error::NotFound(_) => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        Self {
            status: status_for(&err),
            code: err.code(),
            detail: err.to_string(),
        }
    }
}

impl From<BytesRejection> for ApiError {
    fn from(rej: BytesRejection) -> Self {
        let status = rej.status();
        if status == StatusCode::PAYLOAD_TOO_LARGE {
            Self {
                status,
                code: "PayloadTooLarge",
                detail: format!("request body exceeds {MAX_BODY_BYTES} bytes"),
            }
        } else {
            Self::malformed(rej.body_text())
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(code = self.code, detail = %self.detail, "request failed");
        } else {
            tracing::debug!(code = self.code, detail = %self.detail, "request rejected");
        }
        let body = ErrorBody {
            error: self.code.to_string(),
            detail: self.detail,
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router() -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/cutout", post(cutout))
        .route("/pmap/oracle", post(pmap_oracle))
        .route("/synth", get(synth))
        .fallback(|| async {
            ApiError {
                status: StatusCode::NOT_FOUND,
                code: "NotFound",
                detail: "no such route".into(),
            }
        })
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
}

/// Serves [`router`] until the process receives Ctrl-C.
pub async fn serve(bind: &str, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind((bind, port)).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

fn parse_body<T: DeserializeOwned>(body: Result<Bytes, BytesRejection>) -> Result<T, ApiError> {
    let bytes = body?;
    serde_json::from_slice(&bytes)
        .map_err(|e| ApiError::malformed(format!("invalid JSON body: {e}")))
}

async fn cutout(body: Result<Bytes, BytesRejection>) -> ApiResult<CutoutResponse> {
    let req: CutoutRequest = parse_body(body)?;
    // cutouts are CPU-bound; keep them off the async workers
    tokio::task::spawn_blocking(move || run_cutout(&req))
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            code: "Internal",
            detail: e.to_string(),
        })?
        .map(Json)
}

fn decode_masks(field: &'static str, items: &[String]) -> Result<Vec<CutoutMask>, Error> {
    items
        .iter()
        .map(|m| decode_mask(&decode_b64(field, m)?))
        .collect()
}

/// Executes one cutout request. Shared by the HTTP handler and tests.
pub fn run_cutout(req: &CutoutRequest) -> Result<CutoutResponse, ApiError> {
    let start = Instant::now();
    let image = decode_image(&decode_b64("image", &req.image)?)?;
    let (width, height) = image.dims();
    req.rect.check_inside(width, height)?;
    let gt = req
        .gt
        .as_deref()
        .map(|g| decode_b64("gt", g).and_then(|b| decode_mask(&b)))
        .transpose()?;
    if let Some(g) = &gt {
        if g.dims() != image.dims() {
            return Err(Error::DimensionMismatch {
                expected: format!("{width}x{height} gt mask"),
                got: format!("{}x{}", g.width(), g.height()),
            }
            .into());
        }
    }

    let (mask, trace) = match req.mode {
        CutoutMode::Plain => plain_grabcut_traced(&image, &req.rect, &req.params)?,
        CutoutMode::Pmap => {
            let pmap = match (&req.pmap, &req.oracle) {
                (Some(p), None) => decode_pmap(&decode_b64("pmap", p)?)?,
                (None, Some(noise)) => {
                    let gt = gt.as_ref().ok_or(Error::InvalidParam(
                        "oracle mode needs a gt mask to synthesize the P-map from".into(),
                    ))?;
                    let confusers = decode_masks("confusers", &req.confusers)?;
                    let refs: Vec<&CutoutMask> = confusers.iter().collect();
                    oracle_pmap(gt, &refs, noise)?
                }
                (Some(_), Some(_)) => {
                    return Err(
                        Error::InvalidParam("give either pmap or oracle, not both".into()).into(),
                    )
                }
                (None, None) => {
                    return Err(
                        Error::InvalidParam("pmap mode needs a pmap or an oracle".into()).into(),
                    )
                }
            };
            pmap_grabcut_in_rect(&image, &pmap, &req.rect, &req.params)?
        }
    };
    let iou = gt.as_ref().map(|g| mask_iou(&mask, g)).transpose()?;
    Ok(CutoutResponse {
        mask: encode_b64(&encode_mask(&mask)),
        width,
        height,
        mode: req.mode,
        iou,
        trace: trace_entries(&trace),
        timing_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

async fn pmap_oracle(body: Result<Bytes, BytesRejection>) -> ApiResult<PmapResponse> {
    let req: OracleRequest = parse_body(body)?;
    let scene = gen_scene(&SceneSpec::clutter(req.seed))?;
    let noise = req.noise.unwrap_or_default();
    let pmap = match req.target {
        None => scene_pmap(&scene, &noise)?,
        Some(t) if t < scene.gt_masks.len() => {
            oracle_pmap(&scene.gt_masks[t], &scene.confusers(t), &noise)?
        }
        Some(t) => {
            return Err(Error::InvalidParam(format!(
                "target {t} does not exist; scene has {}",
                scene.gt_masks.len()
            ))
            .into())
        }
    };
    Ok(Json(pmap_response(&pmap)))
}

fn pmap_response(pmap: &ProbMap) -> PmapResponse {
    PmapResponse {
        pmap: encode_b64(&encode_pmap(pmap, PmapFormat::Pgm16)),
        width: pmap.width(),
        height: pmap.height(),
    }
}

#[derive(Debug, Deserialize)]
struct SynthQuery {
    seed: Option<u64>,
}

async fn synth(
    query: Result<Query<SynthQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult<SynthResponse> {
    let Query(q) = query.map_err(|e| ApiError::malformed(e.body_text()))?;
    let seed = q
        .seed
        .ok_or_else(|| ApiError::malformed("missing query parameter seed"))?;
    Ok(Json(synth_bundle(seed)?))
}

/// Demo scene bundle for `seed`.
pub fn synth_bundle(seed: u64) -> Result<SynthResponse, Error> {
    let spec = SceneSpec::clutter(seed);
    let scene: SynthScene = gen_scene(&spec)?;
    let noise = OracleNoise {
        seed,
        ..OracleNoise::default()
    };
    let pmap = scene_pmap(&scene, &noise)?;
    Ok(SynthResponse {
        seed,
        image: encode_b64(&encode_png(&scene.image)?),
        gt_masks: scene
            .gt_masks
            .iter()
            .map(|m| encode_b64(&encode_mask(m)))
            .collect(),
        gt_rects: scene.gt_rects.clone(),
        pmap: encode_b64(&encode_pmap(&pmap, PmapFormat::Pgm16)),
        noise,
        spec,
    })
}
