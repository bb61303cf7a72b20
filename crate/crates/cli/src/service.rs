//! HTTP front end for rendering perturbed views of one loaded LDI.
//!
//! | route          | response                                              |
//! |----------------|-------------------------------------------------------|
//! | `GET /meta`    | JSON: image size, intrinsics, reference pose          |
//! | `POST /render` | PNG; `x-void-count` header. Body `{dx, dy, dz, use_ldi}` |
//! | `GET /layers`  | the `.ldi` container bytes                            |
//!
//! A body that does not parse gives 400 with the reason, a render failure
//! 500 with the error text.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use ldi_core::container::encode;
use ldi_core::imageio::encode_png_rgb;
use ldi_core::render::{render_ldi, render_single_layer, RenderOptions, RenderedView, ViewPerturbation};
use ldi_core::{LayeredDepthImage, Result};

pub const VOID_COUNT_HEADER: &str = "x-void-count";

/// Shared, read-only state. Requests never mutate the LDI.
pub struct AppState {
    pub ldi: LayeredDepthImage,
    container: Vec<u8>,
    pub options: RenderOptions,
}

impl AppState {
    pub fn new(ldi: LayeredDepthImage, options: RenderOptions) -> Result<Self> {
        let container = encode(&ldi)?;
        Ok(AppState { ldi, container, options })
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RenderRequest {
    pub dx: f64,
    pub dy: f64,
    #[serde(default)]
    pub dz: f64,
    #[serde(default = "yes")]
    pub use_ldi: bool,
}

fn yes() -> bool {
    true
}

impl RenderRequest {
    pub fn perturbation(&self) -> ViewPerturbation {
        ViewPerturbation::translation(self.dx, self.dy, self.dz)
    }
}

#[derive(Serialize)]
struct Meta {
    width: usize,
    height: usize,
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    /// Row-major camera-to-world matrix of the reference view.
    ref_pose: [f64; 16],
    foreground_pixels: usize,
    background_valid: usize,
}

/// Renders exactly what `POST /render` would return for `req`.
pub fn render_request(state: &AppState, req: &RenderRequest) -> Result<RenderedView> {
    let pert = req.perturbation();
    if req.use_ldi {
        render_ldi(&state.ldi, &pert, &state.options)
    } else {
        render_single_layer(&state.ldi, &pert, &state.options)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/meta", get(meta))
        .route("/render", post(render))
        .route("/layers", get(layers))
        .with_state(state)
}

async fn meta(State(state): State<Arc<AppState>>) -> Json<Meta> {
    let ldi = &state.ldi;
    let k = &ldi.camera;
    Json(Meta {
        width: k.width,
        height: k.height,
        fx: k.fx,
        fy: k.fy,
        cx: k.cx,
        cy: k.cy,
        ref_pose: ldi.ref_pose.to_row_major(),
        foreground_pixels: ldi.fg_mask.count(),
        background_valid: ldi.background.valid.count(),
    })
}

async fn render(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let req: RenderRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return (StatusCode::BAD_REQUEST, format!("malformed render request: {e}")).into_response(),
    };
    let job = tokio::task::spawn_blocking(move || {
        let view = render_request(&state, &req)?;
        Ok::<_, ldi_core::Error>((encode_png_rgb(&view.color)?, view.void_count()))
    });
    match job.await {
        Ok(Ok((png, voids))) => {
            log::debug!("render {req:?}: {voids} void pixels");
            (
                [
                    (header::CONTENT_TYPE, HeaderValue::from_static("image/png")),
                    (header::HeaderName::from_static(VOID_COUNT_HEADER), HeaderValue::from(voids)),
                ],
                png,
            )
                .into_response()
        }
        Ok(Err(e)) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, format!("render task failed: {e}")).into_response(),
    }
}

async fn layers(State(state): State<Arc<AppState>>) -> Response {
    (
        [(header::CONTENT_TYPE, HeaderValue::from_static("application/octet-stream"))],
        state.container.clone(),
    )
        .into_response()
}

/// Serves until ctrl-c.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
