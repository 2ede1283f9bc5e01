//! Read-only HTTP service over a bundle directory.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;

use crate::bundle::{AssetBundle, MANIFEST_FILE};
use crate::error::{Result, StreamError};
use crate::manifest::GroupEntry;
use crate::range::{parse_range, RangeError};

/// Environment variable overriding the configured asset root.
pub const ASSET_ROOT_ENV: &str = "VIDEORF_ASSET_ROOT";
pub const IMMUTABLE: &str = "public, max-age=31536000, immutable";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServeConfig {
    pub addr: SocketAddr,
    pub asset_root: PathBuf,
    pub cache_control: String,
    /// Value of `Access-Control-Allow-Origin`; `None` disables CORS headers.
    pub cors_origin: Option<String>,
}

impl ServeConfig {
    pub fn new(addr: SocketAddr, asset_root: impl Into<PathBuf>) -> Self {
        ServeConfig {
            addr,
            asset_root: asset_root.into(),
            cache_control: IMMUTABLE.into(),
            cors_origin: Some("*".into()),
        }
    }

    /// Applies the `VIDEORF_ASSET_ROOT` override, if set.
    pub fn with_env_override(mut self) -> Self {
        if let Some(root) = std::env::var_os(ASSET_ROOT_ENV) {
            self.asset_root = root.into();
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.addr.port() == 0 {
            return Err(StreamError::Usage("port must be nonzero".into()));
        }
        if !self.asset_root.is_dir() {
            return Err(StreamError::Usage(format!(
                "asset root {} is not a directory",
                self.asset_root.display()
            )));
        }
        Ok(())
    }
}

struct AppState {
    bundle: AssetBundle,
    cache_control: HeaderValue,
    cors_origin: Option<HeaderValue>,
}

/// The service's routes over an opened bundle.
pub fn router(cfg: &ServeConfig) -> Result<Router> {
    let bundle = AssetBundle::open(&cfg.asset_root)?;
    bundle.manifest.validate_assets(&cfg.asset_root)?;
    let header = |s: &str| {
        HeaderValue::from_str(s).map_err(|_| StreamError::Usage(format!("invalid header value {s:?}")))
    };
    let state = Arc::new(AppState {
        bundle,
        cache_control: header(&cfg.cache_control)?,
        cors_origin: cfg.cors_origin.as_deref().map(header).transpose()?,
    });
    Ok(Router::new()
        .route("/manifest.json", get(manifest))
        .route("/mlp.json", get(mlp))
        .route("/gof/{id}/stream", get(stream))
        .route("/gof/{id}/mapping.png", get(mapping))
        .route("/gof/{id}/mapping.mask", get(mapping_mask))
        .route("/gof/{id}/occupancy.bin", get(occupancy))
        .with_state(state))
}

/// Binds and serves until Ctrl-C.
pub async fn serve(cfg: ServeConfig) -> Result<()> {
    cfg.validate()?;
    let app = router(&cfg)?;
    let listener = tokio::net::TcpListener::bind(cfg.addr).await?;
    log::info!("serving {} on http://{}", cfg.asset_root.display(), listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

type Shared = State<Arc<AppState>>;

fn status(code: StatusCode) -> Response {
    (code, code.canonical_reason().unwrap_or_default()).into_response()
}

async fn read_asset(state: &AppState, uri: &str) -> std::result::Result<Vec<u8>, Response> {
    tokio::fs::read(state.bundle.root.join(uri)).await.map_err(|e| {
        log::error!("reading {uri}: {e}");
        if e.kind() == std::io::ErrorKind::NotFound {
            status(StatusCode::NOT_FOUND)
        } else {
            status(StatusCode::INTERNAL_SERVER_ERROR)
        }
    })
}

fn group<'a>(state: &'a AppState, id: &str) -> std::result::Result<&'a GroupEntry, Response> {
    id.parse::<u32>()
        .ok()
        .and_then(|id| state.bundle.manifest.group(id))
        .ok_or_else(|| status(StatusCode::NOT_FOUND))
}

/// Serves `uri`, honoring a single `Range` request.
async fn asset(state: &AppState, uri: &str, content_type: &str, headers: &HeaderMap) -> Response {
    let bytes = match read_asset(state, uri).await {
        Ok(b) => b,
        Err(r) => return r,
    };
    let len = bytes.len() as u64;
    let mut builder = Response::builder()
        .header(header::CONTENT_TYPE, content_type)
        .header(header::CACHE_CONTROL, state.cache_control.clone())
        .header(header::ACCEPT_RANGES, "bytes");
    if let Some(origin) = &state.cors_origin {
        builder = builder.header(header::ACCESS_CONTROL_ALLOW_ORIGIN, origin.clone());
    }
    let range = headers.get(header::RANGE).map(|h| match h.to_str() {
        Ok(s) => parse_range(s, len),
        Err(_) => Err(RangeError::Malformed),
    });
    let response = match range {
        None => builder.status(StatusCode::OK).body(Body::from(bytes)),
        Some(Ok(r)) => builder
            .status(StatusCode::PARTIAL_CONTENT)
            .header(header::CONTENT_RANGE, format!("bytes {}-{}/{len}", r.start, r.end - 1))
            .body(Body::from(bytes[r.start as usize..r.end as usize].to_vec())),
        Some(Err(_)) => builder
            .status(StatusCode::RANGE_NOT_SATISFIABLE)
            .header(header::CONTENT_RANGE, format!("bytes */{len}"))
            .body(Body::empty()),
    };
    response.unwrap_or_else(|_| status(StatusCode::INTERNAL_SERVER_ERROR))
}

async fn manifest(State(s): Shared, headers: HeaderMap) -> Response {
    asset(&s, MANIFEST_FILE, "application/json", &headers).await
}

async fn mlp(State(s): Shared, headers: HeaderMap) -> Response {
    asset(&s, &s.bundle.manifest.mlp.uri, "application/json", &headers).await
}

macro_rules! group_asset {
    ($name:ident, $field:ident, $mime:expr) => {
        async fn $name(State(s): Shared, UrlPath(id): UrlPath<String>, headers: HeaderMap) -> Response {
            match group(&s, &id) {
                Ok(g) => asset(&s, &g.$field, $mime, &headers).await,
                Err(r) => r,
            }
        }
    };
}

group_asset!(stream, stream_uri, "application/octet-stream");
group_asset!(mapping, mapping_uri, "image/png");
group_asset!(mapping_mask, mapping_mask_uri, "application/octet-stream");
group_asset!(occupancy, occupancy_uri, "application/octet-stream");
