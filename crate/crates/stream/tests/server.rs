mod common;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use http_body_util::BodyExt;
use tower::ServiceExt;
use videorf_core::codec::Quantizer;
use videorf_stream::manifest::GofManifest;
use videorf_stream::server::{router, ServeConfig, IMMUTABLE};

fn app(fx: &common::Fixture) -> axum::Router {
    router(&ServeConfig::new("127.0.0.1:8080".parse().unwrap(), fx.bundle())).unwrap()
}

async fn get(app: &axum::Router, uri: &str, range: Option<&str>) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    let mut req = Request::builder().uri(uri);
    if let Some(r) = range {
        req = req.header(header::RANGE, r);
    }
    let resp = app.clone().oneshot(req.body(Body::empty()).unwrap()).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, headers, body)
}

#[tokio::test]
async fn manifest_is_served_valid_and_cacheable() {
    let fx = common::bundled(Quantizer::Lossy(8));
    let (status, headers, body) = get(&app(&fx), "/manifest.json", None).await;
    assert_eq!(status, StatusCode::OK);
    GofManifest::from_json(std::str::from_utf8(&body).unwrap()).unwrap();
    assert_eq!(headers[header::CACHE_CONTROL], IMMUTABLE);
    assert_eq!(headers[header::ACCESS_CONTROL_ALLOW_ORIGIN], "*");
    assert_eq!(headers[header::CONTENT_TYPE], "application/json");
}

#[tokio::test]
async fn every_asset_endpoint_returns_the_file() {
    let fx = common::bundled(Quantizer::Lossy(8));
    let app = app(&fx);
    let m = GofManifest::from_json(&std::fs::read_to_string(fx.bundle().join("manifest.json")).unwrap()).unwrap();
    let (s, _, body) = get(&app, "/mlp.json", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body, std::fs::read(fx.bundle().join(&m.mlp.uri)).unwrap());
    for g in &m.groups {
        for (suffix, uri) in [
            ("stream", &g.stream_uri),
            ("mapping.png", &g.mapping_uri),
            ("mapping.mask", &g.mapping_mask_uri),
            ("occupancy.bin", &g.occupancy_uri),
        ] {
            let (s, h, body) = get(&app, &format!("/gof/{}/{suffix}", g.id), None).await;
            assert_eq!(s, StatusCode::OK, "{suffix}");
            assert_eq!(h[header::ACCEPT_RANGES], "bytes");
            assert_eq!(body, std::fs::read(fx.bundle().join(uri)).unwrap());
        }
    }
}

#[tokio::test]
async fn ranged_stream_request_returns_exact_slice() {
    let fx = common::bundled(Quantizer::Lossy(8));
    let app = app(&fx);
    let file = std::fs::read(fx.bundle().join("gof/1/stream.vrfs")).unwrap();
    let len = file.len();
    for (range, expect) in [
        ("bytes=0-15".to_string(), 0..16),
        (format!("bytes=10-{}", len - 5), 10..len - 4),
        ("bytes=-7".to_string(), len - 7..len),
        (format!("bytes={}-", len - 3), len - 3..len),
    ] {
        let (s, h, body) = get(&app, "/gof/1/stream", Some(&range)).await;
        assert_eq!(s, StatusCode::PARTIAL_CONTENT, "{range}");
        assert_eq!(body, &file[expect.clone()], "{range}");
        assert_eq!(
            h[header::CONTENT_RANGE],
            format!("bytes {}-{}/{len}", expect.start, expect.end - 1).as_str()
        );
    }
}

#[tokio::test]
async fn malformed_or_unsatisfiable_range_is_416() {
    let fx = common::bundled(Quantizer::Lossy(8));
    let app = app(&fx);
    for range in ["bytes=9-3", "chunks=0-1", "bytes=0-1,4-5", "bytes=99999999-"] {
        let (s, h, _) = get(&app, "/gof/0/stream", Some(range)).await;
        assert_eq!(s, StatusCode::RANGE_NOT_SATISFIABLE, "{range}");
        assert!(h[header::CONTENT_RANGE].to_str().unwrap().starts_with("bytes */"));
    }
}

#[tokio::test]
async fn unknown_group_is_404() {
    let fx = common::bundled(Quantizer::Lossy(8));
    let app = app(&fx);
    for uri in ["/gof/999/stream", "/gof/abc/mapping.png", "/gof/-1/occupancy.bin", "/nothing"] {
        assert_eq!(get(&app, uri, None).await.0, StatusCode::NOT_FOUND, "{uri}");
    }
}

#[tokio::test]
async fn serving_is_read_only() {
    let fx = common::bundled(Quantizer::Lossy(8));
    let app = app(&fx);
    let before = std::fs::read(fx.bundle().join("manifest.json")).unwrap();
    for method in [Method::POST, Method::PUT, Method::DELETE] {
        let req = Request::builder().method(method).uri("/manifest.json").body(Body::from("x")).unwrap();
        let resp = app.clone().oneshot(req).await.unwrap();
        assert_eq!(resp.status(), StatusCode::METHOD_NOT_ALLOWED);
    }
    assert_eq!(std::fs::read(fx.bundle().join("manifest.json")).unwrap(), before);
}

#[test]
fn config_validation() {
    let dir = tempfile::tempdir().unwrap();
    let ok = ServeConfig::new("127.0.0.1:9000".parse().unwrap(), dir.path());
    ok.validate().unwrap();
    assert!(ServeConfig::new("127.0.0.1:0".parse().unwrap(), dir.path()).validate().is_err());
    assert!(ServeConfig::new("127.0.0.1:9000".parse().unwrap(), dir.path().join("missing")).validate().is_err());
}
