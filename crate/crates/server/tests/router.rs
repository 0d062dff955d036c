use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use ras_server::{router, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(config: ServiceConfig, req: Request<Body>) -> (StatusCode, Value) {
    let res = router(config).oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn post(path: &str, body: impl Into<Body>) -> Request<Body> {
    Request::post(path)
        .header("content-type", "application/json")
        .body(body.into())
        .unwrap()
}

#[tokio::test]
async fn health_reports_version_and_alpha() {
    let (status, v) = call(
        ServiceConfig::default(),
        Request::get("/health").body(Body::empty()).unwrap(),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["status"], "ok");
    assert_eq!(v["default_alpha"], 0.5064);
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
}

#[tokio::test]
async fn scores_in_request_order_with_inline_errors() {
    let body = json!({"items": [
        {"id": "b", "ref": "a b c", "hyp": "a <ph> c"},
        {"id": "a", "ref": "", "hyp": "x"},
        {"id": "c", "ref": "a b", "hyp": "a b"},
    ]});
    let (status, v) = call(ServiceConfig::default(), post("/score", body.to_string())).await;
    assert_eq!(status, StatusCode::OK);
    let scores = v["scores"].as_array().unwrap();
    assert_eq!(scores[0]["id"], "b");
    assert_eq!(scores[0]["ras"].as_f64(), Some(0.497867));
    assert!(scores[1]["error"].is_string());
    assert_eq!(scores[2]["ras"].as_f64(), Some(1.0));
    assert_eq!(v["alpha"], 0.5064);
}

#[tokio::test]
async fn emits_six_decimals() {
    let body = json!({"alpha": 0.5, "items": [{"id": "1", "ref": "a b", "hyp": "a b"}]});
    let res = router(ServiceConfig::default())
        .oneshot(post("/score", body.to_string()))
        .await
        .unwrap();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let text = std::str::from_utf8(&bytes).unwrap();
    assert!(text.contains("\"ras\":1.000000"), "{text}");
}

#[tokio::test]
async fn malformed_and_invalid_requests_are_400() {
    for body in [
        "{not json".to_string(),
        json!({"items": "x"}).to_string(),
        json!({"items": []}).to_string(),
        json!({"alpha": 2.0, "items": [{"id": "1", "ref": "a", "hyp": "a"}]}).to_string(),
        json!({"items": [{"id": "1", "ref": "a", "hyp": "a"}, {"id": "1", "ref": "b", "hyp": "b"}]})
            .to_string(),
    ] {
        let (status, v) = call(ServiceConfig::default(), post("/score", body.clone())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert!(v["error"].is_string());
    }
}

#[tokio::test]
async fn batch_and_body_limits() {
    let mut config = ServiceConfig::default();
    config.reward.max_batch = 1;
    let body = json!({"items": [{"id": "1", "ref": "a", "hyp": "a"}, {"id": "2", "ref": "a", "hyp": "a"}]});
    let (status, _) = call(config, post("/score", body.to_string())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let config = ServiceConfig {
        body_limit: 64,
        ..ServiceConfig::default()
    };
    let big = json!({"items": [{"id": "1", "ref": "a ".repeat(100), "hyp": "a"}]});
    let (status, v) = call(config, post("/score", big.to_string())).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    assert!(v["error"].is_string());
}

#[tokio::test]
async fn advantages_endpoint() {
    let body = json!({"groups": [
        {"group_id": "g1", "rewards": [1.0, 0.0]},
        {"group_id": "g2", "rewards": [0.3, 0.3]},
    ]});
    let (status, v) = call(ServiceConfig::default(), post("/advantages", body.to_string())).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["groups"][0]["advantages"], json!([1.0, -1.0]));
    assert_eq!(v["groups"][1]["degenerate"], true);
    assert_eq!(v["groups"][1]["advantages"], json!([0.0, 0.0]));

    let bad = json!({"groups": [{"group_id": "e", "rewards": []}]});
    let (status, _) = call(ServiceConfig::default(), post("/advantages", bad.to_string())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn serves_over_tcp_and_shuts_down() {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(ras_server::serve(listener, ServiceConfig::default(), async {
        rx.await.ok();
    }));
    let mut stream = tokio::net::TcpStream::connect(addr).await.unwrap();
    use tokio::io::{AsyncReadExt, AsyncWriteExt};
    stream
        .write_all(b"GET /health HTTP/1.1\r\nhost: x\r\nconnection: close\r\n\r\n")
        .await
        .unwrap();
    let mut buf = String::new();
    stream.read_to_string(&mut buf).await.unwrap();
    assert!(buf.starts_with("HTTP/1.1 200"), "{buf}");
    tx.send(()).unwrap();
    server.await.unwrap().unwrap();
}
