use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use stratos_service::{router, AppState, ServiceConfig};
use tower::ServiceExt;

const TABLE1: &str = "item_id,value\n\
Item 1,100\nItem 2,90\nItem 3,80\nItem 4,70\nItem 5,60\n\
Item 6,50\nItem 7,40\nItem 8,30\nItem 9,20\nItem 10,10\n";

const TABLE3: &str = "item_id,value\nItem 1,180\nItem 2,90\nItem 3,50\nItem 4,20\n";

const TABLE5: &str = "item_id,value\n\
Item 1,100\nItem 2,90\nItem 3,80\nItem 4,70\nItem 5,60\nItem 6,50\nItem 7,40\nItem 8,30\nItem 9,20\n";

fn app() -> Router {
    router(AppState::default(), &ServiceConfig::default())
}

async fn send(
    app: &Router,
    method: Method,
    uri: &str,
    body: impl Into<Body>,
) -> (StatusCode, Value) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .body(body.into())
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes)
            .unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

async fn upload(app: &Router, csv: &str) -> String {
    let (status, body) = send(app, Method::POST, "/v1/portfolios", csv.to_string()).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["portfolio_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn upload_reports_size_and_total() {
    let app = app();
    let (status, body) = send(&app, Method::POST, "/v1/portfolios", TABLE1).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["n"], 10);
    assert_eq!(body["total_value"], "550");

    let again = upload(&app, TABLE1).await;
    assert_ne!(again, body["portfolio_id"].as_str().unwrap());
}

#[tokio::test]
async fn upload_errors() {
    let app = app();
    let (status, body) = send(&app, Method::POST, "/v1/portfolios", "").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "empty_body");

    let (status, body) = send(
        &app,
        Method::POST,
        "/v1/portfolios",
        "item_id,value\na,1\nb,-5\n",
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "negative_value");
    assert_eq!(body["line"], 3);

    let (status, _) = send(&app, Method::POST, "/v1/portfolios", "item_id,value\n").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let small = router(
        AppState::default(),
        &ServiceConfig {
            max_body_bytes: 32,
            ..ServiceConfig::default()
        },
    );
    let (status, _) = send(&small, Method::POST, "/v1/portfolios", TABLE1).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
}

#[tokio::test]
async fn stratify_ten_items() {
    let app = app();
    let id = upload(&app, TABLE1).await;
    let uri = format!("/v1/portfolios/{id}/stratify");

    let config = json!({"share_decimals": 2}).to_string();
    let (status, body) = send(&app, Method::POST, &uri, config.clone()).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let classes: String = body["items"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| i["class"].as_str().unwrap())
        .collect();
    assert_eq!(classes, "AABBBCCCDD");
    assert_eq!(body["items"][1]["assigning_pass"], "unconstrained");
    assert_eq!(body["items"][2]["assigning_pass"], "stage-2");
    assert_eq!(body["items"][0]["slice_C_k"], "0.181818");
    assert_eq!(body["summary"]["class_counts"]["A"], 2);

    // Stateless and byte-stable.
    let (_, again) = send(&app, Method::POST, &uri, config).await;
    assert_eq!(again, body);

    let (status, body) = send(&app, Method::POST, &uri, "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["summary"]["class_counts"]["D"], 1);
}

#[tokio::test]
async fn stratify_errors() {
    let app = app();
    let id = upload(&app, TABLE1).await;
    let (status, _) = send(&app, Method::POST, "/v1/portfolios/nope/stratify", "{}").await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let bad = json!({"thresholds": {"t_a": 0.7, "t_b": 0.65, "t_c": 0.95}}).to_string();
    let (status, body) = send(
        &app,
        Method::POST,
        &format!("/v1/portfolios/{id}/stratify"),
        bad,
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");

    let unknown_dim = json!({"passes": [{"name": "p", "group_by": ["brand"]}]}).to_string();
    let (status, _) = send(
        &app,
        Method::POST,
        &format!("/v1/portfolios/{id}/stratify"),
        unknown_dim,
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn two_pass_grows_item_5_category() {
    let mut csv = String::from("item_id,value,category\n");
    for (id, cat, v) in [
        ("Item 1", "P", 1000),
        ("Item 2", "P", 950),
        ("Item 3", "P", 900),
        ("Item 4", "P", 850),
        ("Item 5", "Q", 800),
        ("Item 6", "R", 750),
    ] {
        csv.push_str(&format!("{id},{v},{cat}\n"));
    }
    for k in 1..=16 {
        csv.push_str(&format!("Filler {k:02},200,Q\n"));
    }
    for k in 17..=62 {
        csv.push_str(&format!("Filler {k:02},250,S\n"));
    }
    csv.push_str("Filler 63,50,S\n");

    let app = app();
    let id = upload(&app, &csv).await;
    let config = json!({"passes": [
        {"name": "unconstrained"},
        {"name": "by-category", "group_by": ["category"]}
    ]})
    .to_string();
    let (status, body) = send(
        &app,
        Method::POST,
        &format!("/v1/portfolios/{id}/stratify"),
        config,
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let q = body["summary"]["slices"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["slice"] == "category=Q")
        .unwrap();
    assert_eq!(q["coverage_before"], "0.200000");
    assert_eq!(q["underrepresented"], true);
    assert!(q["a_added"].as_u64().unwrap() >= 1);
}

#[tokio::test]
async fn hhi_endpoint() {
    let app = app();
    let id = upload(&app, TABLE3).await;
    let (status, body) = send(
        &app,
        Method::GET,
        &format!("/v1/portfolios/{id}/hhi"),
        Body::empty(),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let h = body["rows"][0]["hhi"].as_f64().unwrap();
    assert!((h - 3754.0).abs() <= 1.0);
    assert_eq!(body["rows"][0]["hhi_floor"], 2500.0);

    let (status, _) = send(
        &app,
        Method::GET,
        &format!("/v1/portfolios/{id}/hhi?dims=brand"),
        Body::empty(),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn hhi_by_dimension() {
    let app = app();
    let id = upload(
        &app,
        "item_id,value,brand\na,85,X\nb,85,X\nc,85,X\nd,85,X\ne,10,Y\n",
    )
    .await;
    let (status, body) = send(
        &app,
        Method::GET,
        &format!("/v1/portfolios/{id}/hhi?dims=brand"),
        Body::empty(),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let rows = body["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["slice"], "brand=Y");
    assert_eq!(rows[1]["hhi"], 2500.0);
    assert_eq!(body["uniform_item_count"], false);
}

#[tokio::test]
async fn simulate_endpoint() {
    let app = app();
    let id = upload(&app, TABLE1).await;
    let uri = format!("/v1/portfolios/{id}/simulate");

    let (status, body) = send(
        &app,
        Method::POST,
        &uri,
        json!({"candidates": [0.25, 0.5]}).to_string(),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body[0]["a_count"], 2);
    assert_eq!(body[1]["a_count"], 4);
    assert_eq!(body[1]["t_a"], "0.500000");
    assert_eq!(body[1]["entering"], json!(["Item 3", "Item 4"]));

    let (status, body) = send(
        &app,
        Method::POST,
        &uri,
        json!({"candidates": []}).to_string(),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!([]));

    let (status, _) = send(
        &app,
        Method::POST,
        &uri,
        json!({"candidates": [0.9]}).to_string(),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = send(&app, Method::POST, &uri, "not json").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn productivity_endpoint() {
    let app = app();
    let id = upload(&app, TABLE5).await;
    let (status, body) = send(
        &app,
        Method::GET,
        &format!("/v1/portfolios/{id}/productivity?j=3&J=60"),
        Body::empty(),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["p_star"], 5);
    assert_eq!(body["t"][4], 57.5);
    assert_eq!(body["s"][8], 60.0);
    assert_eq!(body["t_a_star"], "0.740741");

    for bad in ["j=0&J=60", "j=3", "j=x&J=60", "j=3&J=$60"] {
        let (status, _) = send(
            &app,
            Method::GET,
            &format!("/v1/portfolios/{id}/productivity?{bad}"),
            Body::empty(),
        )
        .await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{bad}");
    }
}

#[tokio::test]
async fn shares_and_describe() {
    let app = app();
    let id = upload(&app, TABLE1).await;
    let (status, body) = send(
        &app,
        Method::GET,
        &format!("/v1/portfolios/{id}/shares"),
        Body::empty(),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["shares"][1], "0.345455");
    assert_eq!(body["shares"][9], "1.000000");
    assert_eq!(body["item_ids"][0], "Item 1");

    let (status, body) = send(
        &app,
        Method::GET,
        &format!("/v1/portfolios/{id}"),
        Body::empty(),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["portfolio_id"], id);
    let (status, _) = send(&app, Method::GET, "/v1/portfolios/missing", Body::empty()).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn cors_headers_follow_config() {
    let app = router(
        AppState::default(),
        &ServiceConfig {
            cors_origins: vec!["http://localhost:5173".into()],
            ..ServiceConfig::default()
        },
    );
    let request = Request::builder()
        .method(Method::OPTIONS)
        .uri("/v1/portfolios")
        .header(header::ORIGIN, "http://localhost:5173")
        .header(header::ACCESS_CONTROL_REQUEST_METHOD, "POST")
        .body(Body::empty())
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    assert_eq!(
        response.headers()[header::ACCESS_CONTROL_ALLOW_ORIGIN],
        "http://localhost:5173"
    );

    let plain = send(&self::app(), Method::GET, "/v1/health", Body::empty()).await;
    assert_eq!(plain.1["status"], "ok");
}

#[tokio::test]
async fn concurrent_requests_agree() {
    let app = app();
    let id = upload(&app, TABLE1).await;
    let uri = format!("/v1/portfolios/{id}/stratify");
    let tasks: Vec<_> = (0..8)
        .map(|_| {
            let app = app.clone();
            let uri = uri.clone();
            tokio::spawn(async move { send(&app, Method::POST, &uri, "{}").await })
        })
        .collect();
    let mut bodies = Vec::new();
    for t in tasks {
        bodies.push(t.await.unwrap());
    }
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
}
