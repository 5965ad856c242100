use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use http_body_util::BodyExt;
use roomgraph_cli::pipeline::{ModelSet, RoomModels};
use roomgraph_cli::service::{effective_port, router, ErrorBody, GenerateResponse, SchemaResponse};
use roomgraph_core::condgen::{self, CondGenConfig};
use roomgraph_core::graph::{scene_graph, SceneGraph};
use roomgraph_core::instantiate::{train_instantiator, PlacementConfig};
use roomgraph_core::scene::{ConditionCode, RoomType};
use roomgraph_core::synth::{synth_dataset, synth_scene};
use serde_json::{json, Value};
use tower::ServiceExt;

/// Briefly trained tatami models; quality is irrelevant to the contract.
fn models() -> Arc<ModelSet> {
    static MODELS: OnceLock<Arc<ModelSet>> = OnceLock::new();
    MODELS
        .get_or_init(|| {
            let room = RoomType::Tatami;
            let scenes = synth_dataset(room, 3, 5);
            let pairs: Vec<_> = scenes
                .into_iter()
                .map(|s| {
                    let g = scene_graph(&s).unwrap();
                    (s, g)
                })
                .collect();
            let graphs: Vec<SceneGraph> = pairs.iter().map(|(_, g)| g.clone()).collect();
            let graph = condgen::train(
                &graphs,
                &CondGenConfig {
                    epochs: 2,
                    ..Default::default()
                },
            )
            .unwrap();
            let placement = train_instantiator(
                &pairs,
                &PlacementConfig {
                    epochs: 2,
                    ..Default::default()
                },
            )
            .unwrap();
            let mut set = ModelSet::default();
            set.rooms.insert(room, RoomModels { graph, placement });
            Arc::new(set)
        })
        .clone()
}

async fn call(
    method: Method,
    uri: &str,
    body: Option<String>,
) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    let mut req = Request::builder()
        .method(method)
        .uri(uri)
        .header(header::ORIGIN, "http://localhost:5173");
    if body.is_some() {
        req = req.header(header::CONTENT_TYPE, "application/json");
    }
    let req = req
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = router(models()).oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, headers, bytes)
}

async fn generate(body: Value) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    call(Method::POST, "/api/v1/generate", Some(body.to_string())).await
}

#[tokio::test]
async fn healthz_answers_ok() {
    let (status, _, body) = call(Method::GET, "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, b"ok");
}

#[tokio::test]
async fn schema_lists_loaded_rooms() {
    let (status, headers, body) = call(Method::GET, "/api/v1/schema", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(headers.contains_key(header::ACCESS_CONTROL_ALLOW_ORIGIN));
    let schema: SchemaResponse = serde_json::from_slice(&body).unwrap();
    assert_eq!(schema.rooms.len(), 1);
    assert_eq!(schema.rooms[0].room_type, RoomType::Tatami);
    assert_eq!(
        schema.rooms[0].condition_schema.labels,
        ["sleep", "tea", "storage", "work"]
    );
}

#[tokio::test]
async fn generate_is_byte_identical_for_equal_requests() {
    let req = json!({"room_type": "tatami", "label": "tea", "seed": 42});
    let (s1, h1, b1) = generate(req.clone()).await;
    let (s2, _, b2) = generate(req).await;
    assert_eq!(s1, StatusCode::OK);
    assert_eq!(s2, StatusCode::OK);
    assert_eq!(b1, b2);
    assert!(h1.contains_key("server-timing"));

    let resp: GenerateResponse = serde_json::from_slice(&b1).unwrap();
    assert_eq!(resp.seed, 42);
    assert_eq!(resp.graph.condition, ConditionCode::new(RoomType::Tatami, 1));
    assert_eq!(resp.item_of_node.len(), resp.graph.len());
    assert_eq!(resp.scene.items.len(), resp.graph.object_nodes().count());
    assert!(resp.timing_ms.is_none());
}

#[tokio::test]
async fn timing_is_reported_on_request() {
    let (status, _, body) =
        generate(json!({"room_type": "tatami", "label": "sleep", "include_timing": true})).await;
    assert_eq!(status, StatusCode::OK);
    let resp: GenerateResponse = serde_json::from_slice(&body).unwrap();
    assert!(resp.timing_ms.unwrap() >= 0.0);
}

#[tokio::test]
async fn semantic_errors_are_unprocessable() {
    for (req, field) in [
        (json!({"room_type": "tatami", "label": "flying"}), "label"),
        (json!({"room_type": "attic", "label": "sleep"}), "room_type"),
        (json!({"room_type": "kitchen", "label": "multi"}), "room_type"),
    ] {
        let (status, _, body) = generate(req).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
        let err: ErrorBody = serde_json::from_slice(&body).unwrap();
        assert_eq!(err.field.as_deref(), Some(field));
    }
}

#[tokio::test]
async fn malformed_bodies_are_bad_requests() {
    let (status, _, body) = generate(json!({"room_type": "tatami", "label": "tea", "seed": "x"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let err: ErrorBody = serde_json::from_slice(&body).unwrap();
    assert_eq!(err.field.as_deref(), Some("seed"));

    let (status, _, _) = call(Method::POST, "/api/v1/generate", Some("{not json".into())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _, _) = generate(json!({"room_type": "tatami", "label": "tea", "colour": 1})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn extract_returns_the_relation_graph() {
    let scene = synth_scene(RoomType::Balcony, ConditionCode::new(RoomType::Balcony, 0), 3);
    let (status, _, body) = call(
        Method::POST,
        "/api/v1/extract",
        Some(serde_json::to_string(&scene).unwrap()),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let g: SceneGraph = serde_json::from_slice(&body).unwrap();
    let expected = scene_graph(&scene).unwrap();
    assert_eq!(g.nodes, expected.nodes);
    assert_eq!(g.edges.len(), expected.edges.len());
}

#[test]
fn port_environment_override() {
    assert_eq!(effective_port(8080, None).unwrap(), 8080);
    assert_eq!(effective_port(8080, Some("9001")).unwrap(), 9001);
    assert!(effective_port(8080, Some("http")).is_err());
}
