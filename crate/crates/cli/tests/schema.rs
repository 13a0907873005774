use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use pmap_cutout::synth::OracleNoise;
use pmap_cutout_cli::service::{router, synth_bundle};
use serde_json::{json, Value};
use tower::ServiceExt;

fn schema() -> Value {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../schema/service-api.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn validate(def: &str, instance: &Value) {
    let mut root = schema();
    root["$ref"] = json!(format!("#/$defs/{def}"));
    let validator = jsonschema::validator_for(&root).unwrap();
    let errors: Vec<String> = validator
        .iter_errors(instance)
        .map(|e| e.to_string())
        .collect();
    assert!(errors.is_empty(), "{def}: {errors:?}");
}

async fn call(req: Request<Body>) -> Value {
    let resp = router().oneshot(req).await.unwrap();
    serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap()
}

fn post(path: &str, body: &Value) -> Request<Body> {
    Request::post(path)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

#[tokio::test]
async fn responses_match_schema() {
    validate(
        "Health",
        &call(Request::get("/health").body(Body::empty()).unwrap()).await,
    );

    let bundle = synth_bundle(7).unwrap();
    let synth = call(Request::get("/synth?seed=7").body(Body::empty()).unwrap()).await;
    validate("SynthResponse", &synth);

    let request = json!({
        "image": bundle.image,
        "rect": bundle.gt_rects[0].expand(10, 320, 240),
        "gt": bundle.gt_masks[0],
        "oracle": OracleNoise::default(),
        "params": {"max_iters": 3},
    });
    validate("CutoutRequest", &request);
    validate("CutoutResponse", &call(post("/cutout", &request)).await);

    let oracle = json!({"seed": 3});
    validate("OracleRequest", &oracle);
    validate("PmapResponse", &call(post("/pmap/oracle", &oracle)).await);
}

#[tokio::test]
async fn error_bodies_match_schema() {
    let bundle = synth_bundle(7).unwrap();
    let requests = [
        json!({"image": bundle.image, "rect": {"x": 310, "y": 0, "w": 20, "h": 20}, "mode": "plain"}),
        json!({"image": bundle.image, "rect": {"x": 0, "y": 0, "w": 20, "h": 20}}),
        json!({"image": "!!", "rect": {"x": 0, "y": 0, "w": 20, "h": 20}}),
        json!({"rect": {"x": 0, "y": 0, "w": 20, "h": 20}}),
    ];
    for req in requests {
        validate("ErrorBody", &call(post("/cutout", &req)).await);
    }
    validate(
        "ErrorBody",
        &call(Request::get("/missing").body(Body::empty()).unwrap()).await,
    );
}

#[test]
fn default_params_match_schema_defaults() {
    let props = &schema()["$defs"]["CutoutParams"]["properties"];
    let defaults = serde_json::to_value(pmap_cutout::CutoutParams::default()).unwrap();
    for (name, value) in defaults.as_object().unwrap() {
        assert_eq!(&props[name]["default"], value, "{name}");
    }
    let props = &schema()["$defs"]["OracleNoise"]["properties"];
    let defaults = serde_json::to_value(OracleNoise::default()).unwrap();
    for (name, value) in defaults.as_object().unwrap() {
        assert_eq!(&props[name]["default"], value, "{name}");
    }
}
