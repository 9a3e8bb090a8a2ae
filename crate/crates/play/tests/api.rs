use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use fishmonger::{Branch, Fisher, GameHistory, RewardCurve, AcceptanceCurve};
use fishmonger_play::{router, seed_commitment, SessionStore};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(match body {
            Some(v) => Body::from(v.to_string()),
            None => Body::empty(),
        })
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

fn app() -> Router {
    router(Arc::new(SessionStore::in_memory()))
}

async fn create(app: &Router, body: Value) -> (String, Value) {
    let (status, v) = call(app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    (v["session_id"].as_str().unwrap().to_string(), v)
}

async fn decide(app: &Router, id: &str, accept: bool, token: &str) -> (StatusCode, Value) {
    call(
        app,
        "POST",
        &format!("/sessions/{id}/decision"),
        Some(json!({"accept": accept, "token": token})),
    )
    .await
}

/// Every key and every string value in a JSON tree.
fn scan(v: &Value, keys: &mut Vec<String>, strings: &mut Vec<String>) {
    match v {
        Value::Object(m) => {
            for (k, v) in m {
                keys.push(k.clone());
                scan(v, keys, strings);
            }
        }
        Value::Array(a) => a.iter().for_each(|v| scan(v, keys, strings)),
        Value::String(s) => strings.push(s.clone()),
        _ => {}
    }
}

fn assert_no_private_fields(v: &Value) {
    let (mut keys, mut strings) = (Vec::new(), Vec::new());
    scan(v, &mut keys, &mut strings);
    for forbidden in ["branch", "estimate", "q_n", "seed"] {
        assert!(!keys.iter().any(|k| k == forbidden), "`{forbidden}` leaked in {v}");
    }
    for label in ["adaptation", "reward", "confirmation"] {
        assert!(!strings.iter().any(|s| s == label), "branch label leaked in {v}");
    }
}

#[tokio::test]
async fn responses_before_finish_hide_branches_and_estimates() {
    let app = app();
    let (id, created) = create(&app, json!({"curve": {"family": "rational"}})).await;
    assert_no_private_fields(&created);
    let published = created["commitment"]["seed_sha256"].as_str().unwrap().to_string();
    assert_eq!(published.len(), 64);
    assert_eq!(created["commitment"]["round_cap"], 200);
    assert_eq!(created["commitment"]["curve"]["family"], "rational");
    for i in 0..40 {
        let (s, offer) = call(&app, "GET", &format!("/sessions/{id}/offer"), None).await;
        assert_eq!(s, StatusCode::OK);
        assert_no_private_fields(&offer);
        let (s, outcome) = decide(&app, &id, i % 3 != 0, &format!("t{i}")).await;
        assert_eq!(s, StatusCode::OK);
        assert_no_private_fields(&outcome);
        let (_, hist) = call(&app, "GET", &format!("/sessions/{id}/history"), None).await;
        assert_no_private_fields(&hist);
    }
    let (s, err) = call(&app, "GET", &format!("/sessions/{id}/audit"), None).await;
    assert_eq!(s, StatusCode::FORBIDDEN);
    assert_eq!(err["error"]["code"], "audit_forbidden");

    let (s, fin) = call(&app, "POST", &format!("/sessions/{id}/finish"), None).await;
    assert_eq!(s, StatusCode::OK);
    let seed: u64 = fin["seed"].as_str().unwrap().parse().unwrap();
    assert_eq!(seed_commitment(seed), published);
    let (s, audit) = call(&app, "GET", &format!("/sessions/{id}/audit"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(audit["commitment_verified"], true);
    assert_eq!(audit["replay_identical"], true);
    assert_eq!(audit["rounds"].as_array().unwrap().len(), 40);
    assert!(audit["rounds"][0]["branch"].is_string());
}

#[tokio::test]
async fn first_offer_is_an_adaptation_price_in_unit_interval() {
    let app = app();
    for _ in 0..20 {
        let (_, created) = create(&app, json!({"curve": {"family": "exponential", "rate": 2.0}})).await;
        let p = created["offer"]["price"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert_eq!(created["offer"]["round"], 1);
    }
}

#[tokio::test]
async fn duplicate_token_returns_the_first_result() {
    let app = app();
    let (id, _) = create(&app, json!({"curve": {"family": "rational"}, "seed": 5})).await;
    let (s1, first) = decide(&app, &id, true, "abc").await;
    let (s2, again) = decide(&app, &id, true, "abc").await;
    assert_eq!((s1, s2), (StatusCode::OK, StatusCode::OK));
    assert_eq!(first, again);
    let (_, hist) = call(&app, "GET", &format!("/sessions/{id}/history"), None).await;
    assert_eq!(hist["stats"]["rounds_played"], 1);

    let (s, err) = decide(&app, &id, false, "abc").await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(err["error"]["code"], "token_reused");

    let (s, err) = call(&app, "POST", &format!("/sessions/{id}/decision"), Some(json!({"accept": true}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(err["error"]["code"], "missing_token");
    let (s, _) = decide(&app, &id, true, "  ").await;
    assert_eq!(s, StatusCode::CONFLICT);
}

#[tokio::test]
async fn invalid_curves_are_rejected_with_reason() {
    let app = app();
    let (s, err) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"curve": {"family": "piecewise-linear", "knots": [[0.0, 0.0], [1.0, 0.6], [2.0, 0.4], [3.0, 1.0]]}})),
    )
    .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["error"]["code"], "invalid_curve");
    assert!(err["error"]["message"].as_str().unwrap().contains("decreases"), "{err}");

    let (s, err) = call(&app, "POST", "/sessions", Some(json!({"curve": {"family": "tabulated", "path": "/etc/passwd"}}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["error"]["code"], "invalid_curve");

    let (s, err) = call(&app, "POST", "/sessions", Some(json!({"curve": {"family": "exponential", "rate": -1.0}}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{err}");

    let (s, err) = call(&app, "POST", "/sessions", Some(json!({"curve": {}}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"]["code"], "invalid_request");
}

#[tokio::test]
async fn unknown_and_finished_sessions() {
    let app = app();
    let (s, err) = call(&app, "GET", "/sessions/nope/offer", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(err["error"]["code"], "session_not_found");
    let (s, _) = decide(&app, "nope", true, "t").await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let (id, _) = create(&app, json!({"curve": {"family": "rational"}, "round_cap": 3})).await;
    for i in 0..3 {
        let (_, out) = decide(&app, &id, false, &format!("t{i}")).await;
        assert_eq!(out["status"], if i < 2 { "awaiting-decision" } else { "finished" });
    }
    let (s, err) = call(&app, "GET", &format!("/sessions/{id}/offer"), None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(err["error"]["code"], "session_finished");
    let (s, err) = decide(&app, &id, true, "late").await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(err["error"]["code"], "session_finished");
    // the cap finished the game, so the audit is open
    let (s, audit) = call(&app, "GET", &format!("/sessions/{id}/audit"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(audit["credibility"]["verdict"], "insufficient-sample");
    let (s, fin) = call(&app, "POST", &format!("/sessions/{id}/finish"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(fin["reason"], "round-cap");
}

async fn play_scripted(app: &Router, seed: u64, decisions: &[bool]) -> Vec<f64> {
    let (id, created) = create(app, json!({"curve": {"family": "rational"}, "seed": seed})).await;
    let mut prices = vec![created["offer"]["price"].as_f64().unwrap()];
    for (i, &a) in decisions.iter().enumerate() {
        let (_, out) = decide(app, &id, a, &format!("d{i}")).await;
        prices.push(out["next_offer"]["price"].as_f64().unwrap());
    }
    prices
}

#[tokio::test]
async fn fixed_seed_gives_identical_offer_streams() {
    let app = app();
    let decisions: Vec<bool> = (0..60).map(|i| (i * 7) % 5 < 3).collect();
    let a = play_scripted(&app, 42, &decisions).await;
    let b = play_scripted(&app, 42, &decisions).await;
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    let c = play_scripted(&app, 43, &decisions).await;
    assert_ne!(bits(&a), bits(&c));
}

#[tokio::test]
async fn refused_confirmation_price_is_followed_by_a_lower_one() {
    // the cook never learns the branch, but a repeated nonzero price below
    // the last accepted adaptation price is the confirmation price
    let app = app();
    let rc = RewardCurve::new(AcceptanceCurve::Rational).unwrap();
    for seed in 0..40u64 {
        let (id, created) = create(&app, json!({"curve": {"family": "rational"}, "seed": seed, "round_cap": 400})).await;
        let mut price = created["offer"]["price"].as_f64().unwrap();
        // shadow the session locally so the test knows the branches
        let mut shadow = Fisher::new(seed);
        let mut seen_demotion = false;
        for round in 0..400 {
            let offer = shadow.offer(&rc).unwrap();
            assert_eq!(offer.price.to_bits(), price.to_bits());
            let accept = match offer.branch {
                Branch::Confirmation => false,
                _ => offer.price <= 1.5,
            };
            shadow.settle(accept).unwrap();
            let (_, out) = decide(&app, &id, accept, &format!("r{round}")).await;
            let Some(next) = out["next_offer"]["price"].as_f64() else { break };
            if offer.branch == Branch::Confirmation && offer.price > 0.0 {
                let q = shadow.state().estimate();
                assert!(q < offer.price, "demotion did not lower the estimate");
                // the next confirmation price observed is the new, lower estimate
                let upcoming = shadow.clone().offer(&rc).unwrap();
                if upcoming.branch == Branch::Confirmation {
                    assert!(next < offer.price);
                    seen_demotion = true;
                }
            }
            price = next;
        }
        if seen_demotion {
            return;
        }
    }
    panic!("no observable demotion in 40 sessions");
}

#[tokio::test]
async fn accepted_adaptation_price_becomes_the_confirmation_price() {
    let app = app();
    let rc = RewardCurve::new(AcceptanceCurve::Rational).unwrap();
    let (id, created) = create(&app, json!({"curve": {"family": "rational"}, "seed": 9})).await;
    let first = created["offer"]["price"].as_f64().unwrap();
    let mut shadow = Fisher::new(9);
    shadow.offer(&rc).unwrap();
    shadow.settle(true).unwrap();
    decide(&app, &id, true, "first").await;
    // refuse only adaptation prices afterwards so the estimate stays put
    let mut confirmations = 0;
    for round in 0..60 {
        let offer = shadow.offer(&rc).unwrap();
        let accept = offer.branch != Branch::Adaptation;
        shadow.settle(accept).unwrap();
        if offer.branch == Branch::Confirmation {
            assert_eq!(offer.price, first);
            confirmations += 1;
        }
        let (_, out) = decide(&app, &id, accept, &format!("k{round}")).await;
        assert_eq!(out["price"].as_f64().unwrap(), offer.price);
    }
    assert!(confirmations > 0);
}

#[tokio::test]
async fn ten_thousand_round_scripted_session_passes_the_audit() {
    let app = router(Arc::new(SessionStore::in_memory().with_default_round_cap(10_000)));
    let (id, _) = create(&app, json!({"curve": {"family": "rational"}, "seed": 2024})).await;
    let mut price = None::<f64>;
    let (_, first) = call(&app, "GET", &format!("/sessions/{id}/offer"), None).await;
    price.replace(first["offer"]["price"].as_f64().unwrap());
    let mut accepted_revenue = 0.0;
    for i in 0..10_000 {
        let p = price.unwrap();
        let accept = p <= 1.2;
        let (s, out) = decide(&app, &id, accept, &format!("{i}")).await;
        assert_eq!(s, StatusCode::OK);
        accepted_revenue += out["revenue"].as_f64().unwrap();
        price = out["next_offer"]["price"].as_f64();
    }
    assert!(price.is_none());
    let (_, audit) = call(&app, "GET", &format!("/sessions/{id}/audit"), None).await;
    assert_eq!(audit["credibility"]["verdict"], "pass", "{}", audit["credibility"]);
    assert_eq!(audit["replay_identical"], true);

    // independent replay of the revealed seed reproduces the records
    let seed: u64 = audit["seed"].as_str().unwrap().parse().unwrap();
    let rounds: Vec<fishmonger::RoundRecord> = serde_json::from_value(audit["rounds"].clone()).unwrap();
    let decisions: Vec<bool> = rounds.iter().map(|r| r.accepted()).collect();
    let rc = RewardCurve::new(AcceptanceCurve::Rational).unwrap();
    let replay = Fisher::replay(&rc, seed, &decisions, false).unwrap();
    let jsonl = |records: Vec<fishmonger::RoundRecord>| {
        let mut buf = Vec::new();
        GameHistory { records }.write_jsonl(&mut buf).unwrap();
        buf
    };
    assert_eq!(jsonl(rounds.clone()), jsonl(GameHistory::from_state(replay.state()).records));
    let (_, hist) = call(&app, "GET", &format!("/sessions/{id}/history"), None).await;
    let server_revenue = hist["stats"]["revenue_total"].as_f64().unwrap();
    assert!((server_revenue - accepted_revenue).abs() < 1e-9);
}

#[tokio::test]
async fn ten_round_session_is_inconclusive() {
    let app = app();
    let (id, _) = create(&app, json!({"curve": {"family": "rational"}, "round_cap": 10})).await;
    for i in 0..10 {
        decide(&app, &id, true, &format!("{i}")).await;
    }
    let (s, audit) = call(&app, "GET", &format!("/sessions/{id}/audit"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(audit["credibility"]["verdict"], "insufficient-sample");
}

#[tokio::test]
async fn concurrent_sessions_are_independent() {
    let app = app();
    let mut handles = Vec::new();
    for k in 0..8u64 {
        let app = app.clone();
        handles.push(tokio::spawn(async move {
            let decisions: Vec<bool> = (0..50).map(|i| (i + k) % 2 == 0).collect();
            play_scripted(&app, 42, &decisions).await
        }));
    }
    let mut streams = Vec::new();
    for h in handles {
        streams.push(h.await.unwrap());
    }
    let expect = play_scripted(&app, 42, &(0..50).map(|i| i % 2 == 0).collect::<Vec<_>>()).await;
    assert_eq!(streams[0], expect);
    assert_eq!(streams[2], expect);
}
