mod common;

use std::collections::HashMap;

use axum::body::{to_bytes, Body};
use axum::http::{header, Request, StatusCode};
use axum::Router;
use histevents::export::{LodeMapping, UnknownFormat};
use histevents::service::{router, ApiRequest, AppState};
use histevents::{bundled_profiles, EventStore};
use serde_json::Value;
use tower::ServiceExt;

fn app() -> (tempfile::TempDir, Router, EventStore) {
    let dir = tempfile::tempdir().unwrap();
    let store = common::gold_store(dir.path());
    let reopened = EventStore::open(store.path()).unwrap();
    let state = AppState::new(store, bundled_profiles(), LodeMapping::bundled());
    (dir, router(state), reopened)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, HashMap<String, String>, String) {
    let resp = app.clone().oneshot(Request::get(uri).body(Body::empty()).unwrap()).await.unwrap();
    let status = resp.status();
    let headers = resp
        .headers()
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_str().unwrap().to_string()))
        .collect();
    let body = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, headers, String::from_utf8(body.to_vec()).unwrap())
}

fn ids(body: &str) -> Vec<String> {
    let v: Value = serde_json::from_str(body).unwrap();
    v["events"].as_array().unwrap().iter().map(|e| e["id"].as_str().unwrap().to_string()).collect()
}

fn parse_query(uri: &str) -> HashMap<String, String> {
    let q = uri.split_once('?').map_or("", |(_, q)| q);
    q.split('&')
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (k, v) = p.split_once('=').unwrap_or((p, ""));
            (k.to_string(), v.replace("%20", " "))
        })
        .collect()
}

#[tokio::test]
async fn healthz_reports_event_count() {
    let (_dir, app, _) = app();
    let (status, headers, body) = get(&app, "/healthz").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(headers["access-control-allow-origin"], "*");
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["status"], "ok");
    assert_eq!(v["events"], 169);
}

#[tokio::test]
async fn documented_examples() {
    let (_dir, app, store) = app();
    let profiles = bundled_profiles();
    for uri in [
        "/search?begin_date=19450000&end_date=19501231&format=json",
        "/search?query=Egypt&format=json",
        "/search?category=Kultur&format=json",
        "/search.php?category=Kultur&format=json",
    ] {
        let (status, headers, body) = get(&app, uri).await;
        assert_eq!(status, StatusCode::OK, "{uri}");
        assert_eq!(headers["content-type"], "application/json; charset=utf-8");
        let want: Vec<String> = store
            .query(&ApiRequest::parse(&parse_query(uri), &profiles).unwrap().query)
            .into_iter()
            .map(|e| e.id)
            .collect();
        assert!(!want.is_empty());
        assert_eq!(ids(&body), want, "{uri}");
    }
    let (_, _, body) = get(&app, "/search?category=Kultur&language=de&format=json").await;
    assert_eq!(ids(&body).len(), 5);
}

#[tokio::test]
async fn responses_equal_store_queries() {
    let (_dir, app, store) = app();
    let profiles = bundled_profiles();
    for uri in [
        "/search?format=json",
        "/search?format=json&order=desc&limit=7&offset=3",
        "/search?format=json&language=it&begin_date=-00440000&end_date=-00440000",
        "/search?format=json&language=en&begin_date=-00450000&end_date=-00430000",
        "/search?format=json&query=cicero&links=true",
        "/search?format=json&category=roman_republic",
        "/search?format=json&limit=50000",
    ] {
        let (status, _, body) = get(&app, uri).await;
        assert_eq!(status, StatusCode::OK, "{uri}");
        let want: Vec<String> = store
            .query(&ApiRequest::parse(&parse_query(uri), &profiles).unwrap().query)
            .into_iter()
            .map(|e| e.id)
            .collect();
        assert_eq!(ids(&body), want, "{uri}");
    }
}

#[tokio::test]
async fn formats_and_content_types() {
    let (_dir, app, _) = app();
    let (_, h, xml) = get(&app, "/search?begin_date=20100000&end_date=20101231").await;
    assert_eq!(h["content-type"], "application/xml; charset=utf-8");
    assert!(xml.starts_with("<?xml"));
    let mut reader = quick_xml::Reader::from_str(&xml);
    loop {
        if let quick_xml::events::Event::Eof = reader.read_event().unwrap() {
            break;
        }
    }
    let (_, h, n3) = get(&app, "/search?format=n3&language=de").await;
    assert_eq!(h["content-type"], "text/n3; charset=utf-8");
    let triples: Result<Vec<_>, _> = oxttl::TurtleParser::new().for_slice(n3.as_bytes()).collect();
    assert!(triples.unwrap().len() > 62);
}

#[tokio::test]
async fn bad_parameters_are_json_errors() {
    let (_dir, app, _) = app();
    for (uri, param) in [
        ("/search?begin_date=1945", "begin_date"),
        ("/search?begin_date=20000000&end_date=19990000", "begin_date"),
        ("/search?format=yaml", "format"),
        ("/search?limit=0", "limit"),
        ("/search?order=sideways", "order"),
        ("/search?links=perhaps", "links"),
        ("/search?offset=-1", "offset"),
    ] {
        let (status, headers, body) = get(&app, uri).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
        assert!(headers[header::CONTENT_TYPE.as_str()].starts_with("application/json"));
        let v: Value = serde_json::from_str(&body).unwrap();
        assert_eq!(v["parameter"], param, "{uri}");
        assert!(v["error"].as_str().is_some_and(|e| !e.is_empty()));
    }
    let _: UnknownFormat = "yaml".parse::<histevents::export::Format>().unwrap_err();
}

#[tokio::test]
async fn identical_requests_identical_bodies() {
    let (_dir, app, _) = app();
    let uri = "/search?query=the&format=n3&html=true&links=true";
    let (_, _, a) = get(&app, uri).await;
    let (_, _, b) = get(&app, uri).await;
    assert_eq!(a, b);
}
