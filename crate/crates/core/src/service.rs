//! HTTP query API over the event store.
//!
//! `GET /search` (alias `/search.php`) takes `begin_date`, `end_date`,
//! `category`, `language`, `query`, `html`, `links`, `limit`, `order`,
//! `format` and `offset`; `GET /healthz` reports the stored event count.
//! Errors are JSON bodies `{"error": .., "parameter": ..}` with status 400,
//! or 500 when the store is unusable.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use axum::extract::{Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{middleware, Json, Router};
use serde_json::json;

use crate::date::DateKey;
use crate::export::{render, ExportOptions, Format, LodeMapping};
use crate::profile::Profiles;
use crate::store::{EventQuery, EventStore, SortOrder, DEFAULT_LIMIT};

pub const LIMIT_CAP: usize = 10_000;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<RwLock<EventStore>>,
    pub profiles: Arc<Profiles>,
    pub mapping: Arc<LodeMapping>,
}

impl AppState {
    pub fn new(store: EventStore, profiles: Profiles, mapping: LodeMapping) -> Self {
        AppState {
            store: Arc::new(RwLock::new(store)),
            profiles: Arc::new(profiles),
            mapping: Arc::new(mapping),
        }
    }
}

/// A rejected request parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamError {
    pub parameter: &'static str,
    pub message: String,
}

impl ParamError {
    fn new(parameter: &'static str, message: impl Into<String>) -> Self {
        ParamError { parameter, message: message.into() }
    }
}

/// A parsed `/search` request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiRequest {
    pub query: EventQuery,
    pub format: Format,
    pub options: ExportOptions,
}

fn parse_bool(name: &'static str, v: &str) -> Result<bool, ParamError> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" | "" => Ok(false),
        _ => Err(ParamError::new(name, format!("expected true or false, got {v:?}"))),
    }
}

/// Resolves a category parameter: a localized heading of any profile (the
/// requested language's first) or a canonical key.
pub fn resolve_category(value: &str, lang: Option<&str>, profiles: &Profiles) -> String {
    let preferred = lang.and_then(|l| profiles.get(l));
    preferred
        .into_iter()
        .chain(profiles.values())
        .find_map(|p| p.canonical_category(value))
        .map(String::from)
        .unwrap_or_else(|| value.to_string())
}

impl ApiRequest {
    pub fn parse(params: &HashMap<String, String>, profiles: &Profiles) -> Result<Self, ParamError> {
        let get = |k: &str| params.get(k).map(|s| s.trim()).filter(|s| !s.is_empty());
        let date = |name: &'static str| -> Result<Option<DateKey>, ParamError> {
            get(name)
                .map(|v| DateKey::parse_param(v).map_err(|e| ParamError::new(name, format!("{v:?}: {e}"))))
                .transpose()
        };
        let mut q = EventQuery {
            begin_date: date("begin_date")?,
            end_date: date("end_date")?,
            lang: get("language").map(str::to_ascii_lowercase),
            keyword: get("query").map(String::from),
            ..Default::default()
        };
        if let (Some(b), Some(e)) = (q.begin_date, q.end_date) {
            if b > e {
                return Err(ParamError::new("begin_date", "begin_date is after end_date"));
            }
        }
        q.category = get("category").map(|c| resolve_category(c, q.lang.as_deref(), profiles));
        q.limit = match get("limit") {
            None => DEFAULT_LIMIT,
            Some(v) => match v.parse::<usize>() {
                Ok(0) | Err(_) => return Err(ParamError::new("limit", format!("expected a positive integer, got {v:?}"))),
                Ok(n) => n.min(LIMIT_CAP),
            },
        };
        q.offset = match get("offset") {
            None => 0,
            Some(v) => v
                .parse()
                .map_err(|_| ParamError::new("offset", format!("expected a non-negative integer, got {v:?}")))?,
        };
        q.order = match get("order").map(str::to_ascii_lowercase).as_deref() {
            None | Some("asc") => SortOrder::Asc,
            Some("desc") => SortOrder::Desc,
            Some(v) => return Err(ParamError::new("order", format!("expected asc or desc, got {v:?}"))),
        };
        let format = match get("format") {
            None => Format::Xml,
            Some(v) => v.parse().map_err(|e: crate::export::UnknownFormat| ParamError::new("format", e.to_string()))?,
        };
        let options = ExportOptions {
            links: get("links").map(|v| parse_bool("links", v)).transpose()?.unwrap_or(false),
            html: get("html").map(|v| parse_bool("html", v)).transpose()?.unwrap_or(false),
        };
        Ok(ApiRequest { query: q, format, options })
    }
}

fn error_response(status: StatusCode, parameter: Option<&str>, message: &str) -> Response {
    (status, Json(json!({ "error": message, "parameter": parameter }))).into_response()
}

async fn search(State(state): State<AppState>, Query(params): Query<HashMap<String, String>>) -> Response {
    let req = match ApiRequest::parse(&params, &state.profiles) {
        Ok(r) => r,
        Err(e) => return error_response(StatusCode::BAD_REQUEST, Some(e.parameter), &e.message),
    };
    let events = match state.store.read() {
        Ok(store) => store.query(&req.query),
        Err(_) => return error_response(StatusCode::INTERNAL_SERVER_ERROR, None, "store unavailable"),
    };
    let body = render(&events, req.format, req.options, &state.mapping);
    ([(header::CONTENT_TYPE, req.format.content_type())], body).into_response()
}

async fn healthz(State(state): State<AppState>) -> Response {
    match state.store.read() {
        Ok(store) => Json(json!({ "status": "ok", "events": store.len() })).into_response(),
        Err(_) => error_response(StatusCode::INTERNAL_SERVER_ERROR, None, "store unavailable"),
    }
}

async fn allow_any_origin(mut resp: Response) -> Response {
    resp.headers_mut()
        .insert(header::ACCESS_CONTROL_ALLOW_ORIGIN, HeaderValue::from_static("*"));
    resp
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/search", get(search))
        .route("/search.php", get(search))
        .route("/healthz", get(healthz))
        .layer(middleware::map_response(allow_any_origin))
        .with_state(state)
}

/// Serves the API until Ctrl-C.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
