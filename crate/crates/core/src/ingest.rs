//! Page and image retrieval from the MediaWiki action API or an offline
//! corpus directory.
//!
//! Live requests used:
//!
//! * page text: `action=query&prop=revisions&rvprop=content&rvslots=main`
//! * image list: `action=query&prop=images&imlimit=max` (follows `continue`)
//! * thumbnail: `action=query&prop=imageinfo&iiprop=url&iiurlwidth={w}`
//!
//! all with `format=json&formatversion=2`, latest revision only.
//!
//! An offline corpus directory holds one `<slug>.wiki` file per page (slug =
//! title with spaces replaced by underscores) and an optional
//! `images.manifest` with lines `page title<TAB>file<TAB>file...`.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde_json::Value;
use thiserror::Error;

pub const DEFAULT_THUMB_WIDTH: u32 = 150;
pub const DEFAULT_MIN_DELAY: Duration = Duration::from_millis(200);
pub const USER_AGENT: &str = concat!(
    "histevents/",
    env!("CARGO_PKG_VERSION"),
    " (historical event extraction from year articles; read-only)"
);
const MAX_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPage {
    pub title: String,
    pub lang: String,
    pub wikitext: String,
    pub fetched_at: DateTime<Utc>,
}

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unexpected response: {0}")]
    Protocol(String),
    #[error("corpus directory {0} does not exist")]
    MissingCorpus(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SourceError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, SourceError::Transport(_))
    }
}

pub fn title_slug(title: &str) -> String {
    title.trim().replace(' ', "_")
}

/// The image side of a source, the only part enrichment needs.
pub trait ImageSource: Send + Sync {
    /// Image file titles used by an article, in the source's order.
    fn raw_images(&self, title: &str) -> Result<Vec<String>, SourceError>;

    fn image_thumb_url(&self, file_title: &str, width_px: u32) -> Result<String, SourceError>;

    /// Images of an article, sorted ascending and duplicate-free.
    fn list_images(&self, title: &str) -> Result<Vec<String>, SourceError> {
        Ok(self.raw_images(title)?.into_iter().collect::<BTreeSet<_>>().into_iter().collect())
    }
}

#[derive(Debug)]
pub enum PageSource {
    Offline(OfflineSource),
    Live(LiveSource),
}

impl PageSource {
    pub fn offline(dir: impl Into<PathBuf>, lang: &str) -> Result<Self, SourceError> {
        OfflineSource::new(dir, lang).map(PageSource::Offline)
    }

    pub fn live(lang: &str, limiter: Arc<RateLimiter>) -> Self {
        PageSource::Live(LiveSource::new(lang, limiter))
    }

    pub fn lang(&self) -> &str {
        match self {
            PageSource::Offline(s) => &s.lang,
            PageSource::Live(s) => &s.lang,
        }
    }

    pub fn fetch_page(&self, title: &str) -> Result<RawPage, SourceError> {
        if title.trim().is_empty() {
            return Err(SourceError::NotFound("empty title".into()));
        }
        match self {
            PageSource::Offline(s) => s.fetch_page(title),
            PageSource::Live(s) => s.fetch_page(title),
        }
    }
}

impl ImageSource for PageSource {
    fn raw_images(&self, title: &str) -> Result<Vec<String>, SourceError> {
        match self {
            PageSource::Offline(s) => s.raw_images(title),
            PageSource::Live(s) => s.raw_images(title),
        }
    }

    fn image_thumb_url(&self, file_title: &str, width_px: u32) -> Result<String, SourceError> {
        match self {
            PageSource::Offline(s) => s.image_thumb_url(file_title, width_px),
            PageSource::Live(s) => s.image_thumb_url(file_title, width_px),
        }
    }
}

#[derive(Debug)]
pub struct OfflineSource {
    dir: PathBuf,
    lang: String,
    manifest: HashMap<String, Vec<String>>,
}

impl OfflineSource {
    pub fn new(dir: impl Into<PathBuf>, lang: &str) -> Result<Self, SourceError> {
        let dir = dir.into();
        if !dir.is_dir() {
            return Err(SourceError::MissingCorpus(dir));
        }
        let manifest_path = dir.join("images.manifest");
        let manifest = match fs::read_to_string(&manifest_path) {
            Ok(text) => parse_manifest(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => HashMap::new(),
            Err(source) => return Err(SourceError::Io { path: manifest_path, source }),
        };
        Ok(OfflineSource { dir, lang: lang.to_string(), manifest })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn page_path(&self, title: &str) -> PathBuf {
        self.dir.join(format!("{}.wiki", title_slug(title)))
    }

    fn fetch_page(&self, title: &str) -> Result<RawPage, SourceError> {
        let path = self.page_path(title);
        let io = |source| SourceError::Io { path: path.clone(), source };
        let wikitext = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(SourceError::NotFound(title.to_string()))
            }
            Err(e) => return Err(io(e)),
        };
        if wikitext.is_empty() {
            return Err(SourceError::NotFound(format!("{title} (empty page)")));
        }
        let fetched_at = fs::metadata(&path)
            .and_then(|m| m.modified())
            .map(DateTime::<Utc>::from)
            .map_err(io)?;
        Ok(RawPage { title: title.to_string(), lang: self.lang.clone(), wikitext, fetched_at })
    }

    fn raw_images(&self, title: &str) -> Result<Vec<String>, SourceError> {
        if let Some(files) = self.manifest.get(title.trim()) {
            return Ok(files.clone());
        }
        if self.page_path(title).is_file() {
            Ok(Vec::new())
        } else {
            Err(SourceError::NotFound(title.to_string()))
        }
    }

    fn image_thumb_url(&self, file_title: &str, width_px: u32) -> Result<String, SourceError> {
        if width_px == 0 {
            return Err(SourceError::Protocol("thumbnail width must be positive".into()));
        }
        Ok(format!("offline://thumb/{width_px}px-{}", title_slug(file_title)))
    }
}

fn parse_manifest(text: &str) -> HashMap<String, Vec<String>> {
    let mut map: HashMap<String, Vec<String>> = HashMap::new();
    for line in text.lines() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let Some(title) = fields.next() else { continue };
        map.entry(title.trim().to_string())
            .or_default()
            .extend(fields.map(str::trim).filter(|f| !f.is_empty()).map(String::from));
    }
    map
}

/// Serializes requests per host and spaces them by a minimum delay.
#[derive(Debug)]
pub struct RateLimiter {
    min_delay: Duration,
    hosts: Mutex<HashMap<String, Arc<Mutex<Option<Instant>>>>>,
}

impl RateLimiter {
    pub fn new(min_delay: Duration) -> Self {
        RateLimiter { min_delay, hosts: Mutex::new(HashMap::new()) }
    }

    /// Runs `f` while holding the host's slot.
    pub fn run<T>(&self, host: &str, f: impl FnOnce() -> T) -> T {
        let slot = {
            let mut hosts = self.hosts.lock().unwrap_or_else(|e| e.into_inner());
            hosts.entry(host.to_string()).or_default().clone()
        };
        let mut last = slot.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(t) = *last {
            let ready = t + self.min_delay;
            let now = Instant::now();
            if ready > now {
                thread::sleep(ready - now);
            }
        }
        let out = f();
        *last = Some(Instant::now());
        out
    }
}

impl Default for RateLimiter {
    fn default() -> Self {
        RateLimiter::new(DEFAULT_MIN_DELAY)
    }
}

#[derive(Debug)]
pub struct LiveSource {
    lang: String,
    host: String,
    agent: ureq::Agent,
    limiter: Arc<RateLimiter>,
}

impl LiveSource {
    pub fn new(lang: &str, limiter: Arc<RateLimiter>) -> Self {
        let agent = ureq::AgentBuilder::new()
            .user_agent(USER_AGENT)
            .timeout(Duration::from_secs(30))
            .build();
        LiveSource { lang: lang.to_string(), host: format!("{lang}.wikipedia.org"), agent, limiter }
    }

    fn api(&self, params: &[(&str, &str)]) -> Result<Value, SourceError> {
        let url = format!("https://{}/w/api.php", self.host);
        let mut attempt = 0;
        loop {
            attempt += 1;
            let result = self.limiter.run(&self.host, || {
                let mut req = self.agent.get(&url).query("format", "json").query("formatversion", "2");
                for (k, v) in params {
                    req = req.query(k, v);
                }
                match req.call() {
                    Ok(resp) => resp.into_string().map_err(|e| SourceError::Transport(e.to_string())),
                    Err(ureq::Error::Status(404, _)) => Err(SourceError::NotFound(url.clone())),
                    Err(ureq::Error::Status(code, _)) if code == 429 || code >= 500 => {
                        Err(SourceError::Transport(format!("HTTP {code}")))
                    }
                    Err(ureq::Error::Status(code, _)) => Err(SourceError::Protocol(format!("HTTP {code}"))),
                    Err(e) => Err(SourceError::Transport(e.to_string())),
                }
            });
            match result {
                Ok(body) => {
                    return serde_json::from_str(&body).map_err(|e| SourceError::Protocol(e.to_string()))
                }
                Err(e) if e.is_retryable() && attempt < MAX_ATTEMPTS => {
                    log::warn!("{}: {e}; retrying", self.host);
                    thread::sleep(Duration::from_millis(500 << (attempt - 1)));
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn first_page<'a>(v: &'a Value, title: &str) -> Result<&'a Value, SourceError> {
        let page = v
            .pointer("/query/pages/0")
            .ok_or_else(|| SourceError::Protocol("response without pages".into()))?;
        if page.get("missing").is_some() || page.get("invalid").is_some() {
            return Err(SourceError::NotFound(title.to_string()));
        }
        Ok(page)
    }

    fn fetch_page(&self, title: &str) -> Result<RawPage, SourceError> {
        let v = self.api(&[
            ("action", "query"),
            ("prop", "revisions"),
            ("rvprop", "content"),
            ("rvslots", "main"),
            ("titles", title),
        ])?;
        let page = Self::first_page(&v, title)?;
        let wikitext = page
            .pointer("/revisions/0/slots/main/content")
            .and_then(Value::as_str)
            .ok_or_else(|| SourceError::Protocol("revision without content".into()))?;
        if wikitext.is_empty() {
            return Err(SourceError::NotFound(format!("{title} (empty page)")));
        }
        Ok(RawPage {
            title: title.to_string(),
            lang: self.lang.clone(),
            wikitext: wikitext.to_string(),
            fetched_at: Utc::now(),
        })
    }

    fn raw_images(&self, title: &str) -> Result<Vec<String>, SourceError> {
        let mut out = Vec::new();
        let mut cont: Option<String> = None;
        loop {
            let mut params = vec![("action", "query"), ("prop", "images"), ("imlimit", "max"), ("titles", title)];
            if let Some(c) = &cont {
                params.push(("imcontinue", c.as_str()));
            }
            let v = self.api(&params)?;
            let page = Self::first_page(&v, title)?;
            if let Some(images) = page.get("images").and_then(Value::as_array) {
                out.extend(images.iter().filter_map(|i| i.get("title")?.as_str().map(String::from)));
            }
            match v.pointer("/continue/imcontinue").and_then(Value::as_str) {
                Some(c) => cont = Some(c.to_string()),
                None => return Ok(out),
            }
        }
    }

    fn image_thumb_url(&self, file_title: &str, width_px: u32) -> Result<String, SourceError> {
        let width = width_px.to_string();
        let v = self.api(&[
            ("action", "query"),
            ("prop", "imageinfo"),
            ("iiprop", "url"),
            ("iiurlwidth", width.as_str()),
            ("titles", file_title),
        ])?;
        let page = Self::first_page(&v, file_title)?;
        page.pointer("/imageinfo/0/thumburl")
            .and_then(Value::as_str)
            .map(String::from)
            .ok_or_else(|| SourceError::NotFound(file_title.to_string()))
    }
}
