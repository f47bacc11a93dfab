//! Pipeline stages behind the command-line tool: crawl year pages, extract,
//! optionally enrich, and store; plus the enrich, export and report passes.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::enrich::{assign_image, ImageCache};
use crate::export::{render, ExportOptions, Format, LodeMapping};
use crate::extract::{extract_page, Event, ExtractionReport};
use crate::ingest::{PageSource, RateLimiter, SourceError};
use crate::profile::{ConfigError, Profiles};
use crate::store::{EventStore, StoreError};

pub const DEFAULT_WORKERS: usize = 4;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("source: {0}")]
    Source(#[from] SourceError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// Process exit code: 2 configuration, 3 source, 4 storage.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Source(_) => 3,
            PipelineError::Store(_) | PipelineError::Io { .. } => 4,
        }
    }
}

/// Where pages come from.
#[derive(Debug, Clone)]
pub enum SourceKind {
    /// Corpus root with one subdirectory per language.
    Offline(PathBuf),
    Live(Arc<RateLimiter>),
}

impl SourceKind {
    pub fn open(&self, lang: &str) -> Result<PageSource, SourceError> {
        match self {
            SourceKind::Offline(root) => PageSource::offline(root.join(lang), lang),
            SourceKind::Live(limiter) => Ok(PageSource::live(lang, limiter.clone())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub languages: Vec<String>,
    pub year_range: (i32, i32),
    pub source: SourceKind,
    pub store_path: PathBuf,
    pub enrich: bool,
    /// Failure log, appended to.
    pub report_path: Option<PathBuf>,
    pub workers: usize,
}

impl RunConfig {
    pub fn validate(&self, profiles: &Profiles) -> Result<(), ConfigError> {
        if self.year_range.0 > self.year_range.1 {
            return Err(ConfigError::Invalid {
                lang: self.languages.join(","),
                message: format!("year range {}..{} is empty", self.year_range.0, self.year_range.1),
            });
        }
        match self.languages.iter().find(|l| !profiles.contains_key(l.as_str())) {
            Some(l) => Err(ConfigError::UnknownLanguage(l.clone())),
            None => Ok(()),
        }
    }
}

/// Per-language totals of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LangSummary {
    pub pages: u64,
    pub missing_pages: u64,
    pub candidates: u64,
    pub extracted: u64,
    pub failures: u64,
    pub inserted: u64,
    pub replaced: u64,
    pub images: u64,
}

impl LangSummary {
    pub fn quotient(&self) -> f64 {
        crate::extract::extraction_quotient(self.extracted, self.candidates)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub languages: BTreeMap<String, LangSummary>,
    pub stored_events: usize,
}

impl Summary {
    /// Tab-separated table with a header line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "lang\tpages\tmissing\tcandidates\textracted\tfailures\tquotient\tinserted\treplaced\timages\n",
        );
        for (lang, s) in &self.languages {
            out.push_str(&format!(
                "{lang}\t{}\t{}\t{}\t{}\t{}\t{:.4}\t{}\t{}\t{}\n",
                s.pages,
                s.missing_pages,
                s.candidates,
                s.extracted,
                s.failures,
                s.quotient(),
                s.inserted,
                s.replaced,
                s.images
            ));
        }
        out
    }
}

fn pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool builds")
}

struct PageOutcome {
    events: Vec<Event>,
    report: ExtractionReport,
}

/// Fetches, extracts and stores every year page in range. Pages are
/// processed in parallel chunks; each chunk is stored in page order before
/// the next starts, so an aborted run keeps its finished chunks and a rerun
/// converges to the same contents.
pub fn run_extract(cfg: &RunConfig, profiles: &Profiles) -> Result<Summary, PipelineError> {
    cfg.validate(profiles)?;
    let mut store = EventStore::open(&cfg.store_path)?;
    let mut log = match &cfg.report_path {
        Some(p) => Some(
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .map_err(|source| PipelineError::Io { path: p.clone(), source })?,
        ),
        None => None,
    };
    let pool = pool(cfg.workers);
    let mut summary = Summary::default();

    for lang in &cfg.languages {
        let profile = &profiles[lang.as_str()];
        let source = cfg.source.open(lang)?;
        // Article titles are per wiki, so each language gets its own cache.
        let cache = ImageCache::new();
        let titles: Vec<String> = (cfg.year_range.0..=cfg.year_range.1)
            .filter(|&y| y != 0)
            .map(|y| profile.year_title(y))
            .collect::<Result<_, _>>()?;
        let totals = summary.languages.entry(lang.clone()).or_default();

        for chunk in titles.chunks(cfg.workers.max(1) * 4) {
            let outcomes: Vec<Result<Option<PageOutcome>, SourceError>> = pool.install(|| {
                chunk
                    .par_iter()
                    .map(|title| {
                        let page = match source.fetch_page(title) {
                            Ok(p) => p,
                            Err(SourceError::NotFound(_)) => return Ok(None),
                            Err(e) => return Err(e),
                        };
                        let (events, report) = extract_page(&page, profile).map_err(|e| SourceError::Protocol(e.to_string()))?;
                        let events = if cfg.enrich {
                            events.into_iter().map(|e| assign_image(e, &source, &cache, profile)).collect()
                        } else {
                            events
                        };
                        Ok(Some(PageOutcome { events, report }))
                    })
                    .collect()
            });
            for outcome in outcomes {
                let Some(PageOutcome { events, report }) = outcome? else {
                    totals.missing_pages += 1;
                    continue;
                };
                let (inserted, replaced) = store.upsert_events(&events)?;
                store.put_reports(std::slice::from_ref(&report))?;
                if let (Some(f), Some(path)) = (log.as_mut(), cfg.report_path.as_ref()) {
                    for line in report.failure_log_lines() {
                        writeln!(f, "{line}").map_err(|source| PipelineError::Io { path: path.clone(), source })?;
                    }
                }
                totals.pages += 1;
                totals.candidates += report.candidate_count;
                totals.extracted += report.extracted_count;
                totals.failures += report.failures.len() as u64;
                totals.inserted += inserted as u64;
                totals.replaced += replaced as u64;
                totals.images += events.iter().filter(|e| e.image.is_some()).count() as u64;
            }
        }
    }
    summary.stored_events = store.len();
    Ok(summary)
}

/// Image pass over stored events of the given languages; returns
/// `(events, events with an image)`.
pub fn run_enrich(
    store: &mut EventStore,
    source: &SourceKind,
    profiles: &Profiles,
    languages: &[String],
    workers: usize,
) -> Result<(usize, usize), PipelineError> {
    let pool = pool(workers);
    let (mut total, mut with_image) = (0, 0);
    for lang in languages {
        let profile = profiles.get(lang.as_str()).ok_or_else(|| ConfigError::UnknownLanguage(lang.clone()))?;
        let page_source = source.open(lang)?;
        let cache = ImageCache::new();
        let events: Vec<Event> = store.events().into_iter().filter(|e| &e.lang == lang).collect();
        let enriched: Vec<Event> = pool.install(|| {
            events
                .into_par_iter()
                .map(|e| assign_image(e, &page_source, &cache, profile))
                .collect()
        });
        total += enriched.len();
        with_image += enriched.iter().filter(|e| e.image.is_some()).count();
        store.upsert_events(&enriched)?;
    }
    Ok((total, with_image))
}

/// Renders all stored events in canonical order.
pub fn run_export(store: &EventStore, format: Format, options: ExportOptions, mapping: &LodeMapping) -> String {
    render(&store.events(), format, options, mapping)
}

/// Per-page report table: `lang, title, candidates, extracted, failures,
/// quotient`, followed by one row per language.
pub fn report_table(store: &EventStore) -> String {
    let mut out = String::from("lang\ttitle\tcandidates\textracted\tfailures\tquotient\n");
    let mut per_lang: BTreeMap<&str, (u64, u64, u64)> = BTreeMap::new();
    for r in store.reports() {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{:.4}\n",
            r.lang,
            r.source_title,
            r.candidate_count,
            r.extracted_count,
            r.failures.len(),
            r.quotient
        ));
        let t = per_lang.entry(&r.lang).or_default();
        t.0 += r.candidate_count;
        t.1 += r.extracted_count;
        t.2 += r.failures.len() as u64;
    }
    for (lang, (c, e, f)) in per_lang {
        out.push_str(&format!(
            "{lang}\t*\t{c}\t{e}\t{f}\t{:.4}\n",
            crate::extract::extraction_quotient(e, c)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::bundled_profiles;

    #[test]
    fn empty_range_yields_zero_counts() {
        let corpus = tempfile::tempdir().unwrap();
        std::fs::create_dir(corpus.path().join("en")).unwrap();
        let cfg = RunConfig {
            languages: vec!["en".into()],
            year_range: (1500, 1500),
            source: SourceKind::Offline(corpus.path().to_path_buf()),
            store_path: corpus.path().join("store.jsonl"),
            enrich: false,
            report_path: None,
            workers: 2,
        };
        let s = run_extract(&cfg, &bundled_profiles()).unwrap();
        assert_eq!(s.languages["en"].pages, 0);
        assert_eq!(s.languages["en"].missing_pages, 1);
        assert_eq!(s.stored_events, 0);
    }

    #[test]
    fn config_validation() {
        let cfg = RunConfig {
            languages: vec!["xx".into()],
            year_range: (1, 2),
            source: SourceKind::Offline(PathBuf::from("/nonexistent")),
            store_path: PathBuf::from("/nonexistent/s"),
            enrich: false,
            report_path: None,
            workers: 1,
        };
        let err = run_extract(&cfg, &bundled_profiles()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let cfg = RunConfig { languages: vec!["en".into()], year_range: (3, 2), ..cfg };
        assert_eq!(run_extract(&cfg, &bundled_profiles()).unwrap_err().exit_code(), 2);
    }
}
