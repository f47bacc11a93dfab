//! Shared fixtures and the acceptance checks. Each `check_*` function
//! returns a one-line summary on success and a reason on failure, so both
//! the acceptance runner and the ordinary integration tests can use them.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use histevents::enrich::{assign_image, ImageCache};
use histevents::export::{to_n3, ExportOptions, Format, LodeMapping};
use histevents::extract::{extract_page, extraction_quotient, Event, ExtractionReport};
use histevents::ingest::{ImageSource, PageSource, SourceError};
use histevents::pipeline::{run_export, run_extract, RunConfig, SourceKind};
use histevents::profile::{bundled_profiles, LanguageProfile, Profiles};
use histevents::service::ApiRequest;
use histevents::store::{EventQuery, EventStore, SortOrder};
use histevents::DateKey;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

pub type Check = Result<String, String>;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn corpus_root() -> PathBuf {
    fixtures().join("corpus")
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GoldEvent {
    pub lang: String,
    pub title: String,
    pub date: String,
    pub plain: String,
    pub targets: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct GoldPage {
    pub lang: String,
    pub title: String,
    pub candidates: u64,
    pub extracted: u64,
}

fn tsv_rows(name: &str) -> Vec<Vec<String>> {
    let text = fs::read_to_string(fixtures().join(name)).expect("fixture file");
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| l.split('\t').map(String::from).collect())
        .collect()
}

pub fn gold_events() -> Vec<GoldEvent> {
    tsv_rows("gold.tsv")
        .into_iter()
        .map(|r| {
            assert_eq!(r.len(), 5, "gold row {r:?}");
            GoldEvent {
                lang: r[0].clone(),
                title: r[1].clone(),
                date: r[2].clone(),
                plain: r[3].clone(),
                targets: r[4].split('|').filter(|t| !t.is_empty()).map(String::from).collect(),
            }
        })
        .collect()
}

pub fn gold_pages() -> Vec<GoldPage> {
    tsv_rows("gold_pages.tsv")
        .into_iter()
        .map(|r| GoldPage {
            lang: r[0].clone(),
            title: r[1].clone(),
            candidates: r[2].parse().unwrap(),
            extracted: r[3].parse().unwrap(),
        })
        .collect()
}

pub fn as_gold(ev: &Event) -> GoldEvent {
    GoldEvent {
        lang: ev.lang.clone(),
        title: ev.source_title.clone(),
        date: ev.date.to_lexical(),
        plain: ev.description_plain.clone(),
        targets: ev.links.iter().map(|l| l.target.clone()).collect(),
    }
}

/// Every fixture page, extracted with the bundled profiles.
pub fn extract_corpus(profiles: &Profiles) -> Vec<(Vec<Event>, ExtractionReport)> {
    gold_pages()
        .iter()
        .map(|p| {
            let source = PageSource::offline(corpus_root().join(&p.lang), &p.lang).unwrap();
            let page = source.fetch_page(&p.title).unwrap();
            extract_page(&page, &profiles[p.lang.as_str()]).unwrap()
        })
        .collect()
}

pub fn corpus_events() -> Vec<Event> {
    extract_corpus(&bundled_profiles()).into_iter().flat_map(|(e, _)| e).collect()
}

/// A store holding every extracted fixture event.
pub fn gold_store(dir: &Path) -> EventStore {
    let mut store = EventStore::open(dir.join("gold.jsonl")).unwrap();
    store.upsert_events(&corpus_events()).unwrap();
    store
}

fn multiset<T: Clone + Eq + std::hash::Hash>(items: &[T]) -> HashMap<T, usize> {
    let mut m = HashMap::new();
    for i in items {
        *m.entry(i.clone()).or_insert(0) += 1;
    }
    m
}

/// Exact-match precision, recall and F1 of `got` against `want`.
pub fn f1(got: &[GoldEvent], want: &[GoldEvent]) -> (f64, f64, f64) {
    let (g, w) = (multiset(got), multiset(want));
    let tp: usize = g.iter().map(|(k, n)| (*n).min(*w.get(k).unwrap_or(&0))).sum();
    let p = if got.is_empty() { 1.0 } else { tp as f64 / got.len() as f64 };
    let r = if want.is_empty() { 1.0 } else { tp as f64 / want.len() as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

pub fn check_gold_fidelity() -> Check {
    let gold = gold_events();
    let pages = gold_pages();
    let langs: BTreeSet<&str> = pages.iter().map(|p| p.lang.as_str()).collect();
    if pages.len() < 12 || langs.len() < 3 || gold.len() < 150 {
        return Err(format!("corpus too small: {} pages, {} languages, {} gold events", pages.len(), langs.len(), gold.len()));
    }
    let profiles = bundled_profiles();
    let start = Instant::now();
    let got: Vec<GoldEvent> = extract_corpus(&profiles).iter().flat_map(|(e, _)| e.iter().map(as_gold)).collect();
    let elapsed = start.elapsed();
    let (p, r, f) = f1(&got, &gold);
    let summary = format!(
        "{} pages / {} languages / {} gold events; P={p:.4} R={r:.4} F1={f:.4} in {:.2?}",
        pages.len(),
        langs.len(),
        gold.len(),
        elapsed
    );
    if f == 1.0 && elapsed < Duration::from_secs(5) {
        Ok(summary)
    } else {
        let (g, w) = (multiset(&got), multiset(&gold));
        let extra = g.keys().find(|k| !w.contains_key(k));
        let missing = w.keys().find(|k| !g.contains_key(k));
        Err(format!("{summary}; first unexpected {extra:?}; first missing {missing:?}"))
    }
}

pub fn check_accounting() -> Check {
    let reports: Vec<ExtractionReport> = extract_corpus(&bundled_profiles()).into_iter().map(|(_, r)| r).collect();
    for (r, g) in reports.iter().zip(gold_pages()) {
        let failures = r.failures.len() as u64;
        if r.extracted_count + failures != r.candidate_count {
            return Err(format!("{}/{}: {} + {} != {}", r.lang, r.source_title, r.extracted_count, failures, r.candidate_count));
        }
        if (r.candidate_count, r.extracted_count) != (g.candidates, g.extracted) {
            return Err(format!(
                "{}/{}: counted {}/{} lines, gold says {}/{}",
                r.lang, r.source_title, r.extracted_count, r.candidate_count, g.extracted, g.candidates
            ));
        }
        let expected = r.extracted_count as f64 / r.candidate_count as f64;
        if r.quotient != expected {
            return Err(format!("{}/{}: quotient {} != {expected}", r.lang, r.source_title, r.quotient));
        }
    }
    let german = extraction_quotient(9_897, 10_000);
    if format!("{:.2}%", german * 100.0) != "98.97%" || (german - 0.9897).abs() > 1e-12 {
        return Err(format!("9897/10000 gave {german}"));
    }
    if extraction_quotient(0, 0) != 1.0 {
        return Err("empty page quotient is not 1".into());
    }
    let (c, e): (u64, u64) = reports.iter().fold((0, 0), |(c, e), r| (c + r.candidate_count, e + r.extracted_count));
    Ok(format!(
        "{} pages balanced; corpus quotient {e}/{c} = {:.4}; 9897/10000 = {german}",
        reports.len(),
        extraction_quotient(e, c)
    ))
}

pub fn check_links_mean() -> Check {
    let gold = gold_events();
    let events = corpus_events();
    let gold_links: usize = gold.iter().map(|g| g.targets.len()).sum();
    let got_links: usize = events.iter().map(|e| e.links.len()).sum();
    let gold_mean = gold_links as f64 / gold.len() as f64;
    let got_mean = got_links as f64 / events.len() as f64;
    let line = format!(
        "mean links per event {got_mean:.4} ({got_links}/{}), gold {gold_mean:.4}; full-scale reference 2.7",
        events.len()
    );
    if got_links == gold_links && events.len() == gold.len() {
        Ok(line)
    } else {
        Err(line)
    }
}

/// Date of an event as a (year, month, day) tuple with 0 for unknown parts.
fn date_tuple(ev: &Event) -> (i32, u8, u8) {
    (ev.date.year(), ev.date.month().unwrap_or(0), ev.date.day().unwrap_or(0))
}

/// Brute-force reference for `EventStore::query`.
pub fn oracle_query(events: &[Event], q: &OracleQuery) -> Vec<String> {
    let mut hits: Vec<&Event> = events
        .iter()
        .filter(|e| q.begin.is_none_or(|b| date_tuple(e) >= b))
        .filter(|e| q.end.is_none_or(|b| date_tuple(e) <= b))
        .filter(|e| q.lang.as_ref().is_none_or(|l| &e.lang == l))
        .filter(|e| q.category.as_ref().is_none_or(|c| e.category_path.contains(c)))
        .filter(|e| {
            q.keyword
                .as_ref()
                .is_none_or(|k| e.description_plain.to_lowercase().contains(&k.to_lowercase()))
        })
        .collect();
    hits.sort_by(|a, b| {
        (date_tuple(a), a.line_no, &a.lang, &a.source_title, &a.id).cmp(&(
            date_tuple(b),
            b.line_no,
            &b.lang,
            &b.source_title,
            &b.id,
        ))
    });
    if q.desc {
        hits.reverse();
    }
    hits.into_iter().skip(q.offset).take(q.limit).map(|e| e.id.clone()).collect()
}

#[derive(Debug, Clone)]
pub struct OracleQuery {
    pub begin: Option<(i32, u8, u8)>,
    pub end: Option<(i32, u8, u8)>,
    pub lang: Option<String>,
    pub category: Option<String>,
    pub keyword: Option<String>,
    pub limit: usize,
    pub offset: usize,
    pub desc: bool,
}

impl OracleQuery {
    pub fn to_query(&self) -> EventQuery {
        let key = |(y, m, d): (i32, u8, u8)| DateKey::from_parts(y, m, d);
        EventQuery {
            begin_date: self.begin.map(key),
            end_date: self.end.map(key),
            lang: self.lang.clone(),
            category: self.category.clone(),
            keyword: self.keyword.clone(),
            limit: self.limit,
            order: if self.desc { SortOrder::Desc } else { SortOrder::Asc },
            offset: self.offset,
        }
    }
}

fn bound() -> impl Strategy<Value = (i32, u8, u8)> {
    (
        prop_oneof![Just(-300), Just(-44), Just(-43), Just(1945), Just(1969), Just(1989), Just(2010), -400i32..2100],
        0u8..=12,
        0u8..=31,
    )
}

pub fn query_strategy() -> impl Strategy<Value = OracleQuery> {
    let lang = prop::option::of(prop::sample::select(vec!["en", "de", "it", "fr"]).prop_map(String::from));
    let category = prop::option::of(
        prop::sample::select(vec![
            "politics_world",
            "culture",
            "science_technology",
            "economy",
            "disasters",
            "roman_republic",
            "by_place",
            "egypt",
            "Mathematics",
            "nothing_here",
        ])
        .prop_map(String::from),
    );
    let keyword = prop::option::of(
        prop::sample::select(vec!["egypt", "the", "Cicero", "BERLIN", "2010", "ö", "apollo 11", "zzz", "e"]).prop_map(String::from),
    );
    (
        prop::option::of(bound()),
        prop::option::of(bound()),
        lang,
        category,
        keyword,
        1usize..250,
        prop_oneof![Just(0usize), 0usize..200],
        any::<bool>(),
    )
        .prop_map(|(begin, end, lang, category, keyword, limit, offset, desc)| {
            let (begin, end) = match (begin, end) {
                (Some(b), Some(e)) if b > e => (Some(e), Some(b)),
                other => other,
            };
            OracleQuery { begin, end, lang, category, keyword, limit, offset, desc }
        })
}

fn api(params: &[(&str, &str)], profiles: &Profiles) -> EventQuery {
    let map = params.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    ApiRequest::parse(&map, profiles).unwrap().query
}

/// The three documented example requests, with hand-derived expectations.
pub fn example_queries(store: &EventStore, profiles: &Profiles) -> Result<String, String> {
    let gold = gold_events();
    let events = store.events();

    let window = store.query(&api(&[("begin_date", "19450000"), ("end_date", "19501231")], profiles));
    let want = gold.iter().filter(|g| g.date.as_str() >= "1945" && g.date.as_str() < "1951").count();
    if window.len() != want || window.iter().any(|e| !(1945..=1950).contains(&e.date.year())) {
        return Err(format!("window query returned {}, expected {want}", window.len()));
    }

    let egypt = store.query(&api(&[("query", "Egypt")], profiles));
    let want: BTreeSet<String> = gold
        .iter()
        .filter(|g| g.plain.to_lowercase().contains("egypt"))
        .map(|g| g.plain.clone())
        .collect();
    let got: BTreeSet<String> = egypt.iter().map(|e| e.description_plain.clone()).collect();
    if got != want {
        return Err(format!("query=Egypt returned {got:?}, expected {want:?}"));
    }

    let kultur = store.query(&api(&[("category", "Kultur")], profiles));
    let oracle = oracle_query(
        &events,
        &OracleQuery {
            begin: None,
            end: None,
            lang: None,
            category: Some("culture".into()),
            keyword: None,
            limit: 1000,
            offset: 0,
            desc: false,
        },
    );
    let german: BTreeSet<&str> = kultur.iter().filter(|e| e.lang == "de").map(|e| e.source_title.as_str()).collect();
    // Events under the "Kultur" headings of the German fixture pages.
    let want_german: BTreeSet<&str> = ["1945", "1969", "2010", "44 v. Chr."].into_iter().collect();
    let german_count = kultur.iter().filter(|e| e.lang == "de").count();
    if kultur.iter().map(|e| e.id.clone()).collect::<Vec<_>>() != oracle || german != want_german || german_count != 5 {
        return Err(format!("category=Kultur returned {} events ({german_count} German)", kultur.len()));
    }
    Ok(format!(
        "examples: window {} events, Egypt {}, Kultur {} ({german_count} German)",
        window.len(),
        egypt.len(),
        kultur.len()
    ))
}

pub fn check_query_oracle(cases: u32) -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = gold_store(dir.path());
    let events = store.events();
    let profiles = bundled_profiles();
    let start = Instant::now();
    let mut runner = TestRunner::new_with_rng(
        Config { cases, failure_persistence: None, ..Config::default() },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    );
    runner
        .run(&query_strategy(), |q| {
            let got: Vec<String> = store.query(&q.to_query()).into_iter().map(|e| e.id).collect();
            prop_assert_eq!(got, oracle_query(&events, &q));
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let examples = example_queries(&store, &profiles)?;
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(10) {
        return Err(format!("{cases} queries took {elapsed:.2?}"));
    }
    Ok(format!("{cases} randomized queries match the scan oracle; {examples}; {elapsed:.2?}"))
}

pub fn check_n3() -> Check {
    let events = EventStore::open(tempfile::tempdir().map_err(|e| e.to_string())?.path().join("s.jsonl"))
        .map(|mut s| {
            s.upsert_events(&corpus_events()).unwrap();
            s.events()
        })
        .map_err(|e| e.to_string())?;
    let mapping = LodeMapping::bundled();
    let doc = to_n3(&events, &mapping);
    let mut typed = BTreeSet::new();
    let (mut involvement, mut triples) = (0usize, 0usize);
    let event_class = format!("<{}>", mapping.predicates.event_class);
    for t in oxttl::TurtleParser::new().for_slice(doc.as_bytes()) {
        let t = t.map_err(|e| format!("parse error: {e}"))?;
        triples += 1;
        let p = t.predicate.as_str();
        if p == "http://www.w3.org/1999/02/22-rdf-syntax-ns#type" && t.object.to_string() == event_class {
            typed.insert(t.subject.to_string());
        }
        if p == mapping.predicates.involved {
            involvement += 1;
        }
    }
    let gold = gold_events();
    let gold_links: usize = gold.iter().map(|g| g.targets.len()).sum();
    let line = format!(
        "{triples} triples, 0 errors; typed subjects {} (gold {}); involvement triples {involvement} (gold {gold_links})",
        typed.len(),
        gold.len()
    );
    if typed.len() == gold.len() && involvement == gold_links {
        Ok(line)
    } else {
        Err(line)
    }
}

/// In-memory image source: page title to image files in arbitrary order.
pub struct StubImages {
    pub pages: HashMap<String, Vec<String>>,
}

impl ImageSource for StubImages {
    fn raw_images(&self, title: &str) -> Result<Vec<String>, SourceError> {
        self.pages.get(title).cloned().ok_or_else(|| SourceError::NotFound(title.to_string()))
    }

    fn image_thumb_url(&self, file_title: &str, width_px: u32) -> Result<String, SourceError> {
        let name = file_title.split_once(':').map_or(file_title, |(_, n)| n).replace(' ', "_");
        Ok(format!("https://upload.example.org/thumb/{name}/{width_px}px-{name}"))
    }
}

/// Reference selection: links in order, files sorted and deduplicated, first
/// file whose name contains no blocklisted fragment (ignoring case).
pub fn oracle_image(targets: &[String], pages: &HashMap<String, Vec<String>>, blocklist: &[String]) -> Option<String> {
    targets.iter().find_map(|t| {
        let mut files = pages.get(t)?.clone();
        files.sort();
        files.dedup();
        files
            .into_iter()
            .find(|f| !blocklist.iter().any(|b| f.to_lowercase().contains(&b.to_lowercase())))
    })
}

pub fn image_case() -> impl Strategy<Value = (Vec<String>, HashMap<String, Vec<String>>)> {
    let file = prop::sample::select(vec![
        "File:Zebra.jpg",
        "File:apple.png",
        "File:Apple.png",
        "File:Commons-logo.svg",
        "File:Disambig gray.svg",
        "File:Map of Europe.svg",
        "File:Wiktionary-logo-en.svg",
        "File:Portrait.jpg",
        "File:Ägypten.jpg",
    ])
    .prop_map(String::from);
    let pages = prop::collection::hash_map(
        prop::sample::select(vec!["A", "B", "C", "D", "E"]).prop_map(String::from),
        prop::collection::vec(file, 0..6),
        0..5,
    );
    let targets = prop::collection::vec(prop::sample::select(vec!["A", "B", "C", "D", "E", "F"]).prop_map(String::from), 0..5);
    (targets, pages).prop_flat_map(|(targets, pages)| {
        let shuffled: Vec<_> = pages
            .into_iter()
            .map(|(k, v)| (Just(k), Just(v).prop_shuffle()))
            .collect();
        (Just(targets), shuffled)
    })
    .prop_map(|(targets, pages)| (targets, pages.into_iter().collect()))
}

pub fn event_with_links(targets: &[String], lang: &str) -> Event {
    let desc: Vec<String> = targets.iter().map(|t| format!("[[{t}]]")).collect();
    let wiki = desc.join(" and ");
    Event {
        id: histevents::extract::event_id(lang, "2010", &wiki),
        lang: lang.into(),
        date: histevents::HistoricalDate::year_only(2010).unwrap(),
        granularity: histevents::Granularity::Year,
        category_path: vec![],
        description_plain: targets.join(" and "),
        links: targets
            .iter()
            .map(|t| histevents::WikiLink { target: t.clone(), anchor: t.clone() })
            .collect(),
        description_wiki: wiki,
        image: None,
        source_title: "2010".into(),
        line_no: 1,
    }
}

pub fn check_images(cases: u32) -> Check {
    let profiles = bundled_profiles();
    let profile: &LanguageProfile = &profiles["en"];
    let blocklist = profile.image_blocklist().to_vec();
    let mut runner = TestRunner::new_with_rng(
        Config { cases, failure_persistence: None, ..Config::default() },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    );
    runner
        .run(&image_case(), |(targets, pages)| {
            let want = oracle_image(&targets, &pages, &blocklist);
            let stub = StubImages { pages };
            let ev = assign_image(event_with_links(&targets, "en"), &stub, &ImageCache::new(), profile);
            prop_assert_eq!(ev.image.as_ref().map(|i| i.file_title.clone()), want);
            if let Some(img) = &ev.image {
                prop_assert!(img.thumb_url.contains("150px-"), "{}", img.thumb_url);
                prop_assert_eq!(img.width_px, 150);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    // The offline corpus path goes through the same procedure.
    let mut caches: HashMap<String, (PageSource, ImageCache)> = HashMap::new();
    let (mut with_image, mut total) = (0, 0);
    for ev in corpus_events() {
        let lang = ev.lang.clone();
        let (source, cache) = caches
            .entry(lang.clone())
            .or_insert_with(|| (PageSource::offline(corpus_root().join(&lang), &lang).unwrap(), ImageCache::new()));
        let ev = assign_image(ev, source, cache, &profiles[lang.as_str()]);
        total += 1;
        if let Some(img) = ev.image {
            with_image += 1;
            if !img.thumb_url.contains("150px-") {
                return Err(format!("thumbnail {} lacks 150px-", img.thumb_url));
            }
        }
    }
    Ok(format!("{cases} shuffled stub cases match the reference; corpus images {with_image}/{total}, all 150px"))
}

pub fn offline_config(corpus: &Path, store: &Path) -> RunConfig {
    RunConfig {
        languages: vec!["en".into(), "de".into(), "it".into()],
        year_range: (-300, 2010),
        source: SourceKind::Offline(corpus.to_path_buf()),
        store_path: store.to_path_buf(),
        enrich: true,
        report_path: None,
        workers: 4,
    }
}

pub fn check_determinism() -> Check {
    let profiles = bundled_profiles();
    let mapping = LodeMapping::bundled();
    let mut docs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let store_path = dir.path().join("store.jsonl");
        run_extract(&offline_config(&corpus_root(), &store_path), &profiles).map_err(|e| e.to_string())?;
        let store = EventStore::open(&store_path).map_err(|e| e.to_string())?;
        let opts = ExportOptions { links: true, html: true };
        docs.push([Format::N3, Format::Json, Format::Xml].map(|f| run_export(&store, f, opts, &mapping)));
    }
    if docs[0] == docs[1] {
        let sizes: Vec<usize> = docs[0].iter().map(String::len).collect();
        Ok(format!("two runs, n3/json/xml byte-identical ({sizes:?} bytes)"))
    } else {
        Err("exports differ between runs".into())
    }
}

/// Live smoke against the English 2010 page; `None` unless
/// `HISTEVENTS_LIVE=1` is set.
pub fn check_live() -> Option<Check> {
    if std::env::var("HISTEVENTS_LIVE").ok().as_deref() != Some("1") {
        return None;
    }
    let profiles = bundled_profiles();
    let limiter = std::sync::Arc::new(histevents::ingest::RateLimiter::new(histevents::ingest::DEFAULT_MIN_DELAY));
    let source = PageSource::live("en", limiter);
    let result = source
        .fetch_page("2010")
        .map_err(|e| e.to_string())
        .and_then(|page| extract_page(&page, &profiles["en"]).map_err(|e| e.to_string()));
    Some(result.and_then(|(events, report)| {
        for line in report.failure_log_lines() {
            eprintln!("{line}");
        }
        let line = format!("{} events, quotient {:.4}", events.len(), report.quotient);
        if events.len() >= 100 && report.quotient >= 0.75 {
            Ok(line)
        } else {
            Err(line)
        }
    }))
}
