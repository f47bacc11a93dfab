//! Embedded event store: an append-only JSON-lines log replayed into memory
//! on open.
//!
//! The first line is a header. Every batch is written as its records followed
//! by a `{"op":"commit","n":<records>}` marker; a batch without its marker
//! (a crash mid-write) is discarded on the next open and cut from the file.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::date::DateKey;
use crate::extract::{Event, ExtractionReport};

pub const DEFAULT_LIMIT: usize = 1000;
const HEADER: &str = r#"{"format":"histevents-store","version":1}"#;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: corrupt record: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortOrder {
    #[default]
    Asc,
    Desc,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("begin_date is after end_date")]
    EmptyWindow,
    #[error("limit must be positive")]
    ZeroLimit,
}

/// A normalized event filter. Absent fields do not filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventQuery {
    pub begin_date: Option<DateKey>,
    pub end_date: Option<DateKey>,
    pub lang: Option<String>,
    pub category: Option<String>,
    pub keyword: Option<String>,
    pub limit: usize,
    pub order: SortOrder,
    pub offset: usize,
}

impl Default for EventQuery {
    fn default() -> Self {
        EventQuery {
            begin_date: None,
            end_date: None,
            lang: None,
            category: None,
            keyword: None,
            limit: DEFAULT_LIMIT,
            order: SortOrder::Asc,
            offset: 0,
        }
    }
}

impl EventQuery {
    pub fn validate(&self) -> Result<(), QueryError> {
        if let (Some(b), Some(e)) = (self.begin_date, self.end_date) {
            if b > e {
                return Err(QueryError::EmptyWindow);
            }
        }
        if self.limit == 0 {
            return Err(QueryError::ZeroLimit);
        }
        Ok(())
    }

    /// True when the event passes every present filter. The time window
    /// applies to the event's start key, inclusive at both ends.
    pub fn matches(&self, ev: &Event) -> bool {
        let key = ev.date.key();
        self.begin_date.is_none_or(|b| key >= b)
            && self.end_date.is_none_or(|e| key <= e)
            && self.lang.as_deref().is_none_or(|l| ev.lang == l)
            && self.category.as_deref().is_none_or(|c| ev.category_path.iter().any(|p| p == c))
            && self
                .keyword
                .as_deref()
                .is_none_or(|k| ev.description_plain.to_lowercase().contains(&k.to_lowercase()))
    }
}

/// Canonical event order: date key, then source line, then language, page
/// and id so that the order is total.
pub fn canonical_order(a: &Event, b: &Event) -> Ordering {
    (a.date.key(), a.line_no, &a.lang, &a.source_title, &a.id).cmp(&(
        b.date.key(),
        b.line_no,
        &b.lang,
        &b.source_title,
        &b.id,
    ))
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
enum Record {
    Event { event: Event },
    Report { report: ExtractionReport },
    Commit { n: usize },
}

#[derive(Debug)]
pub struct EventStore {
    path: PathBuf,
    file: File,
    events: BTreeMap<String, Event>,
    reports: BTreeMap<(String, String), ExtractionReport>,
}

impl EventStore {
    /// Opens or creates the store at `path`, replaying committed batches.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let io = |source| StoreError::Io { path: path.clone(), source };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(io)?;
        }
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(&path).map_err(io)?;
        let mut store = EventStore { path: path.clone(), file: file.try_clone().map_err(io)?, events: BTreeMap::new(), reports: BTreeMap::new() };

        let len = file.metadata().map_err(io)?.len();
        if len == 0 {
            file.write_all(format!("{HEADER}\n").as_bytes()).map_err(io)?;
            file.sync_data().map_err(io)?;
            return Ok(store);
        }
        file.seek(SeekFrom::Start(0)).map_err(io)?;
        let committed_len = store.replay(BufReader::new(&file))?;
        if committed_len < len {
            log::warn!("{}: discarding {} bytes of uncommitted records", path.display(), len - committed_len);
            file.set_len(committed_len).map_err(io)?;
        }
        Ok(store)
    }

    fn replay(&mut self, reader: impl BufRead) -> Result<u64, StoreError> {
        let path = self.path.clone();
        let corrupt = |line: usize, message: String| StoreError::Corrupt { path: path.clone(), line, message };
        let mut pending: Vec<Record> = Vec::new();
        let mut offset = 0u64;
        let mut committed = 0u64;
        let lines = reader
            .split(b'\n')
            .collect::<Result<Vec<_>, _>>()
            .map_err(|source| StoreError::Io { path: path.clone(), source })?;
        let last = lines.len().saturating_sub(1);
        for (i, line) in lines.into_iter().enumerate() {
            let complete_len = line.len() as u64 + 1;
            if i == 0 {
                if line != HEADER.as_bytes() {
                    return Err(corrupt(1, "missing store header".into()));
                }
                offset += complete_len;
                committed = offset;
                continue;
            }
            let rec: Record = match serde_json::from_slice(&line) {
                Ok(r) => r,
                // a torn final write
                Err(_) if i == last => return Ok(committed),
                Err(e) => return Err(corrupt(i + 1, e.to_string())),
            };
            offset += complete_len;
            match rec {
                Record::Commit { n } => {
                    if n != pending.len() {
                        return Err(corrupt(i + 1, format!("commit of {n} records after {}", pending.len())));
                    }
                    for r in pending.drain(..) {
                        self.apply(r);
                    }
                    committed = offset;
                }
                other => pending.push(other),
            }
        }
        Ok(committed)
    }

    fn apply(&mut self, rec: Record) {
        match rec {
            Record::Event { event } => {
                self.events.insert(event.id.clone(), event);
            }
            Record::Report { report } => {
                self.reports.insert((report.lang.clone(), report.source_title.clone()), report);
            }
            Record::Commit { .. } => {}
        }
    }

    fn commit(&mut self, records: Vec<Record>) -> Result<(), StoreError> {
        if records.is_empty() {
            return Ok(());
        }
        let mut buf = Vec::new();
        for r in &records {
            serde_json::to_writer(&mut buf, r).expect("records serialize");
            buf.push(b'\n');
        }
        serde_json::to_writer(&mut buf, &Record::Commit { n: records.len() }).expect("records serialize");
        buf.push(b'\n');

        let io = |source| StoreError::Io { path: self.path.clone(), source };
        let before = self.file.metadata().map_err(io)?.len();
        let written = self.file.write_all(&buf).and_then(|_| self.file.sync_data());
        if let Err(e) = written {
            // roll the partial batch back; memory was not touched yet
            let _ = self.file.set_len(before);
            return Err(io(e));
        }
        for r in records {
            self.apply(r);
        }
        Ok(())
    }

    /// Inserts or replaces events by id; returns `(inserted, replaced)`.
    pub fn upsert_events(&mut self, batch: &[Event]) -> Result<(usize, usize), StoreError> {
        let mut seen = std::collections::HashSet::new();
        let (mut inserted, mut replaced) = (0, 0);
        for ev in batch {
            if self.events.contains_key(&ev.id) || !seen.insert(ev.id.as_str()) {
                replaced += 1;
            } else {
                inserted += 1;
            }
        }
        self.commit(batch.iter().map(|e| Record::Event { event: e.clone() }).collect())?;
        Ok((inserted, replaced))
    }

    pub fn put_reports(&mut self, batch: &[ExtractionReport]) -> Result<(), StoreError> {
        self.commit(batch.iter().map(|r| Record::Report { report: r.clone() }).collect())
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, id: &str) -> Option<&Event> {
        self.events.get(id)
    }

    /// All events in canonical order.
    pub fn events(&self) -> Vec<Event> {
        let mut all: Vec<Event> = self.events.values().cloned().collect();
        all.sort_by(canonical_order);
        all
    }

    /// Reports ordered by language and page title.
    pub fn reports(&self) -> impl Iterator<Item = &ExtractionReport> {
        self.reports.values()
    }

    pub fn query(&self, q: &EventQuery) -> Vec<Event> {
        let mut hits: Vec<&Event> = self.events.values().filter(|e| q.matches(e)).collect();
        hits.sort_by(|a, b| canonical_order(a, b));
        if q.order == SortOrder::Desc {
            hits.reverse();
        }
        hits.into_iter().skip(q.offset).take(q.limit).cloned().collect()
    }

    /// Rewrites the log as one canonical batch (events by id, then reports).
    pub fn compact(&mut self) -> Result<(), StoreError> {
        let io = |source| StoreError::Io { path: self.path.clone(), source };
        let tmp = self.path.with_extension("compact.tmp");
        let mut out = Vec::new();
        writeln!(out, "{HEADER}").map_err(io)?;
        let mut n = 0;
        for event in self.events.values() {
            serde_json::to_writer(&mut out, &Record::Event { event: event.clone() }).expect("records serialize");
            out.push(b'\n');
            n += 1;
        }
        for report in self.reports.values() {
            serde_json::to_writer(&mut out, &Record::Report { report: report.clone() }).expect("records serialize");
            out.push(b'\n');
            n += 1;
        }
        if n > 0 {
            serde_json::to_writer(&mut out, &Record::Commit { n }).expect("records serialize");
            out.push(b'\n');
        }
        fs::write(&tmp, &out).map_err(io)?;
        fs::rename(&tmp, &self.path).map_err(io)?;
        self.file = OpenOptions::new().read(true).append(true).open(&self.path).map_err(io)?;
        Ok(())
    }
}
