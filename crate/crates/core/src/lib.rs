//! Extraction of historical events from Wikipedia year articles.
//!
//! The pipeline fetches year pages ([`ingest`]), extracts dated events with
//! per-language profiles ([`profile`], [`extract`]), attaches an image to
//! each event ([`enrich`]), persists them ([`store`]) and serves or exports
//! them as XML, JSON and N3 ([`service`], [`export`]).

pub mod date;
pub mod enrich;
pub mod export;
pub mod extract;
pub mod ingest;
pub mod markup;
pub mod pipeline;
pub mod profile;
pub mod service;
pub mod store;

pub use date::{DateKey, Granularity, HistoricalDate};
pub use extract::{extract_page, Event, ExtractionReport, ImageRef};
pub use ingest::{PageSource, RawPage};
pub use markup::WikiLink;
pub use profile::{bundled_profiles, load_profiles, LanguageProfile, Profiles};
pub use store::{EventQuery, EventStore, SortOrder};
