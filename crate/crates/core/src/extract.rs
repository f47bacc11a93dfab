//! Event extraction from year-article wikitext.
//!
//! A page is processed in three steps: the events section is located with
//! the profile's entry/exit heading patterns, every line in it is paired
//! with the heading context above it (categories, month), and every bullet
//! line is decomposed into date field and description. Every bullet line in
//! the section either becomes an [`Event`] or a recorded failure, so
//! `extracted + failures = candidates` holds for every page.

use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::date::{Granularity, HistoricalDate};
use crate::ingest::RawPage;
use crate::markup::{self, WikiLink};
use crate::profile::LanguageProfile;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRef {
    pub file_title: String,
    pub thumb_url: String,
    pub width_px: u32,
}

impl ImageRef {
    /// The same image at another width; thumbnail URLs embed the width as
    /// a `{width}px-` segment.
    pub fn resized(&self, width_px: u32) -> ImageRef {
        let from = format!("/{}px-", self.width_px);
        let to = format!("/{}px-", width_px);
        ImageRef {
            file_title: self.file_title.clone(),
            thumb_url: self.thumb_url.replacen(&from, &to, 1),
            width_px,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub id: String,
    pub lang: String,
    pub date: HistoricalDate,
    pub granularity: Granularity,
    pub category_path: Vec<String>,
    pub description_wiki: String,
    pub description_plain: String,
    #[serde(default)]
    pub links: Vec<WikiLink>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageRef>,
    pub source_title: String,
    pub line_no: u32,
}

/// Stable content id: first 16 hex digits of SHA-256 over language, source
/// title and whitespace-normalized description markup.
pub fn event_id(lang: &str, source_title: &str, description_wiki: &str) -> String {
    let normalized = description_wiki.split_whitespace().collect::<Vec<_>>().join(" ");
    let mut h = Sha256::new();
    h.update(lang.as_bytes());
    h.update([0]);
    h.update(source_title.as_bytes());
    h.update([0]);
    h.update(normalized.as_bytes());
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    UnrecognizedStructure,
    DateParse,
    EmptyDescription,
    Internal,
}

impl FailureReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureReason::UnrecognizedStructure => "unrecognized structure",
            FailureReason::DateParse => "date parse",
            FailureReason::EmptyDescription => "empty description",
            FailureReason::Internal => "internal error",
        }
    }
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineFailure {
    pub line_no: u32,
    pub raw_line: String,
    pub reason: FailureReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub source_title: String,
    pub lang: String,
    pub candidate_count: u64,
    pub extracted_count: u64,
    pub failures: Vec<LineFailure>,
    pub quotient: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Extracted events divided by candidate lines; 1.0 for a page without
/// candidates.
pub fn extraction_quotient(extracted: u64, candidates: u64) -> f64 {
    if candidates == 0 {
        1.0
    } else {
        extracted as f64 / candidates as f64
    }
}

impl ExtractionReport {
    fn new(page: &PageInfo) -> Self {
        ExtractionReport {
            source_title: page.title.clone(),
            lang: page.lang.clone(),
            candidate_count: 0,
            extracted_count: 0,
            failures: Vec::new(),
            quotient: 1.0,
            warnings: Vec::new(),
        }
    }

    fn finish(&mut self) {
        self.candidate_count = self.extracted_count + self.failures.len() as u64;
        self.quotient = extraction_quotient(self.extracted_count, self.candidate_count);
    }

    /// One tab-separated failure-log line per failure:
    /// `lang, title, line_no, reason, raw line`.
    pub fn failure_log_lines(&self) -> impl Iterator<Item = String> + '_ {
        self.failures.iter().map(move |f| {
            format!(
                "{}\t{}\t{}\t{}\t{}",
                self.lang,
                self.source_title,
                f.line_no,
                f.reason,
                f.raw_line.replace(['\t', '\n', '\r'], " ")
            )
        })
    }
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("no events section found")]
    SectionNotFound,
    #[error("page language {page} does not match profile language {profile}")]
    LanguageMismatch { page: String, profile: String },
    #[error("title {0:?} does not name a year under this profile")]
    NotAYearTitle(String),
}

/// Byte range of the events section body within the page text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

fn heading_level(line: &str) -> Option<(usize, &str)> {
    let t = line.trim();
    if t.len() < 3 || !t.starts_with('=') || !t.ends_with('=') {
        return None;
    }
    let lead = t.bytes().take_while(|&b| b == b'=').count();
    let trail = t.bytes().rev().take_while(|&b| b == b'=').count();
    if lead + trail >= t.len() {
        return None;
    }
    let level = lead.min(trail);
    Some((level, t[level..t.len() - level].trim()))
}

fn lines_with_offsets(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut offset = 0;
    text.split_inclusive('\n').map(move |l| {
        let start = offset;
        offset += l.len();
        (start, l.trim_end_matches(['\n', '\r']))
    })
}

/// Finds the events section: it starts after the first heading matching an
/// entry pattern and ends before the next heading matching an exit pattern,
/// or at the end of the text.
pub fn locate_event_section(wikitext: &str, profile: &LanguageProfile) -> Result<Span, ExtractError> {
    let mut start = None;
    for (off, line) in lines_with_offsets(wikitext) {
        if heading_level(line).is_none() {
            continue;
        }
        match start {
            None => {
                if profile.entry_patterns().iter().any(|re| re.is_match(line)) {
                    start = Some(off + line.len());
                }
            }
            Some(s) => {
                if profile.exit_patterns().iter().any(|re| re.is_match(line)) {
                    return Ok(trim_span(wikitext, s, off));
                }
            }
        }
    }
    match start {
        Some(s) => Ok(trim_span(wikitext, s, wikitext.len())),
        None => Err(ExtractError::SectionNotFound),
    }
}

fn trim_span(text: &str, mut start: usize, mut end: usize) -> Span {
    let b = text.as_bytes();
    while start < end && (b[start] == b'\n' || b[start] == b'\r') {
        start += 1;
    }
    while end > start && (b[end - 1] == b'\n' || b[end - 1] == b'\r') {
        end -= 1;
    }
    Span { start, end }
}

/// Heading context of a line inside the events section.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LineContext {
    pub category_path: Vec<String>,
    pub current_month: Option<u8>,
    /// Date of the enclosing top-level bullet, for nested `**` lines.
    pub parent_date: Option<HistoricalDate>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextLine {
    /// 1-based line number in the page.
    pub line_no: u32,
    pub text: String,
    pub context: LineContext,
}

#[derive(Debug, Default)]
pub struct Segmented {
    pub lines: Vec<ContextLine>,
    pub warnings: Vec<String>,
}

/// Pairs every non-heading, non-blank line of the section with the most
/// recent category headings and month heading. A heading clears every
/// heading at its own level or deeper.
pub fn segment_context(wikitext: &str, span: Span, profile: &LanguageProfile) -> Segmented {
    let base_line = wikitext[..span.start].matches('\n').count() as u32 + 1;
    let section = &wikitext[span.start..span.end];
    let mut categories: Vec<(usize, String)> = Vec::new();
    let mut month: Option<(usize, u8)> = None;
    let mut out = Segmented::default();

    for (i, (_, line)) in lines_with_offsets(section).enumerate() {
        let line_no = base_line + i as u32;
        if let Some((level, raw)) = heading_level(line) {
            let (text, _, _) = markup::describe(raw);
            categories.retain(|(l, _)| *l < level);
            if month.is_some_and(|(l, _)| l >= level) {
                month = None;
            }
            if let Some(m) = profile.month_number(&text) {
                month = Some((level, m));
            } else if !text.is_empty() {
                let key = match profile.canonical_category(&text) {
                    Some(k) => k.to_string(),
                    None => {
                        out.warnings.push(format!("line {line_no}: unknown heading {text:?} kept as category"));
                        text
                    }
                };
                categories.push((level, key));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        out.lines.push(ContextLine {
            line_no,
            text: line.to_string(),
            context: LineContext {
                category_path: categories.iter().map(|(_, c)| c.clone()).collect(),
                current_month: month.map(|(_, m)| m),
                parent_date: None,
            },
        });
    }
    out
}

/// Why a date field could not be decoded.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("undecodable date field {0:?}")]
pub struct DateParseError(pub String);

/// Decodes a date field (link brackets and markup allowed) with the
/// profile's date patterns. A day without a month takes the heading month.
pub fn parse_date_field(
    field: &str,
    profile: &LanguageProfile,
    year: i32,
    context_month: Option<u8>,
) -> Result<HistoricalDate, DateParseError> {
    let (cleaned, _, _) = markup::describe(field);
    let cleaned = cleaned.trim_matches(|c: char| c.is_whitespace() || c == ':' || c == ',');
    let err = || DateParseError(field.to_string());
    if cleaned.is_empty() {
        return Err(err());
    }
    for re in profile.date_patterns() {
        let Some(caps) = re.captures(cleaned) else { continue };
        let month_of = |name: &str| -> Result<Option<u8>, ()> {
            match caps.name(name) {
                Some(m) => profile.month_number(m.as_str()).map(Some).ok_or(()),
                None => Ok(None),
            }
        };
        let day_of = |name: &str| -> Result<Option<u8>, ()> {
            match caps.name(name) {
                Some(d) => d.as_str().parse::<u8>().map(Some).map_err(|_| ()),
                None => Ok(None),
            }
        };
        let (Ok(mut month), Ok(day), Ok(mut end_month), Ok(end_day)) =
            (month_of("month"), day_of("day"), month_of("end_month"), day_of("end_day"))
        else {
            continue;
        };
        if month.is_none() && day.is_some() {
            month = context_month;
        }
        if end_day.is_some() && end_month.is_none() {
            end_month = month;
        }
        if let Ok(d) = HistoricalDate::new(year, month, day, end_month, end_day) {
            return Ok(d);
        }
    }
    Err(err())
}

/// Byte offsets inside `[[...]]` or `{{...}}` groups.
fn protected_ranges(text: &str) -> Vec<(usize, usize)> {
    let mut ranges = Vec::new();
    let b = text.as_bytes();
    let mut depth = 0usize;
    let mut open = 0usize;
    let mut i = 0;
    while i + 1 < b.len() {
        let pair = &b[i..i + 2];
        if pair == b"[[" || pair == b"{{" {
            if depth == 0 {
                open = i;
            }
            depth += 1;
            i += 2;
        } else if (pair == b"]]" || pair == b"}}") && depth > 0 {
            depth -= 1;
            i += 2;
            if depth == 0 {
                ranges.push((open, i));
            }
        } else {
            i += 1;
        }
    }
    if depth > 0 {
        ranges.push((open, b.len()));
    }
    ranges
}

/// Candidate split points `(offset, separator length)`: separators in
/// profile priority order, each one's occurrences left to right, skipping
/// occurrences inside link or template brackets.
fn candidate_splits(body: &str, separators: &[String]) -> Vec<(usize, usize)> {
    let protected = protected_ranges(body);
    let inside = |p: usize| protected.iter().any(|&(s, e)| p >= s && p < e);
    let mut out = Vec::new();
    for sep in separators {
        for (p, _) in body.match_indices(sep.as_str()) {
            if p > 0 && !inside(p) {
                out.push((p, sep.len()));
            }
        }
    }
    out
}

/// Page-level facts every event of a page shares.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageInfo {
    pub lang: String,
    pub title: String,
    pub year: i32,
}

/// Result of splitting one bullet line, before the Event is built.
struct Decomposed<'a> {
    date: HistoricalDate,
    description: &'a str,
}

struct Rejected {
    reason: FailureReason,
    /// Date decoded before the failure, e.g. a date-only parent line.
    date: Option<HistoricalDate>,
}

impl Rejected {
    fn new(reason: FailureReason) -> Self {
        Rejected { reason, date: None }
    }
}

fn bullet_depth(line: &str) -> usize {
    line.bytes().take_while(|&b| b == b'*').count()
}

/// True when `text` opens with a date field followed by a separator, the
/// shape of the second half of a range.
fn starts_with_date(text: &str, profile: &LanguageProfile, parse: &dyn Fn(&str) -> Option<HistoricalDate>) -> bool {
    candidate_splits(text, profile.separators())
        .into_iter()
        .min_by_key(|&(pos, _)| pos)
        .is_some_and(|(pos, _)| parse(&text[..pos]).is_some())
}

fn decompose<'a>(
    body: &'a str,
    depth: usize,
    ctx: &LineContext,
    year: i32,
    profile: &LanguageProfile,
) -> Result<Decomposed<'a>, Rejected> {
    let parse = |field: &str| parse_date_field(field, profile, year, ctx.current_month).ok();
    let splits = candidate_splits(body, profile.separators());
    for &(pos, len) in &splits {
        if let Some(date) = parse(&body[..pos]) {
            let description = body[pos + len..].trim();
            if starts_with_date(description, profile, &parse) {
                // the range as a whole did not decode, e.g. it spans a year end
                return Err(Rejected::new(FailureReason::DateParse));
            }
            return Ok(Decomposed { date, description });
        }
    }
    if let Some(date) = parse(body) {
        // a bare date line heads nested events
        return Err(Rejected { reason: FailureReason::EmptyDescription, date: Some(date) });
    }
    if let Some(rest) = body.strip_prefix("[[") {
        if let Some(end) = rest.find("]]") {
            if parse(&body[..end + 4]).is_some() {
                // leading date link without a separator
                return Err(Rejected::new(FailureReason::DateParse));
            }
        }
    }
    if let Some(&(pos, _)) = splits.first() {
        if body[..pos].bytes().any(|b| b.is_ascii_digit()) {
            return Err(Rejected::new(FailureReason::DateParse));
        }
    }
    let inherited = match (depth > 1).then_some(ctx.parent_date).flatten() {
        Some(d) => Some(d),
        None => match ctx.current_month {
            Some(m) => HistoricalDate::new(year, Some(m), None, None, None).ok(),
            None if !ctx.category_path.is_empty() => HistoricalDate::year_only(year).ok(),
            None => None,
        },
    };
    match inherited {
        Some(date) => Ok(Decomposed { date, description: body.trim() }),
        None => Err(Rejected::new(FailureReason::DateParse)),
    }
}

fn build_event(
    line_no: u32,
    date: HistoricalDate,
    description: &str,
    ctx: &LineContext,
    page: &PageInfo,
    warnings: &mut Vec<String>,
) -> Result<Event, Rejected> {
    let description_wiki = description.trim().to_string();
    let (mut plain, links, w) = markup::describe(&description_wiki);
    warnings.extend(w.into_iter().map(|w| format!("line {line_no}: {w}")));
    if plain.contains("[[") || plain.contains("]]") {
        plain = plain.replace("[[", "").replace("]]", "");
        plain = plain.split_whitespace().collect::<Vec<_>>().join(" ");
    }
    if plain.is_empty() {
        return Err(Rejected { reason: FailureReason::EmptyDescription, date: Some(date) });
    }
    Ok(Event {
        id: event_id(&page.lang, &page.title, &description_wiki),
        lang: page.lang.clone(),
        date,
        granularity: date.granularity(),
        category_path: ctx.category_path.clone(),
        description_wiki,
        description_plain: plain,
        links,
        image: None,
        source_title: page.title.clone(),
        line_no,
    })
}

fn process_line(
    line: &str,
    line_no: u32,
    ctx: &LineContext,
    page: &PageInfo,
    profile: &LanguageProfile,
    warnings: &mut Vec<String>,
) -> Result<Event, Rejected> {
    if !profile.line_patterns().iter().any(|re| re.is_match(line)) {
        return Err(Rejected::new(FailureReason::UnrecognizedStructure));
    }
    let depth = bullet_depth(line);
    let body = markup::remove_refs_and_comments(&line[depth..]);
    let body = body.trim();
    if body.is_empty() {
        return Err(Rejected::new(FailureReason::EmptyDescription));
    }
    let d = decompose(body, depth, ctx, page.year, profile)?;
    build_event(line_no, d.date, d.description, ctx, page, warnings)
}

/// Decomposes one bullet line into an event. The returned event has no image.
pub fn parse_event_line(
    line: &str,
    line_no: u32,
    ctx: &LineContext,
    page: &PageInfo,
    profile: &LanguageProfile,
) -> Result<Event, FailureReason> {
    let mut warnings = Vec::new();
    process_line(line, line_no, ctx, page, profile, &mut warnings).map_err(|r| r.reason)
}

/// Extracts all events of a page and accounts for every candidate line.
pub fn extract_page(page: &RawPage, profile: &LanguageProfile) -> Result<(Vec<Event>, ExtractionReport), ExtractError> {
    if page.lang != profile.lang() {
        return Err(ExtractError::LanguageMismatch {
            page: page.lang.clone(),
            profile: profile.lang().to_string(),
        });
    }
    let year = profile
        .parse_year_title(&page.title)
        .ok_or_else(|| ExtractError::NotAYearTitle(page.title.clone()))?;
    let info = PageInfo { lang: page.lang.clone(), title: page.title.clone(), year };
    Ok(extract_text(&page.wikitext, &info, profile))
}

/// [`extract_page`] over raw text with known page facts.
pub fn extract_text(wikitext: &str, page: &PageInfo, profile: &LanguageProfile) -> (Vec<Event>, ExtractionReport) {
    let mut report = ExtractionReport::new(page);
    let mut events = Vec::new();
    let span = match locate_event_section(wikitext, profile) {
        Ok(s) => s,
        Err(e) => {
            report.warnings.push(e.to_string());
            report.finish();
            return (events, report);
        }
    };
    let seg = segment_context(wikitext, span, profile);
    report.warnings.extend(seg.warnings);

    let mut parent: Option<HistoricalDate> = None;
    for cl in seg.lines {
        if !cl.text.starts_with('*') {
            continue;
        }
        let depth = bullet_depth(&cl.text);
        let mut ctx = cl.context;
        ctx.parent_date = parent;
        let mut warnings = Vec::new();
        let outcome = catch_unwind(AssertUnwindSafe(|| {
            process_line(&cl.text, cl.line_no, &ctx, page, profile, &mut warnings)
        }))
        .unwrap_or_else(|_| Err(Rejected::new(FailureReason::Internal)));
        report.warnings.append(&mut warnings);
        let line_date = match &outcome {
            Ok(ev) => Some(ev.date),
            Err(r) => r.date,
        };
        if depth <= 1 {
            parent = line_date;
        }
        match outcome {
            Ok(ev) => {
                report.extracted_count += 1;
                events.push(ev);
            }
            Err(r) => report.failures.push(LineFailure {
                line_no: cl.line_no,
                raw_line: cl.text,
                reason: r.reason,
            }),
        }
    }
    report.finish();
    (events, report)
}
