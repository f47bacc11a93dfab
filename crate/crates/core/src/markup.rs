//! Wiki markup handling: link extraction, markup stripping and HTML rendering
//! of event descriptions.

use percent_encoding::{utf8_percent_encode, AsciiSet, CONTROLS};
use serde::{Deserialize, Serialize};

/// Deepest template nesting that is tracked; anything nested deeper is
/// dropped together with its enclosing template and reported.
pub const MAX_TEMPLATE_DEPTH: usize = 4;

/// A link to a Wikipedia article: `[[target]]` or `[[target|anchor]]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WikiLink {
    pub target: String,
    pub anchor: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinkExtraction {
    /// Input with every well-formed link replaced by its anchor text.
    pub plain: String,
    pub links: Vec<WikiLink>,
    pub warnings: Vec<String>,
}

/// Characters percent-encoded in article-title path segments.
const TITLE_ENCODE: &AsciiSet = &CONTROLS
    .add(b' ')
    .add(b'"')
    .add(b'#')
    .add(b'%')
    .add(b'<')
    .add(b'>')
    .add(b'?')
    .add(b'[')
    .add(b'\\')
    .add(b']')
    .add(b'^')
    .add(b'`')
    .add(b'{')
    .add(b'|')
    .add(b'}');

/// Encodes an article title as a URL path segment: spaces become
/// underscores, reserved and non-ASCII characters are percent-encoded.
pub fn title_to_path(title: &str) -> String {
    let underscored = title.trim().replace(' ', "_");
    utf8_percent_encode(&underscored, TITLE_ENCODE).to_string()
}

pub fn wikipedia_url(lang: &str, title: &str) -> String {
    format!("https://{lang}.wikipedia.org/wiki/{}", title_to_path(title))
}

fn normalize_target(raw: &str) -> String {
    let t = raw.split('#').next().unwrap_or("");
    let t = t.trim().trim_start_matches(':').replace('_', " ");
    t.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// One scanned link group: byte range in the input plus the parsed link.
struct LinkGroup {
    start: usize,
    end: usize,
    raw_anchor: String,
    link: Option<WikiLink>,
}

/// Finds `[[...]]` groups. A group is well-formed when it closes before any
/// newline or nested `[[`. Groups with an empty target (e.g. `[[#Section]]`)
/// keep their anchor text but yield no link.
fn scan_links(markup: &str, warnings: &mut Vec<String>) -> Vec<LinkGroup> {
    let mut out = Vec::new();
    let mut i = 0;
    while let Some(off) = markup[i..].find("[[") {
        let start = i + off;
        let body_start = start + 2;
        let rest = &markup[body_start..];
        let close = rest.find("]]");
        let reopen = rest.find("[[");
        let newline = rest.find('\n');
        match close {
            Some(c) if reopen.is_none_or(|r| r > c) && newline.is_none_or(|n| n > c) => {
                let inner = &rest[..c];
                let (target_raw, anchor_raw) = match inner.split_once('|') {
                    Some((t, a)) => (t, a.trim()),
                    None => (inner, inner.trim()),
                };
                let target = normalize_target(target_raw);
                let anchor_raw = if anchor_raw.is_empty() { target_raw.trim() } else { anchor_raw };
                let link = (!target.is_empty()).then(|| WikiLink {
                    target,
                    anchor: strip_markup(anchor_raw),
                });
                out.push(LinkGroup {
                    start,
                    end: body_start + c + 2,
                    raw_anchor: anchor_raw.to_string(),
                    link,
                });
                i = body_start + c + 2;
            }
            _ => {
                warnings.push(format!("unbalanced link brackets at byte {start}"));
                i = body_start;
            }
        }
    }
    out
}

/// Replaces `[[T]]` and `[[T|A]]` with their anchors and collects the links
/// in order of appearance. Other markup is left untouched; unbalanced
/// brackets stay literal and produce a warning.
pub fn extract_links(markup: &str) -> LinkExtraction {
    let mut warnings = Vec::new();
    let groups = scan_links(markup, &mut warnings);
    let mut plain = String::with_capacity(markup.len());
    let mut links = Vec::with_capacity(groups.len());
    let mut last = 0;
    for g in groups {
        plain.push_str(&markup[last..g.start]);
        plain.push_str(&g.raw_anchor);
        last = g.end;
        if let Some(l) = g.link {
            links.push(l);
        }
    }
    plain.push_str(&markup[last..]);
    LinkExtraction { plain, links, warnings }
}

/// Removes `<!-- -->` comments and `<ref>` elements (both forms). These are
/// never part of an event's visible description.
pub fn remove_refs_and_comments(markup: &str) -> String {
    let mut s = remove_delimited(markup, "<!--", "-->");
    s = remove_refs(&s);
    s
}

fn remove_delimited(text: &str, open: &str, close: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(p) = rest.find(open) {
        out.push_str(&rest[..p]);
        match rest[p + open.len()..].find(close) {
            Some(q) => rest = &rest[p + open.len() + q + close.len()..],
            None => return out,
        }
    }
    out.push_str(rest);
    out
}

fn find_ci(hay: &str, needle: &str) -> Option<usize> {
    let lower = hay.to_ascii_lowercase();
    lower.find(needle)
}

fn remove_refs(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    loop {
        let Some(p) = find_ci(rest, "<ref") else {
            out.push_str(rest);
            return out;
        };
        // "<references/>" and similar are not ref elements
        let after = rest[p + 4..].chars().next();
        if !matches!(after, Some('>') | Some(' ') | Some('/') | Some('\t')) {
            out.push_str(&rest[..p + 4]);
            rest = &rest[p + 4..];
            continue;
        }
        out.push_str(&rest[..p]);
        let Some(gt) = rest[p..].find('>') else { return out };
        let tag = &rest[p..p + gt + 1];
        if tag.ends_with("/>") {
            rest = &rest[p + gt + 1..];
            continue;
        }
        let body = &rest[p + gt + 1..];
        match find_ci(body, "</ref") {
            Some(q) => {
                let tail = &body[q..];
                let close = tail.find('>').map_or(tail.len(), |c| c + 1);
                rest = &tail[close..];
            }
            None => return out,
        }
    }
}

/// Drops `{{...}}` templates, tracking nesting up to [`MAX_TEMPLATE_DEPTH`].
fn remove_templates(text: &str, warnings: &mut Vec<String>) -> String {
    let mut out = String::with_capacity(text.len());
    let mut depth = 0usize;
    let mut too_deep = false;
    let mut i = 0;
    let bytes = text.as_bytes();
    while i < bytes.len() {
        if bytes[i..].starts_with(b"{{") {
            depth += 1;
            if depth > MAX_TEMPLATE_DEPTH && !too_deep {
                too_deep = true;
                warnings.push(format!("template nesting deeper than {MAX_TEMPLATE_DEPTH} dropped"));
            }
            i += 2;
            continue;
        }
        if depth > 0 && bytes[i..].starts_with(b"}}") {
            depth -= 1;
            if depth == 0 {
                too_deep = false;
            }
            i += 2;
            continue;
        }
        if depth == 0 {
            let ch = text[i..].chars().next().unwrap();
            out.push(ch);
            i += ch.len_utf8();
        } else {
            i += 1;
        }
    }
    if depth > 0 {
        warnings.push("unclosed template dropped".into());
    }
    out
}

/// Removes remaining HTML tags, keeping their text content.
fn remove_tags(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(p) = rest.find('<') {
        out.push_str(&rest[..p]);
        let tail = &rest[p + 1..];
        let looks_like_tag = tail
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '/');
        match (looks_like_tag, tail.find('>')) {
            (true, Some(q)) => {
                let name = tail[..q].trim_start_matches('/').to_ascii_lowercase();
                if name.starts_with("br") {
                    out.push(' ');
                }
                rest = &tail[q + 1..];
            }
            _ => {
                out.push('<');
                rest = tail;
            }
        }
    }
    out.push_str(rest);
    out
}

/// `[http://example.org label]` becomes `label`; a bare bracketed URL is dropped.
fn replace_external_links(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(p) = rest.find('[') {
        let tail = &rest[p + 1..];
        let is_ext = tail.starts_with("http://") || tail.starts_with("https://") || tail.starts_with("//");
        match (is_ext, tail.find(']')) {
            (true, Some(q)) => {
                out.push_str(&rest[..p]);
                if let Some((_, label)) = tail[..q].split_once(' ') {
                    out.push_str(label.trim());
                }
                rest = &tail[q + 1..];
            }
            _ => {
                out.push_str(&rest[..=p]);
                rest = tail;
            }
        }
    }
    out.push_str(rest);
    out
}

fn remove_quote_runs(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut run = 0;
    for c in text.chars() {
        if c == '\'' {
            run += 1;
            continue;
        }
        if run == 1 {
            out.push('\'');
        }
        run = 0;
        out.push(c);
    }
    if run == 1 {
        out.push('\'');
    }
    out
}

fn decode_entities(text: &str) -> String {
    if !text.contains('&') {
        return text.to_string();
    }
    text.replace("&nbsp;", " ")
        .replace("&thinsp;", " ")
        .replace("&ndash;", "–")
        .replace("&mdash;", "—")
        .replace("&minus;", "−")
        .replace("&quot;", "\"")
        .replace("&amp;", "&")
}

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Markup-free rendering: removes bold/italic quotes, `<ref>` elements,
/// comments, templates and other HTML tags, then collapses whitespace.
/// Link syntax is not touched here; see [`extract_links`].
pub fn strip_markup(markup: &str) -> String {
    strip_markup_with_warnings(markup).0
}

pub fn strip_markup_with_warnings(markup: &str) -> (String, Vec<String>) {
    let mut warnings = Vec::new();
    let s = remove_refs_and_comments(markup);
    let s = remove_templates(&s, &mut warnings);
    let s = remove_tags(&s);
    let s = replace_external_links(&s);
    let s = remove_quote_runs(&s);
    let s = decode_entities(&s);
    (collapse_whitespace(&s), warnings)
}

/// Plain text and links of a description, as stored on an event.
pub fn describe(markup: &str) -> (String, Vec<WikiLink>, Vec<String>) {
    let ex = extract_links(markup);
    let (plain, mut warnings) = strip_markup_with_warnings(&ex.plain);
    let mut all = ex.warnings;
    all.append(&mut warnings);
    (plain, ex.links, all)
}

const LINK_OPEN: char = '\u{E000}';
const LINK_MID: char = '\u{E002}';
const LINK_CLOSE: char = '\u{E001}';

fn escape_html(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
}

/// Renders a description as HTML text with links to the given language's
/// Wikipedia. Text outside links is the same as the stored plain text.
pub fn render_html(markup: &str, lang: &str) -> String {
    let mut warnings = Vec::new();
    let groups = scan_links(markup, &mut warnings);
    let mut marked = String::with_capacity(markup.len() + groups.len() * 8);
    let mut targets = Vec::new();
    let mut last = 0;
    for g in groups {
        marked.push_str(&markup[last..g.start]);
        last = g.end;
        match g.link {
            Some(l) => {
                marked.push(LINK_OPEN);
                marked.push_str(&targets.len().to_string());
                marked.push(LINK_MID);
                marked.push_str(&g.raw_anchor);
                marked.push(LINK_CLOSE);
                targets.push(l.target);
            }
            None => marked.push_str(&g.raw_anchor),
        }
    }
    marked.push_str(&markup[last..]);
    let stripped = strip_markup(&marked);

    let mut html = String::with_capacity(stripped.len() * 2);
    let mut rest = stripped.as_str();
    while let Some(p) = rest.find(LINK_OPEN) {
        escape_html(&rest[..p], &mut html);
        let tail = &rest[p + LINK_OPEN.len_utf8()..];
        let (Some(mid), Some(close)) = (tail.find(LINK_MID), tail.find(LINK_CLOSE)) else {
            rest = tail;
            continue;
        };
        let idx: usize = tail[..mid].parse().unwrap_or(usize::MAX);
        let anchor = &tail[mid + LINK_MID.len_utf8()..close];
        match targets.get(idx) {
            Some(target) => {
                html.push_str("<a href=\"");
                escape_html(&wikipedia_url(lang, target), &mut html);
                html.push_str("\">");
                escape_html(anchor, &mut html);
                html.push_str("</a>");
            }
            None => escape_html(anchor, &mut html),
        }
        rest = &tail[close + LINK_CLOSE.len_utf8()..];
    }
    escape_html(rest, &mut html);
    html
}
