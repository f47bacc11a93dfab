use std::fmt::Write;

use super::mapping::{dbpedia_uri, LodeMapping};
use crate::date::{Granularity, HistoricalDate};
use crate::extract::Event;

const XSD: &str = "http://www.w3.org/2001/XMLSchema#";

/// XSD 1.1 year lexical form: 1 BCE is year 0000, 44 BCE is -0043.
fn xsd_year(year: i32) -> String {
    let astronomical = if year < 0 { year + 1 } else { year };
    if astronomical < 0 {
        format!("-{:04}", -astronomical)
    } else {
        format!("{astronomical:04}")
    }
}

/// Typed literal value and XSD datatype of the date's start.
pub fn xsd_literal(date: &HistoricalDate) -> (String, &'static str) {
    let y = xsd_year(date.year());
    match (date.granularity(), date.month(), date.day()) {
        (Granularity::Day, Some(m), Some(d)) => (format!("{y}-{m:02}-{d:02}"), "date"),
        (Granularity::Month, Some(m), _) => (format!("{y}-{m:02}"), "gYearMonth"),
        _ => (y, "gYear"),
    }
}

fn escape_literal(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04X}", c as u32);
            }
            c => out.push(c),
        }
    }
}

/// `<iri>` with characters that IRIREF forbids percent-encoded.
fn iri(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('<');
    for c in s.chars() {
        if (c as u32) <= 0x20 || "<>\"{}|^`\\".contains(c) {
            let _ = write!(out, "%{:02X}", c as u32);
        } else {
            out.push(c);
        }
    }
    out.push('>');
    out
}

fn is_local_name(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Prefixed name when a declared prefix covers the IRI, else `<iri>`.
fn term(full: &str, mapping: &LodeMapping) -> String {
    for (prefix, ns) in &mapping.prefixes {
        if let Some(local) = full.strip_prefix(ns.as_str()) {
            if is_local_name(local) {
                return format!("{prefix}:{local}");
            }
        }
    }
    iri(full)
}

/// Renders events as N3 (Turtle subset) in the LODE event model. Events are
/// written in the given order; callers pass canonical order.
pub fn to_n3(events: &[Event], mapping: &LodeMapping) -> String {
    let mut out = String::new();
    for (prefix, ns) in &mapping.prefixes {
        let _ = writeln!(out, "@prefix {prefix}: {} .", iri(ns));
    }
    let p = &mapping.predicates;
    let (class, desc, at_time, involved, depiction) = (
        term(&p.event_class, mapping),
        term(&p.description, mapping),
        term(&p.at_time, mapping),
        term(&p.involved, mapping),
        term(&p.depiction, mapping),
    );
    for ev in events {
        out.push('\n');
        let _ = writeln!(out, "{} a {class} ;", iri(&mapping.event_uri(&ev.id)));
        out.push_str("    ");
        out.push_str(&desc);
        out.push_str(" \"");
        escape_literal(&ev.description_plain, &mut out);
        let _ = writeln!(out, "\"@{} ;", ev.lang);
        let (value, dt) = xsd_literal(&ev.date);
        let _ = write!(out, "    {at_time} \"{value}\"^^{}", term(&format!("{XSD}{dt}"), mapping));
        for link in &ev.links {
            let _ = write!(out, " ;\n    {involved} {}", iri(&dbpedia_uri(link, &ev.lang, mapping)));
        }
        if let Some(img) = &ev.image {
            let _ = write!(out, " ;\n    {depiction} {}", iri(&img.thumb_url));
        }
        out.push_str(" .\n");
    }
    out
}
