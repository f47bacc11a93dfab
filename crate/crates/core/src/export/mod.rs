//! Event serialization: XML, JSON and N3 in the LODE event model.

mod json;
mod mapping;
mod n3;
mod xml;

use std::fmt;
use std::str::FromStr;

pub use json::{event_value, from_json, to_json};
pub use mapping::{dbpedia_uri, LodeMapping, Predicates};
pub use n3::{to_n3, xsd_literal};
pub use xml::to_xml;

use crate::extract::Event;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExportOptions {
    /// Include each event's link list.
    pub links: bool,
    /// Include the description as HTML with links to Wikipedia.
    pub html: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Xml,
    Json,
    N3,
}

impl Format {
    pub fn content_type(self) -> &'static str {
        match self {
            Format::Xml => "application/xml; charset=utf-8",
            Format::Json => "application/json; charset=utf-8",
            Format::N3 => "text/n3; charset=utf-8",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Format::Xml => "xml",
            Format::Json => "json",
            Format::N3 => "n3",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown format {0:?} (expected xml, json or n3)")]
pub struct UnknownFormat(pub String);

impl FromStr for Format {
    type Err = UnknownFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "xml" => Ok(Format::Xml),
            "json" => Ok(Format::Json),
            "n3" | "rdf" | "turtle" | "ttl" => Ok(Format::N3),
            _ => Err(UnknownFormat(s.to_string())),
        }
    }
}

/// Renders events in the given format. Events are written in the order
/// given; the store and the service hand them over in canonical order.
pub fn render(events: &[Event], format: Format, opts: ExportOptions, mapping: &LodeMapping) -> String {
    match format {
        Format::Xml => to_xml(events, opts),
        Format::Json => to_json(events, opts),
        Format::N3 => to_n3(events, mapping),
    }
}
