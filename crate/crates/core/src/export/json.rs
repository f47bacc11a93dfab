use serde_json::{json, Map, Value};

use super::ExportOptions;
use crate::extract::Event;
use crate::markup::render_html;

/// One event as a JSON object: the serialized [`Event`] with `links` dropped
/// unless requested and `description_html` added when asked for.
pub fn event_value(ev: &Event, opts: ExportOptions) -> Value {
    let mut v = serde_json::to_value(ev).expect("events serialize");
    if let Value::Object(map) = &mut v {
        if !opts.links {
            map.remove("links");
        }
        if opts.html {
            map.insert("description_html".into(), Value::String(render_html(&ev.description_wiki, &ev.lang)));
        }
    }
    v
}

/// `{"count": n, "events": [...]}`.
pub fn to_json(events: &[Event], opts: ExportOptions) -> String {
    let doc = json!({
        "count": events.len(),
        "events": events.iter().map(|e| event_value(e, opts)).collect::<Vec<_>>(),
    });
    let mut out = serde_json::to_string_pretty(&doc).expect("json serializes");
    out.push('\n');
    out
}

/// Reads events back from a document written with `links` enabled.
pub fn from_json(doc: &str) -> Result<Vec<Event>, serde_json::Error> {
    let v: Map<String, Value> = serde_json::from_str(doc)?;
    let events = v.get("events").cloned().unwrap_or(Value::Array(Vec::new()));
    serde_json::from_value(events)
}
