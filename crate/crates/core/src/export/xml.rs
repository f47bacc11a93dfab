use std::fmt::Write;

use super::ExportOptions;
use crate::extract::Event;
use crate::markup::render_html;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c if (c as u32) < 0x20 && !matches!(c, '\t' | '\n' | '\r') => {}
            c => out.push(c),
        }
    }
    out
}

/// Renders events as
///
/// ```text
/// <result count="N">
///   <event id lang source line>
///     <date granularity="day|month|year">2010-01-04[/2010-01-08]</date>
///     <categories><category>..</category>*</categories>
///     <description>plain</description>
///     <description_wiki>markup</description_wiki>
///     <description_html>escaped HTML</description_html>   (html only)
///     <links><link target="..">anchor</link>*</links>      (links only)
///     <image file=".." width="150">url</image>             (if any)
///   </event>*
/// </result>
/// ```
pub fn to_xml(events: &[Event], opts: ExportOptions) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(out, "<result count=\"{}\">", events.len());
    for ev in events {
        let _ = writeln!(
            out,
            "  <event id=\"{}\" lang=\"{}\" source=\"{}\" line=\"{}\">",
            escape(&ev.id),
            escape(&ev.lang),
            escape(&ev.source_title),
            ev.line_no
        );
        let _ = writeln!(
            out,
            "    <date granularity=\"{}\">{}</date>",
            ev.granularity.as_str(),
            ev.date.to_lexical()
        );
        if ev.category_path.is_empty() {
            out.push_str("    <categories/>\n");
        } else {
            out.push_str("    <categories>");
            for c in &ev.category_path {
                let _ = write!(out, "<category>{}</category>", escape(c));
            }
            out.push_str("</categories>\n");
        }
        let _ = writeln!(out, "    <description>{}</description>", escape(&ev.description_plain));
        let _ = writeln!(out, "    <description_wiki>{}</description_wiki>", escape(&ev.description_wiki));
        if opts.html {
            let html = render_html(&ev.description_wiki, &ev.lang);
            let _ = writeln!(out, "    <description_html>{}</description_html>", escape(&html));
        }
        if opts.links {
            if ev.links.is_empty() {
                out.push_str("    <links/>\n");
            } else {
                out.push_str("    <links>\n");
                for l in &ev.links {
                    let _ = writeln!(out, "      <link target=\"{}\">{}</link>", escape(&l.target), escape(&l.anchor));
                }
                out.push_str("    </links>\n");
            }
        }
        if let Some(img) = &ev.image {
            let _ = writeln!(
                out,
                "    <image file=\"{}\" width=\"{}\">{}</image>",
                escape(&img.file_title),
                img.width_px,
                escape(&img.thumb_url)
            );
        }
        out.push_str("  </event>\n");
    }
    out.push_str("</result>\n");
    out
}
