use std::fmt::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{DesignMinute, MinuteEntry};
use crate::canonical;
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MinuteFormat {
    Json,
    Html,
}

impl FromStr for MinuteFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(MinuteFormat::Json),
            "html" => Ok(MinuteFormat::Html),
            other => Err(format!("unknown minute format `{other}` (expected json or html)")),
        }
    }
}

pub fn render_minute(minute: &DesignMinute, format: MinuteFormat) -> Vec<u8> {
    match format {
        MinuteFormat::Json => canonical::to_vec(minute).expect("minutes always serialize"),
        MinuteFormat::Html => render_html(minute).into_bytes(),
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn vec(v: Vec3) -> String {
    format!("({:?}, {:?}, {:?})", v.x, v.y, v.z)
}

const STYLE: &str = "body{font-family:sans-serif;max-width:60em;margin:2em auto;color:#222}\
section{margin-top:2em}h2{border-bottom:1px solid #999}\
article{border-left:4px solid #ccc;padding-left:1em;margin:1em 0}\
.meta,.anchor,.viewpoint{color:#555;font-size:90%}.empty{color:#888;font-style:italic}";

fn render_html(minute: &DesignMinute) -> String {
    let mut out = String::new();
    out.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    let _ = writeln!(out, "<title>Design minute {}</title>", minute.id);
    let _ = writeln!(out, "<style>{STYLE}</style>\n</head>\n<body>");
    out.push_str("<h1>Design minute</h1>\n<dl class=\"header\">\n");
    let _ = writeln!(out, "<dt>Minute</dt><dd>{}</dd>", minute.id);
    let _ = writeln!(
        out,
        "<dt>Document</dt><dd>{} (revision {})</dd>",
        minute.document, minute.revision
    );
    if let Some(session) = minute.session {
        let _ = writeln!(out, "<dt>Session</dt><dd>{session}</dd>");
    }
    let _ = writeln!(
        out,
        "<dt>Generated</dt><dd>{}</dd>\n</dl>",
        minute.generated_at.to_rfc3339()
    );

    for section in &minute.sections {
        let kind = section.kind.as_str();
        let _ = writeln!(out, "<section class=\"force-{}\">", kind.to_ascii_lowercase());
        let _ = writeln!(out, "<h2>{kind}</h2>");
        if section.entries.is_empty() {
            out.push_str("<p class=\"empty\">No entries.</p>\n");
        }
        for entry in &section.entries {
            render_entry(&mut out, entry);
        }
        out.push_str("</section>\n");
    }
    out.push_str("</body>\n</html>\n");
    out
}

fn render_entry(out: &mut String, entry: &MinuteEntry) {
    let a = &entry.annotation;
    let _ = writeln!(out, "<article id=\"annotation-{}\">", a.id);
    let _ = writeln!(out, "<p class=\"utterance\">{}</p>", escape(&a.utterance.text));
    let mut force = a.force.kind.as_str().to_owned();
    if let Some(c) = a.force.clarification_kind {
        let _ = write!(force, " of a {c:?}");
    }
    if let Some(p) = a.force.polarity {
        let _ = write!(force, " ({p:?})");
    }
    let _ = writeln!(
        out,
        "<p class=\"meta\">{} &middot; {:?} &middot; {:?} &middot; by {}</p>",
        escape(&force),
        a.utterance.content_kind,
        a.status,
        escape(a.author.as_str())
    );
    let _ = writeln!(
        out,
        "<p class=\"anchor\">Anchor: face {}, barycentric ({:?}, {:?}, {:?}), offset {:?}</p>",
        a.anchor.face, a.anchor.bary[0], a.anchor.bary[1], a.anchor.bary[2], a.anchor.normal_offset
    );
    let cam = entry.viewpoint;
    let _ = writeln!(
        out,
        "<p class=\"viewpoint\">Viewpoint: position {}, target {}, up {}</p>",
        vec(cam.position),
        vec(cam.target),
        vec(cam.up)
    );
    if !entry.thread.is_empty() {
        out.push_str("<ol class=\"thread\">\n");
        for reply in &entry.thread {
            let _ = writeln!(
                out,
                "<li><b>{}</b> <time>{}</time> {}</li>",
                escape(reply.author.as_str()),
                reply.at.to_rfc3339(),
                escape(&reply.text)
            );
        }
        out.push_str("</ol>\n");
    }
    out.push_str("</article>\n");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::act::ForceKind;
    use crate::ids::{derived_uuid, DocumentId, MinuteId};
    use crate::minute::{MinuteSection, SECTION_ORDER};
    use chrono::{DateTime, Utc};

    fn empty_minute() -> DesignMinute {
        DesignMinute {
            id: MinuteId(derived_uuid("m", b"")),
            session: None,
            document: DocumentId(derived_uuid("d", b"")),
            revision: 1,
            generated_at: DateTime::<Utc>::UNIX_EPOCH,
            sections: SECTION_ORDER
                .iter()
                .map(|&kind| MinuteSection { kind, entries: vec![] })
                .collect(),
        }
    }

    #[test]
    fn empty_minute_has_four_empty_sections() {
        let html = String::from_utf8(render_minute(&empty_minute(), MinuteFormat::Html)).unwrap();
        for kind in ForceKind::ALL {
            assert!(html.contains(&format!("<h2>{kind}</h2>")));
        }
        assert_eq!(html.matches("No entries.").count(), 4);
        assert!(!html.contains("http"), "no external resources");
        let validation = html.find("<h2>Validation</h2>").unwrap();
        let clarification = html.find("<h2>Clarification</h2>").unwrap();
        assert!(validation < clarification);
    }

    #[test]
    fn escaping() {
        assert_eq!(
            escape("<a href='x'>&\"</a>"),
            "&lt;a href=&#39;x&#39;&gt;&amp;&quot;&lt;/a&gt;"
        );
    }

    #[test]
    fn json_is_canonical() {
        let m = empty_minute();
        let bytes = render_minute(&m, MinuteFormat::Json);
        let back: DesignMinute = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(render_minute(&back, MinuteFormat::Json), bytes);
    }
}
