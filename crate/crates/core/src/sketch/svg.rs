//! Canonical SVG form of a [`SketchDocument`].
//!
//! ```xml
//! <svg xmlns=".." xmlns:xlink=".." xmlns:sl="urn:sketchlink:1"
//!      id="1<uuid>" width="W" height="H" viewBox="0 0 W H">
//!   <metadata>
//!     <sl:sketch created=".." modified="..">
//!       <sl:annotation>..</sl:annotation>
//!       <sl:author>..</sl:author>
//!       <sl:marker ref="2<uuid>">..</sl:marker>
//!     </sl:sketch>
//!   </metadata>
//!   <image x="0" y="0" width="W" height="H" href=".." xlink:href=".." sl:mime=".."/>
//!   <rect id="2<uuid>" x=".." y=".." width=".." height=".." .../>
//! </svg>
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;

use chrono::{DateTime, SecondsFormat, Utc};
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{ImageFormat, ImageRef, Marker, Rect, SketchDocument, SketchError};
use crate::anchor::{AnchorId, AnchorKind};

pub const SKETCHLINK_NS: &str = "urn:sketchlink:1";
const SVG_NS: &str = "http://www.w3.org/2000/svg";
const XLINK_NS: &str = "http://www.w3.org/1999/xlink";

const MARKER_STYLE: &str =
    r##"fill="#ffd54f" fill-opacity="0.3" stroke="#f57f17" stroke-width="2" vector-effect="non-scaling-stroke""##;

fn timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

/// Escapes markup characters plus carriage returns, which XML parsers
/// would otherwise normalize away.
fn escape(s: &str) -> String {
    quick_xml::escape::escape(s).replace('\r', "&#13;")
}

pub fn serialize_sketch_svg(doc: &SketchDocument) -> Vec<u8> {
    let (w, h) = (doc.width, doc.height);
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"{SVG_NS}\" xmlns:xlink=\"{XLINK_NS}\" xmlns:sl=\"{SKETCHLINK_NS}\" id=\"{}\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">",
        doc.anchor
    );
    out.push_str("  <metadata>\n");
    let _ = writeln!(
        out,
        "    <sl:sketch created=\"{}\" modified=\"{}\">",
        timestamp(&doc.created),
        timestamp(&doc.modified)
    );
    let _ = writeln!(out, "      <sl:annotation>{}</sl:annotation>", escape(&doc.annotation));
    for author in &doc.authors {
        let _ = writeln!(out, "      <sl:author>{}</sl:author>", escape(author));
    }
    for m in &doc.markers {
        let _ = writeln!(out, "      <sl:marker ref=\"{}\">{}</sl:marker>", m.anchor, escape(&m.annotation));
    }
    out.push_str("    </sl:sketch>\n");
    out.push_str("  </metadata>\n");
    let href = escape(&doc.image.href);
    let _ = writeln!(
        out,
        "  <image x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" href=\"{href}\" xlink:href=\"{href}\" sl:mime=\"{}\"/>",
        doc.image.format.mime()
    );
    for m in &doc.markers {
        let r = m.rect;
        let _ = writeln!(
            out,
            "  <rect id=\"{}\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" {MARKER_STYLE}/>",
            m.anchor, r.x, r.y, r.width, r.height
        );
    }
    out.push_str("</svg>\n");
    out.into_bytes()
}

fn malformed(msg: impl Into<String>) -> SketchError {
    SketchError::MalformedSvg(msg.into())
}

fn attributes(e: &BytesStart<'_>) -> Result<HashMap<String, String>, SketchError> {
    let mut map = HashMap::new();
    for attr in e.attributes() {
        let attr = attr.map_err(|err| malformed(err.to_string()))?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let value = attr.unescape_value().map_err(|err| malformed(err.to_string()))?;
        map.insert(key, value.into_owned());
    }
    Ok(map)
}

fn local(qname: &str) -> &str {
    qname.rsplit(':').next().unwrap_or(qname)
}

/// Looks an attribute up by local name, preferring an unprefixed key.
fn attr<'m>(map: &'m HashMap<String, String>, name: &str) -> Option<&'m String> {
    map.get(name).or_else(|| map.iter().find(|(k, _)| local(k) == name).map(|(_, v)| v))
}

fn number(map: &HashMap<String, String>, name: &str) -> Result<i64, SketchError> {
    let raw = attr(map, name).ok_or_else(|| malformed(format!("missing `{name}`")))?;
    let value: f64 = raw
        .trim()
        .trim_end_matches("px")
        .parse()
        .map_err(|_| malformed(format!("bad `{name}` value `{raw}`")))?;
    if !value.is_finite() {
        return Err(malformed(format!("bad `{name}` value `{raw}`")));
    }
    Ok(value.round() as i64)
}

fn parse_time(raw: Option<&String>, what: &str) -> Result<DateTime<Utc>, SketchError> {
    let raw = raw.ok_or_else(|| malformed(format!("missing {what} timestamp")))?;
    DateTime::parse_from_rfc3339(raw)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|_| malformed(format!("bad {what} timestamp `{raw}`")))
}

#[derive(Debug)]
enum TextTarget {
    Annotation,
    Author,
    Marker(AnchorId),
}

/// Parses an SVG produced by [`serialize_sketch_svg`]. Unknown elements are
/// ignored, as are `rect`s whose id is not an anchor.
pub fn parse_sketch_svg(bytes: &[u8]) -> Result<SketchDocument, SketchError> {
    let mut reader = Reader::from_reader(bytes);
    reader.config_mut().trim_text(false);
    let mut buf = Vec::new();

    let mut depth = 0usize;
    let mut root: Option<(AnchorId, u32, u32)> = None;
    let mut metadata_depth: Option<usize> = None;
    let mut image: Option<ImageRef> = None;
    let mut rects: Vec<(AnchorId, Rect)> = Vec::new();
    let mut annotation = String::new();
    let mut authors = Vec::new();
    let mut marker_notes: HashMap<AnchorId, String> = HashMap::new();
    let mut times: Option<(DateTime<Utc>, DateTime<Utc>)> = None;
    let mut target: Option<(TextTarget, usize)> = None;
    let mut text = String::new();

    loop {
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| malformed(format!("at byte {}: {e}", reader.buffer_position())))?;
        let (start, empty) = match &event {
            Event::Start(e) => (Some(e.clone().into_owned()), false),
            Event::Empty(e) => (Some(e.clone().into_owned()), true),
            _ => (None, false),
        };

        if let Some(e) = start {
            let qname = String::from_utf8_lossy(e.name().as_ref()).into_owned();
            let name = local(&qname).to_string();
            let attrs = attributes(&e)?;
            depth += 1;

            if root.is_none() {
                if depth != 1 || name != "svg" {
                    return Err(malformed("root element is not <svg>"));
                }
                let id_text = attrs.get("id").ok_or(SketchError::MissingSketchAnchor)?;
                let id = AnchorId::parse(id_text).map_err(|_| SketchError::BadSketchAnchor(id_text.clone()))?;
                if id.kind() != AnchorKind::Sketch {
                    return Err(SketchError::BadSketchAnchor(id_text.clone()));
                }
                let w = number(&attrs, "width")?;
                let h = number(&attrs, "height")?;
                let w = u32::try_from(w).map_err(|_| malformed("bad width"))?;
                let h = u32::try_from(h).map_err(|_| malformed("bad height"))?;
                root = Some((id, w, h));
            } else if metadata_depth.is_some() {
                match name.as_str() {
                    "sketch" => {
                        let created = parse_time(attrs.get("created"), "created")?;
                        let modified = parse_time(attrs.get("modified"), "modified")?;
                        times = Some((created, modified));
                    }
                    "annotation" => target = Some((TextTarget::Annotation, depth)),
                    "author" => target = Some((TextTarget::Author, depth)),
                    "marker" => {
                        let raw = attrs.get("ref").ok_or_else(|| malformed("marker note without ref"))?;
                        let id = AnchorId::parse(raw).map_err(|_| SketchError::BadMarkerId(raw.clone()))?;
                        target = Some((TextTarget::Marker(id), depth));
                    }
                    _ => {}
                }
                text.clear();
            } else {
                match name.as_str() {
                    "metadata" => metadata_depth = Some(depth),
                    "image" if image.is_none() => {
                        let href = attr(&attrs, "href")
                            .cloned()
                            .ok_or_else(|| malformed("image without href"))?;
                        let format = match attr(&attrs, "mime") {
                            Some(m) => ImageFormat::from_mime(m)?,
                            None => href
                                .rsplit('.')
                                .next()
                                .and_then(ImageFormat::from_extension)
                                .ok_or_else(|| SketchError::UnsupportedFormat(href.clone()))?,
                        };
                        image = Some(ImageRef { href, format });
                    }
                    "rect" => {
                        if let Some(raw) = attrs.get("id") {
                            if let Ok(id) = AnchorId::parse(raw) {
                                if id.kind() != AnchorKind::Marker {
                                    return Err(SketchError::BadMarkerId(raw.clone()));
                                }
                                let rect = Rect::new(
                                    number(&attrs, "x").unwrap_or(0),
                                    number(&attrs, "y").unwrap_or(0),
                                    number(&attrs, "width")?,
                                    number(&attrs, "height")?,
                                );
                                if rects.iter().any(|(r, _)| *r == id) {
                                    return Err(SketchError::BadMarkerId(raw.clone()));
                                }
                                rects.push((id, rect));
                            }
                        }
                    }
                    _ => {}
                }
            }

            if empty {
                close_element(&mut depth, &mut metadata_depth, &mut target, &mut text, &mut annotation, &mut authors, &mut marker_notes);
            }
        } else {
            match event {
                Event::End(_) => close_element(
                    &mut depth,
                    &mut metadata_depth,
                    &mut target,
                    &mut text,
                    &mut annotation,
                    &mut authors,
                    &mut marker_notes,
                ),
                Event::Text(t) if target.is_some() => {
                    let s = t.unescape().map_err(|e| malformed(e.to_string()))?;
                    text.push_str(&s);
                }
                Event::CData(t) if target.is_some() => {
                    text.push_str(&String::from_utf8_lossy(&t.into_inner()));
                }
                Event::Eof => break,
                _ => {}
            }
        }
        buf.clear();
    }

    let (anchor, width, height) = root.ok_or_else(|| malformed("no <svg> element"))?;
    let image = image.ok_or_else(|| malformed("no <image> element"))?;
    let (created, modified) = times.ok_or_else(|| malformed("no sketch metadata"))?;
    let markers = rects
        .into_iter()
        .map(|(anchor, rect)| Marker {
            anchor,
            rect,
            annotation: marker_notes.remove(&anchor).unwrap_or_default(),
        })
        .collect();
    Ok(SketchDocument {
        anchor,
        image,
        width,
        height,
        markers,
        annotation,
        authors,
        created,
        modified,
    })
}

#[allow(clippy::too_many_arguments)]
fn close_element(
    depth: &mut usize,
    metadata_depth: &mut Option<usize>,
    target: &mut Option<(TextTarget, usize)>,
    text: &mut String,
    annotation: &mut String,
    authors: &mut Vec<String>,
    marker_notes: &mut HashMap<AnchorId, String>,
) {
    if let Some((_, d)) = target {
        if *d == *depth {
            let (t, _) = target.take().expect("checked");
            let value = std::mem::take(text);
            match t {
                TextTarget::Annotation => *annotation = value,
                TextTarget::Author => authors.push(value),
                TextTarget::Marker(id) => {
                    marker_notes.insert(id, value);
                }
            }
        }
    }
    if *metadata_depth == Some(*depth) {
        *metadata_depth = None;
    }
    *depth = depth.saturating_sub(1);
}
