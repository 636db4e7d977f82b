//! Sketch documents: one raster image plus rectangular markers, kept in an
//! SVG container.
//!
//! The sketch anchor is the `id` of the SVG root element and every marker is
//! a `rect` whose `id` is its marker anchor. Annotations, authors and
//! timestamps live in the SVG `metadata` block. Coordinates are image pixels
//! with the origin at the top-left corner.

mod repo;
mod svg;

use chrono::{DateTime, Utc};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anchor::{AnchorId, AnchorKind};

pub use repo::{MarkerInfo, SketchCatalog, SketchPeer, SketchRepo};
pub(crate) use repo::write_atomically;
pub use svg::{parse_sketch_svg, serialize_sketch_svg};

#[derive(Debug, Error)]
pub enum SketchError {
    #[error("unsupported image format `{0}`")]
    UnsupportedFormat(String),
    #[error("image does not decode: {0}")]
    CorruptImage(String),
    #[error("invalid marker rectangle {0:?}")]
    InvalidRect(Rect),
    #[error("marker {0} not found")]
    MarkerNotFound(AnchorId),
    #[error("{0} is neither this sketch nor one of its markers")]
    TargetNotFound(AnchorId),
    #[error("text contains characters that cannot be stored")]
    InvalidText,
    #[error("malformed SVG: {0}")]
    MalformedSvg(String),
    #[error("SVG root element has no sketch anchor id")]
    MissingSketchAnchor,
    #[error("SVG root id `{0}` is not a sketch anchor")]
    BadSketchAnchor(String),
    #[error("rect id `{0}` is not a marker anchor")]
    BadMarkerId(String),
    #[error("sketch {0} not found")]
    NotFound(AnchorId),
    #[error("expected a sketch anchor, got {0}")]
    WrongKind(AnchorId),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Accepted raster formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    Png,
    Jpeg,
}

impl ImageFormat {
    pub const ALL: [ImageFormat; 2] = [ImageFormat::Png, ImageFormat::Jpeg];

    pub fn from_mime(mime: &str) -> Result<Self, SketchError> {
        let base = mime.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
        match base.as_str() {
            "image/png" => Ok(ImageFormat::Png),
            "image/jpeg" | "image/jpg" | "image/pjpeg" => Ok(ImageFormat::Jpeg),
            _ => Err(SketchError::UnsupportedFormat(mime.to_string())),
        }
    }

    pub fn from_extension(ext: &str) -> Option<Self> {
        match ext.to_ascii_lowercase().as_str() {
            "png" => Some(ImageFormat::Png),
            "jpg" | "jpeg" => Some(ImageFormat::Jpeg),
            _ => None,
        }
    }

    pub fn mime(self) -> &'static str {
        match self {
            ImageFormat::Png => "image/png",
            ImageFormat::Jpeg => "image/jpeg",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Png => "png",
            ImageFormat::Jpeg => "jpg",
        }
    }

    fn codec(self) -> image::ImageFormat {
        match self {
            ImageFormat::Png => image::ImageFormat::Png,
            ImageFormat::Jpeg => image::ImageFormat::Jpeg,
        }
    }
}

/// Where the SVG finds its image, relative to the SVG file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRef {
    pub href: String,
    pub format: ImageFormat,
}

impl ImageRef {
    /// The conventional reference for a sketch stored in a repository.
    pub fn for_sketch(sketch: &AnchorId, format: ImageFormat) -> Self {
        ImageRef {
            href: format!("../images/{}.{}", sketch.uuid(), format.extension()),
            format,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: i64,
    pub y: i64,
    pub width: i64,
    pub height: i64,
}

impl Rect {
    pub fn new(x: i64, y: i64, width: i64, height: i64) -> Self {
        Rect { x, y, width, height }
    }

    /// Positive size and overlapping the `width`×`height` image.
    pub fn is_valid_for(&self, width: u32, height: u32) -> bool {
        let (w, h) = (i64::from(width), i64::from(height));
        let right = self.x.checked_add(self.width);
        let bottom = self.y.checked_add(self.height);
        self.width > 0
            && self.height > 0
            && self.x < w
            && self.y < h
            && right.is_some_and(|r| r > 0)
            && bottom.is_some_and(|b| b > 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Marker {
    pub anchor: AnchorId,
    pub rect: Rect,
    pub annotation: String,
}

/// Upload-time metadata.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchMeta {
    #[serde(default)]
    pub annotation: String,
    #[serde(default)]
    pub authors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchDocument {
    pub anchor: AnchorId,
    pub image: ImageRef,
    pub width: u32,
    pub height: u32,
    /// Creation order.
    pub markers: Vec<Marker>,
    pub annotation: String,
    pub authors: Vec<String>,
    pub created: DateTime<Utc>,
    pub modified: DateTime<Utc>,
}

/// Listing entry for a stored sketch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchSummary {
    pub anchor: AnchorId,
    pub annotation: String,
    pub authors: Vec<String>,
    pub created: DateTime<Utc>,
    pub modified: DateTime<Utc>,
    pub width: u32,
    pub height: u32,
    pub markers: usize,
}

/// Characters representable in an XML 1.0 document.
pub fn is_storable_text(s: &str) -> bool {
    s.chars().all(|c| {
        matches!(c, '\t' | '\n' | '\r' | '\u{20}'..='\u{D7FF}' | '\u{E000}'..='\u{FFFD}' | '\u{10000}'..='\u{10FFFF}')
    })
}

fn check_text(s: &str) -> Result<(), SketchError> {
    if is_storable_text(s) {
        Ok(())
    } else {
        Err(SketchError::InvalidText)
    }
}

/// Decodes the image and builds a fresh document with no markers.
pub fn create_sketch<R: RngCore + ?Sized>(
    image_bytes: &[u8],
    mime: &str,
    meta: SketchMeta,
    rng: &mut R,
    now: DateTime<Utc>,
) -> Result<SketchDocument, SketchError> {
    let format = ImageFormat::from_mime(mime)?;
    check_text(&meta.annotation)?;
    for author in &meta.authors {
        check_text(author)?;
    }
    let decoded = image::load_from_memory_with_format(image_bytes, format.codec())
        .map_err(|e| SketchError::CorruptImage(e.to_string()))?;
    let anchor = AnchorId::generate(AnchorKind::Sketch, rng);
    Ok(SketchDocument {
        anchor,
        image: ImageRef::for_sketch(&anchor, format),
        width: decoded.width(),
        height: decoded.height(),
        markers: Vec::new(),
        annotation: meta.annotation,
        authors: meta.authors,
        created: now,
        modified: now,
    })
}

impl SketchDocument {
    pub fn marker(&self, anchor: &AnchorId) -> Option<&Marker> {
        self.markers.iter().find(|m| m.anchor == *anchor)
    }

    pub fn summary(&self) -> SketchSummary {
        SketchSummary {
            anchor: self.anchor,
            annotation: self.annotation.clone(),
            authors: self.authors.clone(),
            created: self.created,
            modified: self.modified,
            width: self.width,
            height: self.height,
            markers: self.markers.len(),
        }
    }

    pub fn meta(&self) -> SketchMeta {
        SketchMeta {
            annotation: self.annotation.clone(),
            authors: self.authors.clone(),
        }
    }

    /// Appends a marker with a fresh anchor.
    pub fn add_marker<R: RngCore + ?Sized>(
        &mut self,
        rect: Rect,
        annotation: &str,
        rng: &mut R,
    ) -> Result<Marker, SketchError> {
        if !rect.is_valid_for(self.width, self.height) {
            return Err(SketchError::InvalidRect(rect));
        }
        check_text(annotation)?;
        let anchor = loop {
            let id = AnchorId::generate(AnchorKind::Marker, rng);
            if self.marker(&id).is_none() {
                break id;
            }
        };
        let marker = Marker {
            anchor,
            rect,
            annotation: annotation.to_string(),
        };
        self.markers.push(marker.clone());
        self.modified = Utc::now();
        Ok(marker)
    }

    pub fn remove_marker(&mut self, anchor: &AnchorId) -> Result<Marker, SketchError> {
        let pos = self
            .markers
            .iter()
            .position(|m| m.anchor == *anchor)
            .ok_or(SketchError::MarkerNotFound(*anchor))?;
        self.modified = Utc::now();
        Ok(self.markers.remove(pos))
    }

    /// Replaces the sketch annotation (target = sketch anchor) or one
    /// marker's annotation.
    pub fn update_annotation(&mut self, target: &AnchorId, text: &str) -> Result<(), SketchError> {
        check_text(text)?;
        if *target == self.anchor {
            self.annotation = text.to_string();
        } else if let Some(m) = self.markers.iter_mut().find(|m| m.anchor == *target) {
            m.annotation = text.to_string();
        } else {
            return Err(SketchError::TargetNotFound(*target));
        }
        self.modified = Utc::now();
        Ok(())
    }

    /// Checks the document invariants.
    pub fn validate(&self) -> Result<(), SketchError> {
        if self.anchor.kind() != AnchorKind::Sketch {
            return Err(SketchError::BadSketchAnchor(self.anchor.to_string()));
        }
        let mut seen = std::collections::HashSet::new();
        for m in &self.markers {
            if m.anchor.kind() != AnchorKind::Marker || !seen.insert(m.anchor) {
                return Err(SketchError::BadMarkerId(m.anchor.to_string()));
            }
            if !m.rect.is_valid_for(self.width, self.height) {
                return Err(SketchError::InvalidRect(m.rect));
            }
            check_text(&m.annotation)?;
        }
        check_text(&self.annotation)?;
        self.authors.iter().try_for_each(|a| check_text(a))
    }
}
