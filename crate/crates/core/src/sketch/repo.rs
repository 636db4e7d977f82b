use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use super::{parse_sketch_svg, serialize_sketch_svg, ImageFormat, Rect, SketchDocument, SketchError, SketchSummary};
use crate::anchor::{AnchorId, AnchorKind};

/// Sketch storage under a data directory:
///
/// ```text
/// <data>/sketches/<uuid>.svg
/// <data>/images/<uuid>.<png|jpg>
/// ```
///
/// Writers must be serialized by the caller; readers may run concurrently.
#[derive(Debug, Clone)]
pub struct SketchRepo {
    data_dir: PathBuf,
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub(crate) fn write_atomically(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

impl SketchRepo {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        SketchRepo { data_dir: data_dir.into() }
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }

    pub fn sketches_dir(&self) -> PathBuf {
        self.data_dir.join("sketches")
    }

    pub fn images_dir(&self) -> PathBuf {
        self.data_dir.join("images")
    }

    pub fn svg_path(&self, sketch: &AnchorId) -> PathBuf {
        self.sketches_dir().join(format!("{}.svg", sketch.uuid()))
    }

    pub fn image_path(&self, uuid: &Uuid, format: ImageFormat) -> PathBuf {
        self.images_dir().join(format!("{uuid}.{}", format.extension()))
    }

    fn check_kind(sketch: &AnchorId) -> Result<(), SketchError> {
        if sketch.kind() == AnchorKind::Sketch {
            Ok(())
        } else {
            Err(SketchError::WrongKind(*sketch))
        }
    }

    pub fn exists(&self, sketch: &AnchorId) -> bool {
        sketch.kind() == AnchorKind::Sketch && self.svg_path(sketch).is_file()
    }

    /// Stores the image and then the SVG.
    pub fn store(&self, doc: &SketchDocument, image: &[u8]) -> Result<(), SketchError> {
        doc.validate()?;
        write_atomically(&self.image_path(&doc.anchor.uuid(), doc.image.format), image)?;
        write_atomically(&self.svg_path(&doc.anchor), &serialize_sketch_svg(doc))?;
        Ok(())
    }

    /// Rewrites the SVG of an already stored sketch.
    pub fn update(&self, doc: &SketchDocument) -> Result<(), SketchError> {
        doc.validate()?;
        if !self.exists(&doc.anchor) {
            return Err(SketchError::NotFound(doc.anchor));
        }
        write_atomically(&self.svg_path(&doc.anchor), &serialize_sketch_svg(doc))?;
        Ok(())
    }

    pub fn load_document(&self, sketch: &AnchorId) -> Result<SketchDocument, SketchError> {
        Self::check_kind(sketch)?;
        let bytes = fs::read(self.svg_path(sketch)).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => SketchError::NotFound(*sketch),
            _ => SketchError::Io(e),
        })?;
        parse_sketch_svg(&bytes)
    }

    pub fn load_svg_bytes(&self, sketch: &AnchorId) -> Result<Vec<u8>, SketchError> {
        Self::check_kind(sketch)?;
        fs::read(self.svg_path(sketch)).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => SketchError::NotFound(*sketch),
            _ => SketchError::Io(e),
        })
    }

    pub fn load(&self, sketch: &AnchorId) -> Result<(SketchDocument, Vec<u8>), SketchError> {
        let doc = self.load_document(sketch)?;
        let image = fs::read(self.image_path(&sketch.uuid(), doc.image.format)).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => SketchError::NotFound(*sketch),
            _ => SketchError::Io(e),
        })?;
        Ok((doc, image))
    }

    /// Image bytes by sketch UUID, whatever the stored format.
    pub fn image(&self, uuid: &Uuid) -> Result<(Vec<u8>, ImageFormat), SketchError> {
        for format in ImageFormat::ALL {
            match fs::read(self.image_path(uuid, format)) {
                Ok(bytes) => return Ok((bytes, format)),
                Err(e) if e.kind() == io::ErrorKind::NotFound => continue,
                Err(e) => return Err(e.into()),
            }
        }
        Err(SketchError::NotFound(AnchorId::new(AnchorKind::Sketch, *uuid)))
    }

    /// Removes the SVG and image. Links to the sketch are left alone.
    pub fn delete(&self, sketch: &AnchorId) -> Result<bool, SketchError> {
        Self::check_kind(sketch)?;
        let existed = match fs::remove_file(self.svg_path(sketch)) {
            Ok(()) => true,
            Err(e) if e.kind() == io::ErrorKind::NotFound => false,
            Err(e) => return Err(e.into()),
        };
        for format in ImageFormat::ALL {
            match fs::remove_file(self.image_path(&sketch.uuid(), format)) {
                Ok(()) => {}
                Err(e) if e.kind() == io::ErrorKind::NotFound => {}
                Err(e) => return Err(e.into()),
            }
        }
        Ok(existed)
    }

    /// All parseable stored documents. Unreadable files are skipped with a
    /// warning.
    pub fn documents(&self) -> Result<Vec<SketchDocument>, SketchError> {
        let dir = self.sketches_dir();
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut docs = Vec::new();
        for entry in entries {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("svg") {
                continue;
            }
            match fs::read(&path).map_err(SketchError::from).and_then(|b| parse_sketch_svg(&b)) {
                Ok(doc) => docs.push(doc),
                Err(e) => tracing::warn!("skipping {}: {e}", path.display()),
            }
        }
        docs.sort_by(|a, b| b.modified.cmp(&a.modified).then(a.anchor.cmp(&b.anchor)));
        Ok(docs)
    }

    /// Summaries, newest modification first.
    pub fn list(&self) -> Result<Vec<SketchSummary>, SketchError> {
        Ok(self.documents()?.iter().map(SketchDocument::summary).collect())
    }

    pub fn catalog(&self) -> Result<SketchCatalog, SketchError> {
        Ok(SketchCatalog::from_documents(self.documents()?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerInfo {
    pub anchor: AnchorId,
    pub rect: Rect,
    pub annotation: String,
}

/// What a link peer on the sketch side resolves to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchPeer {
    pub sketch: SketchSummary,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub marker: Option<MarkerInfo>,
}

/// Index of every sketch and marker anchor in a repository.
#[derive(Debug, Clone, Default)]
pub struct SketchCatalog {
    sketches: HashMap<AnchorId, SketchSummary>,
    markers: HashMap<AnchorId, (AnchorId, MarkerInfo)>,
}

impl SketchCatalog {
    pub fn from_documents(docs: impl IntoIterator<Item = SketchDocument>) -> Self {
        let mut catalog = SketchCatalog::default();
        for doc in docs {
            catalog.insert(&doc);
        }
        catalog
    }

    pub fn insert(&mut self, doc: &SketchDocument) {
        self.remove(&doc.anchor);
        for m in &doc.markers {
            self.markers.insert(
                m.anchor,
                (
                    doc.anchor,
                    MarkerInfo {
                        anchor: m.anchor,
                        rect: m.rect,
                        annotation: m.annotation.clone(),
                    },
                ),
            );
        }
        self.sketches.insert(doc.anchor, doc.summary());
    }

    pub fn remove(&mut self, sketch: &AnchorId) {
        self.sketches.remove(sketch);
        self.markers.retain(|_, (owner, _)| owner != sketch);
    }

    pub fn contains(&self, anchor: &AnchorId) -> bool {
        match anchor.kind() {
            AnchorKind::Sketch => self.sketches.contains_key(anchor),
            AnchorKind::Marker => self.markers.contains_key(anchor),
            AnchorKind::SourceCode => false,
        }
    }

    /// The sketch an anchor belongs to (itself for sketch anchors).
    pub fn sketch_of(&self, anchor: &AnchorId) -> Option<AnchorId> {
        match anchor.kind() {
            AnchorKind::Sketch => self.sketches.contains_key(anchor).then_some(*anchor),
            AnchorKind::Marker => self.markers.get(anchor).map(|(s, _)| *s),
            AnchorKind::SourceCode => None,
        }
    }

    pub fn peer(&self, anchor: &AnchorId) -> Option<SketchPeer> {
        let sketch = self.sketch_of(anchor)?;
        Some(SketchPeer {
            sketch: self.sketches.get(&sketch)?.clone(),
            marker: self.markers.get(anchor).map(|(_, m)| m.clone()),
        })
    }

    pub fn summaries(&self) -> impl Iterator<Item = &SketchSummary> {
        self.sketches.values()
    }

    pub fn len(&self) -> usize {
        self.sketches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sketches.is_empty()
    }
}
