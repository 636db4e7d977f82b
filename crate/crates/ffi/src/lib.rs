//! C ABI over the sketchlink library.
//!
//! Every fallible function returns an [`SlStatus`]. On failure the message is
//! kept per thread and can be fetched with [`sl_last_error`]. Strings handed
//! out by the library are owned by the caller and released with
//! [`sl_string_free`]; handles are released with their `_free` function.
//! Passing NULL to a `_free` function is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use sketchlink::anchor::{AnchorId, AnchorKind};
use sketchlink::links::{LinkStore, SourceAnchorRecord};
use sketchlink::scanner::{
    insert_anchor, remove_anchor, scan_tree, IgnoreRules, ProfileSet, ProjectIndex, ScanReport,
};
use sketchlink::sketch::{serialize_sketch_svg, SketchDocument, SketchRepo};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidAnchor = 3,
    NotFound = 4,
    Io = 5,
    Scan = 6,
    Edit = 7,
    Link = 8,
    Sketch = 9,
    Unsupported = 10,
    Panic = 99,
}

/// Anchor kinds as C values. Matches the leading digit of the text form.
pub const SL_KIND_SOURCE_CODE: u32 = 0;
pub const SL_KIND_SKETCH: u32 = 1;
pub const SL_KIND_MARKER: u32 = 2;

/// A scanned project.
pub struct SlIndex {
    index: ProjectIndex,
}

/// One sketch document loaded from a data directory.
pub struct SlSketch {
    doc: SketchDocument,
}

/// The link store of a data directory.
pub struct SlLinkStore {
    data_dir: PathBuf,
    store: LinkStore,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Error(SlStatus, String);

type Result<T> = std::result::Result<T, Error>;

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<()>) -> SlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SlStatus::Ok
        }
        Ok(Err(Error(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("panic inside sketchlink");
            SlStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str> {
    if p.is_null() {
        return Err(Error(SlStatus::NullArgument, format!("`{what}` is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Error(SlStatus::InvalidUtf8, format!("`{what}` is not UTF-8")))
}

unsafe fn anchor_arg(p: *const c_char, what: &str) -> Result<AnchorId> {
    let text = str_arg(p, what)?;
    AnchorId::parse(text).map_err(|e| Error(SlStatus::InvalidAnchor, e.to_string()))
}

fn out_arg<T>(p: *mut T, what: &str) -> Result<()> {
    if p.is_null() {
        Err(Error(SlStatus::NullArgument, format!("`{what}` is NULL")))
    } else {
        Ok(())
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T> {
    p.as_ref()
        .ok_or_else(|| Error(SlStatus::NullArgument, format!("`{what}` is NULL")))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T> {
    p.as_mut()
        .ok_or_else(|| Error(SlStatus::NullArgument, format!("`{what}` is NULL")))
}

fn into_c(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes replaced").into_raw()
}

fn json<T: serde::Serialize>(value: &T) -> *mut c_char {
    into_c(serde_json::to_string(value).expect("value serializes"))
}

fn kind_from_u32(kind: u32) -> Result<AnchorKind> {
    match kind {
        SL_KIND_SOURCE_CODE => Ok(AnchorKind::SourceCode),
        SL_KIND_SKETCH => Ok(AnchorKind::Sketch),
        SL_KIND_MARKER => Ok(AnchorKind::Marker),
        other => Err(Error(SlStatus::InvalidAnchor, format!("unknown anchor kind {other}"))),
    }
}

fn kind_to_u32(kind: AnchorKind) -> u32 {
    match kind {
        AnchorKind::SourceCode => SL_KIND_SOURCE_CODE,
        AnchorKind::Sketch => SL_KIND_SKETCH,
        AnchorKind::Marker => SL_KIND_MARKER,
    }
}

/// Message of the last failed call on this thread, or NULL. Free with
/// `sl_string_free`.
#[no_mangle]
pub extern "C" fn sl_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |c| c.clone().into_raw()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn sl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version; static, do not free.
#[no_mangle]
pub extern "C" fn sl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Generates a fresh anchor of `kind` into `*out`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_anchor_new(kind: u32, out: *mut *mut c_char) -> SlStatus {
    guard(|| {
        out_arg(out, "out")?;
        let id = AnchorId::random(kind_from_u32(kind)?);
        *out = into_c(id.to_string());
        Ok(())
    })
}

/// Parses `text`; on success writes its kind to `*kind` (may be NULL).
///
/// # Safety
/// `text` must be a NUL-terminated string; `kind` NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_anchor_parse(text: *const c_char, kind: *mut u32) -> SlStatus {
    guard(|| {
        let id = anchor_arg(text, "text")?;
        if !kind.is_null() {
            *kind = kind_to_u32(id.kind());
        }
        Ok(())
    })
}

/// Scans `root` with default ignore rules. `project` may be NULL.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_index_scan(root: *const c_char, project: *const c_char, out: *mut *mut SlIndex) -> SlStatus {
    guard(|| {
        out_arg(out, "out")?;
        let root = str_arg(root, "root")?;
        let project = if project.is_null() { None } else { Some(str_arg(project, "project")?) };
        let index = scan_tree(Path::new(root), project, &ProfileSet::builtin(), &IgnoreRules::default())
            .map_err(|e| Error(SlStatus::Scan, e.to_string()))?;
        *out = Box::into_raw(Box::new(SlIndex { index }));
        Ok(())
    })
}

/// # Safety
/// `index` must be NULL or a handle from `sl_index_scan`, freed once.
#[no_mangle]
pub unsafe extern "C" fn sl_index_free(index: *mut SlIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// Number of anchor occurrences, or 0 for NULL.
///
/// # Safety
/// `index` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sl_index_anchor_count(index: *const SlIndex) -> usize {
    index.as_ref().map_or(0, |i| i.index.occurrence_count())
}

/// The `scan --json` document.
///
/// # Safety
/// `index` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_index_to_json(index: *const SlIndex, out: *mut *mut c_char) -> SlStatus {
    guard(|| {
        out_arg(out, "out")?;
        let index = handle(index, "index")?;
        *out = json(&ScanReport::from(&index.index));
        Ok(())
    })
}

/// JSON `{path, occurrence..., referent}` for one anchor.
///
/// # Safety
/// `index` must be a live handle; `anchor` NUL-terminated; `out` valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn sl_index_find(index: *const SlIndex, anchor: *const c_char, out: *mut *mut c_char) -> SlStatus {
    guard(|| {
        out_arg(out, "out")?;
        let index = handle(index, "index")?;
        let id = anchor_arg(anchor, "anchor")?;
        let (file, hit) = index
            .index
            .find(&id)
            .ok_or_else(|| Error(SlStatus::NotFound, format!("anchor {id} not in the index")))?;
        let mut value = serde_json::to_value(hit).expect("serializes");
        value["path"] = serde_json::Value::String(file.path.clone());
        *out = json(&value);
        Ok(())
    })
}

unsafe fn edit(
    path: *const c_char,
    out: *mut *mut c_char,
    f: impl FnOnce(&sketchlink::scanner::LanguageProfile) -> Result<String>,
) -> SlStatus {
    guard(|| {
        out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let profiles = ProfileSet::builtin();
        let profile = profiles
            .for_path(Path::new(path))
            .ok_or_else(|| Error(SlStatus::Unsupported, format!("no language profile for `{path}`")))?;
        *out = into_c(f(profile)?);
        Ok(())
    })
}

/// Inserts `anchor` so it refers to `line` of `text`. `path` only selects
/// the language profile.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_insert_anchor(
    path: *const c_char,
    text: *const c_char,
    line: usize,
    anchor: *const c_char,
    out: *mut *mut c_char,
) -> SlStatus {
    edit(path, out, |profile| {
        let text = str_arg(text, "text")?;
        let id = anchor_arg(anchor, "anchor")?;
        insert_anchor(text, line, id, profile)
            .map(|(edited, _)| edited)
            .map_err(|e| Error(SlStatus::Edit, e.to_string()))
    })
}

/// Removes every occurrence of `anchor` from `text`.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_remove_anchor(
    path: *const c_char,
    text: *const c_char,
    anchor: *const c_char,
    out: *mut *mut c_char,
) -> SlStatus {
    edit(path, out, |profile| {
        let text = str_arg(text, "text")?;
        let id = anchor_arg(anchor, "anchor")?;
        remove_anchor(text, id, profile).map_err(|e| Error(SlStatus::Edit, e.to_string()))
    })
}

/// Loads the sketch `anchor` (a sketch or marker anchor) from `data_dir`.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_sketch_load(data_dir: *const c_char, anchor: *const c_char, out: *mut *mut SlSketch) -> SlStatus {
    guard(|| {
        out_arg(out, "out")?;
        let repo = SketchRepo::new(str_arg(data_dir, "data_dir")?);
        let mut id = anchor_arg(anchor, "anchor")?;
        if id.kind() == AnchorKind::Marker {
            let catalog = repo.catalog().map_err(|e| Error(SlStatus::Sketch, e.to_string()))?;
            id = catalog
                .sketch_of(&id)
                .ok_or_else(|| Error(SlStatus::NotFound, format!("marker {id} not found")))?;
        }
        let doc = repo.load_document(&id).map_err(|e| match e {
            sketchlink::sketch::SketchError::NotFound(_) => Error(SlStatus::NotFound, e.to_string()),
            other => Error(SlStatus::Sketch, other.to_string()),
        })?;
        *out = Box::into_raw(Box::new(SlSketch { doc }));
        Ok(())
    })
}

/// # Safety
/// `sketch` must be NULL or a handle from `sl_sketch_load`, freed once.
#[no_mangle]
pub unsafe extern "C" fn sl_sketch_free(sketch: *mut SlSketch) {
    if !sketch.is_null() {
        drop(Box::from_raw(sketch));
    }
}

/// # Safety
/// `sketch` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sl_sketch_marker_count(sketch: *const SlSketch) -> usize {
    sketch.as_ref().map_or(0, |s| s.doc.markers.len())
}

/// The document as JSON.
///
/// # Safety
/// `sketch` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_sketch_to_json(sketch: *const SlSketch, out: *mut *mut c_char) -> SlStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = json(&handle(sketch, "sketch")?.doc);
        Ok(())
    })
}

/// The canonical SVG text.
///
/// # Safety
/// `sketch` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_sketch_to_svg(sketch: *const SlSketch, out: *mut *mut c_char) -> SlStatus {
    guard(|| {
        out_arg(out, "out")?;
        let svg = serialize_sketch_svg(&handle(sketch, "sketch")?.doc);
        *out = into_c(String::from_utf8(svg).expect("serializer emits UTF-8"));
        Ok(())
    })
}

/// Opens the link store in `data_dir`; a missing file gives an empty store.
///
/// # Safety
/// `data_dir` must be NUL-terminated; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_links_open(data_dir: *const c_char, out: *mut *mut SlLinkStore) -> SlStatus {
    guard(|| {
        out_arg(out, "out")?;
        let data_dir = PathBuf::from(str_arg(data_dir, "data_dir")?);
        let store = LinkStore::load(&data_dir).map_err(|e| Error(SlStatus::Link, e.to_string()))?;
        *out = Box::into_raw(Box::new(SlLinkStore { data_dir, store }));
        Ok(())
    })
}

/// # Safety
/// `store` must be NULL or a handle from `sl_links_open`, freed once.
#[no_mangle]
pub unsafe extern "C" fn sl_links_free(store: *mut SlLinkStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// # Safety
/// `store` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sl_links_count(store: *const SlLinkStore) -> usize {
    store.as_ref().map_or(0, |s| s.store.len())
}

/// JSON array of the links touching `anchor`, newest first.
///
/// # Safety
/// `store` must be a live handle; `anchor` NUL-terminated; `out` valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn sl_links_of(store: *const SlLinkStore, anchor: *const c_char, out: *mut *mut c_char) -> SlStatus {
    guard(|| {
        out_arg(out, "out")?;
        let store = handle(store, "store")?;
        let id = anchor_arg(anchor, "anchor")?;
        let catalog = SketchRepo::new(&store.data_dir).catalog().ok();
        *out = json(&store.store.links_of(&id, catalog.as_ref()));
        Ok(())
    })
}

/// Creates a link and saves the store. Sketch and marker ends must exist in
/// the data directory; source ends must be in `index` or already recorded.
/// `*created` (may be NULL) tells whether the link is new.
///
/// # Safety
/// `store` and `index` must be live handles; anchors NUL-terminated;
/// `created` NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_links_create(
    store: *mut SlLinkStore,
    index: *const SlIndex,
    a: *const c_char,
    b: *const c_char,
    created: *mut bool,
) -> SlStatus {
    guard(|| {
        let store = handle_mut(store, "store")?;
        let index = &handle(index, "index")?.index;
        let (a, b) = (anchor_arg(a, "a")?, anchor_arg(b, "b")?);
        let catalog = SketchRepo::new(&store.data_dir)
            .catalog()
            .map_err(|e| Error(SlStatus::Sketch, e.to_string()))?;
        let lookup = |x: &AnchorId| match x.kind() {
            AnchorKind::SourceCode => index.contains(x),
            _ => catalog.contains(x),
        };
        let now = chrono::Utc::now();
        let mut next = store.store.clone();
        let (link, fresh) = next
            .create_link(a, b, &lookup, now)
            .map_err(|e| Error(SlStatus::Link, e.to_string()))?;
        if let Some(end) = link.source_end().filter(|e| next.record(e).is_none()) {
            if let Some(record) = SourceAnchorRecord::from_index(index, &end, now) {
                next.record_source_anchor(record)
                    .map_err(|e| Error(SlStatus::Link, e.to_string()))?;
            }
        }
        if fresh {
            next.save(&store.data_dir).map_err(|e| Error(SlStatus::Io, e.to_string()))?;
        }
        store.store = next;
        if !created.is_null() {
            *created = fresh;
        }
        Ok(())
    })
}

/// Removes a link and saves the store. `*removed` may be NULL.
///
/// # Safety
/// `store` must be a live handle; anchors NUL-terminated; `removed` NULL or
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_links_remove(
    store: *mut SlLinkStore,
    a: *const c_char,
    b: *const c_char,
    removed: *mut bool,
) -> SlStatus {
    guard(|| {
        let store = handle_mut(store, "store")?;
        let (a, b) = (anchor_arg(a, "a")?, anchor_arg(b, "b")?);
        let mut next = store.store.clone();
        let gone = next.remove_link(a, b);
        if gone {
            next.save(&store.data_dir).map_err(|e| Error(SlStatus::Io, e.to_string()))?;
        }
        store.store = next;
        if !removed.is_null() {
            *removed = gone;
        }
        Ok(())
    })
}
