//! Static HTML documentation with sketch hyperlinks.
//!
//! ```text
//! out/index.html                  sketches and files
//! out/files/<path>.html           one page per scanned source file
//! out/sketches/<uuid>.svg         copies, only without a server URL
//! out/images/<uuid>.<ext>
//! ```
//!
//! Anchors whose referent is a type or callable get `a.sketch-link`
//! hyperlinks inside the declaration outline; every other linked anchor is
//! listed under "Other links" with `a.other-link`.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use quick_xml::escape::escape;

use crate::anchor::{AnchorId, AnchorKind};
use crate::links::LinkStore;
use crate::scanner::{FileEntry, IndexedAnchor, ProjectIndex, Referent, ReferentKind};
use crate::sketch::{SketchCatalog, SketchRepo};

pub const SKETCH_LINK_CLASS: &str = "sketch-link";
pub const OTHER_LINK_CLASS: &str = "other-link";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExportSummary {
    pub pages: usize,
    pub sketch_links: usize,
    pub other_links: usize,
    pub copied_sketches: usize,
}

pub struct ExportOptions<'a> {
    /// Link to a running server instead of copying sketches.
    pub server_url: Option<&'a str>,
}

/// Where hyperlinks point.
enum Target<'a> {
    Server(&'a str),
    Local,
}

impl Target<'_> {
    fn href(&self, sketch: &AnchorId, marker: Option<&AnchorId>, depth: usize) -> String {
        let fragment = marker.map(|m| format!("#{m}")).unwrap_or_default();
        match self {
            Target::Server(url) => format!("{}/sketch/{sketch}.svg{fragment}", url.trim_end_matches('/')),
            Target::Local => format!("{}sketches/{}.svg{fragment}", "../".repeat(depth), sketch.uuid()),
        }
    }
}

pub fn page_path(file: &str) -> PathBuf {
    PathBuf::from("files").join(format!("{file}.html"))
}

fn page_depth(file: &str) -> usize {
    1 + file.matches('/').count()
}

/// Sketch-side peers of `anchor` as (sketch, marker, label).
fn sketch_peers(anchor: &AnchorId, store: &LinkStore, catalog: &SketchCatalog) -> Vec<(AnchorId, Option<AnchorId>, String)> {
    store
        .raw_links_of(anchor)
        .into_iter()
        .filter_map(|l| l.peer(anchor))
        .filter(|p| p.kind() != AnchorKind::SourceCode)
        .map(|peer| match catalog.peer(&peer) {
            Some(info) => {
                let label = match &info.marker {
                    Some(m) if !m.annotation.is_empty() => m.annotation.clone(),
                    _ if !info.sketch.annotation.is_empty() => info.sketch.annotation.clone(),
                    _ => format!("sketch {}", info.sketch.anchor.uuid()),
                };
                (info.sketch.anchor, info.marker.map(|m| m.anchor), label)
            }
            None => (peer, None, String::new()),
        })
        .collect()
}

fn render_links(
    out: &mut String,
    class: &str,
    peers: &[(AnchorId, Option<AnchorId>, String)],
    catalog: &SketchCatalog,
    target: &Target<'_>,
    depth: usize,
) -> usize {
    let mut n = 0;
    for (sketch, marker, label) in peers {
        if catalog.contains(sketch) {
            let href = target.href(sketch, marker.as_ref(), depth);
            let _ = write!(
                out,
                " <a class=\"{class}\" href=\"{}\">{}</a>",
                escape(href.as_str()),
                escape(label.as_str())
            );
            n += 1;
        } else {
            let _ = write!(out, " <span class=\"missing\">missing {}</span>", sketch);
        }
    }
    n
}

fn decl_id(r: &Referent) -> String {
    format!("{}-{}", r.artifact_path, r.lines.start)
}

fn anchors_at<'a>(file: &'a FileEntry, decl: &Referent) -> impl Iterator<Item = &'a IndexedAnchor> {
    let (kind, path, lines) = (decl.kind, decl.artifact_path.clone(), decl.lines);
    file.anchors.iter().filter(move |a| {
        a.referent.kind == kind && a.referent.artifact_path == path && a.referent.lines == lines
    })
}

const STYLE: &str = "body{font-family:sans-serif;margin:2em}ul{list-style:none}li{margin:.2em 0}\
.kind{color:#666;font-size:.85em}.sketch-link,.other-link{margin-left:.5em}.missing{color:#a00}";

fn page_head(out: &mut String, title: &str) {
    let _ = write!(
        out,
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>{}</title>\n<style>{STYLE}</style>\n</head>\n<body>\n",
        escape(title)
    );
}

fn render_file(
    file: &FileEntry,
    project: &str,
    store: &LinkStore,
    catalog: &SketchCatalog,
    target: &Target<'_>,
    summary: &mut ExportSummary,
) -> String {
    let depth = page_depth(&file.path);
    let mut out = String::new();
    page_head(&mut out, &format!("{project}: {}", file.path));
    let _ = writeln!(
        out,
        "<p><a href=\"{}index.html\">index</a></p>\n<h1>{}</h1>",
        "../".repeat(depth),
        escape(file.path.as_str())
    );

    out.push_str("<h2>Outline</h2>\n<ul class=\"outline\">\n");
    let mut open: Vec<usize> = Vec::new();
    for decl in &file.declarations {
        while open.last().is_some_and(|&end| decl.lines.start > end) {
            open.pop();
            out.push_str("</ul></li>\n");
        }
        let _ = write!(
            out,
            "<li id=\"{}\"><span class=\"kind\">{}</span> <code>{}</code> <span class=\"lines\">{}-{}</span>",
            escape(decl_id(decl).as_str()),
            decl.kind.as_str(),
            escape(decl.name.as_str()),
            decl.lines.start,
            decl.lines.end
        );
        if decl.kind.is_type_or_callable() {
            for a in anchors_at(file, decl) {
                let peers = sketch_peers(&a.occurrence.anchor, store, catalog);
                summary.sketch_links += render_links(&mut out, SKETCH_LINK_CLASS, &peers, catalog, target, depth);
            }
        }
        let is_type = matches!(decl.kind, ReferentKind::Class | ReferentKind::Interface | ReferentKind::Enum);
        if is_type && decl.lines.end > decl.lines.start {
            open.push(decl.lines.end);
            out.push_str("\n<ul>\n");
        } else {
            out.push_str("</li>\n");
        }
    }
    for _ in open {
        out.push_str("</ul></li>\n");
    }
    out.push_str("</ul>\n");

    let others: Vec<&IndexedAnchor> = file
        .anchors
        .iter()
        .filter(|a| !a.referent.kind.is_type_or_callable())
        .filter(|a| store.has_links(&a.occurrence.anchor))
        .collect();
    out.push_str("<h2>Other links</h2>\n<ul class=\"other-links\">\n");
    for a in others {
        let peers = sketch_peers(&a.occurrence.anchor, store, catalog);
        if peers.is_empty() {
            continue;
        }
        let _ = write!(
            out,
            "<li><span class=\"kind\">{}</span> <code>{}</code> line {}",
            a.referent.kind.as_str(),
            escape(a.referent.name.as_str()),
            a.referent.lines.start
        );
        summary.other_links += render_links(&mut out, OTHER_LINK_CLASS, &peers, catalog, target, depth);
        out.push_str("</li>\n");
    }
    out.push_str("</ul>\n</body>\n</html>\n");
    out
}

fn render_index(index: &ProjectIndex, catalog: &SketchCatalog, target: &Target<'_>) -> String {
    let mut out = String::new();
    page_head(&mut out, &index.project_name);
    let _ = writeln!(out, "<h1>{}</h1>\n<h2>Sketches</h2>\n<ul class=\"sketches\">", escape(index.project_name.as_str()));
    let mut sketches: Vec<_> = catalog.summaries().collect();
    sketches.sort_by(|a, b| b.modified.cmp(&a.modified).then(a.anchor.cmp(&b.anchor)));
    for s in sketches {
        let label = if s.annotation.is_empty() {
            s.anchor.to_string()
        } else {
            s.annotation.clone()
        };
        let _ = write!(
            out,
            "<li><a class=\"sketch\" href=\"{}\">{}</a>",
            escape(target.href(&s.anchor, None, 0).as_str()),
            escape(label.as_str())
        );
        if !s.authors.is_empty() {
            let _ = write!(out, " <span class=\"authors\">by {}</span>", escape(s.authors.join(", ").as_str()));
        }
        let _ = writeln!(out, " <span class=\"kind\">{} markers</span></li>", s.markers);
    }
    out.push_str("</ul>\n<h2>Files</h2>\n<ul class=\"files\">\n");
    for f in &index.files {
        let href = page_path(&f.path).to_string_lossy().replace('\\', "/");
        let _ = writeln!(
            out,
            "<li><a href=\"{}\">{}</a></li>",
            escape(href.as_str()),
            escape(f.path.as_str())
        );
    }
    out.push_str("</ul>\n</body>\n</html>\n");
    out
}

fn write_file(path: &Path, contents: &[u8]) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)
}

/// Writes the site into `out_dir`.
pub fn export_html(
    index: &ProjectIndex,
    store: &LinkStore,
    repo: &SketchRepo,
    out_dir: &Path,
    options: &ExportOptions<'_>,
) -> io::Result<ExportSummary> {
    let catalog = repo.catalog().map_err(|e| io::Error::other(e.to_string()))?;
    let target = match options.server_url {
        Some(url) => Target::Server(url),
        None => Target::Local,
    };
    let mut summary = ExportSummary::default();
    fs::create_dir_all(out_dir)?;
    for file in &index.files {
        let html = render_file(file, &index.project_name, store, &catalog, &target, &mut summary);
        write_file(&out_dir.join(page_path(&file.path)), html.as_bytes())?;
        summary.pages += 1;
    }
    write_file(&out_dir.join("index.html"), render_index(index, &catalog, &target).as_bytes())?;
    summary.pages += 1;

    if matches!(target, Target::Local) {
        for s in catalog.summaries() {
            let doc = repo.load_document(&s.anchor).map_err(|e| io::Error::other(e.to_string()))?;
            let svg = repo.load_svg_bytes(&s.anchor).map_err(|e| io::Error::other(e.to_string()))?;
            let image = fs::read(repo.image_path(&s.anchor.uuid(), doc.image.format))?;
            let uuid = s.anchor.uuid();
            write_file(&out_dir.join("sketches").join(format!("{uuid}.svg")), &svg)?;
            write_file(
                &out_dir.join("images").join(format!("{uuid}.{}", doc.image.format.extension())),
                &image,
            )?;
            summary.copied_sketches += 1;
        }
    }
    Ok(summary)
}
