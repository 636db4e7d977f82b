use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use ignore::overrides::OverrideBuilder;
use ignore::WalkBuilder;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fold_ranges, Analysis, Fold, ProfileSet, Referent, ScanError, ScanWarning, SourceAnchorOccurrence};
use crate::anchor::AnchorId;

/// Per-project ignore file, same syntax as `.gitignore`.
pub const IGNORE_FILE: &str = ".sketchlinkignore";

/// Schema tag of the `scan --json` document.
pub const SCAN_REPORT_SCHEMA: &str = "sketchlink.scan/1";

#[derive(Debug, Clone)]
pub struct IgnoreRules {
    /// Honor `.gitignore`, `.git/info/exclude` and `.ignore` files.
    pub vcs: bool,
    pub hidden: bool,
    /// Extra gitignore-style globs, relative to the root.
    pub globs: Vec<String>,
}

impl Default for IgnoreRules {
    fn default() -> Self {
        IgnoreRules {
            vcs: true,
            hidden: false,
            globs: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexedAnchor {
    #[serde(flatten)]
    pub occurrence: SourceAnchorOccurrence,
    pub referent: Referent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub profile: String,
    pub line_count: usize,
    pub declarations: Vec<Referent>,
    pub anchors: Vec<IndexedAnchor>,
    pub folds: Vec<Fold>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<ScanWarning>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanIssue {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectIndex {
    pub project_name: String,
    pub root: PathBuf,
    pub scanned_at: DateTime<Utc>,
    /// Sorted by path.
    pub files: Vec<FileEntry>,
    pub errors: Vec<ScanIssue>,
}

impl ProjectIndex {
    pub fn anchors(&self) -> impl Iterator<Item = (&FileEntry, &IndexedAnchor)> {
        self.files.iter().flat_map(|f| f.anchors.iter().map(move |a| (f, a)))
    }

    pub fn find(&self, anchor: &AnchorId) -> Option<(&FileEntry, &IndexedAnchor)> {
        self.anchors().find(|(_, a)| a.occurrence.anchor == *anchor)
    }

    pub fn contains(&self, anchor: &AnchorId) -> bool {
        self.find(anchor).is_some()
    }

    pub fn file(&self, path: &str) -> Option<&FileEntry> {
        self.files
            .binary_search_by(|f| f.path.as_str().cmp(path))
            .ok()
            .map(|i| &self.files[i])
    }

    /// Replaces (or adds, or with `None` drops) one file entry.
    pub fn replace_file(&mut self, path: &str, entry: Option<FileEntry>) {
        match (self.files.binary_search_by(|f| f.path.as_str().cmp(path)), entry) {
            (Ok(i), Some(e)) => self.files[i] = e,
            (Ok(i), None) => {
                self.files.remove(i);
            }
            (Err(i), Some(e)) => self.files.insert(i, e),
            (Err(_), None) => {}
        }
    }

    pub fn occurrence_count(&self) -> usize {
        self.files.iter().map(|f| f.anchors.len()).sum()
    }
}

/// The stable, timestamp-free document printed by `scan --json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanReport {
    pub schema: String,
    pub project: String,
    pub files: Vec<FileEntry>,
    pub errors: Vec<ScanIssue>,
}

impl From<&ProjectIndex> for ScanReport {
    fn from(index: &ProjectIndex) -> Self {
        ScanReport {
            schema: SCAN_REPORT_SCHEMA.to_string(),
            project: index.project_name.clone(),
            files: index.files.clone(),
            errors: index.errors.clone(),
        }
    }
}

fn relative_slash_path(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Analyzes one file's text into an index entry.
pub fn index_file(text: &str, path: &str, profile: &super::LanguageProfile) -> FileEntry {
    let analysis = Analysis::new(text, profile);
    let scan = analysis.scan(path);
    let folds = fold_ranges(&scan.occurrences);
    let anchors = scan
        .occurrences
        .into_iter()
        .map(|occurrence| {
            let referent = analysis.referent(occurrence.tag_span.start, path);
            IndexedAnchor { occurrence, referent }
        })
        .collect();
    FileEntry {
        path: path.to_string(),
        profile: profile.name.clone(),
        line_count: analysis.line_count(),
        declarations: analysis.declarations(),
        anchors,
        folds,
        warnings: scan.warnings,
    }
}

/// Walks `root`, scanning every file some profile claims.
///
/// Unreadable or non-UTF-8 files are recorded in `errors` and skipped.
pub fn scan_tree(
    root: &Path,
    project_name: Option<&str>,
    profiles: &ProfileSet,
    rules: &IgnoreRules,
) -> Result<ProjectIndex, ScanError> {
    if !root.is_dir() {
        return Err(ScanError::RootMissing(root.to_path_buf()));
    }
    let mut errors = Vec::new();

    let mut builder = WalkBuilder::new(root);
    builder
        .hidden(!rules.hidden)
        .git_ignore(rules.vcs)
        .git_exclude(rules.vcs)
        .git_global(false)
        .ignore(rules.vcs)
        .require_git(false)
        .parents(false)
        .add_custom_ignore_filename(IGNORE_FILE)
        .sort_by_file_name(|a, b| a.cmp(b));
    if !rules.globs.is_empty() {
        let mut overrides = OverrideBuilder::new(root);
        for glob in &rules.globs {
            let negated = format!("!{}", glob.trim_start_matches('!'));
            if let Err(e) = overrides.add(&negated) {
                errors.push(ScanIssue {
                    path: glob.clone(),
                    message: format!("bad ignore glob: {e}"),
                });
            }
        }
        match overrides.build() {
            Ok(o) => {
                builder.overrides(o);
            }
            Err(e) => errors.push(ScanIssue {
                path: String::new(),
                message: format!("bad ignore globs: {e}"),
            }),
        }
    }

    let mut candidates = Vec::new();
    for entry in builder.build() {
        match entry {
            Ok(entry) => {
                if entry.file_type().is_some_and(|t| t.is_file()) && profiles.for_path(entry.path()).is_some() {
                    candidates.push(entry.into_path());
                }
            }
            Err(e) => errors.push(ScanIssue {
                path: String::new(),
                message: e.to_string(),
            }),
        }
    }

    let results: Vec<Result<FileEntry, ScanIssue>> = candidates
        .par_iter()
        .map(|path| {
            let rel = relative_slash_path(root, path);
            let profile = profiles.for_path(path).expect("filtered above");
            let bytes = std::fs::read(path).map_err(|e| ScanIssue {
                path: rel.clone(),
                message: e.to_string(),
            })?;
            let text = std::str::from_utf8(&bytes).map_err(|e| ScanIssue {
                path: rel.clone(),
                message: format!("not valid UTF-8 (byte {})", e.valid_up_to()),
            })?;
            Ok(index_file(text, &rel, profile))
        })
        .collect();

    let mut files = Vec::new();
    for r in results {
        match r {
            Ok(f) => files.push(f),
            Err(issue) => errors.push(issue),
        }
    }
    files.sort_by(|a, b| a.path.cmp(&b.path));

    let project_name = project_name.map(str::to_string).unwrap_or_else(|| {
        root.canonicalize()
            .ok()
            .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .unwrap_or_else(|| "project".to_string())
    });

    Ok(ProjectIndex {
        project_name,
        root: root.to_path_buf(),
        scanned_at: Utc::now(),
        files,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    const A: &str = "0123e4567-e89b-12d3-a456-426614174000";
    const B: &str = "0aaaaaaaa-bbbb-4ccc-8ddd-eeeeeeeeeeee";
    const C: &str = "0bbbbbbbb-bbbb-4ccc-8ddd-eeeeeeeeeeee";

    fn write(root: &Path, rel: &str, text: &str) {
        let p = root.join(rel);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, text).unwrap();
    }

    #[test]
    fn counts_files_and_anchors() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "src/A.java", &format!("/** @sketchlink {A} */\nclass A {{\n  // @sketchlink {B}\n  void f() {{}}\n}}\n"));
        write(dir.path(), "src/b/B.java", &format!("class B {{ int x; /* @sketchlink {C} */ }}\n"));
        write(dir.path(), "notes.txt", &format!("// @sketchlink {A}\n"));
        let index = scan_tree(dir.path(), Some("demo"), &ProfileSet::builtin(), &IgnoreRules::default()).unwrap();
        assert_eq!(index.files.len(), 2);
        assert_eq!(index.occurrence_count(), 3);
        assert_eq!(index.files[0].path, "src/A.java");
        assert_eq!(index.files[1].path, "src/b/B.java");
        assert_eq!(index.project_name, "demo");
        assert!(index.file("src/b/B.java").is_some());
    }

    #[test]
    fn empty_directory() {
        let dir = tempfile::tempdir().unwrap();
        let index = scan_tree(dir.path(), None, &ProfileSet::builtin(), &IgnoreRules::default()).unwrap();
        assert!(index.files.is_empty());
        assert!(index.errors.is_empty());
    }

    #[test]
    fn missing_root() {
        let err = scan_tree(Path::new("/no/such/dir"), None, &ProfileSet::builtin(), &IgnoreRules::default());
        assert!(matches!(err, Err(ScanError::RootMissing(_))));
    }

    #[test]
    fn honors_gitignore_and_globs() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), ".gitignore", "build/\n");
        write(dir.path(), "build/Gen.java", &format!("/** @sketchlink {A} */ class Gen {{}}\n"));
        write(dir.path(), "gen/Out.java", &format!("/** @sketchlink {B} */ class Out {{}}\n"));
        write(dir.path(), "src/Main.java", "class Main {}\n");
        let rules = IgnoreRules {
            globs: vec!["gen/".into()],
            ..IgnoreRules::default()
        };
        let index = scan_tree(dir.path(), None, &ProfileSet::builtin(), &rules).unwrap();
        assert_eq!(index.occurrence_count(), 0);
        assert_eq!(index.files.len(), 1);
    }

    #[test]
    fn bad_encoding_is_collected() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("Bad.java"), b"class Bad { \xff }").unwrap();
        write(dir.path(), "Good.java", "class Good {}\n");
        let index = scan_tree(dir.path(), None, &ProfileSet::builtin(), &IgnoreRules::default()).unwrap();
        assert_eq!(index.files.len(), 1);
        assert_eq!(index.errors.len(), 1);
        assert_eq!(index.errors[0].path, "Bad.java");
    }
}
