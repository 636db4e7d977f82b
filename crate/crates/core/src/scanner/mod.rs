//! Finding `@sketchlink` anchor tags in source comments and working out
//! which code element each one refers to.
//!
//! A tag is `@sketchlink <anchor>` anywhere inside a comment. Tags in string
//! literals or plain code are ignored. A tag whose anchor does not parse, or
//! is not a source-code anchor, is reported as a warning.
//!
//! Referent rules, in order:
//!
//! 1. Code before the comment on its first line: the referent is that line.
//! 2. Code after the comment on its last line: the declaration starting
//!    there, otherwise that line.
//! 3. Otherwise the next code after the comment (blank lines and other
//!    comments skipped): the declaration it starts, otherwise its line. A
//!    closing brace means the comment ends a block, so the enclosing
//!    declaration is used.
//! 4. Nothing follows: the whole file.

mod edit;
mod fold;
mod java;
mod lexer;
mod profile;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anchor::{AnchorId, AnchorKind};
use lexer::{Comment, CommentKind, Lexed};

pub use edit::{insert_anchor, remove_anchor, EditError};
pub use fold::{fold_ranges, Fold, FoldKind, FOLD_LABEL};
pub use profile::{DeclarationRules, LanguageProfile, ProfileSet};
pub use tree::{
    index_file, scan_tree, FileEntry, IgnoreRules, IGNORE_FILE, IndexedAnchor, ProjectIndex, ScanIssue, ScanReport,
    SCAN_REPORT_SCHEMA,
};

/// The tag keyword, including the leading `@`.
pub const TAG: &str = "@sketchlink";

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("{path}: not valid UTF-8 (byte {offset})")]
    Encoding { path: String, offset: usize },
    #[error("project root {0} does not exist or is not a directory")]
    RootMissing(std::path::PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Half-open byte range into the file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// 1-based inclusive line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LineRange {
    pub start: usize,
    pub end: usize,
}

impl LineRange {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        LineRange { start, end }
    }

    pub fn single(line: usize) -> Self {
        LineRange { start: line, end: line }
    }

    pub fn contains_line(&self, line: usize) -> bool {
        self.start <= line && line <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceAnchorOccurrence {
    pub anchor: AnchorId,
    /// Project-relative path with `/` separators.
    pub file: String,
    pub tag_line: usize,
    /// 1-based byte column of the `@` of the tag.
    pub tag_column: usize,
    /// `@sketchlink <anchor>`.
    pub tag_span: Span,
    pub comment_span: Span,
    pub comment_lines: LineRange,
    /// The comment holds nothing but anchor tags.
    pub hide_whole_comment: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferentKind {
    Class,
    Interface,
    Enum,
    Method,
    Constructor,
    Field,
    StatementLine,
    File,
}

impl ReferentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ReferentKind::Class => "class",
            ReferentKind::Interface => "interface",
            ReferentKind::Enum => "enum",
            ReferentKind::Method => "method",
            ReferentKind::Constructor => "constructor",
            ReferentKind::Field => "field",
            ReferentKind::StatementLine => "statement_line",
            ReferentKind::File => "file",
        }
    }

    /// Types and callables, the elements generated API docs are organized by.
    pub fn is_type_or_callable(self) -> bool {
        matches!(
            self,
            ReferentKind::Class
                | ReferentKind::Interface
                | ReferentKind::Enum
                | ReferentKind::Method
                | ReferentKind::Constructor
        )
    }
}

impl std::fmt::Display for ReferentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The code element an anchor denotes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Referent {
    pub kind: ReferentKind,
    pub name: String,
    pub lines: LineRange,
    /// Dotted logical path such as `pkg.Class.method`; empty when unknown.
    pub artifact_path: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanWarning {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileScan {
    pub occurrences: Vec<SourceAnchorOccurrence>,
    pub warnings: Vec<ScanWarning>,
}

/// Decodes `bytes` as UTF-8 and scans them.
pub fn scan_bytes(bytes: &[u8], path: &str, profile: &LanguageProfile) -> Result<FileScan, ScanError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ScanError::Encoding {
        path: path.to_string(),
        offset: e.valid_up_to(),
    })?;
    Ok(scan_file(text, path, profile))
}

/// Every well-formed anchor tag inside a comment, in document order.
pub fn scan_file(text: &str, path: &str, profile: &LanguageProfile) -> FileScan {
    let lexed = lexer::lex(text, profile);
    scan_lexed(text, path, &lexed)
}

fn scan_lexed(text: &str, path: &str, lexed: &Lexed) -> FileScan {
    let mut out = FileScan::default();
    for comment in &lexed.comments {
        let tags = find_tags(text, comment);
        if tags.is_empty() {
            continue;
        }
        let valid: Vec<Span> = tags.iter().filter(|t| t.anchor.is_ok()).map(|t| t.span).collect();
        let hide = comment_is_tag_only(text, comment, &valid);
        for tag in tags {
            let line = lexed.lines.line_of(tag.span.start);
            let column = lexed.lines.column_of(tag.span.start);
            match tag.anchor {
                Ok(anchor) => out.occurrences.push(SourceAnchorOccurrence {
                    anchor,
                    file: path.to_string(),
                    tag_line: line,
                    tag_column: column,
                    tag_span: tag.span,
                    comment_span: Span::new(comment.start, comment.end),
                    comment_lines: LineRange::new(comment.start_line, comment.end_line),
                    hide_whole_comment: hide,
                }),
                Err(message) => out.warnings.push(ScanWarning { line, column, message }),
            }
        }
    }
    out
}

struct RawTag {
    span: Span,
    anchor: Result<AnchorId, String>,
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

fn find_tags(text: &str, comment: &Comment) -> Vec<RawTag> {
    let body = &text[comment.body_start..comment.body_end];
    let bytes = body.as_bytes();
    let mut tags = Vec::new();
    let mut from = 0;
    while let Some(at) = body[from..].find(TAG) {
        let start = from + at;
        let after = start + TAG.len();
        from = after;
        if start > 0 && is_word_byte(bytes[start - 1]) {
            continue;
        }
        match bytes.get(after) {
            None | Some(b'\n') | Some(b'\r') => {
                tags.push(RawTag {
                    span: Span::new(comment.body_start + start, comment.body_start + after),
                    anchor: Err(format!("{TAG} tag without an anchor id")),
                });
                continue;
            }
            Some(b' ') | Some(b'\t') => {}
            Some(_) => continue,
        }
        let id_start = after + body[after..].len() - body[after..].trim_start_matches([' ', '\t']).len();
        let id_end = body[id_start..]
            .find(|c: char| c.is_whitespace())
            .map(|i| id_start + i)
            .unwrap_or(body.len());
        let raw = &body[id_start..id_end];
        let anchor = if raw.is_empty() {
            Err(format!("{TAG} tag without an anchor id"))
        } else {
            match AnchorId::parse(raw) {
                Ok(id) if id.kind() == AnchorKind::SourceCode => Ok(id),
                Ok(id) => Err(format!("{TAG} tag carries a {} anchor `{id}`", id.kind())),
                Err(e) => Err(e.to_string()),
            }
        };
        let end = if raw.is_empty() { after } else { id_end };
        tags.push(RawTag {
            span: Span::new(comment.body_start + start, comment.body_start + end),
            anchor,
        });
        from = end;
    }
    tags
}

/// True when the comment body holds nothing besides `tags` and decoration
/// (whitespace and leading `*` on block-comment lines).
fn comment_is_tag_only(text: &str, comment: &Comment, tags: &[Span]) -> bool {
    if tags.is_empty() {
        return false;
    }
    let mut residue = String::new();
    let mut cursor = comment.body_start;
    for tag in tags {
        residue.push_str(&text[cursor..tag.start]);
        residue.push('\n');
        cursor = tag.end;
    }
    residue.push_str(&text[cursor..comment.body_end]);
    residue.lines().all(|line| {
        let line = line.trim();
        let line = if comment.kind == CommentKind::Line {
            line
        } else {
            line.trim_start_matches('*').trim()
        };
        line.is_empty()
    })
}

/// Finds the referent of `occurrence`, which must come from scanning `text`
/// with the same profile.
pub fn resolve_referent(text: &str, occurrence: &SourceAnchorOccurrence, profile: &LanguageProfile) -> Referent {
    let analysis = Analysis::new(text, profile);
    analysis.referent(occurrence.tag_span.start, &occurrence.file)
}

/// Lexed file plus its declaration outline; shared by the scanner entry
/// points so a file is only lexed once.
pub(crate) struct Analysis<'t> {
    text: &'t str,
    lexed: Lexed,
    package: Option<String>,
    declarations: Vec<java::Declaration>,
}

impl<'t> Analysis<'t> {
    pub(crate) fn new(text: &'t str, profile: &LanguageProfile) -> Self {
        let lexed = lexer::lex(text, profile);
        let (package, declarations) = match profile.declarations {
            DeclarationRules::Java => {
                let outline = java::outline(text, &lexed);
                (outline.package, outline.declarations)
            }
            DeclarationRules::None => (None, Vec::new()),
        };
        Analysis {
            text,
            lexed,
            package,
            declarations,
        }
    }

    pub(crate) fn scan(&self, path: &str) -> FileScan {
        scan_lexed(self.text, path, &self.lexed)
    }

    pub(crate) fn declarations(&self) -> Vec<Referent> {
        let mut out: Vec<Referent> = self.declarations.iter().map(to_referent).collect();
        out.sort_by(|a, b| a.lines.start.cmp(&b.lines.start).then(b.lines.end.cmp(&a.lines.end)));
        out
    }

    pub(crate) fn line_count(&self) -> usize {
        self.lexed.lines.line_count()
    }

    fn declaration_starting_at(&self, token: usize) -> Option<&java::Declaration> {
        self.declarations.iter().find(|d| d.first_token == token)
    }

    fn innermost_enclosing(&self, token: usize) -> Option<&java::Declaration> {
        self.declarations
            .iter()
            .filter(|d| d.first_token < token && token <= d.last_token)
            .min_by_key(|d| d.last_token - d.first_token)
    }

    fn statement_line(&self, line: usize, token: usize) -> Referent {
        Referent {
            kind: ReferentKind::StatementLine,
            name: String::new(),
            lines: LineRange::single(line),
            artifact_path: self
                .innermost_enclosing(token)
                .map(|d| d.artifact_path.clone())
                .unwrap_or_default(),
        }
    }

    fn whole_file(&self, path: &str) -> Referent {
        let name = path.rsplit('/').next().unwrap_or(path).to_string();
        Referent {
            kind: ReferentKind::File,
            name,
            lines: LineRange::new(1, self.line_count().max(1)),
            artifact_path: self.package.clone().unwrap_or_default(),
        }
    }

    /// Referent of the tag at byte `tag_start`.
    pub(crate) fn referent(&self, tag_start: usize, path: &str) -> Referent {
        let tokens = &self.lexed.tokens;
        let Some(comment) = self.lexed.comment_at(tag_start) else {
            return self.whole_file(path);
        };

        let next = self.lexed.first_token_from(comment.end);
        if let Some(prev) = next.checked_sub(1) {
            let t = tokens[prev];
            if t.line == comment.start_line && t.end <= comment.start {
                return self.statement_line(t.line, prev);
            }
        }
        let Some(&t) = tokens.get(next) else {
            return self.whole_file(path);
        };
        if t.is_punct(b'}') {
            return self
                .innermost_enclosing(next)
                .map(to_referent)
                .unwrap_or_else(|| self.whole_file(path));
        }
        if let Some(decl) = self.declaration_starting_at(next) {
            return to_referent(decl);
        }
        self.statement_line(t.line, next)
    }
}

fn to_referent(d: &java::Declaration) -> Referent {
    Referent {
        kind: d.kind,
        name: d.name.clone(),
        lines: d.lines,
        artifact_path: d.artifact_path.clone(),
    }
}
