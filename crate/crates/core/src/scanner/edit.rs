//! Inserting and removing anchor tags in source text.
//!
//! Both edits touch only the bytes of the tag (plus the line or comment it
//! lives in when that becomes empty), so `remove_anchor` undoes
//! `insert_anchor` byte for byte.

use thiserror::Error;

use super::lexer::{lex, Comment, CommentKind, Lexed};
use super::{comment_is_tag_only, find_tags, scan_file, LanguageProfile, SourceAnchorOccurrence, Span, TAG};
use crate::anchor::{AnchorId, AnchorKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EditError {
    #[error("line {line} is outside the file (1..={line_count})")]
    LineOutOfRange { line: usize, line_count: usize },
    #[error("anchor {0} is already present in the file")]
    DuplicateAnchor(AnchorId),
    #[error("anchor {0} not found")]
    AnchorNotFound(AnchorId),
    #[error("anchor {0} is not a source-code anchor")]
    WrongKind(AnchorId),
    #[error("line {0} starts inside a comment or string literal")]
    InsideCommentOrLiteral(usize),
}

fn newline_of(text: &str) -> &'static str {
    if text.contains("\r\n") {
        "\r\n"
    } else {
        "\n"
    }
}

fn leading_ws(s: &str) -> &str {
    &s[..s.len() - s.trim_start_matches([' ', '\t']).len()]
}

fn has_code_between(lexed: &Lexed, from: usize, to: usize) -> bool {
    let i = lexed.first_token_from(from);
    lexed.tokens.get(i).is_some_and(|t| t.start < to)
        || lexed.comments.iter().any(|c| c.start >= from && c.start < to)
}

/// Inserts a tag for `anchor` so that it refers to the element at `line`.
///
/// A documentation comment that ends on the line directly above and holds
/// some content gets the tag appended; otherwise a new comment containing
/// only the tag is placed above `line`.
pub fn insert_anchor(
    text: &str,
    line: usize,
    anchor: AnchorId,
    profile: &LanguageProfile,
) -> Result<(String, SourceAnchorOccurrence), EditError> {
    if anchor.kind() != AnchorKind::SourceCode {
        return Err(EditError::WrongKind(anchor));
    }
    let lexed = lex(text, profile);
    let line_count = lexed.lines.line_count();
    if line == 0 || line > line_count {
        return Err(EditError::LineOutOfRange { line, line_count });
    }
    let existing = scan_file(text, "", profile);
    if existing.occurrences.iter().any(|o| o.anchor == anchor) {
        return Err(EditError::DuplicateAnchor(anchor));
    }
    let line_start = lexed.lines.line_start(line);
    if lexed.is_inside_comment_or_literal(line_start) {
        return Err(EditError::InsideCommentOrLiteral(line));
    }

    let tag = format!("{TAG} {anchor}");
    let nl = newline_of(text);
    let (at, insertion) = match appendable_doc_comment(text, &lexed, line, profile) {
        Some(doc) => append_to_comment(text, &lexed, doc, profile, &tag, nl),
        None => {
            let line_text = &text[line_start..lexed.lines.line_end(text, line)];
            let indent = leading_ws(line_text);
            (line_start, format!("{indent}{}{nl}", profile.new_tag_comment(&tag)))
        }
    };

    let mut edited = String::with_capacity(text.len() + insertion.len());
    edited.push_str(&text[..at]);
    edited.push_str(&insertion);
    edited.push_str(&text[at..]);

    let occurrence = scan_file(&edited, "", profile)
        .occurrences
        .into_iter()
        .find(|o| o.anchor == anchor)
        .expect("inserted tag is found by the scanner");
    Ok((edited, occurrence))
}

/// A doc comment ending on `line - 1`, alone on its lines, with some content.
fn appendable_doc_comment<'l>(
    text: &str,
    lexed: &'l Lexed,
    line: usize,
    profile: &LanguageProfile,
) -> Option<&'l Comment> {
    profile.doc_comment.as_ref()?;
    let above = line.checked_sub(1).filter(|&l| l >= 1)?;
    let doc = lexed
        .comments
        .iter()
        .rev()
        .find(|c| c.end_line == above && c.kind == CommentKind::Doc)?;
    let close_len = profile.doc_comment.as_ref().map(|(_, c)| c.len()).unwrap_or(0);
    let terminated = text[..doc.end].ends_with(profile.doc_comment.as_ref()?.1.as_str()) && doc.end - close_len >= doc.body_start;
    let alone = !has_code_between(lexed, lexed.lines.line_start(doc.start_line), doc.start)
        && !has_code_between(lexed, doc.end, lexed.lines.line_end_inclusive(above));
    let has_content = !text[doc.body_start..doc.body_end]
        .lines()
        .all(|l| l.trim().trim_start_matches('*').trim().is_empty());
    (terminated && alone && has_content).then_some(doc)
}

fn append_to_comment(
    text: &str,
    lexed: &Lexed,
    doc: &Comment,
    profile: &LanguageProfile,
    tag: &str,
    nl: &str,
) -> (usize, String) {
    let close = profile.doc_comment.as_ref().map(|(_, c)| c.as_str()).unwrap_or("*/");
    let close_at = doc.end - close.len();
    let close_line = lexed.lines.line_of(close_at);
    let close_line_start = lexed.lines.line_start(close_line);
    let before_close = &text[close_line_start..close_at];
    if close_line != doc.start_line && before_close.trim().is_empty() {
        let decoration = if close.starts_with('*') { "* " } else { "" };
        (close_line_start, format!("{before_close}{decoration}{tag}{nl}"))
    } else if text[..close_at].ends_with([' ', '\t']) {
        (close_at, format!("{tag} "))
    } else {
        (close_at, format!(" {tag}"))
    }
}

/// Removes every tag carrying `anchor`. A comment left with nothing but
/// decoration is removed as a whole.
pub fn remove_anchor(text: &str, anchor: AnchorId, profile: &LanguageProfile) -> Result<String, EditError> {
    let mut current = text.to_string();
    let mut removed = false;
    while let Some(occurrence) = scan_file(&current, "", profile)
        .occurrences
        .into_iter()
        .find(|o| o.anchor == anchor)
    {
        current = remove_one(&current, &occurrence, profile);
        removed = true;
    }
    if removed {
        Ok(current)
    } else {
        Err(EditError::AnchorNotFound(anchor))
    }
}

fn remove_one(text: &str, occurrence: &SourceAnchorOccurrence, profile: &LanguageProfile) -> String {
    let lexed = lex(text, profile);
    let comment = lexed
        .comment_at(occurrence.tag_span.start)
        .expect("occurrence lies in a comment")
        .clone();
    let b = text.as_bytes();

    let others: Vec<Span> = find_tags(text, &comment)
        .into_iter()
        .filter(|t| t.anchor.is_ok() && t.span != occurrence.tag_span)
        .map(|t| t.span)
        .collect();
    let remaining_empty = {
        let mut with_this = others.clone();
        with_this.push(occurrence.tag_span);
        with_this.sort();
        others.is_empty() && comment_is_tag_only(text, &comment, &with_this)
    };

    let cut = if remaining_empty {
        let first_line_start = lexed.lines.line_start(comment.start_line);
        let last_line_end = lexed.lines.line_end(text, comment.end_line);
        let alone_before = text[first_line_start..comment.start].trim().is_empty();
        let alone_after = text[comment.end..last_line_end].trim().is_empty();
        if alone_before && alone_after {
            Span::new(first_line_start, lexed.lines.line_end_inclusive(comment.end_line))
        } else if !alone_before {
            let ws = text[first_line_start..comment.start].len()
                - text[first_line_start..comment.start].trim_end_matches([' ', '\t']).len();
            Span::new(comment.start - ws, comment.end)
        } else {
            let ws = text[comment.end..last_line_end].len()
                - text[comment.end..last_line_end].trim_start_matches([' ', '\t']).len();
            Span::new(comment.start, comment.end + ws)
        }
    } else {
        let line = lexed.lines.line_of(occurrence.tag_span.start);
        let line_start = lexed.lines.line_start(line);
        let line_end = lexed.lines.line_end(text, line);
        let prefix = text[line_start..occurrence.tag_span.start].trim();
        let prefix_is_decoration = prefix.is_empty()
            || (comment.kind != CommentKind::Line && prefix.chars().all(|c| c == '*'));
        let suffix_blank = text[occurrence.tag_span.end..line_end].trim().is_empty();
        if line > comment.start_line && line < comment.end_line && prefix_is_decoration && suffix_blank {
            Span::new(line_start, lexed.lines.line_end_inclusive(line))
        } else {
            let Span { start, end } = occurrence.tag_span;
            if matches!(b.get(end), Some(b' ' | b'\t')) {
                Span::new(start, end + 1)
            } else if start > 0 && matches!(b[start - 1], b' ' | b'\t') {
                Span::new(start - 1, end)
            } else {
                Span::new(start, end)
            }
        }
    };

    let mut out = String::with_capacity(text.len());
    out.push_str(&text[..cut.start]);
    out.push_str(&text[cut.end..]);
    out
}
