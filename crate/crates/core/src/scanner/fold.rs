use serde::{Deserialize, Serialize};

use super::{LineRange, SourceAnchorOccurrence, Span};
use crate::anchor::AnchorId;

/// Placeholder an editor shows in place of a folded tag or comment.
pub const FOLD_LABEL: &str = "[sketchlink]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldKind {
    Tag,
    Comment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub kind: FoldKind,
    pub span: Span,
    pub lines: LineRange,
    pub label: String,
    /// Set for tag folds.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub anchor: Option<AnchorId>,
}

/// Editor folds for the occurrences of one file: one per tag, plus one
/// covering each comment that holds nothing but tags. Comment folds come
/// before the tag folds they contain.
pub fn fold_ranges(occurrences: &[SourceAnchorOccurrence]) -> Vec<Fold> {
    let mut folds = Vec::new();
    let mut seen_comments: Vec<Span> = Vec::new();
    for occ in occurrences {
        if occ.hide_whole_comment && !seen_comments.contains(&occ.comment_span) {
            seen_comments.push(occ.comment_span);
            folds.push(Fold {
                kind: FoldKind::Comment,
                span: occ.comment_span,
                lines: occ.comment_lines,
                label: FOLD_LABEL.to_string(),
                anchor: None,
            });
        }
        folds.push(Fold {
            kind: FoldKind::Tag,
            span: occ.tag_span,
            lines: LineRange::single(occ.tag_line),
            label: FOLD_LABEL.to_string(),
            anchor: Some(occ.anchor),
        });
    }
    folds.sort_by(|a, b| a.span.start.cmp(&b.span.start).then(b.span.end.cmp(&a.span.end)));
    folds
}
