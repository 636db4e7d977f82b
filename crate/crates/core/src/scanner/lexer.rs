//! A small comment-aware lexer.
//!
//! It only needs to tell comments, literals and code apart and to split code
//! into identifiers and single-byte punctuation; everything else about the
//! language is left to the declaration heuristics.

use super::profile::LanguageProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum CommentKind {
    Doc,
    Block,
    Line,
}

#[derive(Debug, Clone)]
pub(crate) struct Comment {
    pub kind: CommentKind,
    pub start: usize,
    pub end: usize,
    /// Text between the delimiters (for line comments, up to the line end).
    pub body_start: usize,
    pub body_end: usize,
    pub start_line: usize,
    pub end_line: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TokenKind {
    Ident,
    Literal,
    Punct(u8),
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Token {
    pub kind: TokenKind,
    pub start: usize,
    pub end: usize,
    pub line: usize,
}

impl Token {
    pub fn is_punct(&self, c: u8) -> bool {
        self.kind == TokenKind::Punct(c)
    }

    pub fn text<'t>(&self, src: &'t str) -> &'t str {
        &src[self.start..self.end]
    }
}

/// Byte offsets of line starts.
#[derive(Debug, Clone)]
pub(crate) struct LineIndex {
    starts: Vec<usize>,
    len: usize,
}

impl LineIndex {
    pub fn new(text: &str) -> Self {
        let mut starts = vec![0];
        starts.extend(text.bytes().enumerate().filter(|&(_, b)| b == b'\n').map(|(i, _)| i + 1));
        LineIndex { starts, len: text.len() }
    }

    pub fn line_count(&self) -> usize {
        let last = *self.starts.last().unwrap();
        if last == self.len {
            self.starts.len() - 1
        } else {
            self.starts.len()
        }
    }

    /// 1-based line containing `offset`.
    pub fn line_of(&self, offset: usize) -> usize {
        self.starts.partition_point(|&s| s <= offset)
    }

    pub fn line_start(&self, line: usize) -> usize {
        self.starts[line - 1]
    }

    /// Offset just past the line terminator (or end of text).
    pub fn line_end_inclusive(&self, line: usize) -> usize {
        self.starts.get(line).copied().unwrap_or(self.len)
    }

    /// Offset of the line terminator (excluding `\r\n` / `\n`).
    pub fn line_end(&self, text: &str, line: usize) -> usize {
        let mut end = self.line_end_inclusive(line);
        let b = text.as_bytes();
        if end > self.line_start(line) && b[end - 1] == b'\n' {
            end -= 1;
            if end > self.line_start(line) && b[end - 1] == b'\r' {
                end -= 1;
            }
        }
        end
    }

    /// 1-based byte column of `offset`.
    pub fn column_of(&self, offset: usize) -> usize {
        offset - self.line_start(self.line_of(offset)) + 1
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Lexed {
    pub comments: Vec<Comment>,
    pub tokens: Vec<Token>,
    pub lines: LineIndex,
}

impl Lexed {
    /// Comment whose extent covers `offset`.
    pub fn comment_at(&self, offset: usize) -> Option<&Comment> {
        let i = self.comments.partition_point(|c| c.start <= offset);
        i.checked_sub(1)
            .map(|i| &self.comments[i])
            .filter(|c| offset < c.end)
    }

    /// Index of the first code token starting at or after `offset`.
    pub fn first_token_from(&self, offset: usize) -> usize {
        self.tokens.partition_point(|t| t.start < offset)
    }

    /// True when `offset` falls strictly inside a comment or a literal.
    pub fn is_inside_comment_or_literal(&self, offset: usize) -> bool {
        if self.comment_at(offset).is_some_and(|c| c.start < offset) {
            return true;
        }
        let i = self.tokens.partition_point(|t| t.start < offset);
        i.checked_sub(1)
            .map(|i| self.tokens[i])
            .is_some_and(|t| t.kind == TokenKind::Literal && offset < t.end)
    }
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$' || b >= 0x80
}

pub(crate) fn lex(text: &str, profile: &LanguageProfile) -> Lexed {
    let lines = LineIndex::new(text);
    let b = text.as_bytes();
    let n = b.len();
    let rest = |i: usize| &text[i..];
    let mut comments = Vec::new();
    let mut tokens = Vec::new();
    let mut i = 0;

    while i < n {
        let c = b[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }

        if let Some(comment) = lex_comment(text, i, profile) {
            i = comment.end;
            comments.push(Comment {
                start_line: lines.line_of(comment.start),
                end_line: lines.line_of(comment.end.saturating_sub(1).max(comment.start)),
                ..comment
            });
            continue;
        }

        let start = i;
        let kind = if c < 0x80 && profile.string_quotes.contains(&(c as char)) {
            let triple = [c; 3];
            if profile.text_blocks && rest(i).as_bytes().starts_with(&triple) {
                i = skip_quoted(b, i + 3, &triple, false);
            } else {
                i = skip_quoted(b, i + 1, &[c], true);
            }
            TokenKind::Literal
        } else if c == b'\'' && profile.char_literals {
            match char_literal_end(text, i) {
                Some(end) => {
                    i = end;
                    TokenKind::Literal
                }
                None => {
                    i += 1;
                    TokenKind::Punct(c)
                }
            }
        } else if is_ident_byte(c) {
            while i < n && is_ident_byte(b[i]) {
                i += 1;
            }
            if c.is_ascii_digit() {
                TokenKind::Literal
            } else {
                TokenKind::Ident
            }
        } else {
            i += 1;
            TokenKind::Punct(c)
        };
        tokens.push(Token {
            kind,
            start,
            end: i,
            line: lines.line_of(start),
        });
    }

    Lexed { comments, tokens, lines }
}

fn lex_comment(text: &str, i: usize, profile: &LanguageProfile) -> Option<Comment> {
    let rest = &text[i..];
    let block = |kind, open: &str, close: &str, search_from: usize| {
        let body_start = i + open.len();
        let (body_end, end) = match text[search_from..].find(close) {
            Some(at) => (search_from + at, search_from + at + close.len()),
            None => (text.len(), text.len()),
        };
        Comment {
            kind,
            start: i,
            end,
            body_start,
            body_end: body_end.max(body_start),
            start_line: 0,
            end_line: 0,
        }
    };

    if let Some((open, close)) = &profile.doc_comment {
        let empty_block = profile
            .block_comment
            .as_ref()
            .is_some_and(|(bo, bc)| rest.starts_with(&format!("{bo}{bc}")));
        if rest.starts_with(open.as_str()) && !empty_block {
            return Some(block(CommentKind::Doc, open, close, i + open.len()));
        }
    }
    if let Some((open, close)) = &profile.block_comment {
        if rest.starts_with(open.as_str()) {
            return Some(block(CommentKind::Block, open, close, i + open.len()));
        }
    }
    if let Some(prefix) = &profile.line_comment {
        if rest.starts_with(prefix.as_str()) {
            let end = rest.find('\n').map(|at| i + at).unwrap_or(text.len());
            let body_end = if end > i && text.as_bytes()[end - 1] == b'\r' { end - 1 } else { end };
            let body_start = i + prefix.len();
            return Some(Comment {
                kind: CommentKind::Line,
                start: i,
                end: body_end,
                body_start,
                body_end: body_end.max(body_start),
                start_line: 0,
                end_line: 0,
            });
        }
    }
    None
}

/// Returns the offset past the closing delimiter, or the end of the
/// line/text when the literal is unterminated.
fn skip_quoted(b: &[u8], mut i: usize, close: &[u8], stop_at_newline: bool) -> usize {
    while i < b.len() {
        if b[i] == b'\\' {
            i += 2;
            continue;
        }
        if stop_at_newline && b[i] == b'\n' {
            return i;
        }
        if b[i..].starts_with(close) {
            return i + close.len();
        }
        i += 1;
    }
    b.len()
}

fn char_literal_end(text: &str, i: usize) -> Option<usize> {
    let b = text.as_bytes();
    let j = i + 1;
    if j >= b.len() || b[j] == b'\n' || b[j] == b'\'' {
        return None;
    }
    if b[j] == b'\\' {
        // escapes such as '\n', '\'', 'A'
        let limit = (j + 8).min(b.len());
        return (j + 2..limit).find(|&k| b[k] == b'\'').map(|k| k + 1);
    }
    let ch_len = text[j..].chars().next()?.len_utf8();
    (b.get(j + ch_len) == Some(&b'\'')).then_some(j + ch_len + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn java(text: &str) -> Lexed {
        lex(text, &LanguageProfile::java())
    }

    #[test]
    fn line_index_counts() {
        assert_eq!(LineIndex::new("").line_count(), 0);
        assert_eq!(LineIndex::new("a").line_count(), 1);
        assert_eq!(LineIndex::new("a\n").line_count(), 1);
        assert_eq!(LineIndex::new("a\nb").line_count(), 2);
        let idx = LineIndex::new("ab\r\ncd\n");
        assert_eq!(idx.line_of(0), 1);
        assert_eq!(idx.line_of(4), 2);
        assert_eq!(idx.line_end("ab\r\ncd\n", 1), 2);
        assert_eq!(idx.line_end_inclusive(1), 4);
    }

    #[test]
    fn distinguishes_comment_kinds() {
        let l = java("/** doc */ /* block */ /**/ // line\nx");
        let kinds: Vec<_> = l.comments.iter().map(|c| c.kind).collect();
        assert_eq!(
            kinds,
            [CommentKind::Doc, CommentKind::Block, CommentKind::Block, CommentKind::Line]
        );
        assert_eq!(l.tokens.len(), 1);
    }

    #[test]
    fn comment_markers_in_strings_are_code() {
        let src = "String s = \"/* @sketchlink */\"; char c = '\"'; // real";
        let l = java(src);
        assert_eq!(l.comments.len(), 1);
        assert_eq!(&src[l.comments[0].body_start..l.comments[0].body_end], " real");
    }

    #[test]
    fn text_blocks_span_lines() {
        let src = "String s = \"\"\"\n  /* not a comment */\n  \"\"\";\n";
        let l = java(src);
        assert!(l.comments.is_empty());
        assert!(l.is_inside_comment_or_literal(src.find("/*").unwrap()));
    }

    #[test]
    fn unterminated_block_runs_to_end() {
        let l = java("int x; /* open");
        assert_eq!(l.comments[0].end, 14);
    }

    #[test]
    fn lifetimes_are_not_char_literals() {
        let l = lex("fn f<'a>(x: &'a str) -> char { 'x' }", &LanguageProfile::generic());
        let literals = l.tokens.iter().filter(|t| t.kind == TokenKind::Literal).count();
        assert_eq!(literals, 1);
    }
}
