//! Declaration detection for Java-like sources.
//!
//! This is deliberately not a parser. Type and member boundaries come from
//! brace matching; what a member *is* comes from keywords and the shape of
//! its head (the tokens before the first top-level `{`, `;` or `=`).
//! Method bodies are skipped, so local classes and statements inside them
//! never become declarations.

use super::lexer::{Lexed, Token, TokenKind};
use super::{LineRange, ReferentKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Declaration {
    pub kind: ReferentKind,
    pub name: String,
    /// First token of the declaration (including leading annotations).
    pub first_token: usize,
    pub last_token: usize,
    pub lines: LineRange,
    pub artifact_path: String,
}

pub(crate) struct JavaOutline {
    pub package: Option<String>,
    /// Pre-order: sorted by start, parents before children.
    pub declarations: Vec<Declaration>,
}

const TYPE_KEYWORDS: [&str; 4] = ["class", "interface", "enum", "record"];

pub(crate) fn outline(src: &str, lexed: &Lexed) -> JavaOutline {
    let mut walker = Walker {
        src,
        toks: &lexed.tokens,
        package: None,
        decls: Vec::new(),
    };
    walker.members(0, lexed.tokens.len(), &mut Vec::new(), true, false);
    JavaOutline {
        package: walker.package,
        declarations: walker.decls,
    }
}

struct Walker<'a> {
    src: &'a str,
    toks: &'a [Token],
    package: Option<String>,
    decls: Vec<Declaration>,
}

impl<'a> Walker<'a> {
    fn text(&self, i: usize) -> &'a str {
        self.toks[i].text(self.src)
    }

    fn is_ident(&self, i: usize, word: &str) -> bool {
        self.toks[i].kind == TokenKind::Ident && self.text(i) == word
    }

    fn punct(&self, i: usize, c: u8) -> bool {
        self.toks[i].is_punct(c)
    }

    /// Index of the token closing the bracket opened at `open`, or `end - 1`
    /// when the input is unbalanced.
    fn matching(&self, open: usize, end: usize) -> usize {
        let (o, c) = match self.toks[open].kind {
            TokenKind::Punct(b'{') => (b'{', b'}'),
            TokenKind::Punct(b'(') => (b'(', b')'),
            TokenKind::Punct(b'[') => (b'[', b']'),
            _ => return open,
        };
        let mut depth = 0usize;
        for i in open..end {
            if self.punct(i, o) {
                depth += 1;
            } else if self.punct(i, c) {
                depth -= 1;
                if depth == 0 {
                    return i;
                }
            }
        }
        end.saturating_sub(1).max(open)
    }

    /// First `;` at bracket depth zero, or `end - 1`.
    fn statement_end(&self, from: usize, end: usize) -> usize {
        let mut i = from;
        while i < end {
            match self.toks[i].kind {
                TokenKind::Punct(b';') => return i,
                TokenKind::Punct(b'{') | TokenKind::Punct(b'(') | TokenKind::Punct(b'[') => {
                    i = self.matching(i, end);
                }
                TokenKind::Punct(b'}') => return i.saturating_sub(1).max(from),
                _ => {}
            }
            i += 1;
        }
        end.saturating_sub(1).max(from)
    }

    fn push(&mut self, kind: ReferentKind, name: String, first: usize, last: usize, path: &[String]) {
        let mut segments: Vec<&str> = Vec::new();
        if let Some(pkg) = &self.package {
            segments.push(pkg);
        }
        segments.extend(path.iter().map(String::as_str));
        segments.push(&name);
        let artifact_path = segments.join(".");
        self.decls.push(Declaration {
            kind,
            name,
            first_token: first,
            last_token: last,
            lines: LineRange::new(self.toks[first].line, self.toks[last].line),
            artifact_path,
        });
    }

    /// Walks members in `[i, end)`. Returns the index past the consumed
    /// range (the closing brace of the body, when one is hit).
    fn members(&mut self, mut i: usize, end: usize, path: &mut Vec<String>, top: bool, enum_body: bool) -> usize {
        if enum_body {
            // constants run up to the first top-level `;`
            while i < end && !self.punct(i, b';') && !self.punct(i, b'}') {
                if self.punct(i, b'{') || self.punct(i, b'(') {
                    i = self.matching(i, end);
                }
                i += 1;
            }
        }
        while i < end {
            if self.punct(i, b';') {
                i += 1;
                continue;
            }
            if self.punct(i, b'}') {
                return i;
            }
            if top && (self.is_ident(i, "package") || self.is_ident(i, "import")) {
                let stop = self.statement_end(i, end);
                if self.is_ident(i, "package") {
                    let name: String = (i + 1..stop).map(|k| self.text(k)).collect();
                    self.package = Some(name);
                }
                i = stop + 1;
                continue;
            }
            i = self.member(i, end, path);
        }
        end
    }

    /// Classifies one member starting at `start`; returns the index after it.
    fn member(&mut self, start: usize, end: usize, path: &mut Vec<String>) -> usize {
        // locate the head terminator
        let mut i = start;
        let stop = loop {
            if i >= end {
                return end;
            }
            match self.toks[i].kind {
                TokenKind::Punct(b'{') | TokenKind::Punct(b';') | TokenKind::Punct(b'=') => break i,
                TokenKind::Punct(b'}') => return i,
                TokenKind::Punct(b'(') | TokenKind::Punct(b'[') => i = self.matching(i, end),
                _ => {}
            }
            i += 1;
        };

        let head = self.strip_annotations(start, stop);

        // type declaration
        if let Some(pos) = head.iter().position(|&k| {
            self.toks[k].kind == TokenKind::Ident && TYPE_KEYWORDS.contains(&self.text(k))
        }) {
            let keyword = self.text(head[pos]);
            let name = head
                .get(pos + 1)
                .filter(|&&k| self.toks[k].kind == TokenKind::Ident)
                .map(|&k| self.text(k).to_string())
                .unwrap_or_default();
            let kind = match keyword {
                "interface" => ReferentKind::Interface,
                "enum" => ReferentKind::Enum,
                _ => ReferentKind::Class,
            };
            if !self.punct(stop, b'{') {
                let last = self.statement_end(stop, end);
                self.push(kind, name, start, last, path);
                return last + 1;
            }
            let close = self.matching(stop, end);
            let index = self.decls.len();
            self.push(kind, name.clone(), start, close, path);
            path.push(name);
            self.members(stop + 1, close, path, false, kind == ReferentKind::Enum);
            path.pop();
            debug_assert_eq!(self.decls[index].last_token, close);
            return close + 1;
        }

        // method or constructor: identifier directly before a top-level paren group
        let call = head
            .windows(2)
            .find(|w| self.toks[w[0]].kind == TokenKind::Ident && self.punct(w[1], b'('));
        if let (Some(w), false) = (call, self.punct(stop, b'=')) {
            let name = self.text(w[0]).to_string();
            let is_ctor = path.last() == Some(&name);
            let kind = if is_ctor { ReferentKind::Constructor } else { ReferentKind::Method };
            let last = if self.punct(stop, b'{') { self.matching(stop, end) } else { stop };
            self.push(kind, name, start, last, path);
            return last + 1;
        }

        if self.punct(stop, b'{') {
            // initializer block or something unrecognized
            return self.matching(stop, end) + 1;
        }

        // field
        let last = if self.punct(stop, b';') { stop } else { self.statement_end(stop, end) };
        let name = head
            .iter()
            .rev()
            .find(|&&k| self.toks[k].kind == TokenKind::Ident)
            .map(|&k| self.text(k).to_string());
        let idents = head.iter().filter(|&&k| self.toks[k].kind == TokenKind::Ident).count();
        if let (Some(name), true) = (name, idents >= 2) {
            self.push(ReferentKind::Field, name, start, last, path);
        }
        last + 1
    }

    /// Head token indices with annotations (`@Name`, `@a.b.C(...)`) removed.
    /// Bracketed groups other than annotation arguments are kept as their
    /// opening token only.
    fn strip_annotations(&self, start: usize, stop: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut i = start;
        while i < stop {
            if self.punct(i, b'@') && i + 1 < stop && !self.is_ident(i + 1, "interface") {
                i += 2;
                while i + 1 < stop && self.punct(i, b'.') && self.toks[i + 1].kind == TokenKind::Ident {
                    i += 2;
                }
                if i < stop && self.punct(i, b'(') {
                    i = self.matching(i, stop) + 1;
                }
                continue;
            }
            if self.punct(i, b'@') {
                i += 1;
                continue;
            }
            out.push(i);
            if self.punct(i, b'(') || self.punct(i, b'[') {
                i = self.matching(i, stop);
            }
            i += 1;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::super::lexer::lex;
    use super::super::LanguageProfile;
    use super::*;

    fn decls(src: &str) -> Vec<(ReferentKind, String, usize, usize, String)> {
        let lexed = lex(src, &LanguageProfile::java());
        outline(src, &lexed)
            .declarations
            .into_iter()
            .map(|d| (d.kind, d.name, d.lines.start, d.lines.end, d.artifact_path))
            .collect()
    }

    #[test]
    fn finds_nested_members() {
        let src = "\
package a.b;
import java.util.List;

public class Outer<T> extends Base implements I {
    private static final int LIMIT = 10;
    List<String> names;

    public Outer(int x) {
        super(x);
    }

    @Override
    public String toString() {
        return \"x\";
    }

    interface Inner {
        void run();
    }
}
";
        let d = decls(src);
        assert_eq!(
            d,
            vec![
                (ReferentKind::Class, "Outer".into(), 4, 20, "a.b.Outer".into()),
                (ReferentKind::Field, "LIMIT".into(), 5, 5, "a.b.Outer.LIMIT".into()),
                (ReferentKind::Field, "names".into(), 6, 6, "a.b.Outer.names".into()),
                (ReferentKind::Constructor, "Outer".into(), 8, 10, "a.b.Outer.Outer".into()),
                (ReferentKind::Method, "toString".into(), 12, 15, "a.b.Outer.toString".into()),
                (ReferentKind::Interface, "Inner".into(), 17, 19, "a.b.Outer.Inner".into()),
                (ReferentKind::Method, "run".into(), 18, 18, "a.b.Outer.Inner.run".into()),
            ]
        );
    }

    #[test]
    fn enum_constants_are_skipped() {
        let src = "enum Color {\n  RED(1), GREEN(2) { int x() { return 1; } };\n  private final int v;\n  Color(int v) { this.v = v; }\n}\n";
        let d = decls(src);
        assert_eq!(d[0].0, ReferentKind::Enum);
        assert_eq!(d[1], (ReferentKind::Field, "v".into(), 3, 3, "Color.v".into()));
        assert_eq!(d[2].0, ReferentKind::Constructor);
        assert_eq!(d.len(), 3);
    }

    #[test]
    fn field_initializers_with_lambdas_and_arrays() {
        let src = "class A {\n  Runnable r = () -> {\n    go();\n  };\n  int[] xs = {1, 2};\n  static { init(); }\n  void m() {}\n}\n";
        let d = decls(src);
        assert_eq!(d[1], (ReferentKind::Field, "r".into(), 2, 4, "A.r".into()));
        assert_eq!(d[2], (ReferentKind::Field, "xs".into(), 5, 5, "A.xs".into()));
        assert_eq!(d[3].1, "m");
        assert_eq!(d.len(), 4);
    }

    #[test]
    fn annotation_types_and_generic_methods() {
        let src = "@interface Marker { String value() default \"\"; }\nclass G { <T> T id(T t) throws Exception { return t; } }\n";
        let d = decls(src);
        assert_eq!(d[0].0, ReferentKind::Interface);
        assert_eq!(d[1].1, "value");
        assert_eq!(d[3].1, "id");
        assert_eq!(d[3].0, ReferentKind::Method);
    }
}
