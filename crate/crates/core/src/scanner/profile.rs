use std::path::Path;

use serde::{Deserialize, Serialize};

/// How declarations are discovered for referent resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeclarationRules {
    /// No declaration detection; referents are lines or the whole file.
    None,
    /// Brace matching plus keyword heuristics for Java-like sources.
    Java,
}

/// Comment and literal syntax of one source language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageProfile {
    pub name: String,
    /// File extensions (without the dot) this profile handles.
    pub extensions: Vec<String>,
    pub doc_comment: Option<(String, String)>,
    pub block_comment: Option<(String, String)>,
    pub line_comment: Option<String>,
    pub string_quotes: Vec<char>,
    /// `'x'` is lexed as a literal when well formed; a lone `'` stays punctuation.
    pub char_literals: bool,
    /// Triple-quoted multi-line strings.
    pub text_blocks: bool,
    pub declarations: DeclarationRules,
}

impl LanguageProfile {
    pub fn java() -> Self {
        LanguageProfile {
            name: "java".into(),
            extensions: vec!["java".into()],
            doc_comment: Some(("/**".into(), "*/".into())),
            block_comment: Some(("/*".into(), "*/".into())),
            line_comment: Some("//".into()),
            string_quotes: vec!['"'],
            char_literals: true,
            text_blocks: true,
            declarations: DeclarationRules::Java,
        }
    }

    /// Line-comment fallback for C-family languages.
    pub fn generic() -> Self {
        LanguageProfile {
            name: "generic".into(),
            extensions: [
                "c", "h", "cc", "cpp", "hpp", "cs", "go", "js", "jsx", "ts", "tsx", "kt", "rs",
                "scala", "swift", "dart",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            doc_comment: None,
            block_comment: Some(("/*".into(), "*/".into())),
            line_comment: Some("//".into()),
            string_quotes: vec!['"'],
            char_literals: true,
            text_blocks: false,
            declarations: DeclarationRules::None,
        }
    }

    /// Line-comment fallback for `#`-commented languages.
    pub fn generic_hash() -> Self {
        LanguageProfile {
            name: "generic-hash".into(),
            extensions: ["py", "rb", "sh", "bash", "pl", "r", "yaml", "yml", "toml"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            doc_comment: None,
            block_comment: None,
            line_comment: Some("#".into()),
            string_quotes: vec!['"', '\''],
            char_literals: false,
            text_blocks: true,
            declarations: DeclarationRules::None,
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "java" => Some(Self::java()),
            "generic" => Some(Self::generic()),
            "generic-hash" => Some(Self::generic_hash()),
            _ => None,
        }
    }

    /// Checks the delimiter invariants. Returns a description of the first
    /// violation.
    pub fn validate(&self) -> Result<(), String> {
        if self.doc_comment.is_none() && self.block_comment.is_none() && self.line_comment.is_none() {
            return Err(format!("profile `{}` defines no comment syntax", self.name));
        }
        for (open, close) in self.doc_comment.iter().chain(self.block_comment.iter()) {
            if open.is_empty() || close.is_empty() {
                return Err(format!("profile `{}` has an empty delimiter", self.name));
            }
            if open == close {
                return Err(format!("profile `{}` cannot distinguish `{open}` from `{close}`", self.name));
            }
        }
        if let (Some((doc, _)), Some((block, _))) = (&self.doc_comment, &self.block_comment) {
            if doc == block {
                return Err(format!("profile `{}` doc and block openers coincide", self.name));
            }
        }
        if matches!(&self.line_comment, Some(p) if p.is_empty()) {
            return Err(format!("profile `{}` has an empty line-comment prefix", self.name));
        }
        Ok(())
    }

    pub fn matches_path(&self, path: &Path) -> bool {
        path.extension()
            .and_then(|e| e.to_str())
            .map(|ext| self.extensions.iter().any(|x| x.eq_ignore_ascii_case(ext)))
            .unwrap_or(false)
    }

    /// The comment text wrapping a single anchor tag when a new comment is created.
    pub(crate) fn new_tag_comment(&self, tag: &str) -> String {
        if let Some((open, close)) = &self.doc_comment {
            format!("{open} {tag} {close}")
        } else if let Some(prefix) = &self.line_comment {
            format!("{prefix} {tag}")
        } else if let Some((open, close)) = &self.block_comment {
            format!("{open} {tag} {close}")
        } else {
            unreachable!("validated profiles define a comment syntax")
        }
    }
}

/// An ordered set of profiles; the first whose extension matches wins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileSet {
    profiles: Vec<LanguageProfile>,
}

impl ProfileSet {
    pub fn new(profiles: Vec<LanguageProfile>) -> Self {
        ProfileSet { profiles }
    }

    pub fn builtin() -> Self {
        ProfileSet::new(vec![
            LanguageProfile::java(),
            LanguageProfile::generic(),
            LanguageProfile::generic_hash(),
        ])
    }

    pub fn java_only() -> Self {
        ProfileSet::new(vec![LanguageProfile::java()])
    }

    pub fn for_path(&self, path: &Path) -> Option<&LanguageProfile> {
        self.profiles.iter().find(|p| p.matches_path(path))
    }

    pub fn profiles(&self) -> &[LanguageProfile] {
        &self.profiles
    }
}

impl Default for ProfileSet {
    fn default() -> Self {
        Self::builtin()
    }
}
