//! Shared configuration file.
//!
//! ```toml
//! data_dir = "data"                  # relative to this file
//! bind = "127.0.0.1:7878"
//! public_url = "http://localhost:7878"   # optional, used in printed links
//!
//! [projects]
//! shop = "../shop"                   # short form
//! billing = { root = "../billing", ignore = ["generated/**"] }
//! ```
//!
//! `SKETCHLINK_BIND` and `SKETCHLINK_DATA_DIR` override the file.

use std::collections::BTreeMap;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

pub const DEFAULT_BIND: &str = "127.0.0.1:7878";
pub const ENV_BIND: &str = "SKETCHLINK_BIND";
pub const ENV_DATA_DIR: &str = "SKETCHLINK_DATA_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid bind address `{0}`")]
    InvalidBind(String),
    #[error("invalid project name `{0}`")]
    InvalidProjectName(String),
    #[error("project `{name}`: root {} is not a directory", root.display())]
    MissingProjectRoot { name: String, root: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectConfig {
    pub root: PathBuf,
    pub ignore: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub data_dir: PathBuf,
    pub bind: SocketAddr,
    pub public_url: Option<String>,
    pub projects: BTreeMap<String, ProjectConfig>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    data_dir: Option<PathBuf>,
    bind: Option<String>,
    public_url: Option<String>,
    #[serde(default)]
    projects: BTreeMap<String, RawProject>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawProject {
    Root(PathBuf),
    Full {
        root: PathBuf,
        #[serde(default)]
        ignore: Vec<String>,
    },
}

impl Default for Config {
    fn default() -> Self {
        Config {
            data_dir: PathBuf::from("sketchlink-data"),
            bind: DEFAULT_BIND.parse().expect("default bind"),
            public_url: None,
            projects: BTreeMap::new(),
        }
    }
}

fn valid_project_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl Config {
    /// Parses TOML; relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path, origin: &Path) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.message().to_string(),
        })?;
        let mut config = Config::default();
        if let Some(d) = raw.data_dir {
            config.data_dir = base.join(d);
        } else {
            config.data_dir = base.join(&config.data_dir);
        }
        if let Some(b) = raw.bind {
            config.bind = b.parse().map_err(|_| ConfigError::InvalidBind(b))?;
        }
        config.public_url = raw.public_url.map(|u| u.trim_end_matches('/').to_string());
        for (name, p) in raw.projects {
            if !valid_project_name(&name) {
                return Err(ConfigError::InvalidProjectName(name));
            }
            let (root, ignore) = match p {
                RawProject::Root(root) => (root, Vec::new()),
                RawProject::Full { root, ignore } => (root, ignore),
            };
            config.projects.insert(
                name,
                ProjectConfig {
                    root: base.join(root),
                    ignore,
                },
            );
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base, path)
    }

    /// Applies `SKETCHLINK_BIND` / `SKETCHLINK_DATA_DIR` from `env`.
    pub fn apply_env(&mut self, env: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(b) = env(ENV_BIND).filter(|s| !s.is_empty()) {
            self.bind = b.parse().map_err(|_| ConfigError::InvalidBind(b))?;
        }
        if let Some(d) = env(ENV_DATA_DIR).filter(|s| !s.is_empty()) {
            self.data_dir = PathBuf::from(d);
        }
        Ok(())
    }

    /// Checks that every project root is a directory.
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, p) in &self.projects {
            if !p.root.is_dir() {
                return Err(ConfigError::MissingProjectRoot {
                    name: name.clone(),
                    root: p.root.clone(),
                });
            }
        }
        Ok(())
    }

    /// Base URL for printed links.
    pub fn base_url(&self) -> String {
        self.public_url.clone().unwrap_or_else(|| format!("http://{}", self.bind))
    }

    /// The project whose root contains `path`, if any.
    pub fn project_for_path(&self, path: &Path) -> Option<(&str, &ProjectConfig)> {
        let path = path.canonicalize().ok()?;
        self.projects
            .iter()
            .filter_map(|(n, p)| {
                let root = p.root.canonicalize().ok()?;
                path.starts_with(&root).then_some((n.as_str(), p, root.components().count()))
            })
            .max_by_key(|(_, _, depth)| *depth)
            .map(|(n, p, _)| (n, p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_project_forms() {
        let text = r#"
data_dir = "store"
bind = "127.0.0.1:9000"
public_url = "http://example.test/"

[projects]
shop = "src/shop"
billing = { root = "/abs/billing", ignore = ["gen/**"] }
"#;
        let c = Config::from_toml(text, Path::new("/etc/sl"), Path::new("/etc/sl/c.toml")).unwrap();
        assert_eq!(c.data_dir, PathBuf::from("/etc/sl/store"));
        assert_eq!(c.bind.port(), 9000);
        assert_eq!(c.base_url(), "http://example.test");
        assert_eq!(c.projects["shop"].root, PathBuf::from("/etc/sl/src/shop"));
        assert_eq!(c.projects["billing"].root, PathBuf::from("/abs/billing"));
        assert_eq!(c.projects["billing"].ignore, vec!["gen/**"]);
    }

    #[test]
    fn rejects_bad_values() {
        let base = Path::new(".");
        assert!(matches!(
            Config::from_toml("bind = \"nope\"", base, base),
            Err(ConfigError::InvalidBind(_))
        ));
        assert!(matches!(
            Config::from_toml("colour = 1", base, base),
            Err(ConfigError::Parse { .. })
        ));
        assert!(matches!(
            Config::from_toml("[projects]\n\"a b\" = \"x\"", base, base),
            Err(ConfigError::InvalidProjectName(_))
        ));
        let c = Config::from_toml("[projects]\nx = \"/definitely/not/here\"", base, base).unwrap();
        assert!(matches!(c.validate(), Err(ConfigError::MissingProjectRoot { .. })));
    }

    #[test]
    fn env_overrides() {
        let mut c = Config::default();
        c.apply_env(|k| match k {
            ENV_BIND => Some("0.0.0.0:1234".into()),
            ENV_DATA_DIR => Some("/tmp/d".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(c.bind.to_string(), "0.0.0.0:1234");
        assert_eq!(c.data_dir, PathBuf::from("/tmp/d"));
        assert!(c.apply_env(|_| Some("bad".into())).is_err());
    }
}
