//! Command-line front end.
//!
//! Exit codes: 0 success, 1 findings (`verify`), 2 usage or config errors,
//! 3 runtime failures (I/O, missing store, connection).

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use sketchlink::anchor::{AnchorId, AnchorKind};
use sketchlink::client::{Client, ClientError};
use sketchlink::config::{Config, ConfigError};
use sketchlink::export::{export_html, ExportOptions};
use sketchlink::links::{verify, IntegrityReport, LinkStore, LINKS_FILE};
use sketchlink::protocol::{events, types, NavigateEvent};
use sketchlink::scanner::{
    insert_anchor, remove_anchor, scan_tree, IgnoreRules, ProfileSet, ProjectIndex, ScanError, ScanReport,
};
use sketchlink::sketch::SketchRepo;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

pub const EDITOR_SCHEMA: &str = "sketchlink.editor/1";
const DEFAULT_CONFIG: &str = "sketchlink.toml";

#[derive(Parser)]
#[command(name = "sketchlink", version, about = "Link sketches to source code")]
struct Cli {
    /// Config file (default: ./sketchlink.toml when present).
    #[arg(long, global = true, env = "SKETCHLINK_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP/WebSocket server.
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Scan a source tree and print anchors, referents and fold ranges.
    Scan {
        root: PathBuf,
        /// Print the versioned editor-integration document.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        scan: ScanArgs,
    },
    /// Insert or remove source anchors.
    #[command(subcommand)]
    Anchor(AnchorCommand),
    /// Check links against a scan and the sketch repository.
    Verify {
        root: PathBuf,
        #[arg(long, conflicts_with = "server")]
        data_dir: Option<PathBuf>,
        /// Ask a running server instead of reading the data directory.
        #[arg(long)]
        server: Option<String>,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        scan: ScanArgs,
    },
    /// Headless editor: prints one JSON line per navigate event.
    Editor {
        #[arg(long)]
        project: String,
        #[arg(long)]
        server: Option<String>,
    },
    /// Write static HTML pages with sketch hyperlinks.
    ExportHtml {
        root: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Link to this server instead of copying sketches.
        #[arg(long)]
        server_url: Option<String>,
        #[command(flatten)]
        scan: ScanArgs,
    },
}

#[derive(Args, Clone, Default)]
struct ScanArgs {
    /// Project name (default: from config, else the directory name).
    #[arg(long)]
    project: Option<String>,
    /// Extra ignore glob, repeatable.
    #[arg(long = "ignore")]
    ignore: Vec<String>,
    /// Do not honor .gitignore files.
    #[arg(long)]
    no_vcs_ignore: bool,
    /// Include hidden files.
    #[arg(long)]
    hidden: bool,
}

#[derive(Subcommand)]
enum AnchorCommand {
    /// Insert a new anchor referring to the element at LINE.
    Add {
        file: PathBuf,
        line: usize,
        /// Use this id instead of a fresh one.
        #[arg(long)]
        anchor: Option<AnchorId>,
        /// Register the anchor with this server.
        #[arg(long)]
        server: Option<String>,
        #[arg(long)]
        project: Option<String>,
        /// Skip registration even when a server is configured.
        #[arg(long)]
        no_register: bool,
    },
    /// Remove every occurrence of ANCHOR from FILE.
    Remove { file: PathBuf, anchor: AnchorId },
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<ScanError> for Failure {
    fn from(e: ScanError) -> Self {
        match e {
            ScanError::RootMissing(_) => Failure::usage(e.to_string()),
            _ => Failure::runtime(e.to_string()),
        }
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        Failure::runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::runtime(e.to_string())
    }
}

type Outcome = Result<i32, Failure>;

pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("SKETCHLINK_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("sketchlink: {}", f.message);
            f.code
        }
    }
}

/// Loaded config, and whether it came from a file.
fn load_config(path: Option<&Path>) -> Result<(Config, bool), Failure> {
    let (mut config, from_file) = match path {
        Some(p) => (Config::load(p)?, true),
        None if Path::new(DEFAULT_CONFIG).is_file() => (Config::load(Path::new(DEFAULT_CONFIG))?, true),
        None => (Config::default(), false),
    };
    config.apply_env(|k| std::env::var(k).ok())?;
    Ok((config, from_file))
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::runtime(e.to_string()))
}

fn run(cli: Cli) -> Outcome {
    let (config, from_file) = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Serve { bind, data_dir } => serve(config, bind, data_dir),
        Command::Scan { root, json, scan } => cmd_scan(&config, &root, json, &scan),
        Command::Anchor(AnchorCommand::Add {
            file,
            line,
            anchor,
            server,
            project,
            no_register,
        }) => {
            let server = if no_register {
                None
            } else {
                server.or_else(|| from_file.then(|| config.base_url()))
            };
            cmd_anchor_add(&config, &file, line, anchor, server, project)
        }
        Command::Anchor(AnchorCommand::Remove { file, anchor }) => cmd_anchor_remove(&file, anchor),
        Command::Verify {
            root,
            data_dir,
            server,
            json,
            scan,
        } => cmd_verify(&config, from_file, &root, data_dir, server, json, &scan),
        Command::Editor { project, server } => cmd_editor(&project, server.unwrap_or_else(|| config.base_url())),
        Command::ExportHtml {
            root,
            out,
            data_dir,
            server_url,
            scan,
        } => {
            let data_dir = data_dir.or_else(|| from_file.then(|| config.data_dir.clone()));
            cmd_export(&config, &root, &out, data_dir, server_url, &scan)
        }
    }
}

fn serve(mut config: Config, bind: Option<String>, data_dir: Option<PathBuf>) -> Outcome {
    if let Some(b) = bind {
        config.bind = b.parse().map_err(|_| Failure::usage(format!("invalid bind address `{b}`")))?;
    }
    if let Some(d) = data_dir {
        config.data_dir = d;
    }
    let rt = runtime()?;
    rt.block_on(sketchlink::server::serve(config)).map_err(|e| match e {
        sketchlink::server::ServeError::Config(_) => Failure::usage(e.to_string()),
        _ => Failure::runtime(e.to_string()),
    })?;
    Ok(EXIT_OK)
}

fn project_name(config: &Config, root: &Path, explicit: Option<&str>) -> String {
    if let Some(p) = explicit {
        return p.to_string();
    }
    if let Some((name, _)) = config.project_for_path(root) {
        return name.to_string();
    }
    root.canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "project".to_string())
}

fn scan(config: &Config, root: &Path, args: &ScanArgs) -> Result<ProjectIndex, Failure> {
    let name = project_name(config, root, args.project.as_deref());
    let mut globs = args.ignore.clone();
    if let Some(p) = config.projects.get(&name) {
        globs.extend(p.ignore.iter().cloned());
    }
    let rules = IgnoreRules {
        vcs: !args.no_vcs_ignore,
        hidden: args.hidden,
        globs,
    };
    Ok(scan_tree(root, Some(&name), &ProfileSet::builtin(), &rules)?)
}

fn cmd_scan(config: &Config, root: &Path, as_json: bool, args: &ScanArgs) -> Outcome {
    let index = scan(config, root, args)?;
    let mut out = std::io::stdout().lock();
    if as_json {
        let report = ScanReport::from(&index);
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        writeln!(out, "{text}")?;
        return Ok(EXIT_OK);
    }
    for file in &index.files {
        for a in &file.anchors {
            let o = &a.occurrence;
            let r = &a.referent;
            writeln!(
                out,
                "{}:{}:{}: {} -> {} {} (lines {}-{})",
                file.path, o.tag_line, o.tag_column, o.anchor, r.kind.as_str(), r.name, r.lines.start, r.lines.end
            )?;
        }
        for f in &file.folds {
            writeln!(out, "{}: fold {}-{} {:?}", file.path, f.lines.start, f.lines.end, f.kind)?;
        }
        for w in &file.warnings {
            writeln!(out, "{}:{}:{}: warning: {}", file.path, w.line, w.column, w.message)?;
        }
    }
    for e in &index.errors {
        writeln!(out, "{}: error: {}", e.path, e.message)?;
    }
    writeln!(
        out,
        "{} files, {} anchors",
        index.files.len(),
        index.occurrence_count()
    )?;
    Ok(EXIT_OK)
}

fn read_source(file: &Path) -> Result<(String, sketchlink::scanner::LanguageProfile), Failure> {
    let profile = ProfileSet::builtin()
        .for_path(file)
        .cloned()
        .ok_or_else(|| Failure::usage(format!("{}: no language profile for this file type", file.display())))?;
    let text = std::fs::read_to_string(file).map_err(|e| Failure::runtime(format!("{}: {e}", file.display())))?;
    Ok((text, profile))
}

fn write_source(file: &Path, text: &str) -> Result<(), Failure> {
    let dir = file.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    if let Ok(meta) = std::fs::metadata(file) {
        let _ = std::fs::set_permissions(tmp.path(), meta.permissions());
    }
    tmp.persist(file).map_err(|e| Failure::runtime(e.to_string()))?;
    Ok(())
}

fn cmd_anchor_add(
    config: &Config,
    file: &Path,
    line: usize,
    anchor: Option<AnchorId>,
    server: Option<String>,
    project: Option<String>,
) -> Outcome {
    let (text, profile) = read_source(file)?;
    let anchor = anchor.unwrap_or_else(|| AnchorId::random(AnchorKind::SourceCode));
    let (edited, occ) = insert_anchor(&text, line, anchor, &profile).map_err(|e| Failure::usage(e.to_string()))?;
    write_source(file, &edited)?;
    println!("{anchor}");
    eprintln!("{}:{}: inserted {anchor}", file.display(), occ.tag_line);

    let Some(server) = server else {
        return Ok(EXIT_OK);
    };
    let located = match project {
        Some(name) => config.projects.get(&name).map(|p| (name.clone(), p.root.clone())),
        None => config
            .project_for_path(file)
            .map(|(n, p)| (n.to_string(), p.root.clone())),
    };
    let Some((name, root)) = located else {
        return Err(Failure::usage(format!(
            "{}: not inside a configured project; pass --project or --no-register",
            file.display()
        )));
    };
    let rel = file
        .canonicalize()?
        .strip_prefix(root.canonicalize()?)
        .map_err(|_| Failure::usage(format!("{} is outside project `{name}`", file.display())))?
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/");
    let rt = runtime()?;
    let reply = rt.block_on(async {
        let mut client = Client::connect(&server).await?;
        let reply = client
            .request(
                types::REGISTER_ANCHOR,
                json!({"project": name, "path": rel, "anchor": anchor}),
            )
            .await?;
        client.close().await;
        Ok::<_, ClientError>(reply)
    })?;
    if let Some(url) = reply.get("url").and_then(|u| u.as_str()) {
        println!("{url}");
    }
    Ok(EXIT_OK)
}

fn cmd_anchor_remove(file: &Path, anchor: AnchorId) -> Outcome {
    let (text, profile) = read_source(file)?;
    let edited = remove_anchor(&text, anchor, &profile).map_err(|e| Failure::usage(e.to_string()))?;
    write_source(file, &edited)?;
    eprintln!("{}: removed {anchor}", file.display());
    Ok(EXIT_OK)
}

fn print_report(report: &IntegrityReport, as_json: bool) -> std::io::Result<()> {
    let mut out = std::io::stdout().lock();
    if as_json {
        writeln!(out, "{}", serde_json::to_string_pretty(report).expect("report serializes"))?;
        return Ok(());
    }
    for d in &report.dangling_source {
        writeln!(out, "dangling source: {} (link {} <-> {})", d.missing, d.link.a, d.link.b)?;
    }
    for d in &report.dangling_sketch {
        writeln!(out, "dangling sketch: {} (link {} <-> {})", d.missing, d.link.a, d.link.b)?;
    }
    for o in &report.orphan_anchors {
        writeln!(out, "orphan anchor: {} at {}:{}", o.anchor, o.path, o.line)?;
    }
    for s in &report.stale_records {
        writeln!(
            out,
            "stale record: {} was {} {} ({}), now {} {} ({})",
            s.recorded.anchor,
            s.recorded.path,
            s.recorded.referent_kind.as_str(),
            s.recorded.artifact_path,
            s.path,
            s.referent_kind.as_str(),
            s.artifact_path
        )?;
    }
    if report.is_empty() {
        writeln!(out, "ok: no findings")?;
    } else {
        writeln!(out, "{} findings", report.finding_count())?;
    }
    Ok(())
}

fn cmd_verify(
    config: &Config,
    from_file: bool,
    root: &Path,
    data_dir: Option<PathBuf>,
    server: Option<String>,
    as_json: bool,
    args: &ScanArgs,
) -> Outcome {
    let report = if let Some(server) = server {
        let name = project_name(config, root, args.project.as_deref());
        let rt = runtime()?;
        let value = rt.block_on(async {
            let mut client = Client::connect(&server).await?;
            client.request(types::RESCAN, json!({"project": name})).await?;
            let v = client.request(types::VERIFY, json!({"project": name})).await?;
            client.close().await;
            Ok::<_, ClientError>(v)
        })?;
        serde_json::from_value(value).map_err(|e| Failure::runtime(e.to_string()))?
    } else {
        let data_dir = data_dir
            .or_else(|| from_file.then(|| config.data_dir.clone()))
            .ok_or_else(|| Failure::usage("verify needs --data-dir, --server or a config file"))?;
        if !data_dir.join(LINKS_FILE).is_file() {
            return Err(Failure::runtime(format!(
                "no link store at {}",
                data_dir.join(LINKS_FILE).display()
            )));
        }
        let store = LinkStore::load(&data_dir).map_err(|e| Failure::runtime(e.to_string()))?;
        let catalog = SketchRepo::new(&data_dir)
            .catalog()
            .map_err(|e| Failure::runtime(e.to_string()))?;
        let index = scan(config, root, args)?;
        verify(&store, &index, &catalog)
    };
    print_report(&report, as_json)?;
    Ok(if report.is_empty() { EXIT_OK } else { EXIT_FINDINGS })
}

/// One output line of the headless editor.
pub fn editor_line(event: &NavigateEvent) -> String {
    json!({
        "schema": EDITOR_SCHEMA,
        "event": "navigate",
        "anchor": event.anchor,
        "project": event.project,
        "path": event.path,
        "start": event.start_line,
        "end": event.end_line,
        "kind": event.kind,
        "name": event.name,
        "artifact_path": event.artifact_path,
    })
    .to_string()
}

fn cmd_editor(project: &str, server: String) -> Outcome {
    let rt = runtime()?;
    rt.block_on(async {
        let mut client = Client::connect(&server).await?;
        client
            .request(types::REGISTER_EDITOR, json!({"project": project}))
            .await
            .map_err(|e| match e {
                ClientError::Server(err) => Failure::usage(err.message),
                other => other.into(),
            })?;
        let mut out = std::io::stdout();
        writeln!(
            out,
            "{}",
            json!({"schema": EDITOR_SCHEMA, "event": "registered", "project": project})
        )?;
        out.flush()?;
        loop {
            let event = match client.next_event().await {
                Ok(e) => e,
                Err(ClientError::Closed) => return Err(Failure::runtime("server closed the connection")),
                Err(e) => return Err(e.into()),
            };
            if event.kind != events::NAVIGATE {
                continue;
            }
            match serde_json::from_value::<NavigateEvent>(event.payload) {
                Ok(nav) => {
                    writeln!(out, "{}", editor_line(&nav))?;
                    out.flush()?;
                }
                Err(e) => tracing::warn!("ignoring malformed navigate event: {e}"),
            }
        }
    })
}

fn cmd_export(
    config: &Config,
    root: &Path,
    out: &Path,
    data_dir: Option<PathBuf>,
    server_url: Option<String>,
    args: &ScanArgs,
) -> Outcome {
    let index = scan(config, root, args)?;
    let (store, repo) = match &data_dir {
        Some(d) => (
            LinkStore::load(d).map_err(|e| Failure::runtime(e.to_string()))?,
            SketchRepo::new(d),
        ),
        None => (LinkStore::new(), SketchRepo::new(out.join(".no-store"))),
    };
    let summary = export_html(
        &index,
        &store,
        &repo,
        out,
        &ExportOptions {
            server_url: server_url.as_deref(),
        },
    )?;
    println!(
        "{} pages, {} sketch links, {} other links, {} sketches copied",
        summary.pages, summary.sketch_links, summary.other_links, summary.copied_sketches
    );
    Ok(EXIT_OK)
}
