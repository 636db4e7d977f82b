//! HTTP + WebSocket service.
//!
//! All mutations go through one writer (a mutex held on a blocking thread);
//! the writer persists, swaps in a new immutable [`Snapshot`] and publishes
//! events before releasing the lock, so every session sees events in
//! mutation order. Readers clone the current snapshot `Arc` and never wait
//! for a scan.

mod http;
mod ops;
mod ws;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinHandle;

use crate::anchor::AnchorId;
use crate::config::{Config, ConfigError, ProjectConfig};
use crate::links::{LinkError, LinkStore};
use crate::protocol::{Envelope, ErrorCode, ProtocolError};
use crate::scanner::{scan_tree, IgnoreRules, ProfileSet, ProjectIndex, ScanError};
use crate::sketch::{SketchCatalog, SketchError, SketchRepo};

pub use ops::artifact_listing;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("scanning project `{project}`: {source}")]
    Scan { project: String, source: ScanError },
    #[error(transparent)]
    Links(#[from] LinkError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Immutable view of everything readers need.
#[derive(Debug, Clone, Default)]
pub struct Snapshot {
    pub links: Arc<LinkStore>,
    pub catalog: Arc<SketchCatalog>,
    pub indexes: BTreeMap<String, Arc<ProjectIndex>>,
}

impl Snapshot {
    pub fn index(&self, project: &str) -> Option<&Arc<ProjectIndex>> {
        self.indexes.get(project)
    }

    /// Project and index containing a source anchor. The recorded project
    /// is tried first.
    pub fn locate_source(&self, anchor: &AnchorId) -> Option<&Arc<ProjectIndex>> {
        if let Some(index) = self
            .links
            .record(anchor)
            .and_then(|r| self.indexes.get(&r.project))
            .filter(|i| i.contains(anchor))
        {
            return Some(index);
        }
        self.indexes.values().find(|i| i.contains(anchor))
    }

    pub fn source_known(&self, anchor: &AnchorId) -> bool {
        self.indexes.values().any(|i| i.contains(anchor))
    }
}

pub(crate) type SessionId = u64;

struct Session {
    tx: mpsc::UnboundedSender<String>,
    /// `None` until `subscribe`; an empty set means all events.
    subscription: Option<HashSet<AnchorId>>,
    editor_project: Option<String>,
}

/// An event plus the anchors it concerns, for subscription filtering.
pub(crate) struct Event {
    pub envelope: Envelope,
    pub anchors: Vec<AnchorId>,
}

pub struct ServerState {
    config: Config,
    repo: SketchRepo,
    profiles: ProfileSet,
    snapshot: RwLock<Arc<Snapshot>>,
    writer: Mutex<()>,
    sessions: Mutex<HashMap<SessionId, Session>>,
    next_session: AtomicU64,
    closing: tokio::sync::watch::Sender<bool>,
}

/// Mutable working copy handed to a write closure.
pub(crate) struct Txn<'a> {
    pub state: &'a ServerState,
    pub snap: Snapshot,
    links_dirty: bool,
    events: Vec<Event>,
}

impl Txn<'_> {
    pub fn links_mut(&mut self) -> &mut LinkStore {
        self.links_dirty = true;
        Arc::make_mut(&mut self.snap.links)
    }

    pub fn catalog_mut(&mut self) -> &mut SketchCatalog {
        Arc::make_mut(&mut self.snap.catalog)
    }

    pub fn emit(&mut self, envelope: Envelope, anchors: Vec<AnchorId>) {
        self.events.push(Event { envelope, anchors });
    }
}

impl ServerState {
    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn repo(&self) -> &SketchRepo {
        &self.repo
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    pub fn project(&self, name: &str) -> Result<&ProjectConfig, ProtocolError> {
        self.config
            .projects
            .get(name)
            .ok_or_else(|| ProtocolError::new(ErrorCode::NotFound, format!("unknown project `{name}`")))
    }

    fn scan_project(&self, name: &str) -> Result<ProjectIndex, ServeError> {
        let project = self.config.projects.get(name).expect("configured project");
        let rules = IgnoreRules {
            globs: project.ignore.clone(),
            ..IgnoreRules::default()
        };
        scan_tree(&project.root, Some(name), &self.profiles, &rules).map_err(|source| ServeError::Scan {
            project: name.to_string(),
            source,
        })
    }

    /// Runs `f` under the writer lock on a blocking thread. On success the
    /// link store is saved if touched, the snapshot is swapped and events are
    /// published, all before the lock is released.
    pub(crate) async fn write<T, F>(self: &Arc<Self>, f: F) -> Result<T, ProtocolError>
    where
        T: Send + 'static,
        F: FnOnce(&mut Txn<'_>) -> Result<T, ProtocolError> + Send + 'static,
    {
        let state = self.clone();
        tokio::task::spawn_blocking(move || {
            let _guard = state.writer.lock().expect("writer lock");
            let mut txn = Txn {
                state: &state,
                snap: (*state.snapshot()).clone(),
                links_dirty: false,
                events: Vec::new(),
            };
            let out = f(&mut txn)?;
            if txn.links_dirty {
                txn.snap
                    .links
                    .save(state.repo.data_dir())
                    .map_err(|e| ProtocolError::new(ErrorCode::Internal, format!("saving links: {e}")))?;
            }
            let Txn { snap, events, .. } = txn;
            *state.snapshot.write().expect("snapshot lock") = Arc::new(snap);
            for event in &events {
                state.publish(event);
            }
            Ok(out)
        })
        .await
        .map_err(|e| ProtocolError::new(ErrorCode::Internal, format!("writer task failed: {e}")))?
    }

    fn publish(&self, event: &Event) {
        let text = event.envelope.to_text();
        let sessions = self.sessions.lock().expect("sessions lock");
        for session in sessions.values() {
            let wanted = match &session.subscription {
                None => false,
                Some(filter) => filter.is_empty() || event.anchors.iter().any(|a| filter.contains(a)),
            };
            if wanted {
                let _ = session.tx.send(text.clone());
            }
        }
    }

    pub(crate) fn closing(&self) -> tokio::sync::watch::Receiver<bool> {
        self.closing.subscribe()
    }

    pub(crate) fn open_session(&self, tx: mpsc::UnboundedSender<String>) -> SessionId {
        let id = self.next_session.fetch_add(1, Ordering::Relaxed) + 1;
        self.sessions.lock().expect("sessions lock").insert(
            id,
            Session {
                tx,
                subscription: None,
                editor_project: None,
            },
        );
        id
    }

    pub(crate) fn close_session(&self, id: SessionId) {
        self.sessions.lock().expect("sessions lock").remove(&id);
    }

    pub(crate) fn set_subscription(&self, id: SessionId, filter: Option<HashSet<AnchorId>>) {
        if let Some(s) = self.sessions.lock().expect("sessions lock").get_mut(&id) {
            s.subscription = filter;
        }
    }

    pub(crate) fn set_editor(&self, id: SessionId, project: String) {
        if let Some(s) = self.sessions.lock().expect("sessions lock").get_mut(&id) {
            s.editor_project = Some(project);
        }
    }

    /// Sends `envelope` to every editor registered for `project`.
    pub(crate) fn send_to_editors(&self, project: &str, envelope: &Envelope) -> usize {
        let text = envelope.to_text();
        let sessions = self.sessions.lock().expect("sessions lock");
        sessions
            .values()
            .filter(|s| s.editor_project.as_deref() == Some(project))
            .filter(|s| s.tx.send(text.clone()).is_ok())
            .count()
    }

    pub fn editor_count(&self, project: &str) -> usize {
        let sessions = self.sessions.lock().expect("sessions lock");
        sessions
            .values()
            .filter(|s| s.editor_project.as_deref() == Some(project))
            .count()
    }
}

/// Loads the store, scans every project and returns the shared state.
pub fn prepare(config: Config) -> Result<Arc<ServerState>, ServeError> {
    config.validate()?;
    std::fs::create_dir_all(&config.data_dir)?;
    let repo = SketchRepo::new(config.data_dir.clone());
    let mut links = LinkStore::load(repo.data_dir())?;
    let catalog = repo.catalog()?;
    let state = ServerState {
        config,
        repo,
        profiles: ProfileSet::builtin(),
        snapshot: RwLock::new(Arc::default()),
        writer: Mutex::new(()),
        sessions: Mutex::new(HashMap::new()),
        next_session: AtomicU64::new(0),
        closing: tokio::sync::watch::channel(false).0,
    };
    let mut indexes = BTreeMap::new();
    let now = chrono::Utc::now();
    let mut refreshed = 0;
    for name in state.config.projects.keys() {
        let index = state.scan_project(name)?;
        refreshed += links.refresh_records(&index, now);
        indexes.insert(name.clone(), Arc::new(index));
    }
    if refreshed > 0 {
        links.save(state.repo.data_dir())?;
    }
    *state.snapshot.write().expect("snapshot lock") = Arc::new(Snapshot {
        links: Arc::new(links),
        catalog: Arc::new(catalog),
        indexes,
    });
    Ok(Arc::new(state))
}

/// A server running on a background task.
pub struct ServerHandle {
    addr: SocketAddr,
    state: Arc<ServerState>,
    shutdown: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn state(&self) -> &Arc<ServerState> {
        &self.state
    }

    pub fn ws_url(&self) -> String {
        format!("ws://{}{}", self.addr, crate::protocol::WS_PATH)
    }

    pub fn http_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops accepting connections and waits for the server task.
    pub async fn shutdown(mut self) -> std::io::Result<()> {
        self.state.closing.send_replace(true);
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.task.await.unwrap_or_else(|e| Err(std::io::Error::other(e)))
    }

    /// Waits until the server task ends.
    pub async fn wait(self) -> std::io::Result<()> {
        let ServerHandle { task, shutdown, .. } = self;
        let _keep = shutdown;
        task.await.unwrap_or_else(|e| Err(std::io::Error::other(e)))
    }
}

/// Scans, binds and starts serving. Returns once the listener is bound.
pub async fn start(config: Config) -> Result<ServerHandle, ServeError> {
    let bind = config.bind;
    let state = tokio::task::spawn_blocking(move || prepare(config))
        .await
        .map_err(|e| ServeError::Io(std::io::Error::other(e)))??;
    let listener = TcpListener::bind(bind)
        .await
        .map_err(|source| ServeError::Bind { addr: bind, source })?;
    let addr = listener.local_addr()?;
    let app = http::router(state.clone());
    let (tx, rx) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    tracing::info!("listening on {addr}");
    Ok(ServerHandle {
        addr,
        state,
        shutdown: Some(tx),
        task,
    })
}

/// Serves until Ctrl-C.
pub async fn serve(config: Config) -> Result<(), ServeError> {
    let handle = start(config).await?;
    eprintln!("sketchlink listening on {}", handle.http_url());
    tokio::signal::ctrl_c().await?;
    handle.shutdown().await?;
    Ok(())
}
