use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock as StdRwLock};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use gtruth_core::raster::{self, SourceImage};
use gtruth_core::session::SessionSnapshot;
use gtruth_core::AnnotationSession;
use serde::{Deserialize, Serialize};
use tokio::sync::{RwLock, Semaphore};

use crate::config::ServiceConfig;
use crate::error::ApiError;

/// Rendered image kinds held in the per-session cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PreviewKind {
    Preview,
    Mask,
    Grouped,
    Crop { unit: u32, margin: u32 },
}

pub struct SessionEntry {
    pub id: String,
    pub created_at: SystemTime,
    session: Arc<RwLock<AnnotationSession>>,
    last_access: Mutex<Instant>,
    /// Bumped by every successful mutation.
    version: AtomicU64,
    saved_version: AtomicU64,
    cache: Mutex<HashMap<PreviewKind, (u64, Bytes)>>,
}

impl SessionEntry {
    fn new(id: String, created_at: SystemTime, session: AnnotationSession) -> Self {
        Self {
            id,
            created_at,
            session: Arc::new(RwLock::new(session)),
            last_access: Mutex::new(Instant::now()),
            version: AtomicU64::new(1),
            saved_version: AtomicU64::new(0),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn version(&self) -> u64 {
        self.version.load(Ordering::Acquire)
    }

    fn touch(&self) {
        *self.last_access.lock().unwrap() = Instant::now();
    }

    fn idle_since(&self) -> Instant {
        *self.last_access.lock().unwrap()
    }

    pub fn created_unix(&self) -> u64 {
        self.created_at
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs())
    }
}

struct Inner {
    config: ServiceConfig,
    sessions: StdRwLock<HashMap<String, Arc<SessionEntry>>>,
    workers: Arc<Semaphore>,
}

/// Shared service state: the session registry plus the worker pool.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for AppState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AppState")
            .field("config", self.config())
            .field("sessions", &self.session_count())
            .finish()
    }
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        let workers = Arc::new(Semaphore::new(config.workers.max(1)));
        Self {
            inner: Arc::new(Inner {
                config,
                sessions: StdRwLock::new(HashMap::new()),
                workers,
            }),
        }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    pub fn session_count(&self) -> usize {
        self.inner.sessions.read().unwrap().len()
    }

    pub fn insert(&self, session: AnnotationSession) -> Arc<SessionEntry> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let entry = Arc::new(SessionEntry::new(id.clone(), SystemTime::now(), session));
        self.inner
            .sessions
            .write()
            .unwrap()
            .insert(id, entry.clone());
        entry
    }

    pub fn get(&self, id: &str) -> Result<Arc<SessionEntry>, ApiError> {
        let entry = self
            .inner
            .sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::session_not_found(id))?;
        entry.touch();
        Ok(entry)
    }

    pub fn remove(&self, id: &str) -> Option<Arc<SessionEntry>> {
        let removed = self.inner.sessions.write().unwrap().remove(id);
        if removed.is_some() {
            self.delete_snapshot(id);
        }
        removed
    }

    /// Drops sessions idle for longer than the configured timeout.
    pub fn evict_idle(&self, now: Instant) -> Vec<String> {
        let timeout = self.config().session_timeout();
        let stale: Vec<String> = self
            .inner
            .sessions
            .read()
            .unwrap()
            .values()
            .filter(|e| now.saturating_duration_since(e.idle_since()) > timeout)
            .map(|e| e.id.clone())
            .collect();
        for id in &stale {
            self.remove(id);
            tracing::info!(session = %id, "evicted idle session");
        }
        stale
    }

    /// Runs `f` on the worker pool with exclusive access to the session.
    pub async fn write<T, F>(&self, entry: &Arc<SessionEntry>, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&mut AnnotationSession) -> Result<T, ApiError> + Send + 'static,
    {
        let mut guard = entry.session.clone().write_owned().await;
        let permit = self.permit().await?;
        let e = entry.clone();
        tokio::task::spawn_blocking(move || {
            let out = f(&mut guard);
            if out.is_ok() {
                e.version.fetch_add(1, Ordering::AcqRel);
            }
            drop(permit);
            out
        })
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
    }

    /// Runs `f` on the worker pool with shared access to the session.
    pub async fn read<T, F>(&self, entry: &Arc<SessionEntry>, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&AnnotationSession, u64) -> Result<T, ApiError> + Send + 'static,
    {
        let guard = entry.session.clone().read_owned().await;
        let permit = self.permit().await?;
        let version = entry.version();
        tokio::task::spawn_blocking(move || {
            let out = f(&guard, version);
            drop(permit);
            out
        })
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
    }

    /// Cheap read on the calling task, for summaries.
    pub async fn peek<T>(
        &self,
        entry: &SessionEntry,
        f: impl FnOnce(&AnnotationSession) -> T,
    ) -> T {
        f(&*entry.session.read().await)
    }

    /// PNG rendered by `render`, reused until the session next changes.
    pub async fn cached_png<F>(
        &self,
        entry: &Arc<SessionEntry>,
        kind: PreviewKind,
        render: F,
    ) -> Result<Bytes, ApiError>
    where
        F: FnOnce(&AnnotationSession) -> Result<Vec<u8>, ApiError> + Send + 'static,
    {
        let e = entry.clone();
        self.read(entry, move |s, version| {
            if let Some((v, png)) = e.cache.lock().unwrap().get(&kind) {
                if *v == version {
                    return Ok(png.clone());
                }
            }
            let png = Bytes::from(render(s)?);
            let mut cache = e.cache.lock().unwrap();
            cache.retain(|_, (v, _)| *v == version);
            cache.insert(kind, (version, png.clone()));
            Ok(png)
        })
        .await
    }

    /// Runs `f` on the worker pool without touching any session.
    pub async fn blocking<T, F>(&self, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    {
        let permit = self.permit().await?;
        tokio::task::spawn_blocking(move || {
            let out = f();
            drop(permit);
            out
        })
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
    }

    async fn permit(&self) -> Result<tokio::sync::OwnedSemaphorePermit, ApiError> {
        self.inner
            .workers
            .clone()
            .acquire_owned()
            .await
            .map_err(|_| ApiError::internal("worker pool closed"))
    }

    fn snapshot_paths(&self, id: &str) -> Option<(PathBuf, PathBuf)> {
        let dir = self.config().snapshot_dir.as_ref()?;
        Some((
            dir.join(format!("{id}.json")),
            dir.join(format!("{id}.png")),
        ))
    }

    fn delete_snapshot(&self, id: &str) {
        if let Some((json, png)) = self.snapshot_paths(id) {
            let _ = std::fs::remove_file(json);
            let _ = std::fs::remove_file(png);
        }
    }

    /// Writes every session changed since its last snapshot. Returns how many
    /// were written; zero when persistence is off.
    pub async fn save_snapshots(&self) -> std::io::Result<usize> {
        let Some(dir) = self.config().snapshot_dir.clone() else {
            return Ok(0);
        };
        std::fs::create_dir_all(&dir)?;
        let entries: Vec<Arc<SessionEntry>> = self
            .inner
            .sessions
            .read()
            .unwrap()
            .values()
            .cloned()
            .collect();
        let mut written = 0;
        for entry in entries {
            let guard = entry.session.read().await;
            let version = entry.version();
            if entry.saved_version.load(Ordering::Acquire) == version {
                continue;
            }
            let (json_path, png_path) = self.snapshot_paths(&entry.id).expect("snapshot dir set");
            if !png_path.exists() {
                let src = guard.source();
                let png = match &src.color {
                    Some(c) => c.to_png(),
                    None => src.gray.to_png(),
                };
                write_atomic(&png_path, &png)?;
            }
            let stored = StoredSession {
                id: entry.id.clone(),
                created_at: entry.created_unix(),
                session: guard.snapshot(),
            };
            let json = serde_json::to_vec_pretty(&stored).map_err(std::io::Error::other)?;
            write_atomic(&json_path, &json)?;
            entry.saved_version.store(version, Ordering::Release);
            written += 1;
        }
        Ok(written)
    }

    /// Loads every snapshot in the configured directory. Unreadable ones are
    /// logged and skipped.
    pub fn restore_snapshots(&self) -> std::io::Result<usize> {
        let Some(dir) = self.config().snapshot_dir.clone() else {
            return Ok(0);
        };
        if !dir.is_dir() {
            return Ok(0);
        }
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        paths.sort();
        let mut restored = 0;
        for path in paths {
            match load_snapshot(&path) {
                Ok(entry) => {
                    entry
                        .saved_version
                        .store(entry.version(), Ordering::Release);
                    self.inner
                        .sessions
                        .write()
                        .unwrap()
                        .insert(entry.id.clone(), Arc::new(entry));
                    restored += 1;
                }
                Err(e) => tracing::warn!(path = %path.display(), error = %e, "skipping snapshot"),
            }
        }
        Ok(restored)
    }
}

#[derive(Serialize, Deserialize)]
struct StoredSession {
    id: String,
    created_at: u64,
    session: SessionSnapshot,
}

fn load_snapshot(path: &Path) -> Result<SessionEntry, String> {
    let bytes = std::fs::read(path).map_err(|e| e.to_string())?;
    let stored: StoredSession = serde_json::from_slice(&bytes).map_err(|e| e.to_string())?;
    let png = std::fs::read(path.with_extension("png")).map_err(|e| e.to_string())?;
    let decoded = raster::decode_source(&png).map_err(|e| e.to_string())?;
    let source = SourceImage {
        dpi: stored.session.dpi,
        ..decoded
    };
    let session = AnnotationSession::restore(source, stored.session).map_err(|e| e.to_string())?;
    let created_at = UNIX_EPOCH + Duration::from_secs(stored.created_at);
    Ok(SessionEntry::new(stored.id, created_at, session))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(tmp, path)
}
