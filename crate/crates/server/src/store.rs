use std::collections::HashMap;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tokio::sync::{Mutex, RwLock};

use cmc_core::session::{Answer, Session, SessionOptions};

/// What is written to disk per session: enough to rebuild it by replay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub program: String,
    pub options: SessionOptions,
    pub answers: Vec<Answer>,
}

pub type SessionHandle = Arc<Mutex<Session>>;

/// In-memory sessions, optionally mirrored to one JSON file each.
///
/// Each session sits behind its own mutex so writes to one session are
/// serialized while different sessions proceed independently.
#[derive(Default)]
pub struct Store {
    sessions: RwLock<HashMap<String, (String, SessionHandle)>>,
    dir: Option<PathBuf>,
}

impl Store {
    pub fn in_memory() -> Self {
        Store::default()
    }

    /// A store persisted under `dir`, restoring any snapshots found there.
    /// Snapshots that no longer replay are skipped and reported.
    pub fn persistent(dir: impl Into<PathBuf>) -> io::Result<(Self, Vec<String>)> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        let mut sessions = HashMap::new();
        let mut problems = Vec::new();
        for entry in std::fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let Some(id) = path.file_stem().and_then(|s| s.to_str()).map(str::to_string) else { continue };
            let restored = std::fs::read_to_string(&path)
                .map_err(|e| e.to_string())
                .and_then(|text| serde_json::from_str::<Snapshot>(&text).map_err(|e| e.to_string()))
                .and_then(|snap| {
                    Session::replay_partial(&snap.program, snap.options.clone(), &snap.answers)
                        .map(|s| (snap.program, s))
                        .map_err(|e| e.to_string())
                });
            match restored {
                Ok((program, session)) => {
                    sessions.insert(id, (program, Arc::new(Mutex::new(session))));
                }
                Err(e) => problems.push(format!("{}: {e}", path.display())),
            }
        }
        Ok((Store { sessions: RwLock::new(sessions), dir: Some(dir) }, problems))
    }

    pub async fn insert(&self, program: String, session: Session) -> io::Result<String> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        self.persist(&id, &program, &session)?;
        self.sessions.write().await.insert(id.clone(), (program, Arc::new(Mutex::new(session))));
        Ok(id)
    }

    pub async fn get(&self, id: &str) -> Option<(String, SessionHandle)> {
        self.sessions.read().await.get(id).cloned()
    }

    pub fn persist(&self, id: &str, program: &str, session: &Session) -> io::Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let snap = Snapshot {
            program: program.to_string(),
            options: session.options().clone(),
            answers: session.answers().to_vec(),
        };
        write_atomic(&dir.join(format!("{id}.json")), &serde_json::to_vec_pretty(&snap).expect("snapshot serializes"))
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(tmp, path)
}
