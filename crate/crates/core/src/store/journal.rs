//! Durable backing for the store: an append-only record log plus a mesh
//! blob area keyed by content hash.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use super::{DocumentRef, StoreError};
use crate::act::Annotation;
use crate::geometry::{load_mesh, ContentHash, Mesh, MeshFormat};
use crate::minute::DesignMinute;

/// One log entry. Every entry is a full snapshot of the object it names, so
/// replay is "last write wins".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Record {
    Document { document: DocumentRef },
    Annotation { annotation: Box<Annotation> },
    Minute { minute: Box<DesignMinute> },
}

pub trait Journal: Send + Sync {
    fn append(&self, record: &Record) -> Result<(), StoreError>;
    fn put_mesh(&self, mesh: &Mesh) -> Result<(), StoreError>;
    fn load_mesh(&self, hash: &ContentHash) -> Result<Mesh, StoreError>;
    fn replay(&self) -> Result<Vec<Record>, StoreError>;
}

#[derive(Default)]
pub struct MemoryJournal {
    records: Mutex<Vec<Record>>,
    meshes: Mutex<HashMap<ContentHash, Mesh>>,
}

impl MemoryJournal {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Journal for MemoryJournal {
    fn append(&self, record: &Record) -> Result<(), StoreError> {
        self.records.lock().push(record.clone());
        Ok(())
    }

    fn put_mesh(&self, mesh: &Mesh) -> Result<(), StoreError> {
        self.meshes.lock().insert(mesh.content_hash(), mesh.clone());
        Ok(())
    }

    fn load_mesh(&self, hash: &ContentHash) -> Result<Mesh, StoreError> {
        self.meshes
            .lock()
            .get(hash)
            .cloned()
            .ok_or_else(|| StoreError::Malformed(format!("mesh {hash} missing from journal")))
    }

    fn replay(&self) -> Result<Vec<Record>, StoreError> {
        Ok(self.records.lock().clone())
    }
}

/// `journal.jsonl` (one JSON record per line) and `meshes/<hash>.obj`
/// under a data directory.
pub struct FileJournal {
    dir: PathBuf,
    log: Mutex<BufWriter<File>>,
}

const LOG_FILE: &str = "journal.jsonl";
const MESH_DIR: &str = "meshes";

impl FileJournal {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(dir.join(MESH_DIR))?;
        let path = dir.join(LOG_FILE);
        // Drop a torn final line left by an interrupted write.
        if let Ok(bytes) = fs::read(&path) {
            if !bytes.is_empty() && !bytes.ends_with(b"\n") {
                let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
                OpenOptions::new().write(true).open(&path)?.set_len(keep as u64)?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(FileJournal {
            dir,
            log: Mutex::new(BufWriter::new(file)),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn mesh_path(&self, hash: &ContentHash) -> PathBuf {
        self.dir.join(MESH_DIR).join(format!("{}.obj", hash.to_hex()))
    }
}

impl Journal for FileJournal {
    fn append(&self, record: &Record) -> Result<(), StoreError> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        let mut log = self.log.lock();
        log.write_all(&line)?;
        log.flush()?;
        Ok(())
    }

    fn put_mesh(&self, mesh: &Mesh) -> Result<(), StoreError> {
        let path = self.mesh_path(&mesh.content_hash());
        if !path.exists() {
            let tmp = path.with_extension("obj.tmp");
            fs::write(&tmp, mesh.to_obj())?;
            fs::rename(tmp, path)?;
        }
        Ok(())
    }

    fn load_mesh(&self, hash: &ContentHash) -> Result<Mesh, StoreError> {
        let bytes = fs::read(self.mesh_path(hash))?;
        let mesh = load_mesh(&bytes, MeshFormat::Obj)?;
        if mesh.content_hash() != *hash {
            return Err(StoreError::HashMismatch {
                expected: *hash,
                found: mesh.content_hash(),
            });
        }
        Ok(mesh)
    }

    fn replay(&self) -> Result<Vec<Record>, StoreError> {
        let text = match fs::read_to_string(self.dir.join(LOG_FILE)) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        text.lines()
            .enumerate()
            .filter(|(_, line)| !line.trim().is_empty())
            .map(|(n, line)| {
                serde_json::from_str(line).map_err(|e| StoreError::Malformed(format!("journal line {}: {e}", n + 1)))
            })
            .collect()
    }
}
