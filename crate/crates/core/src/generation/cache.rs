use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use super::{GenerationError, GenerationRecord};

/// Append-only store of generation records, keyed by request content.
/// Readers share a lock; appends are serialized.
#[derive(Debug)]
pub struct GenerationCache {
    entries: RwLock<HashMap<String, GenerationRecord>>,
    log: Mutex<Option<BufWriter<File>>>,
    path: Option<PathBuf>,
}

impl GenerationCache {
    pub fn in_memory() -> Self {
        Self {
            entries: RwLock::new(HashMap::new()),
            log: Mutex::new(None),
            path: None,
        }
    }

    /// Opens (or creates) a cache file of jsonl records.
    pub fn open(path: &Path) -> Result<Self, GenerationError> {
        let cache = Self::in_memory();
        if path.exists() {
            cache.import(path)?;
        } else if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| cache_err(path, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| cache_err(path, e))?;
        *cache.log.lock().unwrap() = Some(BufWriter::new(file));
        Ok(Self {
            path: Some(path.to_path_buf()),
            ..cache
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, key: &str) -> Option<GenerationRecord> {
        self.entries.read().unwrap().get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&self, record: GenerationRecord) -> Result<(), GenerationError> {
        let key = record.cache_key();
        let mut log = self.log.lock().unwrap();
        if self.entries.read().unwrap().contains_key(&key) {
            return Ok(());
        }
        if let Some(writer) = log.as_mut() {
            let line = serde_json::to_string(&record).map_err(|e| GenerationError::Cache(e.to_string()))?;
            writeln!(writer, "{line}")
                .and_then(|_| writer.flush())
                .map_err(|e| GenerationError::Cache(e.to_string()))?;
        }
        self.entries.write().unwrap().insert(key, record);
        Ok(())
    }

    /// Loads records from a jsonl export. Existing keys are kept.
    pub fn import(&self, path: &Path) -> Result<usize, GenerationError> {
        let content = fs::read_to_string(path).map_err(|e| cache_err(path, e))?;
        let mut entries = self.entries.write().unwrap();
        let mut added = 0;
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: GenerationRecord = serde_json::from_str(line)
                .map_err(|e| GenerationError::Cache(format!("{}:{}: {e}", path.display(), i + 1)))?;
            entries.entry(record.cache_key()).or_insert_with(|| {
                added += 1;
                record
            });
        }
        Ok(added)
    }

    /// Writes every record as jsonl, ordered by cache key.
    pub fn export(&self, path: &Path) -> Result<(), GenerationError> {
        let entries = self.entries.read().unwrap();
        let mut keys: Vec<&String> = entries.keys().collect();
        keys.sort();
        let mut out = String::new();
        for k in keys {
            out.push_str(&serde_json::to_string(&entries[k]).map_err(|e| GenerationError::Cache(e.to_string()))?);
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| cache_err(path, e))
    }
}

fn cache_err(path: &Path, e: std::io::Error) -> GenerationError {
    GenerationError::Cache(format!("{}: {e}", path.display()))
}
