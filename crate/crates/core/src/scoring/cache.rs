use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ScoringError;
use crate::taxonomy::Taxonomy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Entry {
    text_hash: String,
    taxonomy: Taxonomy,
    scorer_version: String,
    scores: Vec<f64>,
}

pub fn text_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

type Key = (Taxonomy, String, String);

/// Scores keyed by (taxonomy, scorer version, text hash). A new version tag
/// naturally misses every old entry.
#[derive(Debug)]
pub struct ScoreCache {
    entries: RwLock<HashMap<Key, Vec<f64>>>,
    log: Mutex<Option<BufWriter<File>>>,
}

impl ScoreCache {
    pub fn in_memory() -> Self {
        Self {
            entries: RwLock::new(HashMap::new()),
            log: Mutex::new(None),
        }
    }

    pub fn open(path: &Path) -> Result<Self, ScoringError> {
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
        Ok(cache)
    }

    pub fn get(&self, taxonomy: Taxonomy, version: &str, text: &str) -> Option<Vec<f64>> {
        self.entries
            .read()
            .unwrap()
            .get(&(taxonomy, version.to_string(), text_hash(text)))
            .cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&self, taxonomy: Taxonomy, version: &str, text: &str, scores: &[f64]) -> Result<(), ScoringError> {
        let key = (taxonomy, version.to_string(), text_hash(text));
        let mut log = self.log.lock().unwrap();
        if self.entries.read().unwrap().contains_key(&key) {
            return Ok(());
        }
        if let Some(writer) = log.as_mut() {
            let entry = Entry {
                text_hash: key.2.clone(),
                taxonomy,
                scorer_version: key.1.clone(),
                scores: scores.to_vec(),
            };
            let line = serde_json::to_string(&entry).map_err(|e| ScoringError::Cache(e.to_string()))?;
            writeln!(writer, "{line}")
                .and_then(|_| writer.flush())
                .map_err(|e| ScoringError::Cache(e.to_string()))?;
        }
        self.entries.write().unwrap().insert(key, scores.to_vec());
        Ok(())
    }

    pub fn import(&self, path: &Path) -> Result<usize, ScoringError> {
        let content = fs::read_to_string(path).map_err(|e| cache_err(path, e))?;
        let mut entries = self.entries.write().unwrap();
        let mut added = 0;
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: Entry = serde_json::from_str(line)
                .map_err(|err| ScoringError::Cache(format!("{}:{}: {err}", path.display(), i + 1)))?;
            entries
                .entry((e.taxonomy, e.scorer_version, e.text_hash))
                .or_insert_with(|| {
                    added += 1;
                    e.scores
                });
        }
        Ok(added)
    }

    /// Writes `{text_hash, taxonomy, scorer_version, scores}` lines sorted by key.
    pub fn export(&self, path: &Path) -> Result<(), ScoringError> {
        let entries = self.entries.read().unwrap();
        let mut keys: Vec<&Key> = entries.keys().collect();
        keys.sort();
        let mut out = String::new();
        for k in keys {
            let entry = Entry {
                text_hash: k.2.clone(),
                taxonomy: k.0,
                scorer_version: k.1.clone(),
                scores: entries[k].clone(),
            };
            out.push_str(&serde_json::to_string(&entry).map_err(|e| ScoringError::Cache(e.to_string()))?);
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| cache_err(path, e))
    }
}

fn cache_err(path: &Path, e: std::io::Error) -> ScoringError {
    ScoringError::Cache(format!("{}: {e}", path.display()))
}
