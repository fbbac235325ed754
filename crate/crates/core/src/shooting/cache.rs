//! On-disk cache of the m = 3 volume table.
//!
//! One JSON file per cache directory:
//! `{"schema": 1, "entries": {"m=3,k=10,horizon=100,rel_tol=1e-10,bracket_tol=1e-6": {...}}}`.
//! Writes go through a single mutex-guarded writer and replace the file
//! atomically (temp file + rename).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CACHE_SCHEMA: u32 = 1;
pub const CACHE_FILE: &str = "polyshoot-cache.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub m: u32,
    pub k: f64,
    pub horizon: f64,
    pub rel_tol: f64,
    pub bracket_tol: f64,
    pub eps_star: f64,
    pub eps_lo: f64,
    pub volume: f64,
}

impl CacheEntry {
    pub fn key(&self) -> String {
        cache_key(self.m, self.k, self.horizon, self.rel_tol, self.bracket_tol)
    }
}

pub fn cache_key(m: u32, k: f64, horizon: f64, rel_tol: f64, bracket_tol: f64) -> String {
    format!("m={m},k={k},horizon={horizon},rel_tol={rel_tol:e},bracket_tol={bracket_tol:e}")
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheFile {
    schema: u32,
    entries: BTreeMap<String, CacheEntry>,
}

#[derive(Debug)]
pub struct VolumeCache {
    path: PathBuf,
    entries: Mutex<BTreeMap<String, CacheEntry>>,
}

impl VolumeCache {
    /// Open (or start) the cache in `dir`, creating the directory if needed.
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::Cache(format!("{}: {e}", dir.display())))?;
        let path = dir.join(CACHE_FILE);
        let entries = match fs::read_to_string(&path) {
            Ok(text) => {
                let file: CacheFile = serde_json::from_str(&text)
                    .map_err(|e| Error::Cache(format!("{}: {e}", path.display())))?;
                if file.schema != CACHE_SCHEMA {
                    return Err(Error::Cache(format!(
                        "{}: schema {} is not supported (expected {CACHE_SCHEMA})",
                        path.display(),
                        file.schema
                    )));
                }
                file.entries
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(Error::Cache(format!("{}: {e}", path.display()))),
        };
        Ok(VolumeCache {
            path,
            entries: Mutex::new(entries),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, key: &str) -> Option<CacheEntry> {
        self.entries
            .lock()
            .expect("cache lock poisoned")
            .get(key)
            .cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Insert an entry and rewrite the file.
    pub fn insert(&self, entry: CacheEntry) -> Result<()> {
        let mut entries = self.entries.lock().expect("cache lock poisoned");
        entries.insert(entry.key(), entry);
        let file = CacheFile {
            schema: CACHE_SCHEMA,
            entries: entries.clone(),
        };
        let text = serde_json::to_string_pretty(&file).map_err(|e| Error::Cache(e.to_string()))?;
        let dir = self.path.parent().unwrap_or_else(|| Path::new("."));
        let io = |e: std::io::Error| Error::Cache(format!("{}: {e}", self.path.display()));
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
        tmp.write_all(text.as_bytes()).map_err(io)?;
        tmp.write_all(b"\n").map_err(io)?;
        tmp.persist(&self.path).map_err(|e| io(e.error))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(k: f64) -> CacheEntry {
        CacheEntry {
            m: 3,
            k,
            horizon: 100.0,
            rel_tol: 1e-10,
            bracket_tol: 1e-6,
            eps_star: 3.0,
            eps_lo: 2.9,
            volume: 100.0 + k,
        }
    }

    #[test]
    fn round_trip_and_schema() {
        let dir = tempfile::tempdir().unwrap();
        let cache = VolumeCache::open(dir.path()).unwrap();
        assert!(cache.is_empty());
        cache.insert(entry(10.0)).unwrap();
        cache.insert(entry(20.0)).unwrap();
        let reopened = VolumeCache::open(dir.path()).unwrap();
        assert_eq!(reopened.len(), 2);
        assert_eq!(reopened.get(&entry(20.0).key()), Some(entry(20.0)));
        let raw: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(CACHE_FILE)).unwrap())
                .unwrap();
        assert_eq!(raw["schema"], 1);
    }

    #[test]
    fn key_distinguishes_tolerances() {
        assert_ne!(
            cache_key(3, 10.0, 100.0, 1e-10, 1e-6),
            cache_key(3, 10.0, 100.0, 1e-11, 1e-6)
        );
        assert_eq!(
            cache_key(3, 10.0, 100.0, 1e-10, 1e-6),
            "m=3,k=10,horizon=100,rel_tol=1e-10,bracket_tol=1e-6"
        );
    }

    #[test]
    fn rejects_unknown_schema() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join(CACHE_FILE),
            r#"{"schema": 2, "entries": {}}"#,
        )
        .unwrap();
        assert!(matches!(
            VolumeCache::open(dir.path()),
            Err(Error::Cache(_))
        ));
    }
}
