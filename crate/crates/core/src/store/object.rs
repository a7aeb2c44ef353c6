//! Object-store abstraction and its filesystem backend.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Component, Path, PathBuf};

use crate::error::{Error, Result};

/// Minimal blob store contract. Keys are `/`-separated relative paths.
pub trait ObjectStore: Send + Sync {
    /// Writes atomically: readers see either the old object or the complete new one.
    fn put(&self, key: &str, bytes: &[u8]) -> Result<()>;
    fn get(&self, key: &str) -> Result<Vec<u8>>;
    fn exists(&self, key: &str) -> bool;
    /// Keys directly or transitively under `prefix`, sorted.
    fn list(&self, prefix: &str) -> Result<Vec<String>>;
    fn delete(&self, key: &str) -> Result<()>;
    /// Appends bytes to an object, creating it when missing.
    fn append(&self, key: &str, bytes: &[u8]) -> Result<()>;
    /// Takes an exclusive advisory lock scoped to `key`, released on drop.
    fn lock(&self, key: &str) -> Result<StoreLock>;
    /// Local filesystem path for the object, when the backend has one.
    fn local_path(&self, key: &str) -> Option<PathBuf>;
}

/// Held advisory lock.
#[derive(Debug)]
pub struct StoreLock {
    _file: Option<File>,
}

impl StoreLock {
    pub fn noop() -> Self {
        Self { _file: None }
    }
}

#[derive(Debug, Clone)]
pub struct FsObjectStore {
    root: PathBuf,
}

impl FsObjectStore {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, key: &str) -> Result<PathBuf> {
        let rel = Path::new(key);
        let clean = !key.is_empty()
            && key.split('/').all(|seg| !seg.is_empty() && seg != "." && seg != "..")
            && rel
                .components()
                .all(|c| matches!(c, Component::Normal(_)));
        if !clean {
            return Err(Error::Store(format!("invalid object key {key:?}")));
        }
        Ok(self.root.join(rel))
    }
}

impl ObjectStore for FsObjectStore {
    fn put(&self, key: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(key)?;
        let dir = path.parent().expect("keys are relative and non-empty");
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(
            ".{}.tmp-{}",
            path.file_name().unwrap_or_default().to_string_lossy(),
            uuid::Uuid::new_v4().simple()
        ));
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        drop(f);
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    fn get(&self, key: &str) -> Result<Vec<u8>> {
        let path = self.path(key)?;
        fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(key.to_string()),
            _ => Error::Io(e),
        })
    }

    fn exists(&self, key: &str) -> bool {
        self.path(key).map(|p| p.is_file()).unwrap_or(false)
    }

    fn list(&self, prefix: &str) -> Result<Vec<String>> {
        let base = if prefix.is_empty() {
            self.root.clone()
        } else {
            self.path(prefix.trim_end_matches('/'))?
        };
        let mut out = Vec::new();
        if base.is_dir() {
            walk(&base, &mut |p| {
                let name = p.file_name().unwrap_or_default().to_string_lossy();
                if name.starts_with('.') {
                    return;
                }
                if let Ok(rel) = p.strip_prefix(&self.root) {
                    let key: Vec<_> = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect();
                    out.push(key.join("/"));
                }
            })?;
        }
        out.sort();
        Ok(out)
    }

    fn delete(&self, key: &str) -> Result<()> {
        let path = self.path(key)?;
        fs::remove_file(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(key.to_string()),
            _ => Error::Io(e),
        })
    }

    fn append(&self, key: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(key)?;
        fs::create_dir_all(path.parent().expect("non-empty key"))?;
        let mut f = OpenOptions::new().create(true).append(true).open(&path)?;
        f.write_all(bytes)?;
        f.sync_data()?;
        Ok(())
    }

    fn lock(&self, key: &str) -> Result<StoreLock> {
        let path = self.path(&format!("{key}.lock"))?;
        fs::create_dir_all(path.parent().expect("non-empty key"))?;
        let file = OpenOptions::new().create(true).truncate(false).write(true).open(&path)?;
        file.lock()?;
        Ok(StoreLock { _file: Some(file) })
    }

    fn local_path(&self, key: &str) -> Option<PathBuf> {
        self.path(key).ok()
    }
}

fn walk(dir: &Path, f: &mut dyn FnMut(&Path)) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if entry.file_type()?.is_dir() {
            walk(&path, f)?;
        } else {
            f(&path);
        }
    }
    Ok(())
}
