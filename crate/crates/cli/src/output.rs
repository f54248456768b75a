use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::OutputArgs;

/// Resolves `--out` against the default output directory, falling back to
/// `default_name` inside it.
pub fn resolve(args: &OutputArgs, default_name: &str) -> PathBuf {
    match &args.out {
        Some(p) if p.is_absolute() => p.clone(),
        Some(p) => args.out_dir.join(p),
        None => args.out_dir.join(default_name),
    }
}

/// Files written by one command. Unless `commit` is called, every file
/// written so far is removed when this is dropped, so a failed command
/// leaves no partial output behind.
pub struct Outputs {
    written: Vec<PathBuf>,
    created_dirs: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn new() -> Self {
        Outputs {
            written: Vec::new(),
            created_dirs: Vec::new(),
            committed: false,
        }
    }

    fn ensure_dir(&mut self, dir: &Path) -> Result<()> {
        if dir.as_os_str().is_empty() || dir.is_dir() {
            return Ok(());
        }
        if let Some(parent) = dir.parent() {
            self.ensure_dir(parent)?;
        }
        fs::create_dir(dir).with_context(|| format!("cannot create directory {}", dir.display()))?;
        self.created_dirs.push(dir.to_path_buf());
        Ok(())
    }

    pub fn write(&mut self, path: &Path, contents: &str) -> Result<()> {
        if let Some(parent) = path.parent() {
            self.ensure_dir(parent)?;
        }
        rappsurf::io::write_atomic(path, contents.as_bytes())
            .with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for path in &self.written {
            let _ = fs::remove_file(path);
        }
        for dir in self.created_dirs.iter().rev() {
            let _ = fs::remove_dir(dir);
        }
    }
}
