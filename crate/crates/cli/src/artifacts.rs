//! Output directories that appear only once complete.
//!
//! Files are written into a hidden staging directory next to the target
//! and the staging directory is renamed into place by [`Artifacts::commit`],
//! after `manifest.csv` (path, size and SHA-256 of every other file) has
//! been written. Dropping an uncommitted [`Artifacts`] removes the staging
//! directory, so failed runs leave nothing behind.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.csv";

pub struct Artifacts {
    target: PathBuf,
    staging: PathBuf,
    files: Vec<(String, u64, String)>,
    committed: bool,
}

impl Artifacts {
    pub fn create(target: impl Into<PathBuf>) -> CliResult<Self> {
        let target = target.into();
        let name = target
            .file_name()
            .ok_or_else(|| CliError::Usage(format!("invalid output directory {}", target.display())))?
            .to_string_lossy()
            .into_owned();
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        if target.exists() && !target.join(MANIFEST).is_file() {
            return Err(CliError::io(
                &target,
                std::io::Error::new(
                    std::io::ErrorKind::AlreadyExists,
                    "exists and is not a previous run directory (no manifest.csv); refusing to replace it",
                ),
            ));
        }
        fs::create_dir_all(&parent).map_err(|e| CliError::io(&parent, e))?;
        let staging = parent.join(format!(".{name}.partial-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| CliError::io(&staging, e))?;
        }
        fs::create_dir(&staging).map_err(|e| CliError::io(&staging, e))?;
        Ok(Self {
            target,
            staging,
            files: Vec::new(),
            committed: false,
        })
    }

    pub fn target(&self) -> &Path {
        &self.target
    }

    /// Writes `bytes` at `rel` (forward-slash separated) inside the run.
    pub fn write(&mut self, rel: &str, bytes: impl AsRef<[u8]>) -> CliResult<()> {
        let bytes = bytes.as_ref();
        let path = self.staging.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(self.target.join(rel), e))?;
        self.files
            .push((rel.to_string(), bytes.len() as u64, hex::encode(Sha256::digest(bytes))));
        Ok(())
    }

    pub fn manifest(&self) -> String {
        let mut rows = self.files.clone();
        rows.sort();
        let mut out = String::from("path,bytes,sha256\n");
        for (p, b, h) in rows {
            out.push_str(&format!("{p},{b},{h}\n"));
        }
        out
    }

    pub fn commit(mut self) -> CliResult<PathBuf> {
        fs::write(self.staging.join(MANIFEST), self.manifest()).map_err(|e| CliError::io(&self.staging, e))?;
        if self.target.exists() {
            fs::remove_dir_all(&self.target).map_err(|e| CliError::io(&self.target, e))?;
        }
        fs::rename(&self.staging, &self.target).map_err(|e| CliError::io(&self.target, e))?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for Artifacts {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

/// Parses a manifest back into (path, bytes, sha256) rows.
pub fn read_manifest(dir: &Path) -> CliResult<Vec<(String, u64, String)>> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    Ok(text
        .lines()
        .skip(1)
        .filter_map(|l| {
            let mut f = l.split(',');
            Some((f.next()?.to_string(), f.next()?.parse().ok()?, f.next()?.to_string()))
        })
        .collect())
}
