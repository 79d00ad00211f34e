use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{config_err, io_err, Result};

/// An output directory built in a sibling staging directory and renamed into
/// place by [`RunDir::commit`]. Dropping it uncommitted removes the staging
/// directory, so failed runs leave nothing behind.
#[derive(Debug)]
pub struct RunDir {
    staging: PathBuf,
    target: PathBuf,
    committed: bool,
}

impl RunDir {
    pub fn create(target: &Path, overwrite: bool) -> Result<RunDir> {
        if target.exists() && !overwrite {
            return Err(config_err(format!(
                "output directory {} exists (set overwrite to replace it)",
                target.display()
            )));
        }
        let name = target
            .file_name()
            .ok_or_else(|| config_err(format!("bad output directory {}", target.display())))?;
        let parent = target.parent().unwrap_or(Path::new("."));
        fs::create_dir_all(parent).map_err(io_err(parent))?;
        let mut staging_name = std::ffi::OsString::from(".");
        staging_name.push(name);
        staging_name.push(format!(".staging-{}", std::process::id()));
        let staging = parent.join(staging_name);
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(io_err(&staging))?;
        }
        fs::create_dir(&staging).map_err(io_err(&staging))?;
        Ok(RunDir {
            staging,
            target: target.to_path_buf(),
            committed: false,
        })
    }

    /// Directory files are written to before the commit.
    pub fn path(&self) -> &Path {
        &self.staging
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.staging.join(name)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let p = self.file(name);
        fs::write(&p, contents).map_err(io_err(&p))
    }

    pub fn commit(mut self) -> Result<PathBuf> {
        if self.target.exists() {
            fs::remove_dir_all(&self.target).map_err(io_err(&self.target))?;
        }
        fs::rename(&self.staging, &self.target).map_err(io_err(&self.target))?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}
