//! Output directory handling. Files are written to a staging directory and
//! moved into place only when the whole command succeeds.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;
use tempfile::TempDir;

use minerload_core::Result;

pub const PANEL: &str = "panel.csv";
pub const GAPS: &str = "gaps.json";
pub const TRANSFORM: &str = "transform.json";
pub const TRANSFORMED: &str = "transformed.csv";
pub const TESTS: &str = "tests.json";
pub const MODEL: &str = "model.json";
pub const FIT: &str = "fit.json";
pub const FIT_SERIES: &str = "fit_series.csv";
pub const SYNTHETIC: &str = "synthetic.csv";
pub const GENERATOR: &str = "generator.json";
pub const REPORT: &str = "report.json";
pub const PLOTS: &str = "plots";

pub struct Staging {
    out: PathBuf,
    dir: TempDir,
    created_out: bool,
    files: Vec<PathBuf>,
}

impl Staging {
    pub fn new(out: &Path) -> Result<Staging> {
        let created_out = !out.exists();
        fs::create_dir_all(out)?;
        let dir = tempfile::Builder::new().prefix(".staging-").tempdir_in(out)?;
        Ok(Staging {
            out: out.to_path_buf(),
            dir,
            created_out,
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.path().join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.files.push(PathBuf::from(name));
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&crate::report::canonical(value))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Moves every staged file into the output directory.
    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut moved = Vec::new();
        for f in &self.files {
            let target = self.out.join(f);
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent)?;
            }
            if let Err(e) = fs::rename(self.dir.path().join(f), &target) {
                for m in &moved {
                    let _ = fs::remove_file(m);
                }
                return Err(e.into());
            }
            moved.push(target);
        }
        Ok(moved)
    }

    /// Drops staged files and removes the output directory if this command
    /// created it and it is empty.
    pub fn abort(self) {
        let out = self.out.clone();
        let created = self.created_out;
        drop(self.dir);
        if created {
            let _ = fs::remove_dir(&out);
        }
    }
}

pub fn path(out: &Path, name: &str) -> PathBuf {
    out.join(name)
}
