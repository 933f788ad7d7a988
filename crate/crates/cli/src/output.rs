//! All-or-nothing output writing and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::commands::Invocation;
use crate::config::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";

/// Files produced by one run, held in memory until the run has succeeded.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    pub fn add(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), bytes.into()));
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Run(e.to_string()))?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Stages every file in a temporary directory inside `dir`, then renames
    /// them into place. On failure nothing from this set is left behind.
    pub fn commit(self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let stage = tempfile::Builder::new()
            .prefix(".ssl-genlab-")
            .tempdir_in(dir)
            .map_err(|e| CliError::io(dir, e))?;
        for (name, bytes) in &self.files {
            let p = stage.path().join(name);
            fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))?;
        }
        let mut placed = Vec::new();
        for (name, _) in &self.files {
            let target = dir.join(name);
            if let Err(e) = fs::rename(stage.path().join(name), &target) {
                for p in &placed {
                    let _ = fs::remove_file(p);
                }
                return Err(CliError::io(&target, e));
            }
            placed.push(target);
        }
        Ok(placed)
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(flatten)]
    pub invocation: Invocation,
    pub seed: u64,
    pub version: String,
    pub outputs: Vec<String>,
    pub duration_secs: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_writes_all_files() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("out");
        let mut set = OutputSet::default();
        set.add("a.csv", "x\n");
        set.add("b.json", "{}\n");
        let paths = set.commit(&dir).unwrap();
        assert_eq!(paths.len(), 2);
        assert_eq!(fs::read_to_string(dir.join("a.csv")).unwrap(), "x\n");
        // staging directory is gone
        assert_eq!(fs::read_dir(&dir).unwrap().count(), 2);
    }

    #[test]
    fn failed_commit_leaves_nothing() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("out");
        fs::create_dir_all(dir.join("b.json")).unwrap();
        fs::write(dir.join("b.json").join("blocker"), "").unwrap();
        let mut set = OutputSet::default();
        set.add("a.csv", "x\n");
        set.add("b.json", "{}\n");
        assert!(matches!(set.commit(&dir), Err(CliError::Io(_))));
        assert!(!dir.join("a.csv").exists());
    }
}
