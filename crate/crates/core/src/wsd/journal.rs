use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::ClusterDecision;
use crate::error::{Error, Result};

/// Append-only decision log, one JSON record per line.
#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    file: File,
}

impl Journal {
    /// Opens (creating if needed) and returns the decisions already on disk.
    pub fn open(path: &Path) -> Result<(Journal, Vec<ClusterDecision>)> {
        let existing = if path.exists() { Self::read(path)? } else { Vec::new() };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok((
            Journal {
                path: path.to_path_buf(),
                file,
            },
            existing,
        ))
    }

    pub fn read(path: &Path) -> Result<Vec<ClusterDecision>> {
        let reader = BufReader::new(File::open(path)?);
        let mut out = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let d = serde_json::from_str(&line)
                .map_err(|e| Error::format(path.display().to_string(), n + 1, e.to_string()))?;
            out.push(d);
        }
        Ok(out)
    }

    pub fn append(&mut self, decision: &ClusterDecision) -> Result<()> {
        let mut line = serde_json::to_vec(decision)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.flush()?;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
