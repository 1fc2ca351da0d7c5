//! Append-only node cache. Each line is one JSON record; a file belongs to a
//! single config hash, so a changed config never reads old entries.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use casimir_grating::casimir::NodeValues;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pass {
    Fine,
    Coarse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub pass: Pass,
    pub index: usize,
    pub kappa: f64,
    pub kx0: f64,
    pub ky0: f64,
    pub values: NodeValues,
}

pub struct NodeCache {
    path: PathBuf,
    writer: Option<BufWriter<File>>,
}

impl NodeCache {
    pub fn path_for(work_dir: &Path, hash: &str) -> PathBuf {
        work_dir.join(format!("nodes-{hash}.jsonl"))
    }

    pub fn open(work_dir: &Path, hash: &str) -> Result<Self, CliError> {
        fs::create_dir_all(work_dir)?;
        Ok(NodeCache {
            path: Self::path_for(work_dir, hash),
            writer: None,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Reads all complete records. A torn final line from an interrupted
    /// run is skipped.
    pub fn load(&self) -> Result<HashMap<(Pass, usize), Record>, CliError> {
        let mut out = HashMap::new();
        let file = match File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
            Err(e) => return Err(e.into()),
        };
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Record>(&line) {
                Ok(r) => {
                    out.insert((r.pass, r.index), r);
                }
                Err(e) => log::warn!(
                    "{}:{}: skipping unreadable cache record ({e})",
                    self.path.display(),
                    lineno + 1
                ),
            }
        }
        Ok(out)
    }

    pub fn append(&mut self, record: &Record) -> Result<(), CliError> {
        if self.writer.is_none() {
            let torn = fs::read(&self.path)
                .map(|b| b.last().is_some_and(|c| *c != b'\n'))
                .unwrap_or(false);
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&self.path)?;
            let mut w = BufWriter::new(file);
            if torn {
                // keep the next record off the partial line
                w.write_all(b"\n")?;
            }
            self.writer = Some(w);
        }
        let w = self.writer.as_mut().expect("writer just opened");
        serde_json::to_writer(&mut *w, record)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}
