//! Resume bookkeeping: per stage, the hash of its inputs and of each output file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::acquire::sha256_hex;
use crate::error::{Error, Result};

pub const STATE_FILE: &str = "run_state.txt";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StageRecord {
    pub inputs: String,
    pub outputs: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunState {
    pub stages: BTreeMap<String, StageRecord>,
}

/// Incremental hash over labelled parts.
#[derive(Default)]
pub struct InputHasher(Sha256);

impl InputHasher {
    pub fn text(mut self, label: &str, value: &str) -> Self {
        self.0.update(label.as_bytes());
        self.0.update([0x1f]);
        self.0.update(value.as_bytes());
        self.0.update([0x1e]);
        self
    }

    pub fn file(self, label: &str, path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(self.text(label, &sha256_hex(&bytes)))
    }

    /// Relative paths and contents of every file below `root`, in sorted order.
    pub fn tree(mut self, label: &str, root: &Path) -> Result<Self> {
        let mut stack = vec![root.to_path_buf()];
        let mut files = Vec::new();
        while let Some(dir) = stack.pop() {
            for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
                let path = entry.map_err(|e| Error::io(&dir, e))?.path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    files.push(path);
                }
            }
        }
        files.sort();
        self = self.text(label, &files.len().to_string());
        for f in files {
            let rel = f.strip_prefix(root).unwrap_or(&f).to_string_lossy().replace('\\', "/");
            self = self.file(&rel, &f)?;
        }
        Ok(self)
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}

pub fn file_hash(path: &Path) -> Option<String> {
    fs::read(path).ok().map(|b| sha256_hex(&b))
}

impl RunState {
    /// A missing or unreadable state file is an empty state.
    pub fn load(dir: &Path) -> Self {
        let Ok(text) = fs::read_to_string(dir.join(STATE_FILE)) else {
            return Self::default();
        };
        let mut stages = BTreeMap::new();
        for line in text.lines() {
            let mut parts = line.split('\t');
            let (Some(stage), Some(inputs)) = (parts.next(), parts.next()) else {
                continue;
            };
            let outputs = parts
                .filter_map(|p| p.split_once('=').map(|(n, h)| (n.to_string(), h.to_string())))
                .collect();
            stages.insert(stage.to_string(), StageRecord { inputs: inputs.to_string(), outputs });
        }
        Self { stages }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut text = String::new();
        for (stage, rec) in &self.stages {
            text.push_str(stage);
            text.push('\t');
            text.push_str(&rec.inputs);
            for (name, hash) in &rec.outputs {
                text.push_str(&format!("\t{name}={hash}"));
            }
            text.push('\n');
        }
        let path = dir.join(STATE_FILE);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// True when the stage ran with these inputs and its outputs are untouched.
    pub fn is_current(&self, stage: &str, inputs: &str, dir: &Path) -> bool {
        match self.stages.get(stage) {
            Some(rec) if rec.inputs == inputs && !rec.outputs.is_empty() => rec
                .outputs
                .iter()
                .all(|(name, hash)| file_hash(&dir.join(name)).as_deref() == Some(hash.as_str())),
            _ => false,
        }
    }

    pub fn record(&mut self, stage: &str, inputs: String, dir: &Path, outputs: &[String]) -> Result<()> {
        let mut hashed = Vec::with_capacity(outputs.len());
        for name in outputs {
            let path = dir.join(name);
            let h = file_hash(&path).ok_or_else(|| Error::io(&path, std::io::ErrorKind::NotFound.into()))?;
            hashed.push((name.clone(), h));
        }
        hashed.sort();
        self.stages.insert(stage.to_string(), StageRecord { inputs, outputs: hashed });
        Ok(())
    }

    /// Drops a stage and everything after it in `order`.
    pub fn invalidate_from(&mut self, stage: &str, order: &[&str]) {
        if let Some(pos) = order.iter().position(|s| *s == stage) {
            for s in &order[pos..] {
                self.stages.remove(*s);
            }
        }
    }
}
