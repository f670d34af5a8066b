//! Artifact store: `manifest.json` plus one raw little-endian f64 file per array.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const FORMAT: &str = "surrosel-store/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayEntry {
    pub file: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub code_version: String,
    pub rng: String,
    pub config: ExperimentConfig,
    pub summary: BTreeMap<String, Value>,
    pub arrays: BTreeMap<String, ArrayEntry>,
}

fn io(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Collects arrays, then writes the manifest last.
pub struct StoreWriter {
    dir: PathBuf,
    arrays: BTreeMap<String, ArrayEntry>,
    summary: BTreeMap<String, Value>,
}

impl StoreWriter {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        // a stale manifest would describe arrays that are about to change
        let manifest = dir.join(MANIFEST);
        if manifest.exists() {
            fs::remove_file(&manifest).map_err(|e| io(&manifest, e))?;
        }
        Ok(Self { dir: dir.to_path_buf(), arrays: BTreeMap::new(), summary: BTreeMap::new() })
    }

    pub fn put(&mut self, name: &str, shape: &[usize], data: &[f64]) -> Result<(), CliError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(CliError::Io(format!("array {name}: shape {shape:?} does not match {} values", data.len())));
        }
        let file = format!("{name}.f64");
        let mut bytes = Vec::with_capacity(8 * data.len());
        for v in data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let path = self.dir.join(&file);
        fs::write(&path, bytes).map_err(|e| io(&path, e))?;
        self.arrays.insert(name.to_string(), ArrayEntry { file, shape: shape.to_vec() });
        Ok(())
    }

    /// Stores a list of equally long rows as a 2-d array.
    pub fn put_rows(&mut self, name: &str, cols: usize, rows: &[&[f64]]) -> Result<(), CliError> {
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        self.put(name, &[rows.len(), cols], &flat)
    }

    pub fn put_indices(&mut self, name: &str, idx: &[usize]) -> Result<(), CliError> {
        let data: Vec<f64> = idx.iter().map(|&i| i as f64).collect();
        self.put(name, &[idx.len()], &data)
    }

    pub fn summary(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.to_string(), value.into());
    }

    pub fn finish(self, config: &ExperimentConfig) -> Result<Manifest, CliError> {
        let manifest = Manifest {
            format: FORMAT.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            rng: surrosel::problem::RNG_ALGORITHM.to_string(),
            config: config.clone(),
            summary: self.summary,
            arrays: self.arrays,
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        let path = self.dir.join(MANIFEST);
        fs::write(&path, text).map_err(|e| io(&path, e))?;
        Ok(manifest)
    }
}

#[derive(Debug, Clone)]
pub struct Store {
    dir: PathBuf,
    manifest: Manifest,
}

impl Store {
    pub fn open(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| {
            CliError::Config(format!("no artifact store at {} ({e}); run `offline` first", dir.display()))
        })?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        if manifest.format != FORMAT {
            return Err(CliError::Io(format!("{}: unsupported store format {}", path.display(), manifest.format)));
        }
        Ok(Self { dir: dir.to_path_buf(), manifest })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn shape(&self, name: &str) -> Result<&[usize], CliError> {
        self.manifest
            .arrays
            .get(name)
            .map(|e| e.shape.as_slice())
            .ok_or_else(|| CliError::Io(format!("store has no array `{name}`")))
    }

    pub fn array(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let entry = self
            .manifest
            .arrays
            .get(name)
            .ok_or_else(|| CliError::Io(format!("store has no array `{name}`")))?;
        let path = self.dir.join(&entry.file);
        let bytes = fs::read(&path).map_err(|e| io(&path, e))?;
        let n: usize = entry.shape.iter().product();
        if bytes.len() != 8 * n {
            return Err(CliError::Io(format!("{}: expected {} bytes, found {}", path.display(), 8 * n, bytes.len())));
        }
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }

    /// Rows of a 2-d array.
    pub fn rows(&self, name: &str) -> Result<Vec<Vec<f64>>, CliError> {
        let shape = self.shape(name)?.to_vec();
        if shape.len() != 2 {
            return Err(CliError::Io(format!("array `{name}` is not 2-d")));
        }
        let data = self.array(name)?;
        if shape[1] == 0 {
            return Ok(vec![Vec::new(); shape[0]]);
        }
        Ok(data.chunks_exact(shape[1]).map(<[f64]>::to_vec).collect())
    }

    pub fn indices(&self, name: &str) -> Result<Vec<usize>, CliError> {
        self.array(name)?
            .into_iter()
            .map(|v| {
                if v >= 0.0 && v.fract() == 0.0 {
                    Ok(v as usize)
                } else {
                    Err(CliError::Io(format!("array `{name}` holds a non-index value {v}")))
                }
            })
            .collect()
    }
}
