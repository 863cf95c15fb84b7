//! Run manifests: what was run, on which inputs, producing which outputs.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::failure::{Failure, Outcome};

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub library_version: &'static str,
    pub subcommand: &'static str,
    pub created_unix: u64,
    pub threads: usize,
    pub parameters: Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Subcommand-specific results (summaries, reports).
    #[serde(skip_serializing_if = "Value::is_null")]
    pub results: Value,
}

fn sha256_file(path: &Path) -> Outcome<FileDigest> {
    let mut file = fs::File::open(path).map_err(|e| Failure::from(e).at(path))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut bytes = 0u64;
    loop {
        let n = file.read(&mut buf).map_err(|e| Failure::from(e).at(path))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        bytes += n as u64;
    }
    let sha256 = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
    Ok(FileDigest {
        path: path.display().to_string(),
        bytes,
        sha256,
    })
}

/// Digests of `path`, or of every regular file directly inside it, sorted by name.
pub fn digests(path: &Path) -> Outcome<Vec<FileDigest>> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| Failure::from(e).at(path))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        files.iter().map(|p| sha256_file(p)).collect()
    } else {
        Ok(vec![sha256_file(path)?])
    }
}

impl Manifest {
    pub fn new(subcommand: &'static str, parameters: Value) -> Self {
        let created_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self {
            tool: "gridfuse",
            tool_version: env!("CARGO_PKG_VERSION"),
            library_version: gridfuse::VERSION,
            subcommand,
            created_unix,
            threads: rayon::current_num_threads(),
            parameters,
            inputs: Vec::new(),
            outputs: Vec::new(),
            results: Value::Null,
        }
    }

    pub fn input(&mut self, path: &Path) -> Outcome {
        self.inputs.extend(digests(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Outcome {
        self.outputs.extend(digests(path)?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Outcome {
        let text = serde_json::to_string_pretty(self).map_err(|e| Failure::Internal(e.to_string()))?;
        fs::write(path, text + "\n").map_err(|e| Failure::from(e).at(path))?;
        log::info!("wrote {}", path.display());
        Ok(())
    }
}

/// `<file>.manifest.json` beside a file output, `<dir>/manifest.json` for a directory.
pub fn path_for(output: &Path) -> PathBuf {
    if output.is_dir() {
        output.join("manifest.json")
    } else {
        let mut name = output.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        output.with_file_name(name)
    }
}
