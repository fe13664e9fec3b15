use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use netcoh::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Record of one invocation, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a, F: Serialize> {
    pub command: &'a str,
    pub flags: &'a F,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    /// SHA-256 of every input file, keyed by the path as given.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub version: &'static str,
    pub duration_seconds: f64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Collects inputs and outputs while a command runs.
pub struct Run {
    start: Instant,
    out: PathBuf,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
}

impl Run {
    pub fn start(out: &Path) -> Result<Self> {
        std::fs::create_dir_all(out)?;
        Ok(Self {
            start: Instant::now(),
            out: out.to_path_buf(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs
            .insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    /// Path of a file inside the output directory.
    pub fn output(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.out.join(name)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.output(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| {
            netcoh::NetcohError::InvalidInput(format!("cannot serialize {name}: {e}"))
        })?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn write_csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.output(name))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn finish<F: Serialize>(
        mut self,
        command: &str,
        flags: &F,
        threads: Option<usize>,
        seed: Option<u64>,
    ) -> Result<()> {
        let outputs = self.outputs.clone();
        let m = RunManifest {
            command,
            flags,
            threads,
            seed,
            inputs: std::mem::take(&mut self.inputs),
            outputs,
            version: env!("CARGO_PKG_VERSION"),
            duration_seconds: self.start.elapsed().as_secs_f64(),
        };
        self.write_json("manifest.json", &m)
    }
}
