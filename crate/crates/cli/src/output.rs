//! Run directories: every artefact goes through [`Run::write`] so the
//! manifest can list it with its digest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
struct FileDigest {
    path: String,
    bytes: usize,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    settings: &'a std::collections::BTreeMap<String, String>,
    inputs: &'a [FileDigest],
    outputs: &'a [FileDigest],
    notes: &'a [String],
}

pub struct Run {
    pub dir: PathBuf,
    command: String,
    settings: std::collections::BTreeMap<String, String>,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    notes: Vec<String>,
}

impl Run {
    /// `<out>/<command>-<digest of the settings>`; the same settings always
    /// land in the same directory.
    pub fn create(out: &Path, command: &str, raw: &crate::config::RawSettings) -> Result<Self> {
        let echo = raw.echo();
        let tag = &sha256_hex(format!("{command}\n{echo}").as_bytes())[..12];
        let dir = out.join(format!("{command}-{tag}"));
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut run = Self {
            dir,
            command: command.to_string(),
            settings: raw.0.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            notes: Vec::new(),
        };
        run.write("config.txt", echo.as_bytes())?;
        Ok(run)
    }

    /// Reads an input file and records its digest.
    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            bytes: bytes.len(),
            sha256: sha256_hex(&bytes),
        });
        Ok(bytes)
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.retain(|f| f.path != name);
        self.outputs.push(FileDigest {
            path: name.to_string(),
            bytes: bytes.len(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn write_csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
        self.write(name, &bytes)
    }

    /// Writes the manifest and returns the run directory.
    pub fn finish(mut self) -> Result<PathBuf> {
        self.outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            tool: "rmtfolio",
            version: env!("CARGO_PKG_VERSION"),
            command: &self.command,
            settings: &self.settings,
            inputs: &self.inputs,
            outputs: &self.outputs,
            notes: &self.notes,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.dir.join("manifest.json"), text)?;
        Ok(self.dir)
    }
}
