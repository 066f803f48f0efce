//! Run manifests: resolved configuration, seed, artifact checksums, timings
//! and the error record of a failed run.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArtifactRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

impl ArtifactRecord {
    pub fn of(name: impl Into<String>, contents: &[u8]) -> Self {
        Self {
            name: name.into(),
            sha256: sha256_hex(contents),
            bytes: contents.len() as u64,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Ordered `key = value` entries. Keys under `timing.` vary between runs;
/// everything else is reproducible.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn push_artifact(&mut self, a: &ArtifactRecord) {
        self.push(format!("artifact.{}", a.name), format!("{} {}", a.sha256, a.bytes));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn artifacts(&self) -> Result<Vec<ArtifactRecord>> {
        self.entries
            .iter()
            .filter_map(|(k, v)| k.strip_prefix("artifact.").map(|name| parse_artifact(name, v)))
            .collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::from("# volterra-sim run manifest\n");
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// The rendering with timing entries dropped.
    pub fn render_reproducible(&self) -> String {
        Manifest {
            entries: self.entries.iter().filter(|(k, _)| !k.starts_with("timing.")).cloned().collect(),
        }
        .render()
    }
}

fn parse_artifact(name: &str, value: &str) -> Result<ArtifactRecord> {
    let bad = |msg: &str| Error::config(format!("artifact.{name}"), msg.to_string());
    if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
        return Err(bad("artifact names must be plain file names"));
    }
    let mut parts = value.split_whitespace();
    let (Some(sha), Some(bytes), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(bad("expected `<sha256> <bytes>`"));
    };
    if sha.len() != 64 || !sha.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase()) {
        return Err(bad("checksum must be 64 lowercase hex digits"));
    }
    let bytes = bytes.parse::<u64>().map_err(|_| bad("byte count must be an integer"))?;
    Ok(ArtifactRecord {
        name: name.to_string(),
        sha256: sha.to_string(),
        bytes,
    })
}

pub fn parse_manifest(text: &str) -> Result<Manifest> {
    let mut m = Manifest::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("manifest line {}", i + 1), "expected `key = value`"))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::config(format!("manifest line {}", i + 1), "empty key"));
        }
        if m.get(k).is_some() {
            return Err(Error::config(k, "duplicate manifest key"));
        }
        m.push(k, v.trim());
    }
    m.artifacts()?;
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArtifactStatus {
    Ok,
    Missing,
    Mismatch { found: String },
}

/// Recomputes every artifact checksum relative to `dir`.
pub fn verify_artifacts(manifest: &Manifest, dir: &Path) -> Result<Vec<(ArtifactRecord, ArtifactStatus)>> {
    manifest
        .artifacts()?
        .into_iter()
        .map(|a| {
            let status = match std::fs::read(dir.join(&a.name)) {
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => ArtifactStatus::Missing,
                Err(e) => {
                    return Err(Error::Io {
                        path: dir.join(&a.name).display().to_string(),
                        source: e,
                    })
                }
                Ok(bytes) => {
                    let found = sha256_hex(&bytes);
                    if found == a.sha256 && bytes.len() as u64 == a.bytes {
                        ArtifactStatus::Ok
                    } else {
                        ArtifactStatus::Mismatch { found }
                    }
                }
            };
            Ok((a, status))
        })
        .collect()
}
