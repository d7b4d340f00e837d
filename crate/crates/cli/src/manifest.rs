//! Stage manifests: checksums of inputs and outputs, the configuration
//! hash, seed and tool version. A stage whose recorded inputs, config and
//! outputs still match is skipped.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL: &str = "xtreval";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub stage: String,
    pub config_hash: String,
    pub seed: u64,
    pub inputs: Vec<FileDigest>,
    /// Paths relative to the stage directory.
    pub outputs: Vec<FileDigest>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digests of `paths` plus any payload files their JSON headers name.
pub fn digest_inputs(paths: &[PathBuf]) -> Result<Vec<FileDigest>> {
    let mut all: Vec<PathBuf> = Vec::new();
    for p in paths {
        all.push(p.clone());
        if p.extension().is_some_and(|e| e == "json") {
            if let Some(payload) = payload_of(p) {
                all.push(payload);
            }
        }
    }
    all.iter()
        .map(|p| Ok(FileDigest { path: p.display().to_string(), sha256: sha256_file(p)? }))
        .collect()
}

fn payload_of(header: &Path) -> Option<PathBuf> {
    let text = fs::read_to_string(header).ok()?;
    let v: serde_json::Value = serde_json::from_str(&text).ok()?;
    let name = v.get("payload")?.as_str()?;
    let path = header.parent().unwrap_or(Path::new(".")).join(name);
    path.exists().then_some(path)
}

/// Everything known before a stage runs.
#[derive(Debug, Clone)]
pub struct StageKey {
    pub stage: String,
    pub config_hash: String,
    pub seed: u64,
    pub inputs: Vec<FileDigest>,
}

impl StageKey {
    pub fn new(stage: &str, config: &impl Serialize, seed: u64, inputs: &[PathBuf]) -> Result<Self> {
        let cfg = serde_json::to_vec(config)?;
        Ok(Self { stage: stage.into(), config_hash: sha256_bytes(&cfg), seed, inputs: digest_inputs(inputs)? })
    }

    /// The recorded manifest when it matches this key and every output is intact.
    pub fn up_to_date(&self, dir: &Path) -> Option<Manifest> {
        let text = fs::read_to_string(dir.join(MANIFEST)).ok()?;
        let m: Manifest = serde_json::from_str(&text).ok()?;
        let same = m.tool == TOOL
            && m.version == VERSION
            && m.stage == self.stage
            && m.config_hash == self.config_hash
            && m.seed == self.seed
            && m.inputs == self.inputs;
        let intact = m
            .outputs
            .iter()
            .all(|o| sha256_file(&dir.join(&o.path)).is_ok_and(|h| h == o.sha256));
        (same && intact).then_some(m)
    }

    /// Write the manifest for `outputs` (relative to `dir`).
    pub fn finish(self, dir: &Path, outputs: &[String], warnings: Vec<String>) -> Result<Manifest> {
        let mut outs: Vec<FileDigest> = outputs
            .iter()
            .map(|o| Ok(FileDigest { path: o.clone(), sha256: sha256_file(&dir.join(o))? }))
            .collect::<Result<_>>()?;
        outs.sort_by(|a, b| a.path.cmp(&b.path));
        let m = Manifest {
            tool: TOOL.into(),
            version: VERSION.into(),
            stage: self.stage,
            config_hash: self.config_hash,
            seed: self.seed,
            inputs: self.inputs,
            outputs: outs,
            warnings,
        };
        let mut text = serde_json::to_string_pretty(&m)?;
        text.push('\n');
        fs::write(dir.join(MANIFEST), text)?;
        Ok(m)
    }
}
