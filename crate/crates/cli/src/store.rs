//! On-disk layout of datasets and evaluation runs.
//!
//! ```text
//! <dataset>/manifest.json
//! <dataset>/items.jsonl            one DatasetItem per line
//! <dataset>/instances/<id>.jss     instance text format
//! <dataset>/bundles/<id>.json      sealed reference bundle
//! <dataset>/modularized.jsonl      nine prompt/completion pairs per item
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use shopform::generator::{DatasetItem, ScenarioSpec};
use shopform::solver::SolveConfig;

pub const MANIFEST: &str = "manifest.json";
pub const ITEMS: &str = "items.jsonl";
pub const MODULARIZED: &str = "modularized.jsonl";
pub const OUTCOMES: &str = "outcomes.jsonl";
pub const LAYOUT_VERSION: u32 = 1;

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp-{}", std::process::id()));
    let mut file = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    file.write_all(bytes).and_then(|_| file.sync_all()).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn to_jsonl<T: Serialize>(rows: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut out, row).expect("rows serialize");
        out.push(b'\n');
    }
    out
}

pub fn from_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), n + 1)))
        .collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Describes how an output directory was produced. Everything except
/// `created_unix` is a function of the command's arguments and inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit: String,
    pub toolkit_version: String,
    pub layout_version: u32,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scenario_mix: Vec<ScenarioSpec>,
    pub solve_config: SolveConfig,
    pub counts: BTreeMap<String, u64>,
    /// SHA-256 of each configuration input, keyed by name.
    pub config_hashes: BTreeMap<String, String>,
    /// SHA-256 of every file written next to the manifest.
    pub files: BTreeMap<String, String>,
    pub created_unix: u64,
}

impl RunManifest {
    pub fn new(command: &str, solve_config: SolveConfig) -> Self {
        let config_json = serde_json::to_vec(&solve_config).expect("config serializes");
        RunManifest {
            toolkit: "shopform".into(),
            toolkit_version: env!("CARGO_PKG_VERSION").into(),
            layout_version: LAYOUT_VERSION,
            command: command.into(),
            seed: None,
            scenario_mix: Vec::new(),
            solve_config,
            counts: BTreeMap::new(),
            config_hashes: BTreeMap::from([("solve_config".to_string(), sha256_hex(&config_json))]),
            files: BTreeMap::new(),
            created_unix: unix_now(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        write_atomic(&dir.join(MANIFEST), &bytes)
    }
}

/// Collects files for an output directory and records their digests.
pub struct OutputDir {
    pub root: PathBuf,
    pub files: BTreeMap<String, String>,
}

impl OutputDir {
    pub fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(OutputDir { root: root.to_path_buf(), files: BTreeMap::new() })
    }

    pub fn put(&mut self, relative: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.root.join(relative), bytes)?;
        self.files.insert(relative.to_string(), sha256_hex(bytes));
        Ok(())
    }
}

pub struct Dataset {
    pub manifest: RunManifest,
    pub items: Vec<DatasetItem>,
}

#[derive(Debug)]
pub struct MissingManifest(pub PathBuf);

impl std::fmt::Display for MissingManifest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "no {MANIFEST} in {}", self.0.display())
    }
}

impl std::error::Error for MissingManifest {}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join(MANIFEST);
    if !manifest_path.is_file() {
        return Err(MissingManifest(dir.to_path_buf()).into());
    }
    let manifest: RunManifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)
        .with_context(|| format!("parsing {}", manifest_path.display()))?;
    let items = from_jsonl(&dir.join(ITEMS))?;
    Ok(Dataset { manifest, items })
}
