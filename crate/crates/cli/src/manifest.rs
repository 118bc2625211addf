use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mfbayes::bayes::Method;
use mfbayes::pipeline::PriorChoice;
use serde::{Deserialize, Serialize};

use crate::config::sha256_hex;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub fit_s: Option<f64>,
    pub posterior_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    pub surrogate_kind: Option<String>,
    pub train_mse: Option<f64>,
    pub test_mse: Option<f64>,
    pub alpha: Option<Vec<f64>>,
    pub flow_test_log_likelihood: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PosteriorInfo {
    /// `grid` or `samples`.
    pub kind: String,
    pub hellinger: Option<f64>,
    pub kl: Option<f64>,
    pub trace: Option<f64>,
    pub rescaled_trace: Option<f64>,
    pub diagonal: Option<Vec<f64>>,
    pub mean: Vec<f64>,
    pub psrf: Option<Vec<f64>>,
    pub converged: Option<bool>,
    pub generations: Option<usize>,
    pub hf_calls: usize,
}

/// Record of one (seed, method) run: config identity, timings, results and
/// artifact hashes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub config_hash: String,
    pub problem: String,
    pub prior: PriorChoice,
    pub method: Method,
    pub seed: u64,
    pub timings: Timings,
    pub fit: Option<FitInfo>,
    pub posterior: Option<PosteriorInfo>,
    /// File name → SHA-256 of its contents.
    pub artifacts: BTreeMap<String, String>,
    /// SHA-256 of everything above except the timings.
    pub content_hash: String,
}

impl RunManifest {
    pub fn new(config_hash: String, problem: &str, prior: PriorChoice, method: Method, seed: u64) -> Self {
        Self {
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash,
            problem: problem.to_string(),
            prior,
            method,
            seed,
            timings: Timings::default(),
            fit: None,
            posterior: None,
            artifacts: BTreeMap::new(),
            content_hash: String::new(),
        }
    }

    fn compute_hash(&self) -> String {
        let mut c = self.clone();
        c.timings = Timings::default();
        c.content_hash.clear();
        sha256_hex(serde_json::to_string(&c).expect("manifest serializes").as_bytes())
    }

    /// Writes `bytes` into `dir/name` and records its hash.
    pub fn write_artifact(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.artifacts.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn save(&mut self, dir: &Path) -> Result<PathBuf> {
        self.content_hash = self.compute_hash();
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let m: Self = serde_json::from_str(&text)
            .map_err(|e| mfbayes::Error::Parse(format!("{}: {e}", path.display())))?;
        Ok(m)
    }
}

/// Manifest files under each path (files are taken as given, directories
/// searched recursively), in sorted order.
pub fn collect_manifests(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
            let p = entry?.path();
            if p.is_dir() {
                walk(&p, out)?;
            } else if p.file_name().is_some_and(|n| n == MANIFEST_FILE) {
                out.push(p);
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            walk(p, &mut out)?;
        } else {
            out.push(p.clone());
        }
    }
    out.sort();
    Ok(out)
}
