use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mfbayes::bayes::Method;
use mfbayes::pipeline::{PriorChoice, Problem};
use mfbayes::surrogates::hyper::HyperTable;
use mfbayes::surrogates::SamplingScheme;
use mfbayes::Error;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "MFBAYES_OUT";

/// Which experiment a config describes: one of the inference problems, or
/// the noisy-copy grid study of the modeling-error likelihood.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Analytical2d,
    Michalewicz,
    Borehole,
    Circuit,
    Rationale,
}

impl Study {
    pub fn problem(self) -> Option<Problem> {
        match self {
            Study::Analytical2d => Some(Problem::Analytical2d),
            Study::Michalewicz => Some(Problem::Michalewicz),
            Study::Borehole => Some(Problem::Borehole),
            Study::Circuit => Some(Problem::Circuit),
            Study::Rationale => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self.problem() {
            Some(p) => p.as_str(),
            None => "rationale",
        }
    }
}

impl std::str::FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> mfbayes::Result<Self> {
        if s.eq_ignore_ascii_case("rationale") {
            return Ok(Study::Rationale);
        }
        Ok(match s.parse::<Problem>()? {
            Problem::Analytical2d => Study::Analytical2d,
            Problem::Michalewicz => Study::Michalewicz,
            Problem::Borehole => Study::Borehole,
            Problem::Circuit => Study::Circuit,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub problem: Study,
    pub methods: Vec<Method>,
    pub n: usize,
    /// Training rows; defaults to 75% of `n`.
    pub n_train: Option<usize>,
    pub scheme: SamplingScheme,
    pub seeds: Vec<u64>,
    /// Seed of the synthetic observations (borehole, circuit).
    pub observation_seed: u64,
    pub table: HyperTable,
    pub prior: PriorChoice,
    pub epochs: Option<usize>,
    pub flow_epochs: Option<usize>,
    pub grid_res: usize,
    pub chains: usize,
    pub iters: usize,
    pub max_iters: usize,
    pub gr_threshold: f64,
    pub kl_k: usize,
    pub kl_samples: usize,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: Study::Analytical2d,
            methods: Method::ALL.to_vec(),
            n: 100,
            n_train: None,
            scheme: SamplingScheme::Uniform,
            seeds: vec![0],
            observation_seed: 0,
            table: HyperTable::Uniform,
            prior: PriorChoice::Default,
            epochs: None,
            flow_epochs: None,
            grid_res: 100,
            chains: 5,
            iters: 20_000,
            max_iters: 50_000,
            gr_threshold: 1.01,
            kl_k: 5,
            kl_samples: 10_000,
            out: None,
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Overrides {
    /// Problem id (analytical2d, michalewicz, borehole, circuit, rationale).
    #[arg(long)]
    pub problem: Option<String>,
    /// Comma-separated method letters, e.g. `A,B,F`.
    #[arg(long, value_delimiter = ',')]
    pub method: Option<Vec<String>>,
    /// Run a single seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub grid_res: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub gr_threshold: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => ExperimentConfig::default(),
        };
        cfg.apply(ov)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, ov: &Overrides) -> mfbayes::Result<()> {
        if let Some(p) = &ov.problem {
            self.problem = p.parse()?;
        }
        if let Some(ms) = &ov.method {
            self.methods = ms.iter().map(|m| m.trim().parse()).collect::<mfbayes::Result<_>>()?;
        }
        if let Some(s) = ov.seed {
            self.seeds = vec![s];
        }
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = ov.$f.clone() { self.$f = v; } )* };
        }
        set!(n, grid_res, chains, iters, gr_threshold);
        if ov.epochs.is_some() {
            self.epochs = ov.epochs;
        }
        if ov.out.is_some() {
            self.out = ov.out.clone();
        }
        Ok(())
    }

    pub fn validate(&self) -> mfbayes::Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.methods.is_empty() {
            return bad("no methods selected");
        }
        if self.seeds.is_empty() {
            return bad("no seeds given");
        }
        if self.n < 2 {
            return bad("n must be at least 2");
        }
        if self.grid_res < 2 {
            return bad("grid_res must be at least 2");
        }
        if self.chains < 3 {
            return bad("DREAM needs at least three chains");
        }
        if self.iters < 200 || self.max_iters < self.iters {
            return bad("iters must be ≥ 200 and ≤ max_iters");
        }
        if !(self.gr_threshold > 1.0) {
            return bad("gr_threshold must exceed 1");
        }
        if self.kl_k == 0 || self.kl_samples <= self.kl_k {
            return bad("kl_samples must exceed kl_k ≥ 1");
        }
        if let PriorChoice::TruncatedNormal { sigma_log } = self.prior {
            if self.problem != Study::Borehole {
                return bad("the truncated-normal prior is defined for the borehole only");
            }
            if !(sigma_log > 0.0) {
                return bad("sigma_log must be positive");
            }
        }
        Ok(())
    }

    /// Output root: the explicit setting, else `$MFBAYES_OUT/<problem>`,
    /// else `runs/<problem>`.
    pub fn out_dir(&self) -> PathBuf {
        if let Some(o) = &self.out {
            return o.clone();
        }
        let root = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
        root.join(self.problem.as_str())
    }

    pub fn seed_dir(&self, seed: u64) -> PathBuf {
        self.out_dir().join(format!("seed_{seed}"))
    }

    pub fn method_dir(&self, seed: u64, method: Method) -> PathBuf {
        self.seed_dir(seed).join(format!("method_{method}"))
    }

    /// SHA-256 of the canonical JSON form, with the output location removed
    /// so relocated runs share a hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        sha256_hex(serde_json::to_string(&c).expect("config serializes").as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}
