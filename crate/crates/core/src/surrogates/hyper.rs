//! Fixed network hyperparameters per example and method, plus a small
//! random-search tuner over the admissible ranges.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dense::DenseArch;
use super::neuram::NeurAmArch;
use crate::bayes::Method;
use crate::error::{Error, Result};
use crate::nn::TrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Example {
    Analytical,
    Michalewicz,
    Borehole,
    Circuit,
    AortoIliac,
}

impl Example {
    pub fn as_str(self) -> &'static str {
        match self {
            Example::Analytical => "analytical",
            Example::Michalewicz => "michalewicz",
            Example::Borehole => "borehole",
            Example::Circuit => "circuit",
            Example::AortoIliac => "aorto_iliac",
        }
    }
}

/// Which table to read: the main runs or the Latin-hypercube variant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperTable {
    #[default]
    Uniform,
    LatinHypercube,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateHyper {
    pub surrogate_layers: usize,
    pub surrogate_neurons: usize,
    pub autoencoder: Option<(usize, usize)>,
    pub learning_rate: f64,
    pub scheduler_step: f64,
}

impl SurrogateHyper {
    pub fn dense_arch(&self) -> DenseArch {
        DenseArch {
            layers: self.surrogate_layers,
            neurons: self.surrogate_neurons,
        }
    }

    pub fn neuram_arch(&self) -> Result<NeurAmArch> {
        let (l, n) = self
            .autoencoder
            .ok_or_else(|| Error::Config("hyperparameters have no autoencoder entry".into()))?;
        Ok(NeurAmArch {
            surrogate_layers: self.surrogate_layers,
            surrogate_neurons: self.surrogate_neurons,
            autoencoder_layers: l,
            autoencoder_neurons: n,
        })
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            scheduler_step: self.scheduler_step,
            seed,
            ..TrainConfig::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowHyper {
    pub layers: usize,
    pub neurons: usize,
    pub blocks: usize,
    pub learning_rate: f64,
    pub scheduler_step: f64,
}

impl FlowHyper {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            scheduler_step: self.scheduler_step,
            seed,
            ..TrainConfig::default()
        }
    }
}

const fn dense(l: usize, n: usize, h: f64, z: f64) -> SurrogateHyper {
    SurrogateHyper {
        surrogate_layers: l,
        surrogate_neurons: n,
        autoencoder: None,
        learning_rate: h,
        scheduler_step: z,
    }
}

const fn neuram(l: usize, n: usize, le: usize, ne: usize, h: f64, z: f64) -> SurrogateHyper {
    SurrogateHyper {
        surrogate_layers: l,
        surrogate_neurons: n,
        autoencoder: Some((le, ne)),
        learning_rate: h,
        scheduler_step: z,
    }
}

const fn flow(layers: usize, neurons: usize, blocks: usize, h: f64, z: f64) -> FlowHyper {
    FlowHyper {
        layers,
        neurons,
        blocks,
        learning_rate: h,
        scheduler_step: z,
    }
}

/// Surrogate hyperparameters for methods B–F; `None` for method A and for
/// combinations without a table entry.
pub fn surrogate_hyper(
    table: HyperTable,
    example: Example,
    method: Method,
) -> Option<SurrogateHyper> {
    use Example::*;
    use Method::*;
    let h = match (table, example, method) {
        (_, _, A) => return None,
        (HyperTable::Uniform, Analytical, B) => dense(4, 20, 0.000916, 0.99975),
        (HyperTable::Uniform, Analytical, C) => dense(6, 20, 0.000736, 0.99956),
        (HyperTable::Uniform, Analytical, D) => neuram(1, 5, 3, 15, 0.000954, 0.9998),
        (HyperTable::Uniform, Analytical, E) => neuram(6, 20, 3, 20, 0.000576, 0.99984),
        (HyperTable::Uniform, Analytical, F) => neuram(1, 4, 3, 10, 0.000835, 0.99982),

        (HyperTable::Uniform, Michalewicz, B) => dense(5, 19, 0.0007474, 0.99979),
        (HyperTable::Uniform, Michalewicz, C) => dense(1, 16, 0.0003312, 0.99953),
        (HyperTable::Uniform, Michalewicz, D) => neuram(3, 7, 2, 9, 0.0009680, 0.99958),
        (HyperTable::Uniform, Michalewicz, E) => neuram(1, 3, 7, 9, 0.0004689, 0.99952),
        (HyperTable::Uniform, Michalewicz, F) => neuram(1, 16, 3, 6, 0.0005113, 0.99915),

        (HyperTable::Uniform, Borehole, B) => dense(4, 16, 0.0009997, 0.99984),
        (HyperTable::Uniform, Borehole, C) => dense(3, 18, 0.0009421, 0.99986),
        (HyperTable::Uniform, Borehole, D) => neuram(3, 20, 9, 17, 0.0009005, 0.99900),
        (HyperTable::Uniform, Borehole, E) => neuram(2, 4, 5, 15, 0.0008717, 0.99987),
        (HyperTable::Uniform, Borehole, F) => neuram(2, 4, 5, 15, 0.0008717, 0.99987),

        (HyperTable::Uniform, Circuit, B) => dense(1, 17, 0.0007986, 0.99985),
        (HyperTable::Uniform, Circuit, C) => dense(5, 19, 0.0008066, 0.99981),
        (HyperTable::Uniform, Circuit, D) => neuram(1, 8, 4, 16, 0.0009245, 0.99987),
        (HyperTable::Uniform, Circuit, E) => neuram(2, 18, 2, 19, 0.0006313, 0.99979),
        (HyperTable::Uniform, Circuit, F) => neuram(4, 17, 3, 20, 0.0006218, 0.99985),

        (HyperTable::Uniform, AortoIliac, B) => dense(7, 15, 0.0003957, 0.99986),
        (HyperTable::Uniform, AortoIliac, C) => dense(4, 16, 7.99e-5, 0.99911),
        (HyperTable::Uniform, AortoIliac, D) => neuram(2, 2, 4, 19, 0.000952, 0.99973),
        (HyperTable::Uniform, AortoIliac, E) => neuram(3, 2, 4, 20, 1.01e-4, 0.99926),
        (HyperTable::Uniform, AortoIliac, F) => neuram(2, 4, 1, 19, 0.000166, 0.99914),

        (HyperTable::LatinHypercube, Analytical, B) => dense(10, 17, 0.0009826, 0.99988),
        (HyperTable::LatinHypercube, Analytical, C) => dense(5, 15, 0.0009497, 0.99970),
        (HyperTable::LatinHypercube, Analytical, D) => neuram(1, 10, 3, 18, 0.0009211, 0.99986),
        (HyperTable::LatinHypercube, Analytical, E) => neuram(1, 4, 4, 9, 0.0007181, 0.99924),
        (HyperTable::LatinHypercube, Analytical, F) => neuram(1, 5, 3, 19, 0.00099474, 0.99976),

        (HyperTable::LatinHypercube, Michalewicz, B) => dense(3, 17, 0.0007801, 0.99959),
        (HyperTable::LatinHypercube, Michalewicz, C) => dense(3, 13, 0.0007137, 0.99988),
        (HyperTable::LatinHypercube, Michalewicz, D) => neuram(1, 14, 2, 11, 0.0006610, 0.99958),
        (HyperTable::LatinHypercube, Michalewicz, E) => neuram(1, 12, 2, 12, 0.0008506, 0.99943),
        (HyperTable::LatinHypercube, Michalewicz, F) => neuram(1, 16, 3, 20, 0.0008948, 0.99934),

        (HyperTable::LatinHypercube, _, _) => return None,
    };
    Some(h)
}

/// Flow hyperparameters for method F.
pub fn flow_hyper(table: HyperTable, example: Example) -> Option<FlowHyper> {
    use Example::*;
    Some(match (table, example) {
        (HyperTable::Uniform, Analytical) => flow(9, 2, 2, 0.0004489, 0.99970),
        (HyperTable::Uniform, Michalewicz) => flow(1, 1, 3, 0.0009722, 0.99916),
        (HyperTable::Uniform, Borehole) => flow(7, 1, 2, 0.0002005, 0.99908),
        (HyperTable::Uniform, Circuit) => flow(4, 1, 3, 0.0007937, 0.99906),
        (HyperTable::Uniform, AortoIliac) => flow(6, 2, 2, 0.0009964, 0.99909),
        (HyperTable::LatinHypercube, Analytical) => flow(10, 12, 2, 6.10e-5, 0.99910),
        (HyperTable::LatinHypercube, Michalewicz) => flow(6, 7, 2, 7.92e-5, 0.99945),
        (HyperTable::LatinHypercube, _) => return None,
    })
}

/// Admissible ranges for random search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub layers: (usize, usize),
    pub neurons: (usize, usize),
    pub learning_rate: (f64, f64),
    pub scheduler_step: (f64, f64),
    pub blocks: (usize, usize),
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            layers: (1, 10),
            neurons: (1, 20),
            learning_rate: (1e-5, 1e-3),
            scheduler_step: (0.999, 0.9999),
            blocks: (1, 4),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub layers: usize,
    pub neurons: usize,
    pub autoencoder_layers: usize,
    pub autoencoder_neurons: usize,
    pub learning_rate: f64,
    pub scheduler_step: f64,
    pub blocks: usize,
}

impl SearchSpace {
    /// Integers uniform, learning rate log-uniform, scheduler step uniform.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Candidate {
        let (lo, hi) = self.learning_rate;
        Candidate {
            layers: rng.random_range(self.layers.0..=self.layers.1),
            neurons: rng.random_range(self.neurons.0..=self.neurons.1),
            autoencoder_layers: rng.random_range(self.layers.0..=self.layers.1),
            autoencoder_neurons: rng.random_range(self.neurons.0..=self.neurons.1),
            learning_rate: (rng.random_range(lo.ln()..=hi.ln())).exp(),
            scheduler_step: rng.random_range(self.scheduler_step.0..=self.scheduler_step.1),
            blocks: rng.random_range(self.blocks.0..=self.blocks.1),
        }
    }
}

/// Evaluates `trials` random candidates and keeps the one with the smallest
/// objective (typically a test-split error). Failed trials are skipped.
pub fn random_search<F>(
    space: &SearchSpace,
    trials: usize,
    seed: u64,
    mut objective: F,
) -> Result<(Candidate, f64)>
where
    F: FnMut(&Candidate) -> Result<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Candidate, f64)> = None;
    for _ in 0..trials {
        let c = space.sample(&mut rng);
        match objective(&c) {
            Ok(v) if v.is_finite() => {
                if best.as_ref().is_none_or(|b| v < b.1) {
                    best = Some((c, v));
                }
            }
            Ok(_) => {}
            Err(e) => log::debug!("random search trial failed: {e}"),
        }
    }
    best.ok_or_else(|| Error::Config("random search found no successful trial".into()))
}
