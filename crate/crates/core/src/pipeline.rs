//! End-to-end assembly: datasets for each problem, per-method surrogate and
//! flow training, and the resulting posterior.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bayes::{
    Handles, LikelihoodSpec, Method, ModelRef, NoiseSpec, PosteriorSpec, PriorKind, PriorSpec, SumModel,
};
use crate::density::{train_flow, FlowArch, FlowModel, NoiseSampleSet};
use crate::design::sample_design;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{Benchmark, Fidelity, InflowWaveform, NoisyPair, WindkesselKind, WindkesselModel};
use crate::nn::TrainConfig;
use crate::surrogates::hyper::{flow_hyper, surrogate_hyper, Example, HyperTable};
use crate::surrogates::{
    evaluate_rows, fit_alpha_opt, train_dense, train_neuram, Dataset, DenseSurrogate, NeurAmModel,
    SamplingScheme, Split, Target,
};

/// Observations drawn for the borehole and circuit problems.
pub const BOREHOLE_OBSERVATIONS: usize = 100;
pub const CIRCUIT_OBSERVATIONS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Analytical2d,
    Michalewicz,
    Borehole,
    Circuit,
}

impl Problem {
    pub const ALL: [Problem; 4] = [Problem::Analytical2d, Problem::Michalewicz, Problem::Borehole, Problem::Circuit];

    pub fn as_str(self) -> &'static str {
        match self {
            Problem::Analytical2d => "analytical2d",
            Problem::Michalewicz => "michalewicz",
            Problem::Borehole => "borehole",
            Problem::Circuit => "circuit",
        }
    }

    fn benchmark(self) -> Option<Benchmark> {
        match self {
            Problem::Analytical2d => Some(Benchmark::Analytical2d),
            Problem::Michalewicz => Some(Benchmark::Michalewicz),
            Problem::Borehole => Some(Benchmark::Borehole),
            Problem::Circuit => None,
        }
    }

    pub fn example(self) -> Example {
        match self {
            Problem::Analytical2d => Example::Analytical,
            Problem::Michalewicz => Example::Michalewicz,
            Problem::Borehole => Example::Borehole,
            Problem::Circuit => Example::Circuit,
        }
    }

    pub fn input_dim(self) -> usize {
        self.benchmark().map_or(3, Benchmark::dim)
    }

    pub fn output_dim(self) -> usize {
        if self == Problem::Circuit {
            3
        } else {
            1
        }
    }

    pub fn input_names(self) -> Vec<String> {
        match self.benchmark() {
            Some(b) => b.input_names(),
            None => vec!["R_p".into(), "R_d".into(), "C".into()],
        }
    }

    pub fn output_names(self) -> Vec<String> {
        match self {
            Problem::Circuit => vec!["P_min".into(), "P_max".into(), "P_avg".into()],
            _ => vec!["y".into()],
        }
    }

    /// Grid posteriors are the reference for two-dimensional problems;
    /// the others are sampled.
    pub fn uses_grid(self) -> bool {
        self.input_dim() <= 2
    }

    /// `(lower, upper)` of the prior box.
    pub fn bounds(self) -> (Vec<f64>, Vec<f64>) {
        match self.benchmark() {
            Some(b) => (b.lower(), b.upper()),
            None => WindkesselModel::bounds(),
        }
    }

    pub fn true_input(self) -> Vec<f64> {
        match self.benchmark() {
            Some(b) => b.true_input(),
            None => WindkesselModel::true_params(),
        }
    }

    /// Box midpoint, the reference scale for the rescaled covariance trace.
    pub fn midpoint(self) -> Vec<f64> {
        let (a, b) = self.bounds();
        a.iter().zip(&b).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn noise_variances(self) -> Vec<f64> {
        match self.benchmark() {
            Some(b) => vec![b.noise_std().powi(2)],
            None => WindkesselModel::noise_variances(),
        }
    }

    pub fn model(self, which: Fidelity) -> ModelRef {
        match self.benchmark() {
            Some(b) => b.model(which),
            None => {
                let kind = match which {
                    Fidelity::High => WindkesselKind::Rcr,
                    Fidelity::Low => WindkesselKind::Rc,
                };
                Arc::new(WindkesselModel::new(kind, default_inflow().clone()))
            }
        }
    }

    pub fn default_prior(self) -> PriorSpec {
        let (a, b) = self.bounds();
        let prior = match self {
            Problem::Circuit => PriorSpec::log_uniform(a, b),
            _ => PriorSpec::uniform(a, b),
        };
        prior.expect("built-in bounds are valid")
    }

    pub fn prior(self, choice: PriorChoice) -> Result<PriorSpec> {
        match choice {
            PriorChoice::Default => Ok(self.default_prior()),
            PriorChoice::TruncatedNormal { sigma_log } => {
                let (a, b) = self.bounds();
                let m = self.midpoint();
                PriorSpec::log10_truncated_normal(a, b, &m, sigma_log)
            }
        }
    }

    /// Observations and noise variances. Scalar benchmarks use their
    /// published observation; the borehole and circuit draw synthetic
    /// observations around the true output with `seed`.
    pub fn noise_spec(self, seed: u64) -> Result<NoiseSpec> {
        let variances = self.noise_variances();
        let obs = match self {
            Problem::Analytical2d | Problem::Michalewicz => {
                let b = self.benchmark().unwrap();
                Matrix::from_vec(1, 1, vec![b.observation()])?
            }
            Problem::Borehole => Matrix::from_vec(
                BOREHOLE_OBSERVATIONS,
                1,
                crate::models::borehole_observations(BOREHOLE_OBSERVATIONS, seed),
            )?,
            Problem::Circuit => {
                let mu = self.model(Fidelity::High).eval(&self.true_input())?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut data = Vec::with_capacity(CIRCUIT_OBSERVATIONS * 3);
                for _ in 0..CIRCUIT_OBSERVATIONS {
                    for (m, v) in mu.iter().zip(&variances) {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        data.push(m + v.sqrt() * z);
                    }
                }
                Matrix::from_vec(CIRCUIT_OBSERVATIONS, 3, data)?
            }
        };
        NoiseSpec::new(variances, obs)
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "analytical2d" | "analytical" => Ok(Problem::Analytical2d),
            "michalewicz" => Ok(Problem::Michalewicz),
            "borehole" => Ok(Problem::Borehole),
            "circuit" | "windkessel" | "rcr" => Ok(Problem::Circuit),
            other => Err(Error::Config(format!("unknown problem '{other}'"))),
        }
    }
}

/// The default inflow, parsed once.
pub fn default_inflow() -> &'static InflowWaveform {
    static INFLOW: OnceLock<InflowWaveform> = OnceLock::new();
    INFLOW.get_or_init(InflowWaveform::default_waveform)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorChoice {
    #[default]
    Default,
    /// Log10-space truncated normal centred at the box midpoint.
    TruncatedNormal { sigma_log: f64 },
}

/// How a training set is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetPlan {
    pub n: usize,
    /// Training rows; `None` means 75% of `n`.
    pub n_train: Option<usize>,
    pub scheme: SamplingScheme,
    pub seed: u64,
}

impl DatasetPlan {
    pub fn uniform(n: usize, seed: u64) -> Self {
        Self {
            n,
            n_train: None,
            scheme: SamplingScheme::Uniform,
            seed,
        }
    }
}

/// Evaluates both fidelities on a design drawn over the problem's default
/// prior box (log-uniformly for the circuit).
pub fn generate_dataset(problem: Problem, plan: &DatasetPlan) -> Result<Dataset<f64>> {
    let prior = problem.default_prior();
    let x = sample_design(plan.scheme, &prior, plan.n, plan.seed)?;
    let hf = evaluate_rows(problem.model(Fidelity::High).as_ref(), &x)?;
    let lf = evaluate_rows(problem.model(Fidelity::Low).as_ref(), &x)?;
    let split_seed = plan.seed ^ 0x5bd1_e995;
    let split = match plan.n_train {
        None => Split::random(plan.n, split_seed),
        Some(k) if k <= plan.n => Split::random_with_train_count(plan.n, k, split_seed),
        Some(k) => {
            return Err(Error::Config(format!("{k} training rows requested from {} samples", plan.n)));
        }
    };
    Dataset::new(x, hf, Some(lf), split, plan.scheme)?.with_input_names(problem.input_names())
}

#[derive(Clone)]
pub enum Surrogate {
    Dense(Arc<DenseSurrogate<f64>>),
    NeurAm(Arc<NeurAmModel<f64>>),
}

impl Surrogate {
    pub fn model(&self) -> ModelRef {
        match self {
            Surrogate::Dense(s) => s.clone(),
            Surrogate::NeurAm(s) => s.clone(),
        }
    }

    pub fn target(&self) -> Target {
        match self {
            Surrogate::Dense(s) => s.target(),
            Surrogate::NeurAm(s) => s.target(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Surrogate::Dense(_) => "dense",
            Surrogate::NeurAm(_) => "neuram",
        }
    }

    pub fn to_checkpoint(&self, cfg: Option<&TrainConfig>) -> String {
        match self {
            Surrogate::Dense(s) => s.to_checkpoint(cfg),
            Surrogate::NeurAm(s) => s.to_checkpoint(cfg),
        }
    }

    /// Restores a checkpoint written by [`Surrogate::to_checkpoint`].
    pub fn from_checkpoint(kind: &str, text: &str) -> Result<Self> {
        match kind {
            "dense" => Ok(Surrogate::Dense(Arc::new(DenseSurrogate::from_checkpoint(text)?))),
            "neuram" => Ok(Surrogate::NeurAm(Arc::new(NeurAmModel::from_checkpoint(text)?))),
            other => Err(Error::Parse(format!("unknown surrogate kind '{other}'"))),
        }
    }

    pub fn train_mse(&self) -> f64 {
        match self {
            Surrogate::Dense(s) => s.report().train_mse,
            Surrogate::NeurAm(s) => s.report().train_mse,
        }
    }

    pub fn test_mse(&self) -> Option<f64> {
        match self {
            Surrogate::Dense(s) => s.report().test_mse,
            Surrogate::NeurAm(s) => s.report().test_mse,
        }
    }
}

/// Trained artifacts for one method.
#[derive(Clone)]
pub struct Fitted {
    pub method: Method,
    pub surrogate: Option<Surrogate>,
    pub flow: Option<Arc<FlowModel<f64>>>,
    pub alpha: Option<Vec<f64>>,
}

impl Fitted {
    pub fn method_a() -> Self {
        Self {
            method: Method::A,
            surrogate: None,
            flow: None,
            alpha: None,
        }
    }

    /// Likelihood handles; the high-fidelity model is attached for
    /// method A only.
    pub fn handles(&self, hf: Option<ModelRef>, lf: Option<ModelRef>) -> Handles {
        Handles {
            hf: if self.method == Method::A { hf } else { None },
            lf: if self.method.uses_lf() { lf } else { None },
            surrogate: self.surrogate.as_ref().map(Surrogate::model),
            flow: self.flow.clone(),
            alpha: self.alpha.clone(),
        }
    }

    pub fn posterior(&self, problem: Problem, prior: PriorSpec, noise: NoiseSpec) -> Result<PosteriorSpec> {
        let handles = self.handles(Some(problem.model(Fidelity::High)), Some(problem.model(Fidelity::Low)));
        PosteriorSpec::new(prior, LikelihoodSpec::new(self.method, handles, noise)?)
    }
}

/// Training settings shared by every method of one experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub table: HyperTable,
    pub seed: u64,
    /// Overrides the default epoch count for surrogates and flows.
    pub epochs: Option<usize>,
    pub flow_epochs: Option<usize>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            table: HyperTable::Uniform,
            seed: 0,
            epochs: None,
            flow_epochs: None,
        }
    }
}

/// The surrogate target each method learns.
pub fn method_target(method: Method) -> Option<Target> {
    match method {
        Method::A => None,
        Method::B | Method::D => Some(Target::Direct),
        Method::C | Method::E | Method::F => Some(Target::Discrepancy),
    }
}

/// Trains the surrogate for `method` (and, for method F, the scaling and
/// the flow of the inflated noise) on `data`.
pub fn fit_method(problem: Problem, method: Method, data: &Dataset<f64>, opts: &FitOptions) -> Result<Fitted> {
    let Some(target) = method_target(method) else {
        return Ok(Fitted::method_a());
    };
    let hyper = surrogate_hyper(opts.table, problem.example(), method).ok_or_else(|| {
        Error::Config(format!("no hyperparameters for {problem} method {method} in the {:?} table", opts.table))
    })?;
    let mut cfg = hyper.train_config(opts.seed);
    if let Some(e) = opts.epochs {
        cfg.epochs = e;
    }
    let surrogate = if method.uses_neuram() {
        Surrogate::NeurAm(Arc::new(train_neuram(data, target, &cfg, hyper.neuram_arch()?)?))
    } else {
        Surrogate::Dense(Arc::new(train_dense(data, target, &cfg, hyper.dense_arch())?))
    };
    if method != Method::F {
        return Ok(Fitted {
            method,
            surrogate: Some(surrogate),
            flow: None,
            alpha: None,
        });
    }

    // q† = Q_LF + Δ̃ on the training rows; no new high-fidelity calls.
    let train = &data.split.train;
    let x = data.inputs.select_rows(train);
    let hf = data.hf_outputs.select_rows(train);
    let lf = data
        .lf_outputs
        .as_ref()
        .ok_or_else(|| Error::Config("method F needs low-fidelity outputs".into()))?
        .select_rows(train);
    let delta = evaluate_rows(surrogate.model().as_ref(), &x)?;
    let mut qdagger = lf;
    qdagger.add_assign(&delta);
    let alpha = (0..hf.cols())
        .map(|j| fit_alpha_opt(&hf.column(j), &qdagger.column(j)))
        .collect::<Result<Vec<_>>>()?;
    let samples = NoiseSampleSet::from_residuals(
        &hf,
        &qdagger,
        &alpha,
        &problem.noise_variances(),
        opts.seed ^ 0x2545_f491_4f6c_dd1d,
        "lf+neuram_discrepancy",
    )?;
    let fh = flow_hyper(opts.table, problem.example())
        .ok_or_else(|| Error::Config(format!("no flow hyperparameters for {problem}")))?;
    let mut flow_cfg = fh.train_config(opts.seed);
    if let Some(e) = opts.flow_epochs.or(opts.epochs) {
        flow_cfg.epochs = e;
    }
    let flow = train_flow(
        &samples,
        &flow_cfg,
        FlowArch {
            layers: fh.layers,
            neurons: fh.neurons,
            blocks: fh.blocks,
        },
    )?;
    Ok(Fitted {
        method,
        surrogate: Some(surrogate),
        flow: Some(Arc::new(flow)),
        alpha: Some(alpha),
    })
}

/// Method-F likelihood built from the pieces of a [`Fitted`] without the
/// low-fidelity model attached, for callers composing their own mean.
pub fn scaled_lf_mean(lf: ModelRef, fitted: &Fitted) -> Result<ModelRef> {
    let s = fitted
        .surrogate
        .as_ref()
        .ok_or_else(|| Error::Config("no surrogate".into()))?;
    Ok(Arc::new(SumModel::new(lf, s.model())?))
}

/// Settings of the noisy-copy experiment: `Q_LF = Q_HF + ε(x)` with white
/// `ε`, `q† = Q_LF`, `α = 1`, a Gaussian prior truncated to `[−1,1]²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationaleConfig {
    pub observation: f64,
    pub true_input: [f64; 2],
    pub prior_std: f64,
    pub samples: usize,
    pub flow: FlowArch,
    pub train: TrainConfig,
}

impl Default for RationaleConfig {
    fn default() -> Self {
        Self {
            observation: 1.1297,
            true_input: [0.5211, 0.2038],
            prior_std: 1.0 / 3.0,
            samples: 10_000,
            flow: FlowArch {
                layers: 4,
                neurons: 8,
                blocks: 4,
            },
            train: TrainConfig {
                epochs: 5000,
                learning_rate: 1e-3,
                scheduler_step: 0.9999,
                ..TrainConfig::default()
            },
        }
    }
}

impl RationaleConfig {
    pub fn prior(&self) -> PriorSpec {
        PriorSpec::new(
            PriorKind::TruncatedNormal {
                mean: vec![0.0; 2],
                std: vec![self.prior_std; 2],
                log10: false,
            },
            vec![-1.0; 2],
            vec![1.0; 2],
        )
        .expect("valid prior")
    }

    /// Realizations of `Q_HF − Q_LF + η` at uniform inputs.
    pub fn noise_samples(&self, sigma_model: f64, sigma_noise: f64, seed: u64) -> Result<NoiseSampleSet<f64>> {
        let pair = NoisyPair { sigma_model, seed };
        let prior = PriorSpec::uniform(vec![-1.0; 2], vec![1.0; 2])?;
        let x = sample_design(SamplingScheme::Uniform, &prior, self.samples, seed ^ 0x1f)?;
        let hf = Matrix::from_vec(x.rows(), 1, x.iter_rows().map(|r| pair.hf(r)).collect())?;
        let lf = Matrix::from_vec(x.rows(), 1, x.iter_rows().map(|r| pair.lf(r)).collect())?;
        NoiseSampleSet::from_residuals(&hf, &lf, &[1.0], &[sigma_noise * sigma_noise], seed ^ 0x2f, "lf")
    }

    pub fn train_flow(&self, sigma_model: f64, sigma_noise: f64, seed: u64) -> Result<FlowModel<f64>> {
        let samples = self.noise_samples(sigma_model, sigma_noise, seed)?;
        let cfg = TrainConfig { seed, ..self.train };
        train_flow(&samples, &cfg, self.flow)
    }

    /// Posterior `ρ̃_NF(y − Q_LF(x)) π(x)`.
    pub fn method_f_posterior(&self, flow: Arc<FlowModel<f64>>, sigma_model: f64, seed: u64) -> Result<PosteriorSpec> {
        let lf = NoisyPair { sigma_model, seed }.lf_model();
        // The flow replaces the Gaussian; the variance entry is unused.
        let noise = NoiseSpec::scalar(self.observation, 1.0)?;
        PosteriorSpec::new(self.prior(), LikelihoodSpec::with_flow(lf, flow, noise)?)
    }

    /// Exact posterior with Gaussian noise of standard deviation
    /// `sigma_noise` around the high-fidelity model.
    pub fn method_a_posterior(&self, sigma_noise: f64) -> Result<PosteriorSpec> {
        let lik = LikelihoodSpec::new(
            Method::A,
            Handles {
                hf: Some(Benchmark::Analytical2d.model(Fidelity::High)),
                ..Handles::default()
            },
            NoiseSpec::scalar(self.observation, sigma_noise)?,
        )?;
        PosteriorSpec::new(self.prior(), lik)
    }
}
