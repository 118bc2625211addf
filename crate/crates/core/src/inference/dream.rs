use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bayes::{PosteriorSpec, PriorSpec};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Settings for the DREAM sampler (plain DREAM, no past-state archive).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DreamConfig {
    pub n_chains: usize,
    /// Generations; every chain proposes once per generation.
    pub n_iter: usize,
    pub seed: u64,
    /// Number of candidate crossover probabilities `{1/n_cr, …, 1}`.
    pub n_cr: usize,
    /// Upper bound on the number of difference pairs δ.
    pub max_pairs: usize,
    /// Every this many generations the jump rate is set to 1.
    pub jump_every: usize,
    /// Half-width of the multiplicative uniform perturbation of the jump.
    pub b: f64,
    /// Additive Gaussian jitter, relative to the prior box width.
    pub b_star: f64,
    /// Generations without any accepted move before giving up.
    pub stagnation_window: usize,
}

impl Default for DreamConfig {
    fn default() -> Self {
        Self {
            n_chains: 5,
            n_iter: 20_000,
            seed: 0,
            n_cr: 3,
            max_pairs: 3,
            jump_every: 5,
            b: 0.05,
            b_star: 1e-6,
            stagnation_window: 1000,
        }
    }
}

impl DreamConfig {
    fn validate(&self) -> Result<()> {
        if self.n_chains < 3 {
            return Err(Error::Config("DREAM needs at least three chains".into()));
        }
        if self.n_cr == 0 || self.max_pairs == 0 || self.jump_every == 0 {
            return Err(Error::Config("n_cr, max_pairs and jump_every must be positive".into()));
        }
        if !(self.b >= 0.0 && self.b < 1.0) || !(self.b_star >= 0.0) {
            return Err(Error::Config("jitter scales must satisfy 0 ≤ b < 1 and b* ≥ 0".into()));
        }
        Ok(())
    }
}

/// Chain states, retained history and crossover adaptation.
#[derive(Clone, Debug)]
pub struct ChainEnsemble {
    cfg: DreamConfig,
    dim: usize,
    states: Vec<Vec<f64>>,
    log_post: Vec<f64>,
    history: Vec<Vec<f64>>,
    log_history: Vec<Vec<f64>>,
    pcr: Vec<f64>,
    cr_jump: Vec<f64>,
    cr_count: Vec<f64>,
    generation: usize,
    adapt_until: usize,
    proposals: usize,
    accepted: usize,
    since_accept: usize,
    rng: ChaCha8Rng,
}

fn reflect<R: Rng + ?Sized>(v: f64, a: f64, b: f64, rng: &mut R) -> f64 {
    let mut v = v;
    for _ in 0..16 {
        if v < a {
            v = 2.0 * a - v;
        } else if v > b {
            v = 2.0 * b - v;
        } else {
            return v;
        }
    }
    rng.random_range(a..=b)
}

impl ChainEnsemble {
    /// Draws starting states from the prior, retrying points whose
    /// log-posterior is not finite.
    pub fn initialize(spec: &PosteriorSpec, cfg: DreamConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut states = Vec::with_capacity(cfg.n_chains);
        let mut log_post = Vec::with_capacity(cfg.n_chains);
        for _ in 0..cfg.n_chains {
            let mut tries = 0;
            loop {
                let x = spec.prior.sample(&mut rng);
                let lp = spec.log_posterior(&x)?;
                if lp.is_finite() {
                    states.push(x);
                    log_post.push(lp);
                    break;
                }
                tries += 1;
                if tries >= 10_000 {
                    return Err(Error::Degenerate(
                        "no prior draw with finite log-posterior".into(),
                    ));
                }
            }
        }
        let dim = spec.dim();
        Ok(Self {
            cfg,
            dim,
            history: states.clone(),
            log_history: log_post.iter().map(|v| vec![*v]).collect(),
            states,
            log_post,
            pcr: vec![1.0 / cfg.n_cr as f64; cfg.n_cr],
            cr_jump: vec![0.0; cfg.n_cr],
            cr_count: vec![0.0; cfg.n_cr],
            generation: 0,
            adapt_until: cfg.n_iter / 2,
            proposals: 0,
            accepted: 0,
            since_accept: 0,
            rng,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_chains(&self) -> usize {
        self.states.len()
    }

    pub fn generations(&self) -> usize {
        self.generation
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn log_posteriors(&self) -> &[f64] {
        &self.log_post
    }

    pub fn crossover_probabilities(&self) -> &[f64] {
        &self.pcr
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    /// Crossover adaptation runs while the generation counter is below
    /// `generation`; it is frozen afterwards.
    pub fn set_adaptation_end(&mut self, generation: usize) {
        self.adapt_until = generation;
    }

    /// Full history of chain `c` including the initial state.
    pub fn chain(&self, c: usize) -> Matrix<f64> {
        Matrix::from_vec(self.history[c].len() / self.dim, self.dim, self.history[c].clone())
            .expect("history is rectangular")
    }

    pub fn chains(&self) -> Vec<Matrix<f64>> {
        (0..self.n_chains()).map(|c| self.chain(c)).collect()
    }

    fn retained_range(&self) -> std::ops::Range<usize> {
        let len = self.generation + 1;
        len / 2..len
    }

    /// Post-burn-in samples of all chains stacked (first half discarded).
    pub fn samples(&self) -> Matrix<f64> {
        let r = self.retained_range();
        let mut data = Vec::with_capacity(r.len() * self.n_chains() * self.dim);
        for h in &self.history {
            data.extend_from_slice(&h[r.start * self.dim..r.end * self.dim]);
        }
        Matrix::from_vec(r.len() * self.n_chains(), self.dim, data).expect("rectangular")
    }

    /// Retained samples as delimited text:
    /// `chain,iteration,x1..xd,log_posterior`.
    pub fn samples_csv(&self, names: &[String]) -> String {
        let mut out = String::from("chain,iteration");
        for j in 0..self.dim {
            match names.get(j) {
                Some(n) => write!(out, ",{n}").unwrap(),
                None => write!(out, ",x{}", j + 1).unwrap(),
            }
        }
        out.push_str(",log_posterior\n");
        for c in 0..self.n_chains() {
            for it in self.retained_range() {
                write!(out, "{c},{it}").unwrap();
                for v in &self.history[c][it * self.dim..(it + 1) * self.dim] {
                    write!(out, ",{v:e}").unwrap();
                }
                writeln!(out, ",{:e}", self.log_history[c][it]).unwrap();
            }
        }
        out
    }

    fn box_widths(prior: &PriorSpec) -> Vec<f64> {
        prior.lower.iter().zip(&prior.upper).map(|(a, b)| b - a).collect()
    }

    /// Runs `generations` more generations.
    pub fn advance(&mut self, spec: &PosteriorSpec, generations: usize) -> Result<()> {
        if spec.dim() != self.dim {
            return Err(Error::shape("ChainEnsemble::advance", self.dim, spec.dim()));
        }
        let widths = Self::box_widths(&spec.prior);
        let n = self.n_chains();
        let d = self.dim;
        let pairs_cap = self.cfg.max_pairs.min((n - 1) / 2);
        let mut others: Vec<usize> = Vec::with_capacity(n);
        let mut proposal = vec![0.0; d];
        for _ in 0..generations {
            let snapshot = self.states.clone();
            let adapting = self.generation < self.adapt_until;
            let spread = if adapting { chain_spread(&snapshot) } else { Vec::new() };
            let big_jump = (self.generation + 1).is_multiple_of(self.cfg.jump_every);
            let mut any_accept = false;
            for i in 0..n {
                let delta = self.rng.random_range(1..=pairs_cap);
                others.clear();
                others.extend((0..n).filter(|&c| c != i));
                for k in 0..2 * delta {
                    let j = self.rng.random_range(k..others.len());
                    others.swap(k, j);
                }
                let m = categorical(&self.pcr, &mut self.rng);
                let cr = (m + 1) as f64 / self.cfg.n_cr as f64;
                let mut active: Vec<usize> = (0..d).filter(|_| self.rng.random::<f64>() < cr).collect();
                if active.is_empty() {
                    active.push(self.rng.random_range(0..d));
                }
                let gamma = if big_jump {
                    1.0
                } else {
                    2.38 / ((2 * delta * active.len()) as f64).sqrt()
                };
                proposal.copy_from_slice(&snapshot[i]);
                for &j in &active {
                    let mut diff = 0.0;
                    for p in 0..delta {
                        diff += snapshot[others[2 * p]][j] - snapshot[others[2 * p + 1]][j];
                    }
                    let e = if self.cfg.b > 0.0 { self.rng.random_range(-self.cfg.b..self.cfg.b) } else { 0.0 };
                    let eps: f64 = StandardNormal.sample(&mut self.rng);
                    let v = snapshot[i][j] + (1.0 + e) * gamma * diff + self.cfg.b_star * widths[j] * eps;
                    proposal[j] = reflect(v, spec.prior.lower[j], spec.prior.upper[j], &mut self.rng);
                }
                let lp = spec.log_posterior(&proposal)?;
                self.proposals += 1;
                let accept = lp.is_finite() && {
                    let u: f64 = self.rng.random();
                    u.ln() < lp - self.log_post[i]
                };
                if accept {
                    if adapting {
                        let jump: f64 = (0..d)
                            .map(|j| ((proposal[j] - snapshot[i][j]) / spread[j]).powi(2))
                            .sum();
                        self.cr_jump[m] += jump;
                    }
                    self.states[i].copy_from_slice(&proposal);
                    self.log_post[i] = lp;
                    self.accepted += 1;
                    any_accept = true;
                }
                if adapting {
                    self.cr_count[m] += 1.0;
                }
            }
            for c in 0..n {
                self.history[c].extend_from_slice(&self.states[c]);
                self.log_history[c].push(self.log_post[c]);
            }
            if adapting {
                self.update_pcr();
            }
            self.generation += 1;
            if any_accept {
                self.since_accept = 0;
            } else {
                self.since_accept += 1;
                if self.since_accept >= self.cfg.stagnation_window {
                    return Err(Error::Stagnation {
                        generations: self.since_accept,
                    });
                }
            }
        }
        Ok(())
    }

    fn update_pcr(&mut self) {
        if self.cr_count.contains(&0.0) {
            return;
        }
        let rates: Vec<f64> = self.cr_jump.iter().zip(&self.cr_count).map(|(j, c)| j / c).collect();
        let total: f64 = rates.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return;
        }
        // Keep every candidate alive so adaptation can recover.
        let floor = 0.02 / self.cfg.n_cr as f64;
        let mut p: Vec<f64> = rates.iter().map(|r| (r / total).max(floor)).collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= s);
        self.pcr = p;
    }
}

fn categorical<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

fn chain_spread(states: &[Vec<f64>]) -> Vec<f64> {
    let n = states.len() as f64;
    let d = states[0].len();
    (0..d)
        .map(|j| {
            let m = states.iter().map(|s| s[j]).sum::<f64>() / n;
            let v = states.iter().map(|s| (s[j] - m).powi(2)).sum::<f64>() / (n - 1.0);
            v.sqrt().max(1e-300)
        })
        .collect()
}

/// Initializes chains from the prior and runs `cfg.n_iter` generations.
pub fn dream_sample(spec: &PosteriorSpec, cfg: DreamConfig) -> Result<ChainEnsemble> {
    let mut ens = ChainEnsemble::initialize(spec, cfg)?;
    ens.advance(spec, cfg.n_iter)?;
    Ok(ens)
}

/// Outcome of [`sample_to_convergence`].
#[derive(Clone, Debug)]
pub struct ConvergenceRun {
    pub ensemble: ChainEnsemble,
    pub psrf: Vec<f64>,
    pub converged: bool,
}

/// Runs at least `cfg.n_iter` generations, then keeps extending in blocks
/// of `check_every` until every PSRF is below `threshold` or `max_iter`
/// generations have run.
pub fn sample_to_convergence(
    spec: &PosteriorSpec,
    cfg: DreamConfig,
    threshold: f64,
    check_every: usize,
    max_iter: usize,
) -> Result<ConvergenceRun> {
    let mut ens = ChainEnsemble::initialize(spec, cfg)?;
    ens.advance(spec, cfg.n_iter.min(max_iter))?;
    loop {
        let psrf = gelman_rubin(&ens)?;
        let converged = psrf.iter().all(|r| *r < threshold);
        if converged || ens.generations() >= max_iter {
            if !converged {
                log::warn!("Gelman–Rubin threshold {threshold} not reached after {} generations: {psrf:?}", ens.generations());
            }
            return Ok(ConvergenceRun {
                ensemble: ens,
                psrf,
                converged,
            });
        }
        let step = check_every.max(1).min(max_iter - ens.generations());
        ens.advance(spec, step)?;
    }
}

/// Potential scale reduction factors over the second halves of the chains.
pub fn gelman_rubin(ensemble: &ChainEnsemble) -> Result<Vec<f64>> {
    psrf(&ensemble.chains())
}

/// PSRF per dimension for chains given as `iterations × d` matrices; the
/// first half of every chain is discarded. The pooled variance estimate
/// `(n−1)/n·W + B/n` is divided by the within-chain variance with divisor
/// `n`, so the factor never falls below one.
pub fn psrf(chains: &[Matrix<f64>]) -> Result<Vec<f64>> {
    if chains.len() < 2 {
        return Err(Error::InsufficientHistory("at least two chains are required".into()));
    }
    let len = chains[0].rows();
    let d = chains[0].cols();
    if chains.iter().any(|c| c.rows() != len || c.cols() != d) {
        return Err(Error::Config("chains must have equal shapes".into()));
    }
    if len < 100 {
        return Err(Error::InsufficientHistory(format!("{len} iterations retained, need at least 100")));
    }
    let start = len / 2;
    let n = (len - start) as f64;
    let m = chains.len() as f64;
    (0..d)
        .map(|j| {
            let mut means = Vec::with_capacity(chains.len());
            let mut within = 0.0;
            for c in chains {
                let col: Vec<f64> = (start..len).map(|i| c[(i, j)]).collect();
                let mu = col.iter().sum::<f64>() / n;
                within += col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0);
                means.push(mu);
            }
            let w = within / m;
            let grand = means.iter().sum::<f64>() / m;
            let b_over_n = means.iter().map(|v| (v - grand).powi(2)).sum::<f64>() / (m - 1.0);
            if w == 0.0 {
                return Ok(if b_over_n == 0.0 { 1.0 } else { f64::INFINITY });
            }
            // Within-chain variance with divisor n in the denominator keeps
            // the ratio at or above one.
            let w_ml = (n - 1.0) / n * w;
            Ok(((w_ml + b_over_n) / w_ml).sqrt())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::{fn_model, Handles, LikelihoodSpec, Method, NoiseSpec};

    fn flat(dim: usize) -> PosteriorSpec {
        // Zero-variance-free constant likelihood: y = 0 against a zero model.
        let lik = LikelihoodSpec::new(
            Method::A,
            Handles {
                hf: Some(fn_model(dim, 1, |_| vec![0.0])),
                ..Handles::default()
            },
            NoiseSpec::scalar(0.0, 1.0).unwrap(),
        )
        .unwrap();
        PosteriorSpec::new(PriorSpec::uniform(vec![0.0; dim], vec![1.0; dim]).unwrap(), lik).unwrap()
    }

    #[test]
    fn reflection_stays_in_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(reflect(-0.25, 0.0, 1.0, &mut rng), 0.25);
        assert_eq!(reflect(1.5, 0.0, 1.0, &mut rng), 0.5);
        let v = reflect(1e9, 0.0, 1.0, &mut rng);
        assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn needs_three_chains() {
        let cfg = DreamConfig {
            n_chains: 2,
            ..DreamConfig::default()
        };
        assert!(matches!(dream_sample(&flat(2), cfg), Err(Error::Config(_))));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let cfg = DreamConfig {
            n_iter: 200,
            seed: 4,
            ..DreamConfig::default()
        };
        let a = dream_sample(&flat(2), cfg).unwrap();
        let b = dream_sample(&flat(2), cfg).unwrap();
        assert_eq!(a.samples(), b.samples());
        assert_eq!(a.samples().rows(), 5 * 101);
    }

    #[test]
    fn psrf_detects_non_mixing() {
        let chains: Vec<Matrix<f64>> = (0..4).map(|c| Matrix::filled(200, 1, c as f64)).collect();
        assert!(psrf(&chains).unwrap()[0].is_infinite());
        assert!(matches!(psrf(&chains[..1]), Err(Error::InsufficientHistory(_))));
        let short: Vec<Matrix<f64>> = (0..3).map(|_| Matrix::zeros(50, 1)).collect();
        assert!(psrf(&short).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let cfg = DreamConfig {
            n_iter: 10,
            ..DreamConfig::default()
        };
        let e = dream_sample(&flat(2), cfg).unwrap();
        let csv = e.samples_csv(&[]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "chain,iteration,x1,x2,log_posterior");
        assert_eq!(lines.count(), 5 * 6);
    }
}
