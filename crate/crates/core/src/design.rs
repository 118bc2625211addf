//! Input designs for training data: uniform random and maximin Latin
//! hypercube, mapped from the unit cube onto a prior box.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bayes::{PriorKind, PriorSpec};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::surrogates::SamplingScheme;

/// Number of random Latin hypercubes compared by the maximin criterion.
pub const LHS_CANDIDATES: usize = 100;

pub fn uniform_unit(n: usize, d: usize, seed: u64) -> Matrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * d).map(|_| rng.random::<f64>()).collect();
    Matrix::from_vec(n, d, data).expect("n × d buffer")
}

fn random_lhs<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Matrix<f64> {
    let mut m = Matrix::zeros(n, d);
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..d {
        perm.shuffle(rng);
        for (i, &p) in perm.iter().enumerate() {
            m[(i, j)] = (p as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    m
}

/// Smallest pairwise squared distance between rows.
pub fn min_pairwise_distance2(m: &Matrix<f64>) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..m.rows() {
        for j in i + 1..m.rows() {
            let d2: f64 = m.row(i).iter().zip(m.row(j)).map(|(a, b)| (a - b).powi(2)).sum();
            best = best.min(d2);
        }
    }
    best
}

/// Latin hypercube in `[0,1]^d` maximising the minimum pairwise distance
/// over `candidates` random designs.
pub fn maximin_lhs_unit(n: usize, d: usize, candidates: usize, seed: u64) -> Matrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = random_lhs(n, d, &mut rng);
    let mut best_score = min_pairwise_distance2(&best);
    for _ in 1..candidates.max(1) {
        let cand = random_lhs(n, d, &mut rng);
        let score = min_pairwise_distance2(&cand);
        if score > best_score {
            best = cand;
            best_score = score;
        }
    }
    best
}

/// Maps unit-cube points onto the prior box; log-uniform priors are
/// filled uniformly in log space, all other kinds linearly.
pub fn map_to_prior_box(unit: &Matrix<f64>, prior: &PriorSpec) -> Result<Matrix<f64>> {
    let d = prior.dim();
    if unit.cols() != d {
        return Err(Error::shape("map_to_prior_box", d, unit.cols()));
    }
    let log = matches!(prior.kind, PriorKind::LogUniformBox);
    let mut out = unit.clone();
    for i in 0..out.rows() {
        for (j, v) in out.row_mut(i).iter_mut().enumerate() {
            let (a, b) = (prior.lower[j], prior.upper[j]);
            *v = if log {
                (a.ln() + *v * (b.ln() - a.ln())).exp().clamp(a, b)
            } else {
                a + *v * (b - a)
            };
        }
    }
    Ok(out)
}

/// `n` design points in the prior box.
pub fn sample_design(scheme: SamplingScheme, prior: &PriorSpec, n: usize, seed: u64) -> Result<Matrix<f64>> {
    if n == 0 {
        return Err(Error::Config("a design needs at least one point".into()));
    }
    let unit = match scheme {
        SamplingScheme::Uniform => uniform_unit(n, prior.dim(), seed),
        SamplingScheme::LatinHypercube => maximin_lhs_unit(n, prior.dim(), LHS_CANDIDATES, seed),
    };
    map_to_prior_box(&unit, prior)
}
