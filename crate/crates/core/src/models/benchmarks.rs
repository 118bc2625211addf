use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bayes::{Model, ModelRef};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    Analytical2d,
    Michalewicz,
    Borehole,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fidelity {
    High,
    Low,
}

impl Benchmark {
    pub const ALL: [Benchmark; 3] = [Benchmark::Analytical2d, Benchmark::Michalewicz, Benchmark::Borehole];

    pub fn as_str(self) -> &'static str {
        match self {
            Benchmark::Analytical2d => "analytical2d",
            Benchmark::Michalewicz => "michalewicz",
            Benchmark::Borehole => "borehole",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Benchmark::Analytical2d | Benchmark::Michalewicz => 2,
            Benchmark::Borehole => 8,
        }
    }

    pub fn lower(self) -> Vec<f64> {
        match self {
            Benchmark::Analytical2d => vec![-1.0, -1.0],
            Benchmark::Michalewicz => vec![0.0, 0.0],
            Benchmark::Borehole => BOREHOLE_BOUNDS.iter().map(|b| b.0).collect(),
        }
    }

    pub fn upper(self) -> Vec<f64> {
        match self {
            Benchmark::Analytical2d => vec![1.0, 1.0],
            Benchmark::Michalewicz => vec![PI, PI],
            Benchmark::Borehole => BOREHOLE_BOUNDS.iter().map(|b| b.1).collect(),
        }
    }

    pub fn input_names(self) -> Vec<String> {
        match self {
            Benchmark::Borehole => BOREHOLE_NAMES.iter().map(|s| s.to_string()).collect(),
            _ => vec!["x1".into(), "x2".into()],
        }
    }

    /// Measurement-noise standard deviation used with this benchmark.
    pub fn noise_std(self) -> f64 {
        match self {
            Benchmark::Analytical2d => 0.1,
            Benchmark::Michalewicz => 0.05,
            Benchmark::Borehole => 0.7,
        }
    }

    /// Reference input the observation was generated from.
    pub fn true_input(self) -> Vec<f64> {
        match self {
            Benchmark::Analytical2d => vec![0.5328, -0.1466],
            Benchmark::Michalewicz => vec![2.20, 1.57],
            Benchmark::Borehole => midpoint(&self.lower(), &self.upper()),
        }
    }

    /// The published scalar observation. For the borehole this is the
    /// centre of the synthetic observation cloud; see
    /// [`borehole_observations`].
    pub fn observation(self) -> f64 {
        match self {
            Benchmark::Analytical2d => 1.3547,
            Benchmark::Michalewicz => 1.8133,
            Benchmark::Borehole => self.hf(&self.true_input()),
        }
    }

    pub fn hf(self, x: &[f64]) -> f64 {
        match self {
            Benchmark::Analytical2d => analytical_hf(x),
            Benchmark::Michalewicz => michalewicz(x, 10),
            Benchmark::Borehole => borehole_hf(x),
        }
    }

    pub fn lf(self, x: &[f64]) -> f64 {
        match self {
            Benchmark::Analytical2d => analytical_lf(x),
            Benchmark::Michalewicz => michalewicz(x, 1),
            Benchmark::Borehole => borehole_lf(x),
        }
    }

    pub fn contains(self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower().iter().zip(self.upper()))
                .all(|(v, (a, b))| *v >= *a && *v <= b)
    }

    /// Checked evaluation; points outside the box give a domain error.
    pub fn eval(self, which: Fidelity, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::shape(self.as_str(), self.dim(), x.len()));
        }
        if !self.contains(x) {
            return Err(Error::Domain(format!("{x:?} lies outside the {} domain", self.as_str())));
        }
        Ok(match which {
            Fidelity::High => self.hf(x),
            Fidelity::Low => self.lf(x),
        })
    }

    pub fn model(self, which: Fidelity) -> ModelRef {
        Arc::new(BenchmarkModel { bench: self, which })
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "analytical2d" | "analytical" => Ok(Benchmark::Analytical2d),
            "michalewicz" => Ok(Benchmark::Michalewicz),
            "borehole" => Ok(Benchmark::Borehole),
            other => Err(Error::Config(format!("unknown benchmark `{other}`"))),
        }
    }
}

fn midpoint(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(a, b)| 0.5 * (a + b)).collect()
}

/// Unchecked evaluator; the prior decides where it is called.
struct BenchmarkModel {
    bench: Benchmark,
    which: Fidelity,
}

impl Model for BenchmarkModel {
    fn input_dim(&self) -> usize {
        self.bench.dim()
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        crate::bayes::check_input(self, x)?;
        Ok(vec![match self.which {
            Fidelity::High => self.bench.hf(x),
            Fidelity::Low => self.bench.lf(x),
        }])
    }
}

pub fn analytical_hf(x: &[f64]) -> f64 {
    (0.7 * x[0] + 0.3 * x[1]).exp() + 0.15 * (2.0 * PI * x[0]).sin()
}

pub fn analytical_lf(x: &[f64]) -> f64 {
    (0.01 * x[0] + 0.99 * x[1]).exp() + 0.15 * (3.0 * PI * x[1]).sin()
}

/// `f_m(x) = −Σ sin(x_i) sin(i x_i²/π)^{2m}`.
pub fn michalewicz(x: &[f64], m: i32) -> f64 {
    -x.iter()
        .enumerate()
        .map(|(i, &v)| v.sin() * ((i + 1) as f64 * v * v / PI).sin().powi(2 * m))
        .sum::<f64>()
}

const BOREHOLE_NAMES: [&str; 8] = ["rw", "r", "Tu", "Hu", "Tl", "Hl", "L", "Kw"];

const BOREHOLE_BOUNDS: [(f64, f64); 8] = [
    (0.05, 0.15),
    (100.0, 50_000.0),
    (63_070.0, 115_600.0),
    (990.0, 1110.0),
    (63.1, 116.0),
    (700.0, 820.0),
    (1120.0, 1680.0),
    (9855.0, 12_045.0),
];

fn borehole(x: &[f64], lead: f64, offset: f64) -> f64 {
    let [rw, r, tu, hu, tl, hl, l, kw] = [x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7]];
    let lr = (r / rw).ln();
    lead * tu * (hu - hl) / (lr * (offset + 2.0 * l * tu / (lr * rw * rw * kw) + tu / tl))
}

pub fn borehole_hf(x: &[f64]) -> f64 {
    borehole(x, 2.0 * PI, 1.0)
}

pub fn borehole_lf(x: &[f64]) -> f64 {
    borehole(x, 5.0, 1.5)
}

/// `k` draws from `N(Q_HF(midpoint), σ²)`.
pub fn borehole_observations(k: usize, seed: u64) -> Vec<f64> {
    let b = Benchmark::Borehole;
    let m = b.observation();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|_| {
            let n: f64 = StandardNormal.sample(&mut rng);
            m + b.noise_std() * n
        })
        .collect()
}

/// `Q_LF = Q_HF + ε(x)` with `ε` white in space: each input gets its own
/// Gaussian draw, derived deterministically from the bits of `x` and a seed.
#[derive(Clone, Copy, Debug)]
pub struct NoisyPair {
    pub sigma_model: f64,
    pub seed: u64,
}

impl NoisyPair {
    pub fn hf(&self, x: &[f64]) -> f64 {
        analytical_hf(x)
    }

    pub fn epsilon(&self, x: &[f64]) -> f64 {
        if self.sigma_model == 0.0 {
            return 0.0;
        }
        let mut h = self.seed ^ 0xcbf2_9ce4_8422_2325;
        for v in x {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        let n: f64 = StandardNormal.sample(&mut ChaCha8Rng::seed_from_u64(h));
        self.sigma_model * n
    }

    pub fn lf(&self, x: &[f64]) -> f64 {
        self.hf(x) + self.epsilon(x)
    }

    pub fn lf_model(self) -> ModelRef {
        crate::bayes::fn_model(2, 1, move |x| vec![self.lf(x)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytical_origin() {
        assert_eq!(analytical_hf(&[0.0, 0.0]), 1.0);
        assert_eq!(analytical_lf(&[0.0, 0.0]), 1.0);
    }

    #[test]
    fn michalewicz_is_minus_sum_of_terms() {
        // x2 = π/2 puts the second factor at sin(π/2) = 1.
        let x = [PI / 2.0, (PI * PI / 4.0).sqrt()];
        let t1 = (PI / 2.0).sin() * (PI / 4.0).sin().powi(20);
        let t2 = x[1].sin() * (2.0 * x[1] * x[1] / PI).sin().powi(20);
        assert!((michalewicz(&x, 10) + t1 + t2).abs() < 1e-15);
    }

    #[test]
    fn borehole_lf_differs_from_hf() {
        let b = Benchmark::Borehole;
        let m = b.true_input();
        assert!(b.hf(&m) > b.lf(&m));
    }

    #[test]
    fn domain_checks() {
        let b = Benchmark::Analytical2d;
        assert!(matches!(b.eval(Fidelity::High, &[2.0, 0.0]), Err(Error::Domain(_))));
        assert!(b.eval(Fidelity::High, &[0.0]).is_err());
        assert_eq!(b.model(Fidelity::Low).eval(&[0.0, 0.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn noisy_pair_is_deterministic_and_rough() {
        let p = NoisyPair {
            sigma_model: 0.25,
            seed: 3,
        };
        assert_eq!(p.lf(&[0.1, 0.2]), p.lf(&[0.1, 0.2]));
        assert!(p.epsilon(&[0.1, 0.2]) != p.epsilon(&[0.1, 0.2 + 1e-12]));
        let zero = NoisyPair {
            sigma_model: 0.0,
            seed: 3,
        };
        assert_eq!(zero.lf(&[0.3, 0.4]), analytical_hf(&[0.3, 0.4]));
    }

    #[test]
    fn noisy_pair_residual_moments() {
        let p = NoisyPair {
            sigma_model: 0.5,
            seed: 11,
        };
        let e: Vec<f64> = (0..20_000).map(|i| p.epsilon(&[i as f64 * 1e-4, 0.3])).collect();
        let m = crate::stats::mean(&e);
        let v = crate::stats::variance(&e).unwrap();
        assert!(m.abs() < 0.02 && (v / 0.25 - 1.0).abs() < 0.05, "{m} {v}");
    }
}
