use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorKind {
    UniformBox,
    LogUniformBox,
    /// Normal with diagonal standard deviations, truncated to the box. With
    /// `log10` set, the normal lives on `log10 x` and `mean`/`std` are given
    /// in that space.
    TruncatedNormal {
        mean: Vec<f64>,
        std: Vec<f64>,
        #[serde(default)]
        log10: bool,
    },
}

/// Prior on a box `[a_i, b_i]`; every kind is `−∞` outside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    #[serde(flatten)]
    pub kind: PriorKind,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl PriorSpec {
    pub fn uniform(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        Self::new(PriorKind::UniformBox, lower, upper)
    }

    pub fn log_uniform(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        Self::new(PriorKind::LogUniformBox, lower, upper)
    }

    /// Truncated normal in `log10` space centred on `log10(center)` with a
    /// common standard deviation `sigma_log`.
    pub fn log10_truncated_normal(
        lower: Vec<f64>,
        upper: Vec<f64>,
        center: &[f64],
        sigma_log: f64,
    ) -> Result<Self> {
        if center.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::Domain("log10 prior centre must be positive".into()));
        }
        let mean = center.iter().map(|c| c.log10()).collect();
        let std = vec![sigma_log; center.len()];
        Self::new(
            PriorKind::TruncatedNormal {
                mean,
                std,
                log10: true,
            },
            lower,
            upper,
        )
    }

    pub fn new(kind: PriorKind, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let spec = Self { kind, lower, upper };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.lower.len();
        if d == 0 || self.upper.len() != d {
            return Err(Error::Config(format!(
                "prior bounds must be non-empty and of equal length ({} vs {})",
                d,
                self.upper.len()
            )));
        }
        if self
            .lower
            .iter()
            .zip(&self.upper)
            .any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite())
        {
            return Err(Error::Config(
                "prior bounds must be finite with lower < upper".into(),
            ));
        }
        match &self.kind {
            PriorKind::UniformBox => {}
            PriorKind::LogUniformBox => {
                if self.lower.iter().any(|a| *a <= 0.0) {
                    return Err(Error::Config("log-uniform bounds must be positive".into()));
                }
            }
            PriorKind::TruncatedNormal { mean, std, log10 } => {
                if mean.len() != d || std.len() != d {
                    return Err(Error::Config(
                        "truncated normal mean/std length mismatch".into(),
                    ));
                }
                if std.iter().any(|s| !(*s > 0.0)) {
                    return Err(Error::Config(
                        "truncated normal std must be positive".into(),
                    ));
                }
                if *log10 && self.lower.iter().any(|a| *a <= 0.0) {
                    return Err(Error::Config("log10 prior bounds must be positive".into()));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (a, b))| v >= a && v <= b)
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| b - a)
            .product()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    /// Unnormalized log-density (constants dropped).
    pub fn log_prior(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::shape("log_prior", self.dim(), x.len()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite parameter {x:?}")));
        }
        if !self.contains(x) {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(match &self.kind {
            PriorKind::UniformBox => 0.0,
            PriorKind::LogUniformBox => -x.iter().map(|v| v.ln()).sum::<f64>(),
            PriorKind::TruncatedNormal { mean, std, log10 } => {
                -0.5 * x
                    .iter()
                    .zip(mean.iter().zip(std))
                    .map(|(&v, (&m, &s))| {
                        let u = if *log10 { v.log10() } else { v };
                        ((u - m) / s).powi(2)
                    })
                    .sum::<f64>()
            }
        })
    }

    /// One prior draw. Truncated normals use rejection with a uniform
    /// fallback after many misses.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.kind {
            PriorKind::UniformBox => self
                .lower
                .iter()
                .zip(&self.upper)
                .map(|(&a, &b)| rng.random_range(a..=b))
                .collect(),
            PriorKind::LogUniformBox => self
                .lower
                .iter()
                .zip(&self.upper)
                .map(|(&a, &b)| rng.random_range(a.ln()..=b.ln()).exp().clamp(a, b))
                .collect(),
            PriorKind::TruncatedNormal { mean, std, log10 } => (0..self.dim())
                .map(|i| {
                    let (a, b) = (self.lower[i], self.upper[i]);
                    for _ in 0..10_000 {
                        let n: f64 = StandardNormal.sample(rng);
                        let u = mean[i] + std[i] * n;
                        let v = if *log10 { 10f64.powf(u) } else { u };
                        if v >= a && v <= b {
                            return v;
                        }
                    }
                    rng.random_range(a..=b)
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_box_is_zero_inside_and_minus_infinity_outside() {
        let p = PriorSpec::uniform(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(p.log_prior(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(p.log_prior(&[2.0, 0.0]).unwrap(), f64::NEG_INFINITY);
        assert!(matches!(
            p.log_prior(&[f64::NAN, 0.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn log_uniform_closed_form() {
        let p = PriorSpec::log_uniform(vec![500.0], vec![1500.0]).unwrap();
        assert!((p.log_prior(&[1000.0]).unwrap() + 1000f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn invalid_bounds_are_rejected() {
        assert!(PriorSpec::uniform(vec![1.0], vec![0.0]).is_err());
        assert!(PriorSpec::log_uniform(vec![0.0], vec![1.0]).is_err());
    }

    #[test]
    fn samples_stay_in_box() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        use rand::SeedableRng;
        for p in [
            PriorSpec::uniform(vec![0.0, 5.0], vec![1.0, 6.0]).unwrap(),
            PriorSpec::log_uniform(vec![1e-5, 100.0], vec![1e-3, 1e4]).unwrap(),
            PriorSpec::log10_truncated_normal(vec![1.0, 2.0], vec![10.0, 3.0], &[5.0, 2.5], 0.5)
                .unwrap(),
        ] {
            for _ in 0..500 {
                assert!(p.contains(&p.sample(&mut rng)));
            }
        }
    }
}
