use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::coupling::{alternating_mask, Coupling};
use super::monotone::MonotoneLayer;
use super::noise::NoiseSampleSet;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::checkpoint::{self, CheckpointWriter};
use crate::nn::{fit, Parameterized, Standardizer, Tape, TrainConfig, Var};
use crate::scalar::Scalar;
use crate::surrogates::Split;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Flow size. In two or more dimensions `blocks` blocks of two couplings
/// (even then odd mask) whose conditioners have `layers` hidden layers of
/// `neurons` units. In one dimension `blocks` monotone layers with
/// `neurons` tanh units each; `layers` is unused.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowArch {
    pub layers: usize,
    pub neurons: usize,
    pub blocks: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FlowLayers<T> {
    Monotone(Vec<MonotoneLayer<T>>),
    Coupling(Vec<Coupling<T>>),
}

impl<T: Scalar> FlowLayers<T> {
    fn len(&self) -> usize {
        match self {
            FlowLayers::Monotone(l) => l.len(),
            FlowLayers::Coupling(l) => l.len(),
        }
    }
}

impl<T: Scalar> Parameterized<T> for FlowLayers<T> {
    fn parameters(&self) -> Vec<&Matrix<T>> {
        match self {
            FlowLayers::Monotone(l) => l.iter().flat_map(|x| x.parameters()).collect(),
            FlowLayers::Coupling(l) => l.iter().flat_map(|x| x.parameters()).collect(),
        }
    }

    fn parameters_mut(&mut self) -> Vec<&mut Matrix<T>> {
        match self {
            FlowLayers::Monotone(l) => l.iter_mut().flat_map(|x| x.parameters_mut()).collect(),
            FlowLayers::Coupling(l) => l.iter_mut().flat_map(|x| x.parameters_mut()).collect(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlowReport {
    /// Mean log-likelihood (data units) on the flow's training split.
    pub train_log_likelihood: f64,
    pub test_log_likelihood: Option<f64>,
    /// Training-split mean log-likelihood before each epoch's update.
    pub history: Vec<f64>,
}

/// Density `G_# N(0, I)` on standardized coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowModel<T> {
    norm: Standardizer<T>,
    layers: FlowLayers<T>,
    report: FlowReport,
}

impl<T: Scalar> FlowModel<T> {
    /// Standard normal in standardized coordinates (no layers).
    pub fn identity(norm: Standardizer<T>) -> Self {
        let layers = if norm.dim() == 1 {
            FlowLayers::Monotone(Vec::new())
        } else {
            FlowLayers::Coupling(Vec::new())
        };
        Self {
            norm,
            layers,
            report: FlowReport::default(),
        }
    }

    pub fn from_layers(norm: Standardizer<T>, layers: FlowLayers<T>) -> Result<Self> {
        let ok = match &layers {
            FlowLayers::Monotone(_) => norm.dim() == 1,
            FlowLayers::Coupling(l) => {
                norm.dim() >= 2 && l.iter().all(|c| c.mask().len() == norm.dim())
            }
        };
        if !ok {
            return Err(Error::Config(
                "flow layers do not match the data dimension".into(),
            ));
        }
        Ok(Self {
            norm,
            layers,
            report: FlowReport::default(),
        })
    }

    pub fn new<R: rand::Rng + ?Sized>(
        norm: Standardizer<T>,
        arch: FlowArch,
        rng: &mut R,
    ) -> Result<Self> {
        if arch.blocks == 0 || arch.neurons == 0 {
            return Err(Error::Config(
                "flow needs at least one block and one neuron".into(),
            ));
        }
        let d = norm.dim();
        let layers = if d == 1 {
            FlowLayers::Monotone(
                (0..arch.blocks)
                    .map(|_| MonotoneLayer::new(arch.neurons))
                    .collect::<Result<_>>()?,
            )
        } else {
            let mut l = Vec::with_capacity(2 * arch.blocks);
            for _ in 0..arch.blocks {
                for parity in 0..2 {
                    l.push(Coupling::new(
                        alternating_mask(d, parity),
                        arch.layers,
                        arch.neurons,
                        rng,
                    )?);
                }
            }
            FlowLayers::Coupling(l)
        };
        Self::from_layers(norm, layers)
    }

    pub fn dim(&self) -> usize {
        self.norm.dim()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &FlowLayers<T> {
        &self.layers
    }

    pub fn standardizer(&self) -> &Standardizer<T> {
        &self.norm
    }

    pub fn report(&self) -> &FlowReport {
        &self.report
    }

    /// Maps standardized data to the base space; returns `(z, Σ log|g'|)`.
    pub fn to_latent(&self, u: &[T]) -> Result<(Vec<T>, T)> {
        if u.len() != self.dim() {
            return Err(Error::shape("FlowModel::to_latent", self.dim(), u.len()));
        }
        let mut z = u.to_vec();
        let mut logdet = T::zero();
        match &self.layers {
            FlowLayers::Monotone(ls) => {
                for l in ls {
                    let (v, ld) = l.forward(z[0]);
                    z[0] = v;
                    logdet += ld;
                }
            }
            FlowLayers::Coupling(ls) => {
                for l in ls {
                    let (v, ld) = l.forward(&z)?;
                    z = v;
                    logdet += ld;
                }
            }
        }
        Ok((z, logdet))
    }

    /// Maps base-space points to standardized data; returns `(u, log|∂u/∂z|)`.
    pub fn from_latent(&self, z: &[T]) -> Result<(Vec<T>, T)> {
        if z.len() != self.dim() {
            return Err(Error::shape("FlowModel::from_latent", self.dim(), z.len()));
        }
        let mut u = z.to_vec();
        let mut logdet = T::zero();
        match &self.layers {
            FlowLayers::Monotone(ls) => {
                for l in ls.iter().rev() {
                    let x = l.inverse(u[0]);
                    logdet -= l.forward(x).1;
                    u[0] = x;
                }
            }
            FlowLayers::Coupling(ls) => {
                for l in ls.iter().rev() {
                    let (v, ld) = l.inverse(&u)?;
                    u = v;
                    logdet += ld;
                }
            }
        }
        Ok((u, logdet))
    }

    /// `log ρ(δ)`, including the Jacobian of the standardization.
    pub fn log_density(&self, delta: &[T]) -> Result<T> {
        if delta.len() != self.dim() {
            return Err(Error::shape(
                "FlowModel::log_density",
                self.dim(),
                delta.len(),
            ));
        }
        let (z, logdet) = self.to_latent(&self.norm.apply(delta))?;
        Ok(std_normal_log_pdf(&z) + logdet - self.norm.log_scale())
    }

    /// Draws `n` samples; row `i` uses the `i`-th base draw of a stream
    /// seeded by `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Matrix<T>> {
        Ok(self.sample_with_log_density(n, seed)?.0)
    }

    /// Samples together with their log-density computed in the generative
    /// direction.
    pub fn sample_with_log_density(&self, n: usize, seed: u64) -> Result<(Matrix<T>, Vec<T>)> {
        if n == 0 {
            return Err(Error::Config("sample count must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.dim();
        let mut data = Vec::with_capacity(n * d);
        let mut logp = Vec::with_capacity(n);
        for _ in 0..n {
            let z: Vec<T> = (0..d)
                .map(|_| T::of(StandardNormal.sample(&mut rng)))
                .collect();
            let (u, ld) = self.from_latent(&z)?;
            data.extend(self.norm.invert(&u));
            logp.push(std_normal_log_pdf(&z) - ld - self.norm.log_scale());
        }
        Ok((Matrix::from_vec(n, d, data)?, logp))
    }

    /// Mean log-density over the rows of `x`.
    pub fn mean_log_likelihood(&self, x: &Matrix<T>) -> Result<f64> {
        let mut s = 0.0;
        for row in x.iter_rows() {
            s += self.log_density(row)?.as_f64();
        }
        Ok(s / x.rows().max(1) as f64)
    }

    fn tape_neg_log_likelihood(
        layers: &FlowLayers<T>,
        tape: &mut Tape<T>,
        vars: &[Var],
        x: Var,
    ) -> Var {
        let mut z = x;
        let mut total: Option<Var> = None;
        let mut offset = 0;
        let mut push = |tape: &mut Tape<T>, ld: Var| {
            total = Some(match total {
                Some(t) => tape.add(t, ld),
                None => ld,
            });
        };
        match layers {
            FlowLayers::Monotone(ls) => {
                for l in ls {
                    let (u, ld) = l.tape_forward(tape, &vars[offset..offset + 5], z);
                    offset += 5;
                    z = u;
                    push(tape, ld);
                }
            }
            FlowLayers::Coupling(ls) => {
                for l in ls {
                    let n = l.parameters().len();
                    let (u, ld) = l.tape_forward(tape, &vars[offset..offset + n], z);
                    offset += n;
                    z = u;
                    push(tape, ld);
                }
            }
        }
        let d = tape.value(x).cols();
        let sq = tape.square(z);
        let sq = tape.sum_cols(sq);
        let half = tape.scale(sq, T::of(0.5));
        let nll = match total {
            Some(t) => tape.sub(half, t),
            None => half,
        };
        let mean = tape.mean(nll);
        tape.add_scalar(mean, T::of(d as f64 * HALF_LN_2PI))
    }

    pub fn to_checkpoint(&self, cfg: Option<&TrainConfig>) -> String {
        let mut w = CheckpointWriter::new();
        w.section("flow").int("dim", self.dim() as u64);
        checkpoint::write_standardizer(&mut w, "norm", &self.norm);
        w.float("train_log_likelihood", self.report.train_log_likelihood)
            .float(
                "test_log_likelihood",
                self.report.test_log_likelihood.unwrap_or(f64::NAN),
            );
        match &self.layers {
            FlowLayers::Monotone(ls) => {
                w.text("kind", "monotone").int("layers", ls.len() as u64);
                for (k, l) in ls.iter().enumerate() {
                    let [a, b, c, wv, d] = l.raw();
                    w.section(&format!("monotone.{k}"))
                        .floats("log_a", a.as_slice())
                        .floats("shift", b.as_slice())
                        .floats("log_c", c.as_slice())
                        .floats("log_w", wv.as_slice())
                        .floats("offset", d.as_slice());
                }
            }
            FlowLayers::Coupling(ls) => {
                w.text("kind", "coupling")
                    .int("layers", ls.len() as u64)
                    .int("blocks", (ls.len() / 2) as u64);
                for (k, l) in ls.iter().enumerate() {
                    w.section(&format!("coupling.{k}")).floats("mask", l.mask());
                    checkpoint::write_mlp(&mut w, "s", l.s_net());
                    checkpoint::write_mlp(&mut w, "t", l.t_net());
                }
            }
        }
        if let Some(cfg) = cfg {
            w.section("train");
            checkpoint::write_train_config(&mut w, cfg);
        }
        w.finish()
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let sections = checkpoint::parse(text)?;
        let head = checkpoint::find(&sections, "flow")?;
        let norm = checkpoint::read_standardizer(head, "norm")?;
        let n = head.int("layers")? as usize;
        let layers = match head.get("kind")? {
            "monotone" => FlowLayers::Monotone(
                (0..n)
                    .map(|k| {
                        let s = checkpoint::find(&sections, &format!("monotone.{k}"))?;
                        let one = |key: &str| -> Result<T> {
                            s.floats::<T>(key)?
                                .first()
                                .copied()
                                .ok_or_else(|| Error::Parse(format!("monotone.{k}: empty {key}")))
                        };
                        MonotoneLayer::from_parts(
                            one("log_a")?,
                            one("shift")?,
                            s.floats("log_c")?,
                            s.floats("log_w")?,
                            s.floats("offset")?,
                        )
                    })
                    .collect::<Result<_>>()?,
            ),
            "coupling" => FlowLayers::Coupling(
                (0..n)
                    .map(|k| {
                        let s = checkpoint::find(&sections, &format!("coupling.{k}"))?;
                        Coupling::from_parts(
                            s.floats("mask")?,
                            checkpoint::read_mlp(s, "s")?,
                            checkpoint::read_mlp(s, "t")?,
                        )
                    })
                    .collect::<Result<_>>()?,
            ),
            other => return Err(Error::Parse(format!("unknown flow kind `{other}`"))),
        };
        let mut flow = Self::from_layers(norm, layers)?;
        flow.report.train_log_likelihood = head.float("train_log_likelihood")?;
        let t = head.float("test_log_likelihood")?;
        flow.report.test_log_likelihood = t.is_finite().then_some(t);
        Ok(flow)
    }
}

fn std_normal_log_pdf<T: Scalar>(z: &[T]) -> T {
    let sq: T = z.iter().map(|&v| v * v).sum();
    -T::of(0.5) * sq - T::of(z.len() as f64 * HALF_LN_2PI)
}

/// Fits a flow to the residual samples by maximum likelihood on a 75%
/// training split (seeded by `cfg.seed`); the rest is held out for the
/// reported test log-likelihood.
pub fn train_flow<T: Scalar>(
    samples: &NoiseSampleSet<T>,
    cfg: &TrainConfig,
    arch: FlowArch,
) -> Result<FlowModel<T>> {
    cfg.validate()?;
    let data = &samples.deltas;
    if data.cols() == 0 || data.rows() == 0 {
        return Err(Error::Config(
            "flow training needs at least one sample of dimension ≥ 1".into(),
        ));
    }
    let split = Split::random(data.rows(), cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let split = if split.train.is_empty() {
        Split::leading(data.rows(), data.rows())
    } else {
        split
    };
    let train = data.select_rows(&split.train);
    let norm = Standardizer::fit(&train);
    let log_scale = norm.log_scale().as_f64();
    let xs = norm.apply_matrix(&train);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut flow = FlowModel::new(norm, arch, &mut rng)?;
    let history = fit(&mut flow.layers, cfg, |layers, tape, vars| {
        let x = tape.constant(xs.clone());
        FlowModel::tape_neg_log_likelihood(layers, tape, vars, x)
    })?;
    let train_ll = flow.mean_log_likelihood(&train)?;
    if !train_ll.is_finite() {
        return Err(Error::Divergence {
            epoch: cfg.epochs,
            reason: "non-finite log-likelihood after training".into(),
        });
    }
    let test_ll = (!split.test.is_empty())
        .then(|| flow.mean_log_likelihood(&data.select_rows(&split.test)))
        .transpose()?;
    flow.report = FlowReport {
        train_log_likelihood: train_ll,
        test_log_likelihood: test_ll,
        history: history.iter().map(|v| -v.as_f64() - log_scale).collect(),
    };
    Ok(flow)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_samples(n: usize, mean: f64, sd: f64, seed: u64) -> NoiseSampleSet<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..n)
            .map(|_| {
                mean + sd * {
                    let n: f64 = StandardNormal.sample(&mut rng);
                    n
                }
            })
            .collect();
        NoiseSampleSet::new(Matrix::column_vector(&v))
    }

    #[test]
    fn identity_flow_is_standard_normal() {
        let flow = FlowModel::<f64>::identity(Standardizer::identity(2));
        let x = [0.3, -1.2];
        let expected = -0.5 * (0.09 + 1.44) - (2.0 * std::f64::consts::PI).ln();
        assert!((flow.log_density(&x).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn identity_flow_samples_have_unit_moments() {
        let flow = FlowModel::<f64>::identity(Standardizer::identity(1));
        let s = flow.sample(100_000, 3).unwrap();
        let v = s.as_slice();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        assert!(m.abs() < 0.02 && (var - 1.0).abs() < 0.02, "{m} {var}");
        assert_eq!(flow.sample(10, 9).unwrap(), flow.sample(10, 9).unwrap());
    }

    #[test]
    fn sample_log_density_matches_forward_evaluation() {
        let data = gaussian_samples(400, 1.0, 2.0, 1);
        let cfg = TrainConfig {
            epochs: 100,
            learning_rate: 1e-2,
            ..TrainConfig::default()
        };
        let flow = train_flow(
            &data,
            &cfg,
            FlowArch {
                layers: 1,
                neurons: 3,
                blocks: 2,
            },
        )
        .unwrap();
        let (s, lp) = flow.sample_with_log_density(200, 4).unwrap();
        for (row, l) in s.iter_rows().zip(lp) {
            assert!((flow.log_density(row).unwrap() - l).abs() < 1e-10);
        }
    }

    #[test]
    fn trained_flow_recovers_shifted_gaussian_mean() {
        let data = gaussian_samples(2000, 3.0, 2.0, 7);
        let cfg = TrainConfig {
            epochs: 300,
            learning_rate: 5e-3,
            ..TrainConfig::default()
        };
        let flow = train_flow(
            &data,
            &cfg,
            FlowArch {
                layers: 1,
                neurons: 2,
                blocks: 2,
            },
        )
        .unwrap();
        let s = flow.sample(20_000, 11).unwrap();
        let m = s.as_slice().iter().sum::<f64>() / 20_000.0;
        assert!((2.8..=3.2).contains(&m), "mean {m}");
    }

    #[test]
    fn degenerate_samples_concentrate() {
        let data = NoiseSampleSet::new(Matrix::filled(50, 1, 0.75));
        let cfg = TrainConfig {
            epochs: 200,
            learning_rate: 1e-2,
            ..TrainConfig::default()
        };
        let flow = train_flow(
            &data,
            &cfg,
            FlowArch {
                layers: 1,
                neurons: 2,
                blocks: 1,
            },
        )
        .unwrap();
        assert!(
            flow.log_density(&[0.75]).unwrap() > flow.log_density(&[0.75 + 1e-6]).unwrap() + 100.0
        );
        let s = flow.sample(2000, 1).unwrap();
        let v = s.as_slice();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
        assert!(sd < crate::nn::STD_FLOOR, "{sd}");
    }

    #[test]
    fn checkpoint_round_trip_both_kinds() {
        let one = train_flow(
            &gaussian_samples(100, 0.0, 1.0, 2),
            &TrainConfig {
                epochs: 5,
                ..TrainConfig::default()
            },
            FlowArch {
                layers: 1,
                neurons: 2,
                blocks: 2,
            },
        )
        .unwrap();
        let back = FlowModel::<f64>::from_checkpoint(&one.to_checkpoint(None)).unwrap();
        assert_eq!(
            back.log_density(&[0.3]).unwrap(),
            one.log_density(&[0.3]).unwrap()
        );

        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v: Vec<f64> = (0..300).map(|_| StandardNormal.sample(&mut rng)).collect();
        let two = train_flow(
            &NoiseSampleSet::new(Matrix::from_vec(100, 3, v).unwrap()),
            &TrainConfig {
                epochs: 5,
                learning_rate: 1e-2,
                ..TrainConfig::default()
            },
            FlowArch {
                layers: 2,
                neurons: 3,
                blocks: 2,
            },
        )
        .unwrap();
        let back = FlowModel::<f64>::from_checkpoint(&two.to_checkpoint(None)).unwrap();
        let p = [0.1, -0.4, 0.9];
        assert_eq!(back.log_density(&p).unwrap(), two.log_density(&p).unwrap());
        assert_eq!(back.num_layers(), 4);
    }
}
