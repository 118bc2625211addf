use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::bayes::{check_input, Model};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::checkpoint::{self, CheckpointWriter};
use crate::nn::{fit, layer_spec, MlpNet, Standardizer, TrainConfig};
use crate::scalar::Scalar;

/// What a surrogate is trained to reproduce.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// `Q_HF` itself.
    Direct,
    /// `Q_HF − Q_LF`; callers add `Q_LF` back.
    Discrepancy,
}

impl Target {
    pub fn as_str(self) -> &'static str {
        match self {
            Target::Direct => "direct",
            Target::Discrepancy => "discrepancy",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Target::Direct),
            "discrepancy" => Ok(Target::Discrepancy),
            other => Err(Error::Parse(format!("unknown surrogate target `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseArch {
    pub layers: usize,
    pub neurons: usize,
}

/// Errors are in raw output units, averaged over samples and outputs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FitReport {
    pub train_mse: f64,
    pub test_mse: Option<f64>,
    pub final_loss: f64,
    pub history: Vec<f64>,
}

pub(crate) fn labels<T: Scalar>(data: &Dataset<T>, target: Target) -> Result<Matrix<T>> {
    match target {
        Target::Direct => Ok(data.hf_outputs.clone()),
        Target::Discrepancy => data.discrepancy(),
    }
}

pub(crate) fn mse<T: Scalar>(pred: &Matrix<T>, labels: &Matrix<T>) -> f64 {
    if labels.is_empty() {
        return f64::NAN;
    }
    let s: f64 = pred
        .as_slice()
        .iter()
        .zip(labels.as_slice())
        .map(|(p, l)| (p.as_f64() - l.as_f64()).powi(2))
        .sum();
    s / labels.len() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseSurrogate<T> {
    net: MlpNet<T>,
    target: Target,
    x_norm: Standardizer<T>,
    y_norm: Standardizer<T>,
    report: FitReport,
}

/// Trains a fully connected surrogate on the training split by full-batch
/// Adam on the standardized mean-squared error.
pub fn train_dense<T: Scalar>(
    data: &Dataset<T>,
    target: Target,
    cfg: &TrainConfig,
    arch: DenseArch,
) -> Result<DenseSurrogate<T>> {
    cfg.validate()?;
    let y_all = labels(data, target)?;
    let x_train = data.inputs.select_rows(&data.split.train);
    let y_train = y_all.select_rows(&data.split.train);
    if x_train.rows() == 0 {
        return Err(Error::Config("training split is empty".into()));
    }
    let x_norm = Standardizer::fit(&x_train);
    let y_norm = Standardizer::fit(&y_train);
    let xs = x_norm.apply_matrix(&x_train);
    let ys = y_norm.apply_matrix(&y_train);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sizes = layer_spec(
        data.input_dim(),
        arch.layers,
        arch.neurons,
        data.output_dim(),
    );
    let mut net = MlpNet::glorot(&sizes, &mut rng)?;
    let history = fit(&mut net, cfg, |net, tape, vars| {
        let x = tape.constant(xs.clone());
        let y = tape.constant(ys.clone());
        let out = net.tape_forward(tape, vars, x);
        let diff = tape.sub(out, y);
        let sq = tape.square(diff);
        tape.mean(sq)
    })?;

    let mut model = DenseSurrogate {
        net,
        target,
        x_norm,
        y_norm,
        report: FitReport::default(),
    };
    let standardized_pred = model.net.forward_batch(&xs)?;
    model.report = FitReport {
        train_mse: mse(&model.predict_batch(&x_train)?, &y_train),
        test_mse: (!data.split.test.is_empty())
            .then(|| -> Result<f64> {
                let x_test = data.inputs.select_rows(&data.split.test);
                Ok(mse(
                    &model.predict_batch(&x_test)?,
                    &y_all.select_rows(&data.split.test),
                ))
            })
            .transpose()?,
        final_loss: mse(&standardized_pred, &ys),
        history: history.iter().map(|v| v.as_f64()).collect(),
    };
    Ok(model)
}

impl<T: Scalar> DenseSurrogate<T> {
    pub fn from_parts(
        net: MlpNet<T>,
        target: Target,
        x_norm: Standardizer<T>,
        y_norm: Standardizer<T>,
    ) -> Result<Self> {
        if x_norm.dim() != net.input_dim() || y_norm.dim() != net.output_dim() {
            return Err(Error::shape(
                "DenseSurrogate::from_parts",
                format!("{}→{}", net.input_dim(), net.output_dim()),
                format!("{}→{}", x_norm.dim(), y_norm.dim()),
            ));
        }
        Ok(Self {
            net,
            target,
            x_norm,
            y_norm,
            report: FitReport::default(),
        })
    }

    pub fn net(&self) -> &MlpNet<T> {
        &self.net
    }

    pub fn target(&self) -> Target {
        self.target
    }

    pub fn report(&self) -> &FitReport {
        &self.report
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.net.output_dim()
    }

    /// For a discrepancy surrogate this is `Δ̃(x)` alone.
    pub fn predict(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.input_dim() {
            return Err(Error::shape(
                "DenseSurrogate::predict",
                self.input_dim(),
                x.len(),
            ));
        }
        let z = self.net.forward(&self.x_norm.apply(x))?;
        Ok(self.y_norm.invert(&z))
    }

    pub fn predict_batch(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let z = self.net.forward_batch(&self.x_norm.apply_matrix(x))?;
        Ok(self.y_norm.invert_matrix(&z))
    }

    pub fn to_checkpoint(&self, cfg: Option<&TrainConfig>) -> String {
        let mut w = CheckpointWriter::new();
        w.section("dense").text("target", self.target.as_str());
        checkpoint::write_mlp(&mut w, "net", &self.net);
        checkpoint::write_standardizer(&mut w, "x_norm", &self.x_norm);
        checkpoint::write_standardizer(&mut w, "y_norm", &self.y_norm);
        w.float("train_mse", self.report.train_mse);
        w.float("test_mse", self.report.test_mse.unwrap_or(f64::NAN));
        if let Some(cfg) = cfg {
            w.section("train");
            checkpoint::write_train_config(&mut w, cfg);
        }
        w.finish()
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let sections = checkpoint::parse(text)?;
        let s = checkpoint::find(&sections, "dense")?;
        let mut model = Self::from_parts(
            checkpoint::read_mlp(s, "net")?,
            Target::parse(s.get("target")?)?,
            checkpoint::read_standardizer(s, "x_norm")?,
            checkpoint::read_standardizer(s, "y_norm")?,
        )?;
        model.report.train_mse = s.float("train_mse")?;
        let test = s.float("test_mse")?;
        model.report.test_mse = test.is_finite().then_some(test);
        Ok(model)
    }
}

impl Model for DenseSurrogate<f64> {
    fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.net.output_dim()
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_input(self, x)?;
        self.predict(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogates::{SamplingScheme, Split};

    fn grid_dataset(
        f_hf: impl Fn(f64, f64) -> f64,
        f_lf: impl Fn(f64, f64) -> f64,
    ) -> Dataset<f64> {
        let mut x = Vec::new();
        let (mut hf, mut lf) = (Vec::new(), Vec::new());
        for i in 0..8 {
            for j in 0..8 {
                let (a, b) = (-1.0 + 2.0 * i as f64 / 7.0, -1.0 + 2.0 * j as f64 / 7.0);
                x.extend([a, b]);
                hf.push(f_hf(a, b));
                lf.push(f_lf(a, b));
            }
        }
        Dataset::new(
            Matrix::from_vec(64, 2, x).unwrap(),
            Matrix::from_vec(64, 1, hf).unwrap(),
            Some(Matrix::from_vec(64, 1, lf).unwrap()),
            Split::random(64, 0),
            SamplingScheme::Uniform,
        )
        .unwrap()
    }

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            learning_rate: 5e-3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_network_predicts_label_mean() {
        let x_norm = Standardizer::fit(&Matrix::from_vec(2, 1, vec![0.0, 2.0]).unwrap());
        let y_norm =
            Standardizer::fit(&Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 3.0, 4.0, 5.0]).unwrap());
        let s = DenseSurrogate::from_parts(
            MlpNet::zeros(&[1, 4, 3]).unwrap(),
            Target::Direct,
            x_norm,
            y_norm,
        )
        .unwrap();
        assert_eq!(s.predict(&[7.0]).unwrap(), vec![2.0, 3.0, 4.0]);
        assert_eq!(s.predict(&[7.0]).unwrap().len(), 3);
        assert!(s.predict(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn identical_fidelities_give_zero_discrepancy() {
        let data = grid_dataset(|a, b| a * b + 1.0, |a, b| a * b + 1.0);
        let s = train_dense(
            &data,
            Target::Discrepancy,
            &cfg(200),
            DenseArch {
                layers: 2,
                neurons: 8,
            },
        )
        .unwrap();
        assert!(s.report().test_mse.unwrap() < 1e-6);
    }

    #[test]
    fn learns_linear_discrepancy() {
        let data = grid_dataset(|a, b| 2.0 * a + b, |a, b| a + b);
        let s = train_dense(
            &data,
            Target::Discrepancy,
            &cfg(1500),
            DenseArch {
                layers: 2,
                neurons: 10,
            },
        )
        .unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..21 {
            for j in 0..21 {
                let x = [-1.0 + i as f64 * 0.1, -1.0 + j as f64 * 0.1];
                worst = worst.max((s.predict(&x).unwrap()[0] - x[0]).abs());
            }
        }
        assert!(worst < 0.05, "max discrepancy error {worst}");
    }

    #[test]
    fn training_point_within_three_rmse() {
        let data = grid_dataset(|a, b| (a + 0.5 * b).sin(), |_, _| 0.0);
        let s = train_dense(
            &data,
            Target::Direct,
            &cfg(800),
            DenseArch {
                layers: 2,
                neurons: 10,
            },
        )
        .unwrap();
        let rmse = s.report().train_mse.sqrt();
        // Markov's inequality caps the share of points beyond 3 RMSE at 1/9.
        let outside = data
            .split
            .train
            .iter()
            .filter(|&&i| {
                let err =
                    (s.predict(data.inputs.row(i)).unwrap()[0] - data.hf_outputs[(i, 0)]).abs();
                err > 3.0 * rmse + 1e-12
            })
            .count();
        assert!(
            outside * 9 <= data.split.train.len(),
            "{outside} points beyond 3 RMSE ({rmse})"
        );
        assert!(outside * 20 <= data.split.train.len(), "{outside}");
    }

    #[test]
    fn checkpoint_round_trip_preserves_predictions() {
        let data = grid_dataset(|a, b| a - b, |a, _| a);
        let s = train_dense(
            &data,
            Target::Discrepancy,
            &cfg(20),
            DenseArch {
                layers: 1,
                neurons: 4,
            },
        )
        .unwrap();
        let back = DenseSurrogate::<f64>::from_checkpoint(&s.to_checkpoint(None)).unwrap();
        assert_eq!(
            back.predict(&[0.3, -0.2]).unwrap(),
            s.predict(&[0.3, -0.2]).unwrap()
        );
        assert_eq!(back.target(), Target::Discrepancy);
    }

    #[test]
    fn same_seed_is_bitwise_reproducible() {
        let data = grid_dataset(|a, b| a * a + b, |_, _| 0.0);
        let arch = DenseArch {
            layers: 2,
            neurons: 5,
        };
        let a = train_dense(&data, Target::Direct, &cfg(30), arch).unwrap();
        let b = train_dense(&data, Target::Direct, &cfg(30), arch).unwrap();
        assert_eq!(a.net(), b.net());
    }
}
