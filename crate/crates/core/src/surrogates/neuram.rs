use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::dense::{labels, mse, Target};
use crate::bayes::{check_input, Model};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::checkpoint::{self, CheckpointWriter};
use crate::nn::{fit, layer_spec, MlpNet, Parameterized, Standardizer, Tape, TrainConfig, Var};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeurAmArch {
    pub surrogate_layers: usize,
    pub surrogate_neurons: usize,
    pub autoencoder_layers: usize,
    pub autoencoder_neurons: usize,
}

/// The three terms of the active-manifold loss, each a per-sample squared
/// norm averaged over samples (standardized units).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossTerms {
    /// `‖S(E(x)) − Q(x)‖²`
    pub surrogate: f64,
    /// `‖S(E(D(E(x)))) − Q(x)‖²`
    pub reencoded: f64,
    /// `‖D(E(x)) − D(E(D(E(x))))‖²`
    pub idempotency: f64,
}

impl LossTerms {
    pub fn total(&self) -> f64 {
        self.surrogate + self.reencoded + self.idempotency
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NeurAmReport {
    pub train_terms: LossTerms,
    pub test_terms: Option<LossTerms>,
    pub train_mse: f64,
    pub test_mse: Option<f64>,
    pub history: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
struct Nets<T> {
    encoder: MlpNet<T>,
    decoder: MlpNet<T>,
    surrogate: MlpNet<T>,
}

impl<T: Scalar> Parameterized<T> for Nets<T> {
    fn parameters(&self) -> Vec<&Matrix<T>> {
        let mut p = self.encoder.parameters();
        p.extend(self.decoder.parameters());
        p.extend(self.surrogate.parameters());
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Matrix<T>> {
        let mut p = self.encoder.parameters_mut();
        p.extend(self.decoder.parameters_mut());
        p.extend(self.surrogate.parameters_mut());
        p
    }
}

impl<T: Scalar> Nets<T> {
    fn tape_loss(&self, tape: &mut Tape<T>, vars: &[Var], x: Var, y: Var) -> Var {
        let ne = 2 * self.encoder.weights().len();
        let nd = 2 * self.decoder.weights().len();
        let (pe, rest) = vars.split_at(ne);
        let (pd, ps) = rest.split_at(nd);
        let z = self.encoder.tape_forward(tape, pe, x);
        let s1 = self.surrogate.tape_forward(tape, ps, z);
        let xr = self.decoder.tape_forward(tape, pd, z);
        let z2 = self.encoder.tape_forward(tape, pe, xr);
        let s2 = self.surrogate.tape_forward(tape, ps, z2);
        let xr2 = self.decoder.tape_forward(tape, pd, z2);
        let t1 = mean_sq_norm(tape, s1, y);
        let t2 = mean_sq_norm(tape, s2, y);
        let t3 = mean_sq_norm(tape, xr, xr2);
        let t12 = tape.add(t1, t2);
        tape.add(t12, t3)
    }

    fn loss_terms(&self, x: &Matrix<T>, y: &Matrix<T>) -> Result<LossTerms> {
        let z = self.encoder.forward_batch(x)?;
        let s1 = self.surrogate.forward_batch(&z)?;
        let xr = self.decoder.forward_batch(&z)?;
        let z2 = self.encoder.forward_batch(&xr)?;
        let s2 = self.surrogate.forward_batch(&z2)?;
        let xr2 = self.decoder.forward_batch(&z2)?;
        Ok(LossTerms {
            surrogate: row_sq_norm_mean(&s1, y),
            reencoded: row_sq_norm_mean(&s2, y),
            idempotency: row_sq_norm_mean(&xr, &xr2),
        })
    }
}

fn mean_sq_norm<T: Scalar>(tape: &mut Tape<T>, a: Var, b: Var) -> Var {
    let d = tape.sub(a, b);
    let sq = tape.square(d);
    let per_row = tape.sum_cols(sq);
    tape.mean(per_row)
}

fn row_sq_norm_mean<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> f64 {
    mse(a, b) * a.cols() as f64
}

/// Encoder/decoder pair defining a one-per-output active manifold plus a
/// surrogate on its latent coordinates. Predictions are `S(E(x))`.
#[derive(Clone, Debug, PartialEq)]
pub struct NeurAmModel<T> {
    nets: Nets<T>,
    target: Target,
    x_norm: Standardizer<T>,
    y_norm: Standardizer<T>,
    report: NeurAmReport,
}

/// Trains encoder, decoder and latent surrogate jointly; the latent
/// dimension equals the number of outputs.
pub fn train_neuram<T: Scalar>(
    data: &Dataset<T>,
    target: Target,
    cfg: &TrainConfig,
    arch: NeurAmArch,
) -> Result<NeurAmModel<T>> {
    cfg.validate()?;
    let y_all = labels(data, target)?;
    let x_train = data.inputs.select_rows(&data.split.train);
    let y_train = y_all.select_rows(&data.split.train);
    if x_train.rows() == 0 {
        return Err(Error::Config("training split is empty".into()));
    }
    let (d, m) = (data.input_dim(), data.output_dim());
    let r = m;
    let x_norm = Standardizer::fit(&x_train);
    let y_norm = Standardizer::fit(&y_train);
    let xs = x_norm.apply_matrix(&x_train);
    let ys = y_norm.apply_matrix(&y_train);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (le, ne) = (arch.autoencoder_layers, arch.autoencoder_neurons);
    let mut nets = Nets {
        encoder: MlpNet::glorot(&layer_spec(d, le, ne, r), &mut rng)?,
        decoder: MlpNet::glorot(&layer_spec(r, le, ne, d), &mut rng)?,
        surrogate: MlpNet::glorot(
            &layer_spec(r, arch.surrogate_layers, arch.surrogate_neurons, m),
            &mut rng,
        )?,
    };
    let history = fit(&mut nets, cfg, |nets, tape, vars| {
        let x = tape.constant(xs.clone());
        let y = tape.constant(ys.clone());
        nets.tape_loss(tape, vars, x, y)
    })?;

    let mut model = NeurAmModel {
        nets,
        target,
        x_norm,
        y_norm,
        report: NeurAmReport::default(),
    };
    let test = (!data.split.test.is_empty()).then(|| {
        (
            data.inputs.select_rows(&data.split.test),
            y_all.select_rows(&data.split.test),
        )
    });
    model.report = NeurAmReport {
        train_terms: model.loss_terms(&x_train, &y_train)?,
        test_terms: test
            .as_ref()
            .map(|(x, y)| model.loss_terms(x, y))
            .transpose()?,
        train_mse: mse(&model.predict_batch(&x_train)?, &y_train),
        test_mse: test
            .as_ref()
            .map(|(x, y)| model.predict_batch(x).map(|p| mse(&p, y)))
            .transpose()?,
        history: history.iter().map(|v| v.as_f64()).collect(),
    };
    Ok(model)
}

impl<T: Scalar> NeurAmModel<T> {
    pub fn target(&self) -> Target {
        self.target
    }

    pub fn report(&self) -> &NeurAmReport {
        &self.report
    }

    pub fn latent_dim(&self) -> usize {
        self.nets.encoder.output_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.nets.encoder.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.nets.surrogate.output_dim()
    }

    pub fn encoder(&self) -> &MlpNet<T> {
        &self.nets.encoder
    }

    pub fn decoder(&self) -> &MlpNet<T> {
        &self.nets.decoder
    }

    pub fn surrogate(&self) -> &MlpNet<T> {
        &self.nets.surrogate
    }

    /// Evaluates the loss terms with all networks frozen, on raw inputs and
    /// labels.
    pub fn loss_terms(&self, x: &Matrix<T>, labels: &Matrix<T>) -> Result<LossTerms> {
        self.nets.loss_terms(
            &self.x_norm.apply_matrix(x),
            &self.y_norm.apply_matrix(labels),
        )
    }

    /// Latent coordinates `E(x)`.
    pub fn encode(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.input_dim() {
            return Err(Error::shape(
                "NeurAmModel::encode",
                self.input_dim(),
                x.len(),
            ));
        }
        self.nets.encoder.forward(&self.x_norm.apply(x))
    }

    /// Projection onto the learned manifold, `D(E(x))`, in raw input units.
    pub fn project(&self, x: &[T]) -> Result<Vec<T>> {
        let z = self.encode(x)?;
        Ok(self.x_norm.invert(&self.nets.decoder.forward(&z)?))
    }

    pub fn predict(&self, x: &[T]) -> Result<Vec<T>> {
        let z = self.encode(x)?;
        Ok(self.y_norm.invert(&self.nets.surrogate.forward(&z)?))
    }

    pub fn predict_batch(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let z = self
            .nets
            .encoder
            .forward_batch(&self.x_norm.apply_matrix(x))?;
        Ok(self
            .y_norm
            .invert_matrix(&self.nets.surrogate.forward_batch(&z)?))
    }

    pub fn to_checkpoint(&self, cfg: Option<&TrainConfig>) -> String {
        let mut w = CheckpointWriter::new();
        w.section("neuram")
            .text("target", self.target.as_str())
            .int("latent_dim", self.latent_dim() as u64);
        checkpoint::write_mlp(&mut w, "encoder", &self.nets.encoder);
        checkpoint::write_mlp(&mut w, "decoder", &self.nets.decoder);
        checkpoint::write_mlp(&mut w, "surrogate", &self.nets.surrogate);
        checkpoint::write_standardizer(&mut w, "x_norm", &self.x_norm);
        checkpoint::write_standardizer(&mut w, "y_norm", &self.y_norm);
        let t = &self.report.train_terms;
        w.floats("train_terms", &[t.surrogate, t.reencoded, t.idempotency]);
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
        let s = checkpoint::find(&sections, "neuram")?;
        let nets = Nets {
            encoder: checkpoint::read_mlp(s, "encoder")?,
            decoder: checkpoint::read_mlp(s, "decoder")?,
            surrogate: checkpoint::read_mlp(s, "surrogate")?,
        };
        let r = nets.encoder.output_dim();
        if s.int("latent_dim")? as usize != r
            || nets.decoder.input_dim() != r
            || nets.surrogate.input_dim() != r
            || nets.decoder.output_dim() != nets.encoder.input_dim()
        {
            return Err(Error::Parse("inconsistent NeurAM network shapes".into()));
        }
        let terms: Vec<f64> = s.floats("train_terms")?;
        let test = s.float("test_mse")?;
        Ok(Self {
            nets,
            target: Target::parse(s.get("target")?)?,
            x_norm: checkpoint::read_standardizer(s, "x_norm")?,
            y_norm: checkpoint::read_standardizer(s, "y_norm")?,
            report: NeurAmReport {
                train_terms: LossTerms {
                    surrogate: terms.first().copied().unwrap_or(f64::NAN),
                    reencoded: terms.get(1).copied().unwrap_or(f64::NAN),
                    idempotency: terms.get(2).copied().unwrap_or(f64::NAN),
                },
                test_terms: None,
                train_mse: s.float("train_mse")?,
                test_mse: test.is_finite().then_some(test),
                history: Vec::new(),
            },
        })
    }
}

impl Model for NeurAmModel<f64> {
    fn input_dim(&self) -> usize {
        self.nets.encoder.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.nets.surrogate.output_dim()
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_input(self, x)?;
        self.predict(x)
    }
}
