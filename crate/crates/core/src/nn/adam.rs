use serde::{Deserialize, Serialize};

use super::mlp::Parameterized;
use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimiser settings for one training run.
///
/// The step size decays exponentially: epoch `k` uses
/// `learning_rate * scheduler_step^k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub scheduler_step: f64,
    pub weight_decay: f64,
    pub seed: u64,
    #[serde(default)]
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10_000,
            learning_rate: 1e-3,
            scheduler_step: 1.0,
            weight_decay: 2e-4,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.scheduler_step > 0.0 && self.scheduler_step <= 1.0) {
            return Err(Error::Config(format!(
                "scheduler step must lie in (0, 1], got {}",
                self.scheduler_step
            )));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("weight decay must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn effective_lr(&self, epoch: usize) -> f64 {
        self.learning_rate * self.scheduler_step.powi(epoch as i32)
    }
}

/// First/second moment accumulators, one pair per parameter matrix.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    m: Vec<Matrix<T>>,
    v: Vec<Matrix<T>>,
    steps: u32,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(shapes: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let (m, v) = shapes
            .into_iter()
            .map(|(r, c)| (Matrix::zeros(r, c), Matrix::zeros(r, c)))
            .unzip();
        Self { m, v, steps: 0 }
    }

    pub fn for_model<M: Parameterized<T> + ?Sized>(model: &M) -> Self {
        Self::new(model.parameters().iter().map(|p| p.shape()))
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }
}

/// One bias-corrected Adam update with decoupled weight decay.
pub fn adam_step<T: Scalar>(
    params: &mut [&mut Matrix<T>],
    grads: &[Matrix<T>],
    state: &mut AdamState<T>,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::shape("adam_step", params.len(), grads.len()));
    }
    if let Some(k) = grads.iter().position(|g| !g.all_finite()) {
        return Err(Error::Divergence {
            epoch,
            reason: format!("non-finite gradient in parameter block {k}"),
        });
    }
    state.steps += 1;
    let t = state.steps as i32;
    let b1 = T::of(cfg.adam.beta1);
    let b2 = T::of(cfg.adam.beta2);
    let eps = T::of(cfg.adam.eps);
    let lr = T::of(cfg.effective_lr(epoch));
    let decay = T::one() - lr * T::of(cfg.weight_decay);
    let c1 = T::one() - b1.powi(t);
    let c2 = T::one() - b2.powi(t);
    for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        if p.shape() != g.shape() {
            return Err(Error::shape(
                "adam_step",
                format!("{:?}", p.shape()),
                format!("{:?}", g.shape()),
            ));
        }
        let m = state.m[k].as_mut_slice();
        let v = state.v[k].as_mut_slice();
        for (((pv, &gv), mv), vv) in p.as_mut_slice().iter_mut().zip(g.as_slice()).zip(m).zip(v) {
            *mv = b1 * *mv + (T::one() - b1) * gv;
            *vv = b2 * *vv + (T::one() - b2) * gv * gv;
            let m_hat = *mv / c1;
            let v_hat = *vv / c2;
            *pv = *pv * decay - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Full-batch training loop shared by every network in the crate.
///
/// `loss` records the objective on a fresh tape each epoch given the bound
/// parameters; the returned vector holds the loss value of every epoch
/// (evaluated before that epoch's update).
pub fn fit<T, M, F>(model: &mut M, cfg: &TrainConfig, mut loss: F) -> Result<Vec<T>>
where
    T: Scalar,
    M: Parameterized<T> + ?Sized,
    F: FnMut(&M, &mut Tape<T>, &[Var]) -> Var,
{
    cfg.validate()?;
    let mut state = AdamState::for_model(model);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut tape = Tape::new();
        let vars = model.bind(&mut tape);
        let l = loss(model, &mut tape, &vars);
        let value = tape.scalar(l);
        if !value.is_finite() {
            return Err(Error::Divergence {
                epoch,
                reason: format!("loss became {value}"),
            });
        }
        history.push(value);
        let mut g = tape.backward(l)?;
        let shapes: Vec<_> = model.parameters().iter().map(|p| p.shape()).collect();
        let grads: Vec<Matrix<T>> = vars
            .iter()
            .zip(shapes)
            .map(|(&v, s)| g.take(v).unwrap_or_else(|| Matrix::zeros(s.0, s.1)))
            .collect();
        let mut params = model.parameters_mut();
        adam_step(&mut params, &grads, &mut state, cfg, epoch)?;
    }
    Ok(history)
}
