use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};

/// A deterministic forward map `R^d → R^m`.
pub trait Model: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>>;
}

pub type ModelRef = Arc<dyn Model>;

pub(crate) fn check_input(model: &dyn Model, x: &[f64]) -> Result<()> {
    if x.len() != model.input_dim() {
        return Err(Error::shape("Model::eval", model.input_dim(), x.len()));
    }
    Ok(())
}

/// Wraps a closure as a [`Model`].
pub struct FnModel<F> {
    input_dim: usize,
    output_dim: usize,
    f: F,
}

impl<F> FnModel<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    pub fn new(input_dim: usize, output_dim: usize, f: F) -> Self {
        Self {
            input_dim,
            output_dim,
            f,
        }
    }
}

impl<F> Model for FnModel<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_input(self, x)?;
        let y = (self.f)(x);
        if y.len() != self.output_dim {
            return Err(Error::shape("FnModel output", self.output_dim, y.len()));
        }
        Ok(y)
    }
}

pub fn fn_model<F>(input_dim: usize, output_dim: usize, f: F) -> ModelRef
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
{
    Arc::new(FnModel::new(input_dim, output_dim, f))
}

/// Pointwise sum of two models with matching shapes, e.g. `Q_LF + Δ̃`.
pub struct SumModel {
    a: ModelRef,
    b: ModelRef,
}

impl SumModel {
    pub fn new(a: ModelRef, b: ModelRef) -> Result<Self> {
        if a.input_dim() != b.input_dim() || a.output_dim() != b.output_dim() {
            return Err(Error::shape(
                "SumModel",
                format!("{}→{}", a.input_dim(), a.output_dim()),
                format!("{}→{}", b.input_dim(), b.output_dim()),
            ));
        }
        Ok(Self { a, b })
    }
}

impl Model for SumModel {
    fn input_dim(&self) -> usize {
        self.a.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.a.output_dim()
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.a.eval(x)?;
        for (v, w) in y.iter_mut().zip(self.b.eval(x)?) {
            *v += w;
        }
        Ok(y)
    }
}

/// Counts evaluations of the wrapped model; used to audit HF usage.
pub struct CountingModel {
    inner: ModelRef,
    calls: AtomicUsize,
}

impl CountingModel {
    pub fn new(inner: ModelRef) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }
}

impl Model for CountingModel {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.eval(x)
    }
}
