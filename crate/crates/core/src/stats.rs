//! Sample moments shared by the surrogate and metric code.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub fn mean<T: Scalar>(v: &[T]) -> T {
    if v.is_empty() {
        return T::nan();
    }
    v.iter().copied().sum::<T>() / T::of(v.len() as f64)
}

/// Unbiased (`N − 1`) sample covariance, two-pass.
pub fn covariance<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::shape("covariance", a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(Error::Degenerate(format!(
            "need at least two samples, got {}",
            a.len()
        )));
    }
    let (ma, mb) = (mean(a), mean(b));
    let s: T = a.iter().zip(b).map(|(&x, &y)| (x - ma) * (y - mb)).sum();
    Ok(s / T::of((a.len() - 1) as f64))
}

pub fn variance<T: Scalar>(v: &[T]) -> Result<T> {
    covariance(v, v)
}

/// Sample Pearson correlation.
pub fn pearson<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    let c = covariance(a, b)?;
    let va = variance(a)?;
    let vb = variance(b)?;
    if !(va > T::zero() && vb > T::zero()) {
        return Err(Error::Degenerate(
            "Pearson correlation of a constant vector".into(),
        ));
    }
    let r = c / (va.sqrt() * vb.sqrt());
    Ok(r.max(-T::one()).min(T::one()))
}
