use crate::bayes::{check_input, Model, ModelRef};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::stats::{covariance, variance};

/// Scaling of `q†` minimising the sample variance of `hf − α q†`, i.e.
/// `Cov(hf, q†) / Var(q†)`.
pub fn fit_alpha_opt<T: Scalar>(hf: &[T], qdagger: &[T]) -> Result<T> {
    if hf.len() != qdagger.len() {
        return Err(Error::shape("fit_alpha_opt", hf.len(), qdagger.len()));
    }
    let v = variance(qdagger)?;
    if !(v > T::zero()) {
        return Err(Error::Degenerate(
            "surrogate values have zero variance; the optimal scaling is undefined".into(),
        ));
    }
    Ok(covariance(hf, qdagger)? / v)
}

/// Sample variance of `hf − α q†`, the empirical inflated-noise variance
/// without the measurement term.
pub fn inflated_variance<T: Scalar>(hf: &[T], qdagger: &[T], alpha: T) -> Result<T> {
    if hf.len() != qdagger.len() {
        return Err(Error::shape("inflated_variance", hf.len(), qdagger.len()));
    }
    let r: Vec<T> = hf
        .iter()
        .zip(qdagger)
        .map(|(&h, &q)| h - alpha * q)
        .collect();
    variance(&r)
}

/// `α ⊙ q†(x)`, with one scaling per output component.
pub struct ScaledSurrogate {
    pub base: ModelRef,
    pub alpha: Vec<f64>,
}

impl ScaledSurrogate {
    pub fn new(base: ModelRef, alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() != base.output_dim() {
            return Err(Error::shape(
                "ScaledSurrogate::new",
                base.output_dim(),
                alpha.len(),
            ));
        }
        Ok(Self { base, alpha })
    }

    /// Fits `α_opt` per output from `q†` evaluated at `inputs` against the
    /// matching high-fidelity rows.
    pub fn fit(base: ModelRef, inputs: &Matrix<f64>, hf: &Matrix<f64>) -> Result<Self> {
        if inputs.rows() != hf.rows() || hf.cols() != base.output_dim() {
            return Err(Error::shape(
                "ScaledSurrogate::fit",
                format!("{} rows × {} outputs", inputs.rows(), base.output_dim()),
                format!("{:?}", hf.shape()),
            ));
        }
        let q = evaluate_rows(base.as_ref(), inputs)?;
        let alpha = (0..hf.cols())
            .map(|j| fit_alpha_opt(&hf.column(j), &q.column(j)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { base, alpha })
    }
}

impl Model for ScaledSurrogate {
    fn input_dim(&self) -> usize {
        self.base.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.base.output_dim()
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_input(self, x)?;
        let mut y = self.base.eval(x)?;
        y.iter_mut().zip(&self.alpha).for_each(|(v, a)| *v *= a);
        Ok(y)
    }
}

/// Evaluates `model` on every row of `inputs`.
pub fn evaluate_rows(model: &dyn Model, inputs: &Matrix<f64>) -> Result<Matrix<f64>> {
    let mut out = Vec::with_capacity(inputs.rows() * model.output_dim());
    for row in inputs.iter_rows() {
        out.extend(model.eval(row)?);
    }
    Matrix::from_vec(inputs.rows(), model.output_dim(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::fn_model;

    #[test]
    fn exact_surrogate_gives_unit_alpha() {
        let hf: [f64; 5] = [0.3, 1.2, -0.4, 2.2, 0.9];
        assert!((fit_alpha_opt(&hf, &hf).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn affine_surrogate_gives_reciprocal_slope() {
        let hf: [f64; 5] = [0.3, 1.2, -0.4, 2.2, 0.9];
        let q: Vec<f64> = hf.iter().map(|h| 2.0 * h + 5.0).collect();
        assert!((fit_alpha_opt(&hf, &q).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn constant_surrogate_is_degenerate() {
        assert!(matches!(
            fit_alpha_opt(&[1.0, 2.0], &[3.0, 3.0]),
            Err(Error::Degenerate(_))
        ));
        assert!(fit_alpha_opt(&[1.0], &[3.0]).is_err());
    }

    #[test]
    fn scaled_surrogate_applies_per_output_alpha() {
        let base = fn_model(1, 2, |x| vec![x[0], 2.0 * x[0]]);
        let inputs = Matrix::from_vec(3, 1, vec![0.0, 1.0, 2.0]).unwrap();
        let hf = Matrix::from_vec(3, 2, vec![0.0, 0.0, 3.0, 1.0, 6.0, 2.0]).unwrap();
        let s = ScaledSurrogate::fit(base, &inputs, &hf).unwrap();
        assert!((s.alpha[0] - 3.0).abs() < 1e-14 && (s.alpha[1] - 0.5).abs() < 1e-14);
        assert_eq!(s.eval(&[1.0]).unwrap(), vec![3.0, 1.0]);
    }
}
