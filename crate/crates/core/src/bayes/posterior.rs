use super::likelihood::LikelihoodSpec;
use super::prior::PriorSpec;
use crate::error::{Error, Result};

/// `log ρ(x|y) = log ρ(y|x) + log π(x)` up to a constant.
#[derive(Clone)]
pub struct PosteriorSpec {
    pub prior: PriorSpec,
    pub likelihood: LikelihoodSpec,
}

impl PosteriorSpec {
    pub fn new(prior: PriorSpec, likelihood: LikelihoodSpec) -> Result<Self> {
        if prior.dim() != likelihood.input_dim() {
            return Err(Error::shape(
                "PosteriorSpec",
                prior.dim(),
                likelihood.input_dim(),
            ));
        }
        Ok(Self { prior, likelihood })
    }

    pub fn dim(&self) -> usize {
        self.prior.dim()
    }

    pub fn log_prior(&self, x: &[f64]) -> Result<f64> {
        self.prior.log_prior(x)
    }

    pub fn log_likelihood(&self, x: &[f64]) -> Result<f64> {
        self.likelihood.log_likelihood(x)
    }

    /// Never evaluates the likelihood where the prior vanishes.
    pub fn log_posterior(&self, x: &[f64]) -> Result<f64> {
        let lp = self.prior.log_prior(x)?;
        if lp == f64::NEG_INFINITY {
            return Ok(lp);
        }
        Ok(lp + self.likelihood.log_likelihood(x)?)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::bayes::{fn_model, CountingModel, Handles, Method, Model, NoiseSpec};

    #[test]
    fn outside_box_makes_no_model_calls() {
        let counter = Arc::new(CountingModel::new(fn_model(2, 1, |x| vec![x[0] + x[1]])));
        let lik = LikelihoodSpec::new(
            Method::A,
            Handles {
                hf: Some(counter.clone() as crate::bayes::ModelRef),
                ..Handles::default()
            },
            NoiseSpec::scalar(0.3, 0.1).unwrap(),
        )
        .unwrap();
        let post = PosteriorSpec::new(
            PriorSpec::uniform(vec![-1.0; 2], vec![1.0; 2]).unwrap(),
            lik,
        )
        .unwrap();
        assert_eq!(post.log_posterior(&[1.5, 0.0]).unwrap(), f64::NEG_INFINITY);
        assert_eq!(counter.calls(), 0);
        let inside = post.log_posterior(&[0.1, 0.2]).unwrap();
        assert_eq!(counter.calls(), 1);
        assert!((inside - post.log_likelihood(&[0.1, 0.2]).unwrap()).abs() < 1e-15);
        assert_eq!(counter.input_dim(), 2);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let lik = LikelihoodSpec::new(
            Method::A,
            Handles {
                hf: Some(fn_model(2, 1, |x| vec![x[0]])),
                ..Handles::default()
            },
            NoiseSpec::scalar(0.0, 1.0).unwrap(),
        )
        .unwrap();
        assert!(
            PosteriorSpec::new(PriorSpec::uniform(vec![0.0; 3], vec![1.0; 3]).unwrap(), lik)
                .is_err()
        );
    }
}
