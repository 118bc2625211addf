use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{layer_spec, MlpNet, Parameterized, Tape, Var};
use crate::scalar::Scalar;

/// Affine coupling: coordinates with mask 1 pass through and condition the
/// scale `s` and shift `t` applied to the rest.
///
/// Normalizing direction: `z = x⊙m + (1−m)⊙(x − t)⊙exp(−s)` with
/// `s = tanh(S(x⊙m))⊙(1−m)`, `t = T(x⊙m)⊙(1−m)`, so `log|∂z/∂x| = −Σ s`.
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling<T> {
    mask: Vec<T>,
    s_net: MlpNet<T>,
    t_net: MlpNet<T>,
}

/// Alternating masks: even coordinates fixed when `parity` is 0, odd when 1.
pub fn alternating_mask<T: Scalar>(dim: usize, parity: usize) -> Vec<T> {
    (0..dim)
        .map(|i| {
            if i % 2 == parity % 2 {
                T::one()
            } else {
                T::zero()
            }
        })
        .collect()
}

impl<T: Scalar> Coupling<T> {
    /// Glorot hidden layers and a zeroed output layer, so the coupling
    /// starts as the identity.
    pub fn new<R: Rng + ?Sized>(
        mask: Vec<T>,
        layers: usize,
        neurons: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let d = mask.len();
        if d < 2 {
            return Err(Error::Config(
                "coupling layers need dimension at least 2".into(),
            ));
        }
        let sizes = layer_spec(d, layers, neurons, d);
        let mut s_net = MlpNet::glorot(&sizes, rng)?;
        let mut t_net = MlpNet::glorot(&sizes, rng)?;
        s_net.zero_output_layer();
        t_net.zero_output_layer();
        Ok(Self { mask, s_net, t_net })
    }

    pub fn from_parts(mask: Vec<T>, s_net: MlpNet<T>, t_net: MlpNet<T>) -> Result<Self> {
        let d = mask.len();
        for net in [&s_net, &t_net] {
            if net.input_dim() != d || net.output_dim() != d {
                return Err(Error::shape("Coupling::from_parts", d, net.input_dim()));
            }
        }
        Ok(Self { mask, s_net, t_net })
    }

    pub fn mask(&self) -> &[T] {
        &self.mask
    }

    pub fn s_net(&self) -> &MlpNet<T> {
        &self.s_net
    }

    pub fn t_net(&self) -> &MlpNet<T> {
        &self.t_net
    }

    fn conditioner(&self, fixed: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        let s_raw = self.s_net.forward(fixed)?;
        let t_raw = self.t_net.forward(fixed)?;
        let s = s_raw
            .iter()
            .zip(&self.mask)
            .map(|(&v, &m)| v.tanh() * (T::one() - m))
            .collect();
        let t = t_raw
            .iter()
            .zip(&self.mask)
            .map(|(&v, &m)| v * (T::one() - m))
            .collect();
        Ok((s, t))
    }

    /// Returns `(z, log|∂z/∂x|)`.
    pub fn forward(&self, x: &[T]) -> Result<(Vec<T>, T)> {
        let fixed: Vec<T> = x.iter().zip(&self.mask).map(|(&v, &m)| v * m).collect();
        let (s, t) = self.conditioner(&fixed)?;
        let z = (0..x.len())
            .map(|i| {
                if self.mask[i] == T::one() {
                    x[i]
                } else {
                    (x[i] - t[i]) * (-s[i]).exp()
                }
            })
            .collect();
        Ok((z, -s.iter().copied().sum::<T>()))
    }

    /// Returns `(x, log|∂x/∂z|)`.
    pub fn inverse(&self, z: &[T]) -> Result<(Vec<T>, T)> {
        let fixed: Vec<T> = z.iter().zip(&self.mask).map(|(&v, &m)| v * m).collect();
        let (s, t) = self.conditioner(&fixed)?;
        let x = (0..z.len())
            .map(|i| {
                if self.mask[i] == T::one() {
                    z[i]
                } else {
                    z[i] * s[i].exp() + t[i]
                }
            })
            .collect();
        Ok((x, s.iter().copied().sum::<T>()))
    }

    /// Batch version of [`Coupling::forward`]; the log-determinant is `n × 1`.
    pub fn tape_forward(&self, tape: &mut Tape<T>, params: &[Var], x: Var) -> (Var, Var) {
        let (ps, pt) = params.split_at(2 * self.s_net.weights().len());
        let m = tape.constant(Matrix::row_vector(&self.mask));
        let inv: Vec<T> = self.mask.iter().map(|&v| T::one() - v).collect();
        let inv = tape.constant(Matrix::row_vector(&inv));
        let fixed = tape.mul_row(x, m);
        let s_raw = self.s_net.tape_forward(tape, ps, fixed);
        let s_th = tape.tanh(s_raw);
        let s = tape.mul_row(s_th, inv);
        let t_raw = self.t_net.tape_forward(tape, pt, fixed);
        let t = tape.mul_row(t_raw, inv);
        let shifted = tape.sub(x, t);
        let neg_s = tape.scale(s, -T::one());
        let scale = tape.exp(neg_s);
        let moved = tape.mul(shifted, scale);
        let moved = tape.mul_row(moved, inv);
        let z = tape.add(fixed, moved);
        let sum_s = tape.sum_cols(s);
        let logdet = tape.scale(sum_s, -T::one());
        (z, logdet)
    }
}

impl<T: Scalar> Parameterized<T> for Coupling<T> {
    fn parameters(&self) -> Vec<&Matrix<T>> {
        let mut p = self.s_net.parameters();
        p.extend(self.t_net.parameters());
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Matrix<T>> {
        let mut p = self.s_net.parameters_mut();
        p.extend(self.t_net.parameters_mut());
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_coupling(seed: u64) -> Coupling<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = layer_spec(3, 2, 4, 3);
        Coupling::from_parts(
            alternating_mask(3, 1),
            MlpNet::glorot(&sizes, &mut rng).unwrap(),
            MlpNet::glorot(&sizes, &mut rng).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn fresh_coupling_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = Coupling::<f64>::new(alternating_mask(2, 0), 2, 3, &mut rng).unwrap();
        let (z, ld) = c.forward(&[0.7, -1.1]).unwrap();
        assert_eq!(z, vec![0.7, -1.1]);
        assert_eq!(ld, 0.0);
    }

    #[test]
    fn inverse_and_log_determinants_are_consistent() {
        let c = random_coupling(5);
        let x = [0.4, -1.3, 2.2];
        let (z, ld_f) = c.forward(&x).unwrap();
        let (back, ld_i) = c.inverse(&z).unwrap();
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((ld_f + ld_i).abs() < 1e-14);
        assert_eq!(z[1], x[1]);
        assert!(z[0] != x[0] && z[2] != x[2]);
    }

    #[test]
    fn tape_agrees_with_pointwise() {
        let c = random_coupling(9);
        let rows = vec![vec![0.1, 0.2, 0.3], vec![-1.0, 0.5, 2.0]];
        let mut tape = Tape::new();
        let p = c.bind(&mut tape);
        let x = tape.constant(Matrix::from_rows(&rows).unwrap());
        let (z, ld) = c.tape_forward(&mut tape, &p, x);
        for (i, r) in rows.iter().enumerate() {
            let (ez, eld) = c.forward(r).unwrap();
            for (a, b) in tape.value(z).row(i).iter().zip(&ez) {
                assert!((a - b).abs() < 1e-14);
            }
            assert!((tape.value(ld).as_slice()[i] - eld).abs() < 1e-14);
        }
    }

    #[test]
    fn one_dimensional_coupling_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(Coupling::<f64>::new(vec![1.0], 1, 2, &mut rng).is_err());
    }
}
