use crate::bayes::PosteriorSpec;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const MAX_GRID_DIM: usize = 3;

/// A log-density tabulated on a tensor grid and normalized by the
/// trapezoidal rule. Values are stored row-major with the last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorGrid {
    axes: Vec<Vec<f64>>,
    log_values: Vec<f64>,
    density: Vec<f64>,
    log_norm: f64,
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
        .collect()
}

fn trapezoid_weights(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { axis[i] - axis[i - 1] } else { 0.0 };
            let right = if i + 1 < n { axis[i + 1] - axis[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// Evaluates `f` at every node of the tensor grid spanned by `axes`.
pub fn tabulate<F>(axes: &[Vec<f64>], mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let total: usize = axes.iter().map(Vec::len).product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; axes.len()];
    let mut x: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    for _ in 0..total {
        out.push(f(&x)?);
        for d in (0..axes.len()).rev() {
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                x[d] = axes[d][idx[d]];
                break;
            }
            idx[d] = 0;
            x[d] = axes[d][0];
        }
    }
    Ok(out)
}

/// Log-posterior on a uniform grid over the prior box.
pub fn grid_posterior(spec: &PosteriorSpec, resolution: &[usize]) -> Result<PosteriorGrid> {
    let d = spec.dim();
    if resolution.len() != d {
        return Err(Error::shape("grid_posterior resolution", d, resolution.len()));
    }
    if d > MAX_GRID_DIM {
        return Err(Error::Config(format!("grids are limited to {MAX_GRID_DIM} dimensions, got {d}")));
    }
    if resolution.iter().any(|&n| n < 2) {
        return Err(Error::Config("grid resolution must be at least 2 per dimension".into()));
    }
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|i| linspace(spec.prior.lower[i], spec.prior.upper[i], resolution[i]))
        .collect();
    let log_values = tabulate(&axes, |x| spec.log_posterior(x))?;
    PosteriorGrid::from_log_values(axes, log_values)
}

impl PosteriorGrid {
    pub fn from_log_values(axes: Vec<Vec<f64>>, log_values: Vec<f64>) -> Result<Self> {
        let total: usize = axes.iter().map(Vec::len).product();
        if axes.is_empty() || total != log_values.len() {
            return Err(Error::shape("PosteriorGrid", total, log_values.len()));
        }
        if axes.iter().any(|a| a.len() < 2 || a.windows(2).any(|w| !(w[1] > w[0]))) {
            return Err(Error::Config("grid axes need at least two increasing nodes".into()));
        }
        if log_values.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::Domain("grid log-values contain NaN or +∞".into()));
        }
        let shift = log_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if shift == f64::NEG_INFINITY {
            return Err(Error::Degenerate("posterior vanishes on every grid node".into()));
        }
        let mut grid = Self {
            axes,
            density: log_values.iter().map(|v| (v - shift).exp()).collect(),
            log_values,
            log_norm: 0.0,
        };
        let z = grid.integrate(&grid.density);
        if !(z > 0.0) {
            return Err(Error::Degenerate(
                "posterior mass lies only on zero-weight nodes".into(),
            ));
        }
        grid.density.iter_mut().for_each(|v| *v /= z);
        grid.log_norm = shift + z.ln();
        Ok(grid)
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    pub fn log_values(&self) -> &[f64] {
        &self.log_values
    }

    /// Normalized density at each node.
    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Log of the trapezoidal integral of the unnormalized values.
    pub fn log_normalizer(&self) -> f64 {
        self.log_norm
    }

    /// Tensor-product trapezoidal weights in storage order.
    pub fn weights(&self) -> Vec<f64> {
        let per_axis: Vec<Vec<f64>> = self.axes.iter().map(|a| trapezoid_weights(a)).collect();
        let mut out = vec![1.0; self.len()];
        let mut stride = 1;
        for (d, w) in per_axis.iter().enumerate().rev() {
            let n = self.axes[d].len();
            for (k, v) in out.iter_mut().enumerate() {
                *v *= w[(k / stride) % n];
            }
            stride *= n;
        }
        out
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights().iter().zip(values).map(|(w, v)| w * v).sum()
    }

    pub fn node(&self, k: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        let mut rem = k;
        for d in (0..self.dim()).rev() {
            let n = self.axes[d].len();
            x[d] = self.axes[d][rem % n];
            rem /= n;
        }
        x
    }

    pub fn argmax(&self) -> Vec<f64> {
        let k = self
            .log_values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
            .0;
        self.node(k)
    }

    pub fn mean(&self) -> Vec<f64> {
        let w = self.weights();
        let mut m = vec![0.0; self.dim()];
        for k in 0..self.len() {
            let p = w[k] * self.density[k];
            if p != 0.0 {
                for (mi, xi) in m.iter_mut().zip(self.node(k)) {
                    *mi += p * xi;
                }
            }
        }
        m
    }

    pub fn covariance(&self) -> Matrix<f64> {
        let w = self.weights();
        let m = self.mean();
        let d = self.dim();
        let mut c = Matrix::zeros(d, d);
        for k in 0..self.len() {
            let p = w[k] * self.density[k];
            if p == 0.0 {
                continue;
            }
            let x = self.node(k);
            for i in 0..d {
                for j in 0..d {
                    c[(i, j)] += p * (x[i] - m[i]) * (x[j] - m[j]);
                }
            }
        }
        c
    }

    /// Applies `f` to every unnormalized log-value and renormalizes.
    pub fn map_log_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_log_values(self.axes.clone(), self.log_values.iter().map(|&v| f(v)).collect())
    }
}

/// `√(½ Σ w (√ρ₁ − √ρ₂)²)` on a shared grid, clipped to `[0, 1]`.
pub fn hellinger(a: &PosteriorGrid, b: &PosteriorGrid) -> Result<f64> {
    if a.axes != b.axes {
        return Err(Error::Config("Hellinger distance needs identical grid axes".into()));
    }
    let w = a.weights();
    let s: f64 = w
        .iter()
        .zip(a.density.iter().zip(&b.density))
        .map(|(w, (p, q))| w * (p.sqrt() - q.sqrt()).powi(2))
        .sum();
    Ok((0.5 * s).sqrt().clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_grid(mean: f64, sd: f64, n: usize) -> PosteriorGrid {
        let axis = linspace(-12.0, 12.0, n);
        let lv = axis.iter().map(|x| -0.5 * ((x - mean) / sd).powi(2)).collect();
        PosteriorGrid::from_log_values(vec![axis], lv).unwrap()
    }

    #[test]
    fn constant_density_is_reciprocal_volume() {
        let axes = vec![linspace(-1.0, 1.0, 11), linspace(0.0, 3.0, 7)];
        let g = PosteriorGrid::from_log_values(axes, vec![0.0; 77]).unwrap();
        for v in g.density() {
            assert!((v - 1.0 / 6.0).abs() < 1e-12);
        }
        assert!((g.integrate(g.density()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_moments() {
        let g = gaussian_grid(0.3, 0.8, 1000);
        assert!((g.mean()[0] - 0.3).abs() < 1e-4);
        assert!((g.covariance()[(0, 0)] - 0.64).abs() < 1e-4);
    }

    #[test]
    fn hellinger_identities() {
        let a = gaussian_grid(0.0, 1.0, 2000);
        let b = gaussian_grid(1.0, 1.0, 2000);
        assert_eq!(hellinger(&a, &a).unwrap(), 0.0);
        let h = hellinger(&a, &b).unwrap();
        assert_eq!(h, hellinger(&b, &a).unwrap());
        assert!((h - (1.0 - (-1.0f64 / 8.0).exp()).sqrt()).abs() < 1e-3, "{h}");
    }

    #[test]
    fn disjoint_supports_give_one() {
        let axis = linspace(0.0, 1.0, 101);
        let a: Vec<f64> = axis.iter().map(|&x| if x < 0.45 { 0.0 } else { f64::NEG_INFINITY }).collect();
        let b: Vec<f64> = axis.iter().map(|&x| if x > 0.55 { 0.0 } else { f64::NEG_INFINITY }).collect();
        let ga = PosteriorGrid::from_log_values(vec![axis.clone()], a).unwrap();
        let gb = PosteriorGrid::from_log_values(vec![axis], b).unwrap();
        assert!((hellinger(&ga, &gb).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn node_ordering_is_last_axis_fastest() {
        let axes = vec![vec![0.0, 1.0], vec![10.0, 20.0, 30.0]];
        let v = tabulate(&axes, |x| Ok(x[0] * 100.0 + x[1])).unwrap();
        assert_eq!(v, vec![10.0, 20.0, 30.0, 110.0, 120.0, 130.0]);
        let g = PosteriorGrid::from_log_values(axes, vec![0.0; 6]).unwrap();
        assert_eq!(g.node(4), vec![1.0, 20.0]);
    }

    #[test]
    fn mismatched_axes_are_rejected() {
        let a = gaussian_grid(0.0, 1.0, 100);
        let b = gaussian_grid(0.0, 1.0, 101);
        assert!(hellinger(&a, &b).is_err());
        assert!(PosteriorGrid::from_log_values(vec![vec![0.0, 1.0]], vec![f64::NEG_INFINITY; 2]).is_err());
    }
}
