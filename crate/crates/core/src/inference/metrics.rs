use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Column means of an `N × d` sample matrix.
pub fn sample_mean(samples: &Matrix<f64>) -> Vec<f64> {
    let n = samples.rows() as f64;
    let mut m = vec![0.0; samples.cols()];
    for row in samples.iter_rows() {
        for (mi, v) in m.iter_mut().zip(row) {
            *mi += v;
        }
    }
    m.iter_mut().for_each(|v| *v /= n);
    m
}

/// Unbiased sample covariance.
pub fn sample_covariance(samples: &Matrix<f64>) -> Result<Matrix<f64>> {
    let n = samples.rows();
    if n < 2 {
        return Err(Error::Degenerate("covariance needs at least two samples".into()));
    }
    let m = sample_mean(samples);
    let d = samples.cols();
    let mut c = Matrix::zeros(d, d);
    for row in samples.iter_rows() {
        for i in 0..d {
            let a = row[i] - m[i];
            for j in i..d {
                c[(i, j)] += a * (row[j] - m[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = c[(i, j)] / (n - 1) as f64;
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(c)
}

pub fn trace(c: &Matrix<f64>) -> f64 {
    (0..c.rows().min(c.cols())).map(|i| c[(i, i)]).sum()
}

pub fn diagonal(c: &Matrix<f64>) -> Vec<f64> {
    (0..c.rows().min(c.cols())).map(|i| c[(i, i)]).collect()
}

/// `tr(M⁻¹ C M⁻¹)` with `M = diag(reference)`.
pub fn rescaled_trace(c: &Matrix<f64>, reference: &[f64]) -> Result<f64> {
    if reference.len() != c.rows() || c.rows() != c.cols() {
        return Err(Error::shape("rescaled_trace", c.rows(), reference.len()));
    }
    if reference.contains(&0.0) {
        return Err(Error::Domain("rescaling reference has a zero entry".into()));
    }
    Ok(reference.iter().enumerate().map(|(i, m)| c[(i, i)] / (m * m)).sum())
}

/// Pearson correlation between corresponding outputs, one value per column.
pub fn pearson_columns(a: &Matrix<f64>, b: &Matrix<f64>) -> Result<Vec<f64>> {
    if a.shape() != b.shape() {
        return Err(Error::shape("pearson_columns", format!("{:?}", a.shape()), format!("{:?}", b.shape())));
    }
    (0..a.cols()).map(|j| crate::stats::pearson(&a.column(j), &b.column(j))).collect()
}

/// k-nearest-neighbour estimate of `KL(p ‖ q)` from samples.
///
/// Coordinates are standardized by the pooled per-dimension standard
/// deviation first; the divergence is invariant to this map but the
/// Euclidean neighbour search is not.
pub fn knn_kl_divergence(p: &Matrix<f64>, q: &Matrix<f64>, k: usize) -> Result<f64> {
    let (n, m, d) = (p.rows(), q.rows(), p.cols());
    if q.cols() != d {
        return Err(Error::shape("knn_kl_divergence", d, q.cols()));
    }
    if k == 0 || n <= k || m <= k || d == 0 {
        return Err(Error::Config(format!("k-NN divergence needs N, M > k ≥ 1 (N={n}, M={m}, k={k})")));
    }
    let scale = pooled_std(p, q);
    let ps = standardize(p, &scale);
    let qs = standardize(q, &scale);

    let floor = 1e-12;
    let mut zero_radii = 0usize;
    let mut total = 0.0;
    let mut best = vec![0.0; k];
    for i in 0..n {
        let x = ps.row(i);
        let rho = kth_distance(x, &ps, Some(i), k, &mut best);
        let nu = kth_distance(x, &qs, None, k, &mut best);
        if rho < floor || nu < floor {
            zero_radii += 1;
        }
        total += (nu.max(floor) / rho.max(floor)).ln();
    }
    if zero_radii > 0 {
        log::warn!("k-NN divergence: {zero_radii} duplicate-point radii floored at {floor:e}");
    }
    Ok(d as f64 / n as f64 * total + (m as f64 / (n as f64 - 1.0)).ln())
}

fn pooled_std(p: &Matrix<f64>, q: &Matrix<f64>) -> Vec<f64> {
    let d = p.cols();
    let count = (p.rows() + q.rows()) as f64;
    let mut mean = vec![0.0; d];
    for row in p.iter_rows().chain(q.iter_rows()) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= count);
    let mut var = vec![0.0; d];
    for row in p.iter_rows().chain(q.iter_rows()) {
        for j in 0..d {
            var[j] += (row[j] - mean[j]).powi(2);
        }
    }
    var.iter().map(|v| (v / (count - 1.0)).sqrt().max(1e-300)).collect()
}

fn standardize(x: &Matrix<f64>, scale: &[f64]) -> Matrix<f64> {
    let mut out = x.clone();
    for i in 0..out.rows() {
        for (v, s) in out.row_mut(i).iter_mut().zip(scale) {
            *v /= s;
        }
    }
    out
}

/// Distance to the k-th nearest row of `set`, skipping row `skip`.
fn kth_distance(x: &[f64], set: &Matrix<f64>, skip: Option<usize>, k: usize, best: &mut [f64]) -> f64 {
    best.iter_mut().for_each(|v| *v = f64::INFINITY);
    for (j, row) in set.iter_rows().enumerate() {
        if Some(j) == skip {
            continue;
        }
        let mut d2 = 0.0;
        for (a, b) in x.iter().zip(row) {
            d2 += (a - b) * (a - b);
            if d2 >= best[k - 1] {
                break;
            }
        }
        if d2 < best[k - 1] {
            let mut pos = k - 1;
            while pos > 0 && best[pos - 1] > d2 {
                best[pos] = best[pos - 1];
                pos -= 1;
            }
            best[pos] = d2;
        }
    }
    best[k - 1].sqrt()
}
