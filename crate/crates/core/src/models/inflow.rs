use std::path::Path;

use crate::error::{Error, Result};

const DEFAULT_WAVEFORM: &str = include_str!("../../data/inflow_default.csv");

/// Periodic inflow `Q(t)` (mL/s) interpolated by a periodic cubic spline.
#[derive(Clone, Debug, PartialEq)]
pub struct InflowWaveform {
    t0: f64,
    period: f64,
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl InflowWaveform {
    /// `times`/`flows` cover one period; the last sample closes it and must
    /// repeat the first flow value.
    pub fn new(times: &[f64], flows: &[f64]) -> Result<Self> {
        if times.len() != flows.len() {
            return Err(Error::shape("InflowWaveform", times.len(), flows.len()));
        }
        if times.len() < 4 {
            return Err(Error::Config("a waveform needs at least four samples".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("waveform times must be strictly increasing".into()));
        }
        if flows.iter().chain(times).any(|v| !v.is_finite()) {
            return Err(Error::Config("waveform contains non-finite values".into()));
        }
        let n = times.len() - 1;
        let scale = flows.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        if (flows[n] - flows[0]).abs() > 1e-6 * scale {
            return Err(Error::Config(format!(
                "waveform is not periodic: Q(start) = {}, Q(end) = {}",
                flows[0], flows[n]
            )));
        }
        let knots = times[..n].to_vec();
        let values = flows[..n].to_vec();
        let period = times[n] - times[0];
        let second = periodic_second_derivatives(&knots, &values, period);
        Ok(Self {
            t0: times[0],
            period,
            knots,
            values,
            second,
        })
    }

    /// Two-column `time,flow` text with an optional header line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut times = Vec::new();
        let mut flows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
            let parsed: std::result::Result<Vec<f64>, _> = cols.iter().map(|c| c.parse::<f64>()).collect();
            match parsed {
                Ok(v) if v.len() == 2 => {
                    times.push(v[0]);
                    flows.push(v[1]);
                }
                Err(_) if times.is_empty() => continue,
                _ => {
                    return Err(Error::Parse(format!(
                        "line {}: expected two numeric columns, got `{line}`",
                        lineno + 1
                    )))
                }
            }
        }
        Self::new(&times, &flows)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// The bundled waveform: a ten-harmonic series with a systolic peak, a
    /// brief retrograde phase and a mean of 41 mL/s over a 1.07 s cycle.
    pub fn default_waveform() -> Self {
        Self::parse(DEFAULT_WAVEFORM).expect("bundled waveform is valid")
    }

    /// Constant flow `q` with the given period.
    pub fn constant(q: f64, period: f64) -> Result<Self> {
        let times: Vec<f64> = (0..=8).map(|i| period * i as f64 / 8.0).collect();
        Self::new(&times, &[q; 9])
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn samples(&self) -> (Vec<f64>, Vec<f64>) {
        let mut t = self.knots.clone();
        t.push(self.t0 + self.period);
        let mut q = self.values.clone();
        q.push(self.values[0]);
        (t, q)
    }

    fn segment(&self, t: f64) -> (usize, f64, f64) {
        let tau = self.t0 + (t - self.t0).rem_euclid(self.period);
        let i = match self.knots.partition_point(|k| *k <= tau) {
            0 => 0,
            p => p - 1,
        };
        let right = self.knots.get(i + 1).copied().unwrap_or(self.t0 + self.period);
        (i, tau - self.knots[i], right - self.knots[i])
    }

    pub fn eval(&self, t: f64) -> f64 {
        let (i, s, h) = self.segment(t);
        let j = (i + 1) % self.knots.len();
        let b = s / h;
        let a = 1.0 - b;
        a * self.values[i]
            + b * self.values[j]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[j]) * h * h / 6.0
    }

    /// Exact cycle average of the spline.
    pub fn mean_flow(&self) -> f64 {
        let n = self.knots.len();
        let mut total = 0.0;
        for i in 0..n {
            let j = (i + 1) % n;
            let h = if i + 1 < n { self.knots[i + 1] - self.knots[i] } else { self.t0 + self.period - self.knots[i] };
            total += 0.5 * h * (self.values[i] + self.values[j]) - h * h * h * (self.second[i] + self.second[j]) / 24.0;
        }
        total / self.period
    }

    /// Multiplies the flow by `c` (the spline is linear in the data).
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * c).collect(),
            second: self.second.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }

    /// Shifts the flow so its cycle average is `mean`.
    pub fn with_mean(&self, mean: f64) -> Self {
        let shift = mean - self.mean_flow();
        Self {
            values: self.values.iter().map(|v| v + shift).collect(),
            ..self.clone()
        }
    }
}

/// Second derivatives of the periodic cubic spline through `(t_i, y_i)`,
/// from the cyclic tridiagonal system solved by Sherman–Morrison.
fn periodic_second_derivatives(t: &[f64], y: &[f64], period: f64) -> Vec<f64> {
    let n = t.len();
    let h: Vec<f64> = (0..n)
        .map(|i| if i + 1 < n { t[i + 1] - t[i] } else { t[0] + period - t[n - 1] })
        .collect();
    let prev = |i: usize| (i + n - 1) % n;
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let hp = h[prev(i)];
        sub[i] = hp;
        diag[i] = 2.0 * (hp + h[i]);
        sup[i] = h[i];
        rhs[i] = 6.0 * ((y[(i + 1) % n] - y[i]) / h[i] - (y[i] - y[prev(i)]) / hp);
    }
    cyclic_tridiagonal(&sub, &diag, &sup, &rhs)
}

/// Solves a cyclic tridiagonal system; `sub[0]` couples row 0 to the last
/// unknown and `sup[n−1]` couples the last row to the first.
fn cyclic_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let alpha = sup[n - 1];
    let beta = sub[0];
    let gamma = -diag[0];
    let mut d = diag.to_vec();
    d[0] -= gamma;
    d[n - 1] -= alpha * beta / gamma;
    let x = thomas(sub, &d, sup, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = thomas(sub, &d, sup, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / m;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}
