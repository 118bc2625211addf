use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::inflow::InflowWaveform;
use crate::bayes::{check_input, Model};
use crate::error::{Error, Result};

/// 1 mmHg in Barye (dyn/cm²).
pub const MMHG: f64 = 1333.22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindkesselKind {
    /// Two-element circuit with `R = R_p + R_d`.
    Rc,
    /// Three-element circuit.
    Rcr,
}

impl fmt::Display for WindkesselKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WindkesselKind::Rc => "rc",
            WindkesselKind::Rcr => "rcr",
        })
    }
}

impl FromStr for WindkesselKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rc" => Ok(WindkesselKind::Rc),
            "rcr" => Ok(WindkesselKind::Rcr),
            other => Err(Error::Config(format!("unknown circuit `{other}`"))),
        }
    }
}

/// Resistances in Barye·s/mL, compliance in mL/Barye, distal pressure in
/// mmHg.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindkesselParams {
    pub rp: f64,
    pub rd: f64,
    pub c: f64,
    pub pd: f64,
}

impl WindkesselParams {
    pub const DISTAL_PRESSURE: f64 = 55.0;

    pub fn new(rp: f64, rd: f64, c: f64) -> Self {
        Self {
            rp,
            rd,
            c,
            pd: Self::DISTAL_PRESSURE,
        }
    }

    fn validate(&self) -> Result<()> {
        if [self.rp, self.rd, self.c, self.pd].iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Domain(format!("Windkessel parameters must be positive: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    pub cycles: usize,
    pub rtol: f64,
    /// Output points per cycle; QoIs are taken on this grid.
    pub samples_per_cycle: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            cycles: 10,
            rtol: 1e-8,
            samples_per_cycle: 256,
        }
    }
}

/// Proximal-pressure summaries over the final cycle, in mmHg.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureQoI {
    pub p_min: f64,
    pub p_max: f64,
    pub p_avg: f64,
}

impl PressureQoI {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.p_min, self.p_max, self.p_avg]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Simulation {
    pub qoi: PressureQoI,
    /// Output times (s) over all cycles.
    pub times: Vec<f64>,
    /// Proximal pressure (mmHg) at `times`.
    pub pressure: Vec<f64>,
}

/// Integrates the circuit with an adaptive implicit trapezoidal rule.
///
/// Both circuits reduce to `dP/dt = (Q(t) − (P − P_d)/R_out)/C` for the
/// capacitor pressure; the RCR proximal pressure adds `R_p·Q(t)`.
pub fn simulate_windkessel(
    kind: WindkesselKind,
    params: WindkesselParams,
    inflow: &InflowWaveform,
    cfg: SimConfig,
) -> Result<Simulation> {
    let mut trace = Some((Vec::new(), Vec::new()));
    let qoi = integrate(kind, params, inflow, cfg, &mut trace)?;
    let (times, pressure) = trace.expect("trace requested");
    Ok(Simulation { qoi, times, pressure })
}

fn integrate(
    kind: WindkesselKind,
    params: WindkesselParams,
    inflow: &InflowWaveform,
    cfg: SimConfig,
    trace: &mut Option<(Vec<f64>, Vec<f64>)>,
) -> Result<PressureQoI> {
    params.validate()?;
    if cfg.cycles < 2 {
        return Err(Error::Config("at least two cycles are required".into()));
    }
    if cfg.samples_per_cycle < 4 || !(cfg.rtol > 0.0) {
        return Err(Error::Config("invalid integrator settings".into()));
    }
    let pd = params.pd * MMHG;
    let (r_out, r_prox) = match kind {
        WindkesselKind::Rc => (params.rp + params.rd, 0.0),
        WindkesselKind::Rcr => (params.rd, params.rp),
    };
    let c = params.c;
    let rate_q = |q: f64, p: f64| (q - (p - pd) / r_out) / c;
    let rate = |t: f64, p: f64| rate_q(inflow.eval(t), p);
    let jac = -1.0 / (r_out * c);
    let atol = cfg.rtol * pd;

    // One implicit trapezoid step solved by Newton's method.
    let step = |t: f64, p: f64, f0: f64, h: f64| -> Result<(f64, f64)> {
        let t1 = t + h;
        let q1 = inflow.eval(t1);
        let mut p1 = p + h * f0;
        for _ in 0..20 {
            let f1 = rate_q(q1, p1);
            let g = p1 - p - 0.5 * h * (f0 + f1);
            let dg = 1.0 - 0.5 * h * jac;
            let dp = g / dg;
            p1 -= dp;
            if dp.abs() <= 1e-12 * p1.abs().max(pd) {
                return Ok((p1, rate_q(q1, p1)));
            }
        }
        Err(Error::Integration {
            t: t1,
            reason: "Newton iteration did not converge".into(),
        })
    };

    let period = inflow.period();
    let n_out = cfg.cycles * cfg.samples_per_cycle;
    let dt_out = period / cfg.samples_per_cycle as f64;
    let final_start = (cfg.cycles - 1) * cfg.samples_per_cycle;

    let mut t = 0.0;
    let mut p = pd;
    let mut f = rate(t, p);
    let mut h = dt_out;
    let proximal = |t: f64, p: f64| (p + r_prox * inflow.eval(t)) / MMHG;

    let mut last_cycle = Vec::with_capacity(cfg.samples_per_cycle + 1);
    let mut record = |k: usize, t: f64, p: f64, trace: &mut Option<(Vec<f64>, Vec<f64>)>| {
        let pp = proximal(t, p);
        if let Some((ts, ps)) = trace.as_mut() {
            ts.push(t);
            ps.push(pp);
        }
        if k >= final_start {
            last_cycle.push(pp);
        }
    };
    record(0, t, p, trace);

    for k in 1..=n_out {
        let t_end = k as f64 * dt_out;
        while t < t_end {
            let remaining = t_end - t;
            let mut hk = h.min(remaining);
            let mut tries = 0;
            loop {
                let (full, _) = step(t, p, f, hk)?;
                let (mid, fm) = step(t, p, f, 0.5 * hk)?;
                let (two, f2) = step(t + 0.5 * hk, mid, fm, 0.5 * hk)?;
                let err = (two - full).abs() / 3.0;
                let tol = cfg.rtol * two.abs() + atol;
                if !two.is_finite() {
                    return Err(Error::Integration {
                        t,
                        reason: "non-finite pressure".into(),
                    });
                }
                let factor = if err == 0.0 { 4.0 } else { (0.9 * (tol / err).cbrt()).clamp(0.2, 4.0) };
                if err <= tol {
                    t = if hk == remaining { t_end } else { t + hk };
                    p = two;
                    f = f2;
                    if hk < remaining || factor > 1.0 {
                        h = hk * factor;
                    }
                    break;
                }
                hk *= factor;
                tries += 1;
                if tries > 60 || hk < 1e-14 * period {
                    return Err(Error::Integration {
                        t,
                        reason: format!("step size underflow (h = {hk:e})"),
                    });
                }
            }
        }
        record(k, t, p, trace);
    }

    let n = last_cycle.len() - 1;
    let p_min = last_cycle.iter().copied().fold(f64::INFINITY, f64::min);
    let p_max = last_cycle.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let p_avg = (0.5 * (last_cycle[0] + last_cycle[n]) + last_cycle[1..n].iter().sum::<f64>()) / n as f64;
    Ok(PressureQoI { p_min, p_max, p_avg })
}

/// `(R_p, R_d, C) ↦ (P_min, P_max, P_avg)` in mmHg.
#[derive(Clone, Debug)]
pub struct WindkesselModel {
    pub kind: WindkesselKind,
    pub inflow: InflowWaveform,
    pub pd: f64,
    pub config: SimConfig,
}

impl WindkesselModel {
    pub fn new(kind: WindkesselKind, inflow: InflowWaveform) -> Self {
        Self {
            kind,
            inflow,
            pd: WindkesselParams::DISTAL_PRESSURE,
            config: SimConfig::default(),
        }
    }

    /// Prior box for `(R_p, R_d, C)`.
    pub fn bounds() -> (Vec<f64>, Vec<f64>) {
        (vec![500.0, 500.0, 1e-5], vec![1500.0, 1500.0, 1e-4])
    }

    pub fn true_params() -> Vec<f64> {
        vec![1000.0, 1000.0, 5e-5]
    }

    /// Observation-noise variances of `(P_min, P_max, P_avg)`.
    pub fn noise_variances() -> Vec<f64> {
        vec![5.05, 7.40, 5.83]
    }

    pub fn qoi(&self, x: &[f64]) -> Result<PressureQoI> {
        check_input(self, x)?;
        let params = WindkesselParams {
            rp: x[0],
            rd: x[1],
            c: x[2],
            pd: self.pd,
        };
        integrate(self.kind, params, &self.inflow, self.config, &mut None)
    }
}

impl Model for WindkesselModel {
    fn input_dim(&self) -> usize {
        3
    }

    fn output_dim(&self) -> usize {
        3
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.qoi(x)?.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact capacitor pressure for piecewise-linear inflow, by the
    /// integrating factor on each linear piece.
    fn exact_piecewise_linear(times: &[f64], flows: &[f64], r: f64, c: f64, pd: f64, t_end: f64) -> f64 {
        let tau = r * c;
        let mut p = pd;
        let period = times[times.len() - 1];
        let mut t0 = 0.0;
        while t0 < t_end - 1e-15 {
            for w in 0..times.len() - 1 {
                let (a, b) = (times[w], times[w + 1]);
                let (qa, qb) = (flows[w], flows[w + 1]);
                let h = b - a;
                let slope = (qb - qa) / h;
                // P' = (pd + R q(s) − P)/τ with q(s) = qa + slope·s.
                let e = (-h / tau).exp();
                let particular = |s: f64| pd + r * (qa + slope * s) - r * slope * tau;
                p = particular(h) + (p - particular(0.0)) * e;
            }
            t0 += period;
        }
        p
    }

    #[test]
    fn matches_exact_solution_for_piecewise_linear_inflow() {
        // A many-knot sampling of a triangle wave keeps the spline close to
        // the piecewise-linear signal; compare at whole periods.
        let n = 400;
        let times: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let tri = |t: f64| 50.0 + 40.0 * (1.0 - (2.0 * t - 1.0).abs());
        let flows: Vec<f64> = times.iter().map(|&t| tri(t)).collect();
        let inflow = InflowWaveform::new(&times, &flows).unwrap();
        let params = WindkesselParams::new(800.0, 1200.0, 2e-4);
        let sim = simulate_windkessel(
            WindkesselKind::Rc,
            params,
            &inflow,
            SimConfig {
                cycles: 3,
                samples_per_cycle: 50,
                ..SimConfig::default()
            },
        )
        .unwrap();
        let exact = exact_piecewise_linear(&times, &flows, 2000.0, 2e-4, 55.0 * MMHG, 3.0) / MMHG;
        let got = *sim.pressure.last().unwrap();
        assert!((got - exact).abs() < 1e-3, "{got} vs {exact}");
    }

    #[test]
    fn constant_inflow_reaches_linear_steady_state() {
        let inflow = InflowWaveform::constant(40.0, 1.07).unwrap();
        let params = WindkesselParams::new(1000.0, 1000.0, 5e-5);
        for kind in [WindkesselKind::Rc, WindkesselKind::Rcr] {
            let q = simulate_windkessel(kind, params, &inflow, SimConfig::default()).unwrap().qoi;
            let expected = (40.0 * 2000.0 + 55.0 * MMHG) / MMHG;
            assert!((q.p_avg - expected).abs() < 1e-6, "{kind}: {} vs {expected}", q.p_avg);
            assert!(q.p_max - q.p_min < 1e-6);
        }
    }

    #[test]
    fn qoi_ordering_and_trace_length() {
        let inflow = InflowWaveform::default_waveform();
        let sim = simulate_windkessel(
            WindkesselKind::Rcr,
            WindkesselParams::new(1000.0, 1000.0, 5e-5),
            &inflow,
            SimConfig::default(),
        )
        .unwrap();
        let q = sim.qoi;
        assert!(q.p_min <= q.p_avg && q.p_avg <= q.p_max);
        assert_eq!(sim.times.len(), 10 * 256 + 1);
    }

    #[test]
    fn invalid_parameters_are_domain_errors() {
        let m = WindkesselModel::new(WindkesselKind::Rcr, InflowWaveform::default_waveform());
        assert!(matches!(m.eval(&[-1.0, 1000.0, 5e-5]), Err(Error::Domain(_))));
        assert_eq!(m.eval(&[1000.0, 1000.0, 5e-5]).unwrap().len(), 3);
    }
}
