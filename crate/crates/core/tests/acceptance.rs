//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Run all: `cargo test --release -p mfbayes --test acceptance`.
//! Run a subset by number: `... --test acceptance -- 1 5 7`.

use std::sync::Arc;
use std::time::Instant;

use mfbayes::bayes::{fn_model, Handles, LikelihoodSpec, Method, ModelRef, NoiseSpec, PosteriorSpec, PriorSpec};
use mfbayes::density::{train_flow, FlowArch, NoiseSampleSet};
use mfbayes::design::{map_to_prior_box, uniform_unit};
use mfbayes::inference::{
    dream_sample, gelman_rubin, grid_posterior, hellinger, knn_kl_divergence, linspace, rescaled_trace,
    sample_covariance, sample_mean, DreamConfig, PosteriorGrid,
};
use mfbayes::models::{
    analytical_hf, analytical_lf, borehole_hf, borehole_lf, Benchmark, Fidelity, InflowWaveform,
    SimConfig, WindkesselKind, WindkesselModel, MMHG,
};
use mfbayes::nn::{gradient, layer_spec, MlpNet, Parameterized, TrainConfig, STD_FLOOR};
use mfbayes::pipeline::{
    fit_method, generate_dataset, DatasetPlan, FitOptions, Fitted, PriorChoice, Problem, RationaleConfig,
};
use mfbayes::stats::{mean, pearson, variance};
use mfbayes::surrogates::{fit_alpha_opt, inflated_variance};
use mfbayes::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

type Outcome = (bool, String);

const GRID: [usize; 2] = [100, 100];
const SURROGATE_METHODS: [Method; 5] = [Method::B, Method::C, Method::D, Method::E, Method::F];

fn check(name: &str, ok: bool, detail: String, lines: &mut Vec<String>) -> bool {
    lines.push(format!("  [{}] {name}: {detail}", if ok { "ok" } else { "MISS" }));
    ok
}

fn reference_grid(problem: Problem) -> PosteriorGrid {
    let post = Fitted::method_a()
        .posterior(problem, problem.default_prior(), problem.noise_spec(0).unwrap())
        .unwrap();
    grid_posterior(&post, &GRID).unwrap()
}

fn method_hellinger(problem: Problem, fitted: &Fitted, reference: &PosteriorGrid) -> f64 {
    let post = fitted.posterior(problem, problem.default_prior(), problem.noise_spec(0).unwrap()).unwrap();
    hellinger(reference, &grid_posterior(&post, &GRID).unwrap()).unwrap()
}

fn hellinger_per_method(n: usize, seeds: std::ops::Range<u64>) -> Vec<(Method, Vec<f64>)> {
    let problem = Problem::Analytical2d;
    let reference = reference_grid(problem);
    let mut out: Vec<(Method, Vec<f64>)> = SURROGATE_METHODS.iter().map(|&m| (m, Vec::new())).collect();
    for seed in seeds {
        let data = generate_dataset(problem, &DatasetPlan::uniform(n, seed)).unwrap();
        for (method, hs) in &mut out {
            let t = Instant::now();
            let opts = FitOptions { seed, ..FitOptions::default() };
            let fitted = fit_method(problem, *method, &data, &opts).unwrap();
            let h = method_hellinger(problem, &fitted, &reference);
            eprintln!("    N={n} seed {seed} method {method}: H = {h:.4} ({:.1} s)", t.elapsed().as_secs_f64());
            hs.push(h);
        }
    }
    out
}

/// Pearson correlation of the two fidelities on the published designs.
fn criterion_1(lines: &mut Vec<String>) -> Outcome {
    let grid_corr = |lo: f64, hi: f64, hf: &dyn Fn(&[f64]) -> f64, lf: &dyn Fn(&[f64]) -> f64| {
        let axis = linspace(lo, hi, 100);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for &x1 in &axis {
            for &x2 in &axis {
                a.push(hf(&[x1, x2]));
                b.push(lf(&[x1, x2]));
            }
        }
        pearson(&a, &b).unwrap()
    };
    let analytical = grid_corr(-1.0, 1.0, &analytical_hf, &analytical_lf);
    let mich = Benchmark::Michalewicz;
    let mich_corr = grid_corr(0.0, std::f64::consts::PI, &|x| mich.hf(x), &|x| mich.lf(x));
    let prior = Problem::Borehole.default_prior();
    let x = map_to_prior_box(&uniform_unit(10_000, 8, 0), &prior).unwrap();
    let hf: Vec<f64> = x.iter_rows().map(borehole_hf).collect();
    let lf: Vec<f64> = x.iter_rows().map(borehole_lf).collect();
    let bore = pearson(&hf, &lf).unwrap();
    let mut ok = check("analytical", (analytical - 0.41417).abs() <= 5e-4, format!("{analytical:.5} vs 0.41417 ± 5e-4"), lines);
    ok &= check("michalewicz", (mich_corr - 0.73372).abs() <= 5e-4, format!("{mich_corr:.5} vs 0.73372 ± 5e-4"), lines);
    ok &= check("borehole", bore >= 0.9999, format!("{bore:.6} ≥ 0.9999"), lines);
    (ok, format!("analytical {analytical:.5}, michalewicz {mich_corr:.5}, borehole {bore:.6}"))
}

/// Analytical example, N = 100, ten seeds.
fn criterion_2(lines: &mut Vec<String>) -> Outcome {
    let results = hellinger_per_method(100, 0..10);
    let mut ok = true;
    let mut summary = Vec::new();
    for (method, hs) in &results {
        let m = mean(hs);
        let s = variance(hs).unwrap().sqrt();
        let pass = match method {
            Method::B | Method::D => m < 0.10,
            _ => (0.10..=0.45).contains(&m),
        };
        let bound = if matches!(method, Method::B | Method::D) { "< 0.10" } else { "in [0.10, 0.45]" };
        ok &= check(&format!("method {method}"), pass, format!("mean H {m:.4} ± {s:.4} {bound}"), lines);
        summary.push(format!("{method} {m:.3}"));
    }
    (ok, format!("mean Hellinger {}", summary.join(", ")))
}

/// Analytical example with N = 500.
fn criterion_3(lines: &mut Vec<String>) -> Outcome {
    let results = hellinger_per_method(500, 0..1);
    let mut ok = true;
    let mut summary = Vec::new();
    for (method, hs) in &results {
        let h = hs[0];
        let limit = if matches!(method, Method::B | Method::D) { 0.05 } else { 0.35 };
        ok &= check(&format!("method {method}"), h < limit, format!("H {h:.4} < {limit}"), lines);
        summary.push(format!("{method} {h:.3}"));
    }
    (ok, format!("Hellinger {}", summary.join(", ")))
}

/// Noisy-copy grid: flow variances and the σ_model = 0 row against the
/// exact posterior.
fn criterion_4(lines: &mut Vec<String>) -> Outcome {
    const LEVELS: [f64; 4] = [0.0, 0.125, 0.25, 0.5];
    let rc = RationaleConfig::default();
    let seed = 0;
    let mut ok = true;
    let mut worst_var: f64 = 0.0;
    let mut worst_h: f64 = 0.0;
    for sm in LEVELS {
        for sn in LEVELS {
            let t = Instant::now();
            let flow = Arc::new(rc.train_flow(sm, sn, seed).unwrap());
            let draws = flow.sample(100_000, seed ^ 0x5eed).unwrap();
            let v = variance(draws.as_slice()).unwrap();
            let target = sm * sm + sn * sn;
            let (pass, detail) = if target == 0.0 {
                (v <= STD_FLOOR * STD_FLOOR, format!("variance {v:.3e} ≤ floor² {:.0e}", STD_FLOOR * STD_FLOOR))
            } else {
                let rel = (v - target).abs() / target;
                worst_var = worst_var.max(rel);
                (rel <= 0.10, format!("variance {v:.5} vs {target:.5} (rel {rel:.3})"))
            };
            ok &= check(&format!("σ_model={sm} σ_noise={sn}"), pass, detail, lines);
            if sm == 0.0 && sn > 0.0 {
                let f = grid_posterior(&rc.method_f_posterior(flow, sm, seed).unwrap(), &GRID).unwrap();
                let a = grid_posterior(&rc.method_a_posterior(sn).unwrap(), &GRID).unwrap();
                let h = hellinger(&a, &f).unwrap();
                worst_h = worst_h.max(h);
                ok &= check(&format!("σ_noise={sn} F vs A"), h < 0.05, format!("H {h:.4} < 0.05"), lines);
            }
            eprintln!("    cell ({sm}, {sn}) done in {:.1} s", t.elapsed().as_secs_f64());
        }
    }
    (ok, format!("worst variance error {worst_var:.3}, worst F-vs-A Hellinger {worst_h:.4}"))
}

/// α_opt identities on analytical samples.
fn criterion_5(lines: &mut Vec<String>) -> Outcome {
    let x = map_to_prior_box(&uniform_unit(1000, 2, 5), &Problem::Analytical2d.default_prior()).unwrap();
    let hf: Vec<f64> = x.iter_rows().map(analytical_hf).collect();
    let lf: Vec<f64> = x.iter_rows().map(analytical_lf).collect();
    let a_exact = fit_alpha_opt(&hf, &hf).unwrap();
    let mut ok = check("Q† = Q_HF", (a_exact - 1.0).abs() <= 1e-12, format!("α = {a_exact}"), lines);
    for (a, b) in [(2.5, -1.0), (-0.4, 3.0), (1e3, 7.0)] {
        let q: Vec<f64> = hf.iter().map(|h| a * h + b).collect();
        let alpha = fit_alpha_opt(&hf, &q).unwrap();
        let rel = (alpha * a - 1.0).abs();
        ok &= check(&format!("Q† = {a}·Q_HF + {b}"), rel <= 1e-12, format!("α·a − 1 = {rel:.1e}"), lines);
    }
    let alpha = fit_alpha_opt(&hf, &lf).unwrap();
    let v = inflated_variance(&hf, &lf, alpha).unwrap();
    let kappa = pearson(&hf, &lf).unwrap();
    let identity = variance(&hf).unwrap() * (1.0 - kappa * kappa);
    let rel = (v - identity).abs() / identity;
    ok &= check("V(α_opt) = V[Q_HF](1 − κ²)", rel <= 1e-8, format!("relative gap {rel:.1e}"), lines);
    (ok, format!("variance identity gap {rel:.1e}"))
}

/// Autodiff against finite differences, flow round trips and 1-D
/// normalization.
fn criterion_6(lines: &mut Vec<String>) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let net = MlpNet::<f64>::glorot(&layer_spec(3, 3, 8, 2), &mut rng).unwrap();
    let x = Mat::from_vec(16, 3, (0..48).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
    let y = Mat::from_vec(16, 2, (0..32).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let loss = |n: &MlpNet<f64>| {
        let o = n.forward_batch(&x).unwrap();
        o.as_slice().iter().zip(y.as_slice()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / o.len() as f64
    };
    let yc = y.clone();
    let grads = gradient(&net, &x, move |tape, out| {
        let t = tape.constant(yc);
        let r = tape.sub(out, t);
        let sq = tape.square(r);
        tape.mean(sq)
    })
    .unwrap();
    let mut worst_grad: f64 = 0.0;
    for (p, g) in grads.iter().enumerate() {
        for k in 0..g.len() {
            let gk = g.as_slice()[k];
            if gk.abs() <= 1e-8 {
                continue;
            }
            let h = 1e-6;
            let mut plus = net.clone();
            plus.parameters_mut()[p].as_mut_slice()[k] += h;
            let mut minus = net.clone();
            minus.parameters_mut()[p].as_mut_slice()[k] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            worst_grad = worst_grad.max((fd - gk).abs() / gk.abs().max(fd.abs()));
        }
    }
    let mut ok = check("gradient", worst_grad < 1e-5, format!("max relative error {worst_grad:.2e} < 1e-5"), lines);

    // Trained 2-D RealNVP on correlated data.
    let data: Vec<f64> = (0..2000)
        .flat_map(|_| {
            let a: f64 = rng.sample(rand_distr::StandardNormal);
            let b: f64 = rng.sample(rand_distr::StandardNormal);
            [a, 0.8 * a + 0.3 * b * b]
        })
        .collect();
    let cfg = TrainConfig { epochs: 300, learning_rate: 5e-3, seed: 1, ..TrainConfig::default() };
    let samples = NoiseSampleSet::new(Mat::from_vec(2000, 2, data).unwrap());
    let flow2 = train_flow(&samples, &cfg, FlowArch { layers: 2, neurons: 8, blocks: 2 }).unwrap();
    let mut worst_rt: f64 = 0.0;
    let mut worst_ld: f64 = 0.0;
    for _ in 0..1000 {
        let z = [rng.sample(rand_distr::StandardNormal), rng.sample(rand_distr::StandardNormal)];
        let (u, fwd) = flow2.from_latent(&z).unwrap();
        let (back, inv) = flow2.to_latent(&u).unwrap();
        worst_rt = worst_rt.max((back[0] - z[0]).abs().max((back[1] - z[1]).abs()));
        worst_ld = worst_ld.max((fwd + inv).abs());
    }
    ok &= check(
        "RealNVP round trip",
        worst_rt < 1e-10 && worst_ld < 1e-10,
        format!("max |G⁻¹(G(z)) − z| {worst_rt:.1e}, log-det mismatch {worst_ld:.1e}"),
        lines,
    );

    // Trained 1-D flow on skewed data; Monte Carlo estimate of ∫ρ.
    let skew: Vec<f64> = (0..4000)
        .map(|_| {
            let a: f64 = rng.sample(rand_distr::StandardNormal);
            0.5 * a + 0.3 * a * a
        })
        .collect();
    let (lo, hi) = (-6.0, 12.0);
    let samples = NoiseSampleSet::new(Mat::from_vec(4000, 1, skew).unwrap());
    let flow1 = train_flow(&samples, &cfg, FlowArch { layers: 1, neurons: 6, blocks: 3 }).unwrap();
    // Stratified Monte Carlo: one uniform draw per stratum.
    let n = 1_000_000;
    let width = (hi - lo) / n as f64;
    let total: f64 = (0..n)
        .map(|i| {
            let u = lo + (i as f64 + rng.random::<f64>()) * width;
            flow1.log_density(&[u]).unwrap().exp()
        })
        .sum::<f64>()
        * width;
    let mut worst_1d: f64 = 0.0;
    for _ in 0..1000 {
        let z: f64 = rng.sample(rand_distr::StandardNormal);
        let (u, _) = flow1.from_latent(&[z]).unwrap();
        worst_1d = worst_1d.max((flow1.to_latent(&u).unwrap().0[0] - z).abs());
    }
    ok &= check("1-D round trip", worst_1d < 1e-10, format!("{worst_1d:.1e}"), lines);
    ok &= check("1-D normalization", (total - 1.0).abs() <= 0.01, format!("∫ρ ≈ {total:.4}"), lines);
    (ok, format!("grad err {worst_grad:.1e}, round trip {:.1e}, ∫ρ {total:.4}", worst_rt.max(worst_1d)))
}

/// Windkessel circuit identities.
fn criterion_7(lines: &mut Vec<String>) -> Outcome {
    let inflow = InflowWaveform::default_waveform();
    let x = WindkesselModel::true_params();
    let mut ok = true;
    let mut worst_mean: f64 = 0.0;
    let mut worst_lin: f64 = 0.0;
    let mut worst_tol: f64 = 0.0;
    for kind in [WindkesselKind::Rc, WindkesselKind::Rcr] {
        let model = WindkesselModel::new(kind, inflow.clone());
        let q = model.qoi(&x).unwrap();
        let expected = (inflow.mean_flow() * (x[0] + x[1])) / MMHG + model.pd;
        let rel = (q.p_avg - expected).abs() / expected;
        worst_mean = worst_mean.max(rel);
        ok &= check(&format!("{kind} mean pressure"), rel <= 1e-3, format!("{:.4} vs {expected:.4} mmHg", q.p_avg), lines);

        for c in [0.5, 1.7] {
            let scaled = WindkesselModel::new(kind, inflow.scaled(c)).qoi(&x).unwrap().to_vec();
            for (a, b) in q.to_vec().iter().zip(&scaled) {
                let want = c * (a - model.pd);
                worst_lin = worst_lin.max(((b - model.pd) - want).abs() / want.abs());
            }
        }

        let mut fine = WindkesselModel::new(kind, inflow.clone());
        fine.config = SimConfig { rtol: model.config.rtol / 2.0, ..model.config };
        let qf = fine.qoi(&x).unwrap().to_vec();
        for (a, b) in q.to_vec().iter().zip(&qf) {
            worst_tol = worst_tol.max((a - b).abs());
        }
    }
    ok &= check("linear scaling of P_p − P_d", worst_lin <= 1e-3, format!("max relative error {worst_lin:.2e}"), lines);
    ok &= check("tolerance halving", worst_tol < 1e-4, format!("max QoI change {worst_tol:.2e} mmHg"), lines);
    (ok, format!("mean identity {worst_mean:.1e}, scaling {worst_lin:.1e}, tolerance {worst_tol:.1e} mmHg"))
}

/// DREAM on a Gaussian target and the RCR Method-A posterior.
fn criterion_8(lines: &mut Vec<String>) -> Outcome {
    let identity = fn_model(2, 2, |x| x.to_vec());
    let noise = NoiseSpec::new(vec![1.0, 1.0], Mat::zeros(1, 2)).unwrap();
    let lik = LikelihoodSpec::new(Method::A, Handles { hf: Some(identity), ..Handles::default() }, noise).unwrap();
    let post = PosteriorSpec::new(PriorSpec::uniform(vec![-10.0; 2], vec![10.0; 2]).unwrap(), lik).unwrap();
    let cfg = DreamConfig { n_chains: 5, n_iter: 20_000, seed: 8, ..DreamConfig::default() };
    let ens = dream_sample(&post, cfg).unwrap();
    let s = ens.samples();
    let m = sample_mean(&s);
    let c = sample_covariance(&s).unwrap();
    let gr = gelman_rubin(&ens).unwrap();
    let max_mean = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let cov_err = (0..2)
        .flat_map(|i| (0..2).map(move |j| (i, j)))
        .map(|(i, j)| (c.row(i)[j] - if i == j { 1.0 } else { 0.0 }).abs())
        .fold(0.0f64, f64::max);
    let max_gr = gr.iter().cloned().fold(0.0, f64::max);
    let mut ok = check("Gaussian mean", max_mean <= 0.05, format!("max |mean| {max_mean:.4} ≤ 0.05"), lines);
    ok &= check("Gaussian covariance", cov_err <= 0.05, format!("max |C − I| {cov_err:.4} ≤ 0.05"), lines);
    ok &= check("Gaussian GR", max_gr < 1.01, format!("max PSRF {max_gr:.4} < 1.01"), lines);

    // Quantile-quantile slope over the central 98%.
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut slopes = Vec::new();
    for j in 0..2 {
        let mut col = s.column(j);
        col.sort_by(f64::total_cmp);
        let n = col.len();
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for i in (n / 100)..(n - n / 100) {
            xs.push(normal.inverse_cdf((i as f64 + 0.5) / n as f64));
            ys.push(col[i]);
        }
        let (mx, my) = (mean(&xs), mean(&ys));
        let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = xs.iter().map(|a| (a - mx).powi(2)).sum();
        slopes.push(sxy / sxx);
    }
    ok &= check(
        "QQ slope",
        slopes.iter().all(|s| (0.98..=1.02).contains(s)),
        format!("{:.4}, {:.4} in [0.98, 1.02]", slopes[0], slopes[1]),
        lines,
    );

    let t = Instant::now();
    let problem = Problem::Circuit;
    let post = Fitted::method_a().posterior(problem, problem.default_prior(), problem.noise_spec(0).unwrap()).unwrap();
    let ens = dream_sample(&post, DreamConfig { n_chains: 5, n_iter: 10_000, seed: 8, ..DreamConfig::default() }).unwrap();
    let s = ens.samples();
    let (rp, rd, cap) = (s.column(0), s.column(1), s.column(2));
    let r_pd = pearson(&rp, &rd).unwrap();
    let r_pc = pearson(&rp, &cap).unwrap();
    let r_dc = pearson(&rd, &cap).unwrap();
    let gr = gelman_rubin(&ens).unwrap();
    eprintln!("    RCR posterior: {:.1} s, PSRF {gr:?}", t.elapsed().as_secs_f64());
    ok &= check(
        "RCR correlation signs",
        r_pd < 0.0 && r_pc > 0.0 && r_dc < 0.0,
        format!("ρ(R_p,R_d) {r_pd:.3} < 0, ρ(R_p,C) {r_pc:.3} > 0, ρ(R_d,C) {r_dc:.3} < 0"),
        lines,
    );
    (ok, format!("Gaussian cov err {cov_err:.3}, GR {max_gr:.4}; RCR signs ({r_pd:.2}, {r_pc:.2}, {r_dc:.2})"))
}

/// Borehole DREAM runs: generations per chain. Long chains are needed for
/// 10⁴ nearly independent draws from the thin 8-D posterior shell.
const BOREHOLE_GENERATIONS: usize = 1_000_000;
const KL_SAMPLES: usize = 10_000;

fn borehole_samples(post: &PosteriorSpec, seed: u64) -> (Mat, f64) {
    let cfg = DreamConfig { n_chains: 5, n_iter: BOREHOLE_GENERATIONS, seed, ..DreamConfig::default() };
    let ens = dream_sample(post, cfg).unwrap();
    let gr = gelman_rubin(&ens).unwrap().into_iter().fold(0.0, f64::max);
    let s = ens.samples();
    let idx: Vec<usize> = (0..KL_SAMPLES).map(|i| i * s.rows() / KL_SAMPLES).collect();
    (s.select_rows(&idx), gr)
}

/// Borehole prior sweep.
fn criterion_9(lines: &mut Vec<String>) -> Outcome {
    let problem = Problem::Borehole;
    let data = generate_dataset(problem, &DatasetPlan::uniform(100, 0)).unwrap();
    let noise = problem.noise_spec(0).unwrap();
    let fits: Vec<Fitted> = SURROGATE_METHODS
        .iter()
        .map(|&m| fit_method(problem, m, &data, &FitOptions::default()).unwrap())
        .collect();
    let priors = [
        ("uniform", PriorChoice::Default),
        ("σ_log=0.5", PriorChoice::TruncatedNormal { sigma_log: 0.5 }),
        ("σ_log=0.1", PriorChoice::TruncatedNormal { sigma_log: 0.1 }),
        ("σ_log=0.01", PriorChoice::TruncatedNormal { sigma_log: 0.01 }),
    ];
    let mid = problem.midpoint();
    let mut ok = true;
    let mut worst_kl: f64 = 0.0;
    // traces[method][prior]
    let mut traces = vec![Vec::new(); 6];
    for (p, (label, choice)) in priors.iter().enumerate() {
        let prior = problem.prior(*choice).unwrap();
        let t = Instant::now();
        let post = Fitted::method_a().posterior(problem, prior.clone(), noise.clone()).unwrap();
        let (reference, gr) = borehole_samples(&post, 100 + p as u64);
        traces[0].push(rescaled_trace(&sample_covariance(&reference).unwrap(), &mid).unwrap());
        eprintln!("    {label} A: PSRF {gr:.4} ({:.1} s)", t.elapsed().as_secs_f64());
        for (k, fitted) in fits.iter().enumerate() {
            let t = Instant::now();
            let post = fitted.posterior(problem, prior.clone(), noise.clone()).unwrap();
            let (s, gr) = borehole_samples(&post, 200 + 10 * p as u64 + k as u64);
            let kl = knn_kl_divergence(&s, &reference, 5).unwrap();
            worst_kl = worst_kl.max(kl);
            traces[k + 1].push(rescaled_trace(&sample_covariance(&s).unwrap(), &mid).unwrap());
            eprintln!("    {label} {}: KL {kl:.4}, PSRF {gr:.4} ({:.1} s)", fitted.method, t.elapsed().as_secs_f64());
            ok &= check(&format!("{label} method {}", fitted.method), kl < 0.15, format!("KL {kl:.4} < 0.15"), lines);
        }
    }
    for (k, tr) in traces.iter().enumerate() {
        let method = if k == 0 { Method::A } else { SURROGATE_METHODS[k - 1] };
        let monotone = tr.windows(2).all(|w| w[1] < w[0]);
        let text = tr.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(" > ");
        ok &= check(&format!("method {method} rescaled trace"), monotone, text, lines);
    }
    (ok, format!("worst KL {worst_kl:.4}; A rescaled traces {:?}", traces[0].iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>()))
}

/// Oracle surrogates reproduce the Method-A grid.
fn criterion_10(lines: &mut Vec<String>) -> Outcome {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for problem in [Problem::Analytical2d, Problem::Michalewicz] {
        let hf = problem.model(Fidelity::High);
        let lf = problem.model(Fidelity::Low);
        let (h2, l2) = (hf.clone(), lf.clone());
        let delta: ModelRef = fn_model(2, 1, move |x| vec![h2.eval(x).unwrap()[0] - l2.eval(x).unwrap()[0]]);
        let prior = problem.default_prior();
        let noise = problem.noise_spec(0).unwrap();
        let grid_for = |method: Method, surrogate: Option<ModelRef>| {
            let handles = Handles { hf: Some(hf.clone()), lf: Some(lf.clone()), surrogate, flow: None, alpha: None };
            let lik = LikelihoodSpec::new(method, handles, noise.clone()).unwrap();
            grid_posterior(&PosteriorSpec::new(prior.clone(), lik).unwrap(), &GRID).unwrap()
        };
        let a = grid_for(Method::A, None);
        for (method, s) in [(Method::B, &hf), (Method::C, &delta), (Method::D, &hf), (Method::E, &delta)] {
            let g = grid_for(method, Some(s.clone()));
            let err = a
                .density()
                .iter()
                .zip(g.density())
                .map(|(x, y)| (x - y).abs() / x.abs().max(1.0))
                .fold(0.0, f64::max);
            worst = worst.max(err);
            ok &= check(&format!("{problem} method {method}"), err <= 1e-12, format!("max pointwise gap {err:.1e}"), lines);
        }
    }
    (ok, format!("max pointwise gap {worst:.1e}"))
}

type Criterion = fn(&mut Vec<String>) -> Outcome;

fn main() {
    let criteria: [(usize, &str, Criterion); 10] = [
        (1, "fidelity correlations", criterion_1),
        (2, "analytical N=100 Hellinger", criterion_2),
        (3, "analytical N=500 Hellinger", criterion_3),
        (4, "noisy-copy flow grid", criterion_4),
        (5, "α_opt identities", criterion_5),
        (6, "gradient and flow suites", criterion_6),
        (7, "Windkessel identities", criterion_7),
        (8, "DREAM validation", criterion_8),
        (9, "borehole prior sweep", criterion_9),
        (10, "oracle substitution", criterion_10),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    let mut summary = Vec::new();
    for (n, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let t = Instant::now();
        eprintln!("criterion {n} ({name}) running");
        let mut lines = Vec::new();
        let (ok, detail) = run(&mut lines);
        let status = if ok { "PASS" } else { "FAIL" };
        let line = format!("{status} criterion {n} ({name}): {detail} [{:.1} s]", t.elapsed().as_secs_f64());
        println!("{line}");
        for l in &lines {
            println!("{l}");
        }
        summary.push(line);
        if !ok {
            failed.push(n);
        }
    }
    println!("\nacceptance summary");
    for l in &summary {
        println!("{l}");
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
