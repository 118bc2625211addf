use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use mfbayes::bayes::{CountingModel, LikelihoodSpec, Method, ModelRef, PosteriorSpec};
use mfbayes::density::FlowModel;
use mfbayes::inference::{
    diagonal, grid_posterior, hellinger, knn_kl_divergence, rescaled_trace, sample_covariance, sample_mean,
    sample_to_convergence, trace, DreamConfig, PosteriorGrid,
};
use mfbayes::models::Fidelity;
use mfbayes::pipeline::{fit_method, generate_dataset, DatasetPlan, FitOptions, Fitted, Problem, RationaleConfig, Surrogate};
use mfbayes::surrogates::{Dataset, Split};
use mfbayes::{Error, Mat};

use crate::config::ExperimentConfig;
use crate::manifest::{collect_manifests, FitInfo, PosteriorInfo, RunManifest, MANIFEST_FILE};

const DATASET_FILE: &str = "dataset.csv";
const SPLIT_FILE: &str = "split.txt";
const SURROGATE_FILE: &str = "surrogate.ckpt";
const FLOW_FILE: &str = "flow.ckpt";

fn problem_of(cfg: &ExperimentConfig) -> Result<Problem> {
    cfg.problem.problem().ok_or_else(|| {
        Error::Config("the rationale study has no dataset or fit stage; run `posterior` directly".into()).into()
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn generate(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let problem = problem_of(cfg)?;
    let mut written = Vec::new();
    for &seed in &cfg.seeds {
        let plan = DatasetPlan {
            n: cfg.n,
            n_train: cfg.n_train,
            scheme: cfg.scheme,
            seed,
        };
        let data = generate_dataset(problem, &plan)?;
        let dir = cfg.seed_dir(seed);
        create_dir(&dir)?;
        let path = dir.join(DATASET_FILE);
        data.write_csv(&path)?;
        std::fs::write(dir.join(SPLIT_FILE), data.split.to_text())?;
        info!(
            "{problem} seed {seed}: {} train / {} test rows → {}",
            data.split.train.len(),
            data.split.test.len(),
            path.display()
        );
        written.push(path);
    }
    Ok(written)
}

fn load_dataset(cfg: &ExperimentConfig, seed: u64) -> Result<Dataset<f64>> {
    let dir = cfg.seed_dir(seed);
    let path = dir.join(DATASET_FILE);
    if !path.exists() {
        return Err(Error::Config(format!("dataset {} is missing; run `generate` first", path.display())).into());
    }
    let split = Split::parse(&std::fs::read_to_string(dir.join(SPLIT_FILE))?)?;
    Ok(Dataset::from_csv(&std::fs::read_to_string(&path)?, split, cfg.scheme)?)
}

pub fn fit(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let problem = problem_of(cfg)?;
    let mut manifests = Vec::new();
    for &seed in &cfg.seeds {
        let data = load_dataset(cfg, seed)?;
        for &method in &cfg.methods {
            let dir = cfg.method_dir(seed, method);
            create_dir(&dir)?;
            let opts = FitOptions {
                table: cfg.table,
                seed,
                epochs: cfg.epochs,
                flow_epochs: cfg.flow_epochs,
            };
            let t = Instant::now();
            let fitted = fit_method(problem, method, &data, &opts)
                .with_context(|| format!("fitting method {method} for {problem}, seed {seed}"))?;
            let elapsed = t.elapsed().as_secs_f64();
            let mut m = RunManifest::new(cfg.hash(), problem.as_str(), cfg.prior, method, seed);
            m.timings.fit_s = Some(elapsed);
            if let Some(s) = &fitted.surrogate {
                m.write_artifact(&dir, SURROGATE_FILE, s.to_checkpoint(None).as_bytes())?;
            }
            if let Some(f) = &fitted.flow {
                m.write_artifact(&dir, FLOW_FILE, f.to_checkpoint(None).as_bytes())?;
            }
            m.fit = Some(FitInfo {
                surrogate_kind: fitted.surrogate.as_ref().map(|s| s.kind().to_string()),
                train_mse: fitted.surrogate.as_ref().map(Surrogate::train_mse),
                test_mse: fitted.surrogate.as_ref().and_then(Surrogate::test_mse),
                alpha: fitted.alpha.clone(),
                flow_test_log_likelihood: fitted.flow.as_ref().and_then(|f| f.report().test_log_likelihood),
            });
            info!("{problem} seed {seed} method {method}: fit in {elapsed:.2} s");
            manifests.push(m.save(&dir)?);
        }
    }
    Ok(manifests)
}

fn load_fitted(dir: &Path, method: Method) -> Result<(Fitted, RunManifest)> {
    let mpath = dir.join(MANIFEST_FILE);
    if !mpath.exists() {
        if method == Method::A {
            return Ok((Fitted::method_a(), RunManifest::new(String::new(), "", Default::default(), method, 0)));
        }
        return Err(Error::Config(format!("{} is missing; run `fit` first", mpath.display())).into());
    }
    let manifest = RunManifest::load(&mpath)?;
    let info = manifest.fit.clone();
    let surrogate = match info.as_ref().and_then(|i| i.surrogate_kind.clone()) {
        Some(kind) => Some(Surrogate::from_checkpoint(&kind, &std::fs::read_to_string(dir.join(SURROGATE_FILE))?)?),
        None => None,
    };
    let flow = if dir.join(FLOW_FILE).exists() {
        Some(Arc::new(FlowModel::from_checkpoint(&std::fs::read_to_string(dir.join(FLOW_FILE))?)?))
    } else {
        None
    };
    let fitted = Fitted {
        method,
        surrogate,
        flow,
        alpha: info.and_then(|i| i.alpha),
    };
    Ok((fitted, manifest))
}

fn grid_csv(grid: &PosteriorGrid, names: &[String]) -> String {
    let mut out = names.join(",");
    out.push_str(",log_posterior,density\n");
    for k in 0..grid.len() {
        for v in grid.node(k) {
            write!(out, "{v:e},").unwrap();
        }
        writeln!(out, "{:e},{:e}", grid.log_values()[k], grid.density()[k]).unwrap();
    }
    out
}

fn thin(samples: &Mat, target: usize) -> Mat {
    if samples.rows() <= target {
        return samples.clone();
    }
    let idx: Vec<usize> = (0..target).map(|i| i * samples.rows() / target).collect();
    samples.select_rows(&idx)
}

/// Posterior with a call-counting high-fidelity handle.
fn counted_posterior(
    problem: Problem,
    fitted: &Fitted,
    cfg: &ExperimentConfig,
) -> Result<(PosteriorSpec, Arc<CountingModel>)> {
    let hf = Arc::new(CountingModel::new(problem.model(Fidelity::High)));
    let handles = fitted.handles(Some(hf.clone() as ModelRef), Some(problem.model(Fidelity::Low)));
    let lik = LikelihoodSpec::new(fitted.method, handles, problem.noise_spec(cfg.observation_seed)?)?;
    Ok((PosteriorSpec::new(problem.prior(cfg.prior)?, lik)?, hf))
}

fn covariance_summary(problem: Problem, cov: &Mat, info: &mut PosteriorInfo) -> Result<()> {
    match problem {
        Problem::Borehole => info.rescaled_trace = Some(rescaled_trace(cov, &problem.midpoint())?),
        Problem::Circuit => info.diagonal = Some(diagonal(cov)),
        _ => info.trace = Some(trace(cov)),
    }
    Ok(())
}

pub fn posterior(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let Some(problem) = cfg.problem.problem() else {
        return rationale(cfg);
    };
    let names = problem.input_names();
    let mut manifests = Vec::new();
    for &seed in &cfg.seeds {
        let mut reference_grid: Option<PosteriorGrid> = None;
        let mut reference_samples: Option<Mat> = None;
        if problem.uses_grid() {
            let (post, _) = counted_posterior(problem, &Fitted::method_a(), cfg)?;
            reference_grid = Some(grid_posterior(&post, &vec![cfg.grid_res; problem.input_dim()])?);
        }
        // Method A first so sampled runs can be compared against it.
        let mut methods = cfg.methods.clone();
        methods.sort();
        for method in methods {
            let dir = cfg.method_dir(seed, method);
            create_dir(&dir)?;
            let (fitted, mut manifest) = load_fitted(&dir, method)?;
            manifest.config_hash = cfg.hash();
            manifest.problem = problem.as_str().to_string();
            manifest.prior = cfg.prior;
            manifest.seed = seed;
            let (post, hf) = counted_posterior(problem, &fitted, cfg)?;
            let t = Instant::now();
            let mut info = PosteriorInfo::default();
            if let Some(reference) = &reference_grid {
                let grid = grid_posterior(&post, &vec![cfg.grid_res; problem.input_dim()])?;
                info.kind = "grid".into();
                info.hellinger = Some(hellinger(reference, &grid)?);
                info.mean = grid.mean();
                covariance_summary(problem, &grid.covariance(), &mut info)?;
                manifest.timings.posterior_s = Some(t.elapsed().as_secs_f64());
                manifest.write_artifact(&dir, "grid.csv", grid_csv(&grid, &names).as_bytes())?;
            } else {
                let dream = DreamConfig {
                    n_chains: cfg.chains,
                    n_iter: cfg.iters,
                    seed: seed.wrapping_mul(1000).wrapping_add(method as u64),
                    ..DreamConfig::default()
                };
                let run = sample_to_convergence(&post, dream, cfg.gr_threshold, cfg.iters / 2, cfg.max_iters)?;
                manifest.timings.posterior_s = Some(t.elapsed().as_secs_f64());
                if !run.converged {
                    warn!("method {method} seed {seed}: Gelman–Rubin {:?} above {}", run.psrf, cfg.gr_threshold);
                }
                let samples = thin(&run.ensemble.samples(), cfg.kl_samples);
                info.kind = "samples".into();
                info.psrf = Some(run.psrf.clone());
                info.converged = Some(run.converged);
                info.generations = Some(run.ensemble.generations());
                info.mean = sample_mean(&samples);
                covariance_summary(problem, &sample_covariance(&samples)?, &mut info)?;
                if method == Method::A {
                    info.kl = Some(0.0);
                    reference_samples = Some(samples.clone());
                } else if let Some(reference) = &reference_samples {
                    info.kl = Some(knn_kl_divergence(&samples, reference, cfg.kl_k)?);
                }
                manifest.write_artifact(&dir, "samples.csv", run.ensemble.samples_csv(&names).as_bytes())?;
            }
            info.hf_calls = hf.calls();
            if method != Method::A && info.hf_calls != 0 {
                bail!("method {method} evaluated the high-fidelity model {} times", info.hf_calls);
            }
            info!(
                "{problem} seed {seed} method {method}: H={:?} KL={:?} in {:.2} s",
                info.hellinger,
                info.kl,
                manifest.timings.posterior_s.unwrap_or(0.0)
            );
            manifest.posterior = Some(info);
            manifests.push(manifest.save(&dir)?);
        }
    }
    Ok(manifests)
}

/// The noisy-copy study: one flow and one posterior grid per
/// `(σ_model, σ_noise)` pair, plus the exact reference where it exists.
fn rationale(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    const LEVELS: [f64; 4] = [0.0, 0.125, 0.25, 0.5];
    let mut rc = RationaleConfig::default();
    if let Some(e) = cfg.epochs.or(cfg.flow_epochs) {
        rc.train.epochs = e;
    }
    let names = vec!["x1".to_string(), "x2".to_string()];
    let res = [cfg.grid_res, cfg.grid_res];
    let mut manifests = Vec::new();
    for &seed in &cfg.seeds {
        let dir = cfg.seed_dir(seed);
        create_dir(&dir)?;
        let mut m = RunManifest::new(cfg.hash(), "rationale", cfg.prior, Method::F, seed);
        let mut table = String::from("sigma_model,sigma_noise,target_variance,flow_variance,hellinger_vs_exact\n");
        let t = Instant::now();
        for sm in LEVELS {
            for sn in LEVELS {
                let flow = Arc::new(rc.train_flow(sm, sn, seed)?);
                let draws = flow.sample(20_000, seed ^ 0x77)?;
                let var = mfbayes::stats::variance(draws.as_slice())?;
                let post = rc.method_f_posterior(flow, sm, seed)?;
                let tag = format!("sm{sm}_sn{sn}");
                let h = match grid_posterior(&post, &res) {
                    Ok(grid) => {
                        m.write_artifact(&dir, &format!("grid_{tag}.csv"), grid_csv(&grid, &names).as_bytes())?;
                        if sn > 0.0 {
                            let exact = grid_posterior(&rc.method_a_posterior(sn)?, &res)?;
                            Some(hellinger(&exact, &grid)?)
                        } else {
                            None
                        }
                    }
                    Err(e) if e.is_numerical() => {
                        warn!("σ_model={sm}, σ_noise={sn}: {e}");
                        None
                    }
                    Err(e) => return Err(e.into()),
                };
                let h_text = h.map(|v| format!("{v:e}")).unwrap_or_default();
                writeln!(table, "{sm},{sn},{:e},{var:e},{h_text}", sm * sm + sn * sn).unwrap();
                info!("σ_model={sm} σ_noise={sn}: flow variance {var:.5}, H={h:?}");
            }
        }
        m.timings.posterior_s = Some(t.elapsed().as_secs_f64());
        m.write_artifact(&dir, "rationale.csv", table.as_bytes())?;
        m.posterior = Some(PosteriorInfo {
            kind: "grid".into(),
            ..PosteriorInfo::default()
        });
        manifests.push(m.save(&dir)?);
    }
    Ok(manifests)
}

fn mean_std(v: &[f64]) -> (f64, Option<f64>) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s = (v.len() > 1).then(|| (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (m, s)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6e}")).unwrap_or_default()
}

/// Aggregates manifests into a delimited table: one row per method with
/// mean ± std of the accuracy metric, the covariance summary and timings.
pub fn report(paths: &[PathBuf]) -> Result<String> {
    let files = collect_manifests(paths)?;
    if files.is_empty() {
        return Err(Error::Config("no manifests found".into()).into());
    }
    let manifests: Vec<RunManifest> = files.iter().map(|p| RunManifest::load(p)).collect::<Result<_>>()?;
    let problem = manifests[0].problem.clone();
    if let Some(other) = manifests.iter().find(|m| m.problem != problem || m.prior != manifests[0].prior) {
        return Err(Error::Config(format!(
            "cannot aggregate {problem} ({:?}) with {} ({:?})",
            manifests[0].prior, other.problem, other.prior
        ))
        .into());
    }
    let mut by_method: BTreeMap<Method, Vec<&RunManifest>> = BTreeMap::new();
    for m in &manifests {
        by_method.entry(m.method).or_default().push(m);
    }
    let (metric, cov) = match problem.as_str() {
        "borehole" => ("kl", "rescaled_trace"),
        "circuit" => ("kl", "diagonal"),
        _ => ("hellinger", "trace"),
    };
    let mut out = format!(
        "method,runs,{metric}_mean,{metric}_std,{cov}_mean,{cov}_std,fit_s_mean,fit_s_std,posterior_s_mean,posterior_s_std\n"
    );
    for (method, runs) in by_method {
        let metric_vals: Vec<f64> = runs
            .iter()
            .filter_map(|m| m.posterior.as_ref())
            .filter_map(|p| if metric == "kl" { p.kl } else { p.hellinger })
            .collect();
        let col = |vals: &[f64]| -> (String, String) {
            if vals.is_empty() {
                return (String::new(), String::new());
            }
            let (m, s) = mean_std(vals);
            (fmt_opt(Some(m)), fmt_opt(s))
        };
        let (mm, ms) = col(&metric_vals);
        let (cm, cs) = if cov == "diagonal" {
            let diags: Vec<&Vec<f64>> =
                runs.iter().filter_map(|m| m.posterior.as_ref()?.diagonal.as_ref()).collect();
            if diags.is_empty() {
                (String::new(), String::new())
            } else {
                let d = diags[0].len();
                let cols: Vec<(String, String)> =
                    (0..d).map(|j| col(&diags.iter().map(|v| v[j]).collect::<Vec<_>>())).collect();
                (
                    cols.iter().map(|c| c.0.clone()).collect::<Vec<_>>().join(";"),
                    cols.iter().map(|c| c.1.clone()).collect::<Vec<_>>().join(";"),
                )
            }
        } else {
            let vals: Vec<f64> = runs
                .iter()
                .filter_map(|m| m.posterior.as_ref())
                .filter_map(|p| if cov == "trace" { p.trace } else { p.rescaled_trace })
                .collect();
            col(&vals)
        };
        let fit: Vec<f64> = runs.iter().filter_map(|m| m.timings.fit_s).collect();
        let post: Vec<f64> = runs.iter().filter_map(|m| m.timings.posterior_s).collect();
        let (fm, fs) = col(&fit);
        let (pm, ps) = col(&post);
        writeln!(out, "{method},{},{mm},{ms},{cm},{cs},{fm},{fs},{pm},{ps}", runs.len()).unwrap();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Study;

    #[test]
    fn thinning_keeps_evenly_spaced_rows() {
        let m = Mat::from_vec(10, 1, (0..10).map(f64::from).collect()).unwrap();
        assert_eq!(thin(&m, 5).as_slice(), &[0.0, 2.0, 4.0, 6.0, 8.0]);
        assert_eq!(thin(&m, 20).rows(), 10);
    }

    #[test]
    fn mean_std_single_value_has_no_std() {
        assert_eq!(mean_std(&[2.0]), (2.0, None));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s.unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn study_rejects_fit_stage() {
        let cfg = ExperimentConfig {
            problem: Study::Rationale,
            ..ExperimentConfig::default()
        };
        let err = generate(&cfg).unwrap_err();
        assert!(matches!(err.downcast_ref::<Error>(), Some(Error::Config(_))));
    }
}
