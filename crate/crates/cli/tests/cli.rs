use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mfbayes(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfbayes"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) {
    let o = mfbayes(args, out);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
}

fn manifest(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn report(paths: &[&Path]) -> String {
    let o = Command::new(env!("CARGO_BIN_EXE_mfbayes"))
        .arg("report")
        .args(paths)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

#[test]
fn generate_writes_split_dataset_deterministically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["generate", "--problem", "analytical2d", "--n", "100", "--seed", "3"];
    ok(&args, a.path());
    ok(&args, b.path());
    let read = |d: &Path, f: &str| std::fs::read(d.join("seed_3").join(f)).unwrap();
    let csv = String::from_utf8(read(a.path(), "dataset.csv")).unwrap();
    assert_eq!(csv.lines().count(), 101);
    let split = String::from_utf8(read(a.path(), "split.txt")).unwrap();
    let train_line = split.lines().find(|l| l.starts_with("train")).unwrap();
    assert_eq!(train_line.split_whitespace().count() - 1, 75);
    assert_eq!(read(a.path(), "dataset.csv"), read(b.path(), "dataset.csv"));
    assert_eq!(read(a.path(), "split.txt"), read(b.path(), "split.txt"));
}

#[test]
fn grid_pipeline_is_reproducible_and_surrogates_skip_hf() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["--problem", "analytical2d", "--method", "A,B,C,F", "--epochs", "30", "--grid-res", "25"];
    let stage = |verb: &'static str| [&[verb][..], &common[..]].concat();
    ok(&stage("generate"), dir.path());
    ok(&stage("fit"), dir.path());
    ok(&stage("posterior"), dir.path());
    let mpath = |m: &str| dir.path().join(format!("seed_0/method_{m}/manifest.json"));
    let mut hashes = Vec::new();
    for m in ["A", "B", "C", "F"] {
        let v = manifest(&mpath(m));
        let post = &v["posterior"];
        assert_eq!(post["kind"], "grid");
        let h = post["hellinger"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&h));
        if m == "A" {
            assert!(h < 1e-12);
            assert!(post["hf_calls"].as_u64().unwrap() > 0);
        } else {
            assert_eq!(post["hf_calls"], 0, "method {m} called the high-fidelity model");
        }
        assert!(v["artifacts"]["grid.csv"].is_string());
        hashes.push(v["content_hash"].clone());
    }
    assert!(dir.path().join("seed_0/method_F/flow.ckpt").exists());
    assert_eq!(manifest(&mpath("F"))["fit"]["alpha"].as_array().unwrap().len(), 1);

    // Rerunning fit and posterior reproduces every result and artifact.
    ok(&stage("fit"), dir.path());
    ok(&stage("posterior"), dir.path());
    for (m, h) in ["A", "B", "C", "F"].iter().zip(&hashes) {
        assert_eq!(&manifest(&mpath(m))["content_hash"], h, "method {m}");
    }

    let table = report(&[dir.path()]);
    let mut lines = table.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&header[..6], ["method", "runs", "hellinger_mean", "hellinger_std", "trace_mean", "trace_std"]);
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][0], "A");
    assert_eq!(rows[0][1], "1");
    // One run per method: no spread to report.
    assert_eq!(rows[1][3], "");
    assert!(rows[1][2].parse::<f64>().is_ok());
}

#[test]
fn borehole_report_has_rescaled_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("borehole.toml");
    std::fs::write(
        &cfg,
        r#"
problem = "borehole"
methods = ["A", "C"]
epochs = 20
iters = 400
max_iters = 400
kl_samples = 500
"#,
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    for verb in ["generate", "fit", "posterior"] {
        ok(&[verb, "--config", c], dir.path());
    }
    let v = manifest(&dir.path().join("seed_0/method_C/manifest.json"));
    let post = &v["posterior"];
    assert_eq!(post["kind"], "samples");
    assert!(post["rescaled_trace"].as_f64().unwrap() > 0.0);
    assert!(post["kl"].as_f64().unwrap().is_finite());
    assert_eq!(post["hf_calls"], 0);
    assert_eq!(post["psrf"].as_array().unwrap().len(), 8);
    let samples = std::fs::read_to_string(dir.path().join("seed_0/method_C/samples.csv")).unwrap();
    assert!(samples.starts_with("chain,iteration,rw,"));

    let table = report(&[dir.path()]);
    let header = table.lines().next().unwrap();
    assert!(header.contains("kl_mean") && header.contains("rescaled_trace_mean"), "{header}");
}

#[test]
fn configuration_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "problem = \"analytical2d\"\nunknown_key = 3\n").unwrap();
    let o = mfbayes(&["generate", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let o = mfbayes(&["generate", "--problem", "nonexistent"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    // Fitting before generating is a usage error too.
    let o = mfbayes(&["fit", "--problem", "michalewicz", "--method", "B"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let tn = dir.path().join("tn.toml");
    std::fs::write(&tn, "problem = \"circuit\"\nprior = { kind = \"truncated_normal\", sigma_log = 0.1 }\n").unwrap();
    let o = mfbayes(&["generate", "--config", tn.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn report_refuses_mixed_problems() {
    let dir = tempfile::tempdir().unwrap();
    for p in ["analytical2d", "michalewicz"] {
        let out = dir.path().join(p);
        for verb in ["generate", "posterior"] {
            ok(&[verb, "--problem", p, "--method", "A", "--grid-res", "10"], &out);
        }
    }
    let o = Command::new(env!("CARGO_BIN_EXE_mfbayes")).arg("report").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}
