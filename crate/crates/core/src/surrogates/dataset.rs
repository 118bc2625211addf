use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::checkpoint::format_f64;
use crate::scalar::Scalar;

pub const TRAIN_FRACTION: f64 = 0.75;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingScheme {
    Uniform,
    LatinHypercube,
}

/// Disjoint, exhaustive partition of row indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Random partition with `round(0.75 n)` training rows.
    pub fn random(n: usize, seed: u64) -> Self {
        let n_train = (TRAIN_FRACTION * n as f64).round() as usize;
        Self::random_with_train_count(n, n_train, seed)
    }

    pub fn random_with_train_count(n: usize, n_train: usize, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let test = idx.split_off(n_train.min(n));
        let mut train = idx;
        train.sort_unstable();
        let mut test = test;
        test.sort_unstable();
        Self { train, test }
    }

    /// First `n_train` rows train, the rest test.
    pub fn leading(n: usize, n_train: usize) -> Self {
        Self {
            train: (0..n_train.min(n)).collect(),
            test: (n_train.min(n)..n).collect(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.test) {
            if i >= n || seen[i] {
                return Err(Error::Config(format!(
                    "split index {i} is out of range or repeated (n = {n})"
                )));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Config("split does not cover every row".into()));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
        format!("train {}\ntest {}\n", join(&self.train), join(&self.test))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut train = None;
        let mut test = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let mut tokens = line.split_whitespace();
            let key = tokens.next().unwrap_or_default();
            let values = tokens
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| Error::Parse(format!("bad split index `{t}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            match key {
                "train" => train = Some(values),
                "test" => test = Some(values),
                other => return Err(Error::Parse(format!("unknown split key `{other}`"))),
            }
        }
        Ok(Self {
            train: train.ok_or_else(|| Error::Parse("split file has no train line".into()))?,
            test: test.unwrap_or_default(),
        })
    }
}

/// Paired inputs and high/low-fidelity outputs.
#[derive(Clone, Debug)]
pub struct Dataset<T> {
    pub input_names: Vec<String>,
    pub inputs: Matrix<T>,
    pub hf_outputs: Matrix<T>,
    pub lf_outputs: Option<Matrix<T>>,
    pub split: Split,
    pub scheme: SamplingScheme,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        inputs: Matrix<T>,
        hf_outputs: Matrix<T>,
        lf_outputs: Option<Matrix<T>>,
        split: Split,
        scheme: SamplingScheme,
    ) -> Result<Self> {
        let n = inputs.rows();
        if hf_outputs.rows() != n {
            return Err(Error::shape("Dataset::new hf rows", n, hf_outputs.rows()));
        }
        if let Some(lf) = &lf_outputs {
            if lf.shape() != hf_outputs.shape() {
                return Err(Error::shape(
                    "Dataset::new lf shape",
                    format!("{:?}", hf_outputs.shape()),
                    format!("{:?}", lf.shape()),
                ));
            }
        }
        split.validate(n)?;
        let input_names = (1..=inputs.cols()).map(|i| format!("x_{i}")).collect();
        Ok(Self {
            input_names,
            inputs,
            hf_outputs,
            lf_outputs,
            split,
            scheme,
        })
    }

    pub fn with_input_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.inputs.cols() {
            return Err(Error::shape(
                "Dataset::with_input_names",
                self.inputs.cols(),
                names.len(),
            ));
        }
        self.input_names = names;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.rows() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.hf_outputs.cols()
    }

    /// `hf − lf`, the discrepancy labels.
    pub fn discrepancy(&self) -> Result<Matrix<T>> {
        let lf = self.lf_outputs.as_ref().ok_or_else(|| {
            Error::Config("discrepancy target requires low-fidelity outputs".into())
        })?;
        Ok(self.hf_outputs.zip_map(lf, |h, l| h - l))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let m = self.output_dim();
        let mut header: Vec<String> = self.input_names.clone();
        header.extend((1..=m).map(|j| format!("hf_{j}")));
        if self.lf_outputs.is_some() {
            header.extend((1..=m).map(|j| format!("lf_{j}")));
        }
        let mut out = header.join(",");
        out.push('\n');
        for i in 0..self.len() {
            let mut fields: Vec<String> = self
                .inputs
                .row(i)
                .iter()
                .map(|v| format_f64(v.as_f64()))
                .collect();
            fields.extend(
                self.hf_outputs
                    .row(i)
                    .iter()
                    .map(|v| format_f64(v.as_f64())),
            );
            if let Some(lf) = &self.lf_outputs {
                fields.extend(lf.row(i).iter().map(|v| format_f64(v.as_f64())));
            }
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }

    /// Parses the delimited format written by [`Dataset::to_csv`]; the split
    /// comes from its sidecar file.
    pub fn from_csv(text: &str, split: Split, scheme: SamplingScheme) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::Parse("empty dataset file".into()))?
            .split(',')
            .map(str::trim)
            .collect();
        let hf_cols: Vec<usize> = (0..header.len())
            .filter(|&i| header[i].starts_with("hf_"))
            .collect();
        let lf_cols: Vec<usize> = (0..header.len())
            .filter(|&i| header[i].starts_with("lf_"))
            .collect();
        let in_cols: Vec<usize> = (0..header.len())
            .filter(|i| !hf_cols.contains(i) && !lf_cols.contains(i))
            .collect();
        if hf_cols.is_empty() {
            return Err(Error::Parse("dataset header has no hf_ columns".into()));
        }
        if !lf_cols.is_empty() && lf_cols.len() != hf_cols.len() {
            return Err(Error::Parse("lf_ and hf_ column counts differ".into()));
        }
        let (mut x, mut hf, mut lf) = (Vec::new(), Vec::new(), Vec::new());
        let mut rows = 0;
        for (n, line) in lines.enumerate() {
            let values = line
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map(T::of)
                        .map_err(|_| Error::Parse(format!("row {}: bad number `{t}`", n + 1)))
                })
                .collect::<Result<Vec<T>>>()?;
            if values.len() != header.len() {
                return Err(Error::Parse(format!(
                    "row {} has {} fields",
                    n + 1,
                    values.len()
                )));
            }
            x.extend(in_cols.iter().map(|&i| values[i]));
            hf.extend(hf_cols.iter().map(|&i| values[i]));
            lf.extend(lf_cols.iter().map(|&i| values[i]));
            rows += 1;
        }
        let lf = if lf_cols.is_empty() {
            None
        } else {
            Some(Matrix::from_vec(rows, lf_cols.len(), lf)?)
        };
        let names = in_cols.iter().map(|&i| header[i].to_string()).collect();
        Self::new(
            Matrix::from_vec(rows, in_cols.len(), x)?,
            Matrix::from_vec(rows, hf_cols.len(), hf)?,
            lf,
            split,
            scheme,
        )?
        .with_input_names(names)
    }
}
