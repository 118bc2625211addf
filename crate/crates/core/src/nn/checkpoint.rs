//! Line-oriented text format for trained models.
//!
//! ```text
//! mfbayes-checkpoint 1
//! [section]
//! key = value value ...
//! ```
//!
//! Floats are written with 17 significant digits so `f64` values survive a
//! round trip bit for bit. Matrices are flattened row-major.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

const MAGIC: &str = "mfbayes-checkpoint 1";

pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Default)]
pub struct CheckpointWriter {
    out: String,
}

impl CheckpointWriter {
    pub fn new() -> Self {
        Self {
            out: format!("{MAGIC}\n"),
        }
    }

    pub fn section(&mut self, name: &str) -> &mut Self {
        let _ = writeln!(self.out, "[{name}]");
        self
    }

    pub fn text(&mut self, key: &str, value: &str) -> &mut Self {
        let _ = writeln!(self.out, "{key} = {value}");
        self
    }

    pub fn int(&mut self, key: &str, value: u64) -> &mut Self {
        self.text(key, &value.to_string())
    }

    pub fn ints(&mut self, key: &str, values: &[usize]) -> &mut Self {
        let joined: Vec<String> = values.iter().map(usize::to_string).collect();
        self.text(key, &joined.join(" "))
    }

    pub fn float(&mut self, key: &str, value: f64) -> &mut Self {
        self.text(key, &format_f64(value))
    }

    pub fn floats<T: Scalar>(&mut self, key: &str, values: &[T]) -> &mut Self {
        let joined: Vec<String> = values.iter().map(|v| format_f64(v.as_f64())).collect();
        self.text(key, &joined.join(" "))
    }

    pub fn matrix<T: Scalar>(&mut self, key: &str, m: &Matrix<T>) -> &mut Self {
        self.ints(&format!("{key}.shape"), &[m.rows(), m.cols()]);
        self.floats(key, m.as_slice())
    }

    pub fn finish(self) -> String {
        self.out
    }
}

#[derive(Debug, Clone)]
pub struct Section {
    pub name: String,
    fields: Vec<(String, String)>,
}

impl Section {
    pub fn get(&self, key: &str) -> Result<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Parse(format!("[{}] is missing `{key}`", self.name)))
    }

    pub fn has(&self, key: &str) -> bool {
        self.fields.iter().any(|(k, _)| k == key)
    }

    pub fn int(&self, key: &str) -> Result<u64> {
        let v = self.get(key)?;
        v.parse()
            .map_err(|_| Error::Parse(format!("[{}] {key}: `{v}` is not an integer", self.name)))
    }

    pub fn ints(&self, key: &str) -> Result<Vec<usize>> {
        self.get(key)?
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::Parse(format!("[{}] {key}: bad integer `{t}`", self.name)))
            })
            .collect()
    }

    pub fn float(&self, key: &str) -> Result<f64> {
        let v = self.get(key)?;
        v.parse()
            .map_err(|_| Error::Parse(format!("[{}] {key}: `{v}` is not a float", self.name)))
    }

    pub fn floats<T: Scalar>(&self, key: &str) -> Result<Vec<T>> {
        self.get(key)?
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map(T::of)
                    .map_err(|_| Error::Parse(format!("[{}] {key}: bad float `{t}`", self.name)))
            })
            .collect()
    }

    pub fn matrix<T: Scalar>(&self, key: &str) -> Result<Matrix<T>> {
        let shape = self.ints(&format!("{key}.shape"))?;
        if shape.len() != 2 {
            return Err(Error::Parse(format!(
                "[{}] {key}.shape needs two entries",
                self.name
            )));
        }
        Matrix::from_vec(shape[0], shape[1], self.floats(key)?)
    }
}

pub fn parse(text: &str) -> Result<Vec<Section>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(l) if l.trim() == MAGIC => {}
        other => {
            return Err(Error::Parse(format!(
                "not a checkpoint (header {:?})",
                other.unwrap_or("")
            )))
        }
    }
    let mut sections: Vec<Section> = Vec::new();
    for (n, raw) in lines.enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            sections.push(Section {
                name: name.to_string(),
                fields: Vec::new(),
            });
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", n + 2)))?;
        let section = sections
            .last_mut()
            .ok_or_else(|| Error::Parse(format!("line {}: field outside a section", n + 2)))?;
        section
            .fields
            .push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(sections)
}

pub fn find<'a>(sections: &'a [Section], name: &str) -> Result<&'a Section> {
    sections
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::Parse(format!("checkpoint has no [{name}] section")))
}

/// Writes a network's architecture and parameters under `prefix.*` keys.
pub fn write_mlp<T: Scalar>(w: &mut CheckpointWriter, prefix: &str, net: &super::MlpNet<T>) {
    w.ints(&format!("{prefix}.layer_sizes"), net.layer_sizes());
    for (k, (wm, b)) in net.weights().iter().zip(net.biases()).enumerate() {
        w.floats(&format!("{prefix}.w{k}"), wm.as_slice());
        w.floats(&format!("{prefix}.b{k}"), b.as_slice());
    }
}

pub fn read_mlp<T: Scalar>(s: &Section, prefix: &str) -> Result<super::MlpNet<T>> {
    let sizes = s.ints(&format!("{prefix}.layer_sizes"))?;
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for (k, pair) in sizes.windows(2).enumerate() {
        weights.push(Matrix::from_vec(
            pair[0],
            pair[1],
            s.floats(&format!("{prefix}.w{k}"))?,
        )?);
        biases.push(Matrix::from_vec(
            1,
            pair[1],
            s.floats(&format!("{prefix}.b{k}"))?,
        )?);
    }
    super::MlpNet::from_parts(sizes, weights, biases)
}

pub fn write_standardizer<T: Scalar>(
    w: &mut CheckpointWriter,
    prefix: &str,
    s: &super::Standardizer<T>,
) {
    w.floats(&format!("{prefix}.mean"), &s.mean);
    w.floats(&format!("{prefix}.std"), &s.std);
}

pub fn read_standardizer<T: Scalar>(s: &Section, prefix: &str) -> Result<super::Standardizer<T>> {
    let mean = s.floats(&format!("{prefix}.mean"))?;
    let std = s.floats(&format!("{prefix}.std"))?;
    if mean.len() != std.len() {
        return Err(Error::Parse(format!("{prefix}: mean/std length mismatch")));
    }
    Ok(super::Standardizer { mean, std })
}

pub fn write_train_config(w: &mut CheckpointWriter, cfg: &super::TrainConfig) {
    w.int("epochs", cfg.epochs as u64)
        .float("learning_rate", cfg.learning_rate)
        .float("scheduler_step", cfg.scheduler_step)
        .float("weight_decay", cfg.weight_decay)
        .int("seed", cfg.seed)
        .float("adam.beta1", cfg.adam.beta1)
        .float("adam.beta2", cfg.adam.beta2)
        .float("adam.eps", cfg.adam.eps);
}

pub fn read_train_config(s: &Section) -> Result<super::TrainConfig> {
    Ok(super::TrainConfig {
        epochs: s.int("epochs")? as usize,
        learning_rate: s.float("learning_rate")?,
        scheduler_step: s.float("scheduler_step")?,
        weight_decay: s.float("weight_decay")?,
        seed: s.int("seed")?,
        adam: super::AdamConfig {
            beta1: s.float("adam.beta1")?,
            beta2: s.float("adam.beta2")?,
            eps: s.float("adam.eps")?,
        },
    })
}
