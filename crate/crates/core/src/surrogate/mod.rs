//! Regressors and bootstrap committees.

mod committee;
mod gbt;
mod mlp;

pub use committee::{committee_predict, train_committee, Committee, CommitteePrediction};
pub use gbt::{train_gbt, GbtModel, GbtSpec, TreeNode};
pub use mlp::{train_mlp, train_mlp_with_history, MlpModel, MlpSpec, Network};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorFamily {
    Mlp,
    Gbt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressorSpec {
    pub family: RegressorFamily,
    pub mlp: MlpSpec,
    pub gbt: GbtSpec,
}

impl Default for RegressorSpec {
    fn default() -> Self {
        RegressorSpec {
            family: RegressorFamily::Mlp,
            mlp: MlpSpec::default(),
            gbt: GbtSpec::default(),
        }
    }
}

impl RegressorSpec {
    pub fn gbt() -> Self {
        RegressorSpec {
            family: RegressorFamily::Gbt,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            RegressorFamily::Mlp => self.mlp.validate(),
            RegressorFamily::Gbt => self.gbt.validate(),
        }
    }
}

/// A trained model of either family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Regressor {
    Mlp(MlpModel),
    Gbt(GbtModel),
}

impl Regressor {
    pub fn input_dim(&self) -> usize {
        match self {
            Regressor::Mlp(m) => m.input_dim(),
            Regressor::Gbt(m) => m.input_dim,
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(match self {
            Regressor::Mlp(m) => m.predict_unchecked(x),
            Regressor::Gbt(m) => m.predict_unchecked(x),
        })
    }
}

pub fn train_regressor(spec: &RegressorSpec, x: &[Vec<f64>], y: &[f64], seed: u64) -> Result<Regressor> {
    let rows: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
    train_rows(spec, &rows, y, seed)
}

pub(crate) fn train_rows(spec: &RegressorSpec, x: &[&[f64]], y: &[f64], seed: u64) -> Result<Regressor> {
    spec.validate()?;
    check_data(x, y)?;
    Ok(match spec.family {
        RegressorFamily::Mlp => Regressor::Mlp(train_mlp(&spec.mlp, x, y, seed)?),
        RegressorFamily::Gbt => Regressor::Gbt(train_gbt(&spec.gbt, x, y)?),
    })
}

pub(crate) fn check_data(x: &[&[f64]], y: &[f64]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "{} inputs but {} targets",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "training needs at least 2 samples, got {}",
            x.len()
        )));
    }
    let dim = x[0].len();
    if let Some(bad) = x.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    if x.iter().flat_map(|r| r.iter()).chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training data".into()));
    }
    Ok(dim)
}

/// Per-column mean and scale; zero-spread columns keep scale 1.
pub(crate) fn column_stats(x: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len() as f64;
    let dim = x[0].len();
    let mut mean = vec![0.0; dim];
    for r in x {
        mean.iter_mut().zip(r.iter()).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for r in x {
        for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let scale = var
        .into_iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 1e-12 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}
