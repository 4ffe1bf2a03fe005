//! Bootstrap committees and their mean/spread summary.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_data, train_rows, Regressor, RegressorSpec};
use crate::error::{Error, Result};
use crate::hash::{self, TAG_BOOTSTRAP, TAG_MEMBER, TAG_TRAIN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Committee {
    pub members: Vec<Regressor>,
    pub member_seeds: Vec<u64>,
    pub spec: RegressorSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommitteePrediction {
    pub mean: f64,
    pub std: f64,
}

impl CommitteePrediction {
    /// Mean and unbiased standard deviation of member outputs.
    pub fn from_members(preds: &[f64]) -> Self {
        let m = preds.len() as f64;
        let mean = preds.iter().sum::<f64>() / m;
        let var = if preds.len() > 1 {
            preds.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        CommitteePrediction { mean, std: var.sqrt() }
    }
}

impl Committee {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn input_dim(&self) -> usize {
        self.members[0].input_dim()
    }

    pub fn member_predictions(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.members.iter().map(|m| m.predict(x)).collect()
    }
}

/// Train `m` members, each on a bootstrap resample of size |data|.
pub fn train_committee(spec: &RegressorSpec, x: &[Vec<f64>], y: &[f64], m: usize, seed: u64) -> Result<Committee> {
    if m < 2 {
        return Err(Error::Config(format!("committee size must be at least 2, got {m}")));
    }
    spec.validate()?;
    let rows: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
    check_data(&rows, y)?;
    let n = y.len();
    let mut members = Vec::with_capacity(m);
    let mut member_seeds = Vec::with_capacity(m);
    for k in 0..m {
        let member_seed = hash::mix(seed, &[TAG_MEMBER, k as u64]);
        let mut rng = hash::stream(member_seed, &[TAG_BOOTSTRAP]);
        let draw: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let bx: Vec<&[f64]> = draw.iter().map(|&i| rows[i]).collect();
        let by: Vec<f64> = draw.iter().map(|&i| y[i]).collect();
        members.push(train_rows(spec, &bx, &by, hash::mix(member_seed, &[TAG_TRAIN]))?);
        member_seeds.push(member_seed);
    }
    Ok(Committee {
        members,
        member_seeds,
        spec: spec.clone(),
    })
}

pub fn committee_predict(c: &Committee, x: &[f64]) -> Result<CommitteePrediction> {
    Ok(CommitteePrediction::from_members(&c.member_predictions(x)?))
}
