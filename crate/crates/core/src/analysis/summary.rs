use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

/// The fields of an evaluated sequence that the summaries need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub iteration_born: usize,
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub label: String,
    pub count: usize,
    pub mean: f64,
    /// Unbiased sample variance; 0 for a single member.
    pub variance: f64,
    pub min: f64,
    pub max: f64,
}

impl BatchSummary {
    fn of(label: String, v: &[f64]) -> Self {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let variance = if v.len() > 1 {
            v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        BatchSummary {
            label,
            count: v.len(),
            mean,
            variance,
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// The initial population, then later sequences in chronological chunks of `batch_size`.
pub fn batch_summaries(population: &[Scored], batch_size: usize) -> Result<Vec<BatchSummary>> {
    if batch_size == 0 {
        return Err(Error::InvalidInput("batch size must be at least 1".into()));
    }
    let initial: Vec<f64> = population.iter().filter(|s| s.iteration_born == 0).map(|s| s.fitness).collect();
    let later: Vec<f64> = population.iter().filter(|s| s.iteration_born > 0).map(|s| s.fitness).collect();
    let mut out = Vec::new();
    if !initial.is_empty() {
        out.push(BatchSummary::of("initial".into(), &initial));
    }
    for (k, chunk) in later.chunks(batch_size).enumerate() {
        out.push(BatchSummary::of(format!("batch {}", k + 1), chunk));
    }
    Ok(out)
}

pub fn percent_improvement(initial_mean: f64, batch_mean: f64) -> f64 {
    100.0 * (batch_mean - initial_mean) / initial_mean
}

pub fn summaries_csv(s: &[BatchSummary]) -> String {
    let base = s.first().map(|b| b.mean);
    let mut out = String::from("batch,count,mean,variance,min,max,improvement_pct\n");
    for b in s {
        let imp = base.map(|m| percent_improvement(m, b.mean)).unwrap_or(0.0);
        writeln!(out, "{},{},{},{},{},{},{}", b.label, b.count, b.mean, b.variance, b.min, b.max, imp).unwrap();
    }
    out
}
