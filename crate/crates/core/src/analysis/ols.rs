//! Ordinary least squares with t-based inference, and parent-score regressions.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::engine::Record;
use crate::error::{Error, Result};
use crate::seqcore::MutationKind;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OlsFit {
    pub n: usize,
    pub df: usize,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    /// Two-sided.
    pub p_values: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub rss: f64,
    pub r_squared: f64,
}

fn t_dist(df: f64) -> StudentsT {
    StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom")
}

pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    t_dist(df).cdf(t)
}

pub fn student_t_quantile(p: f64, df: f64) -> f64 {
    t_dist(df).inverse_cdf(p)
}

/// Fit `y ≈ Xβ` by Householder QR. `x` holds rows and must include any intercept column.
pub fn ols(y: &[f64], x: &[Vec<f64>]) -> Result<OlsFit> {
    let n = y.len();
    if x.len() != n || n == 0 {
        return Err(Error::InvalidInput(format!("{} responses but {} design rows", n, x.len())));
    }
    let k = x[0].len();
    if let Some(bad) = x.iter().find(|r| r.len() != k) {
        return Err(Error::DimensionMismatch { expected: k, got: bad.len() });
    }
    if n <= k {
        return Err(Error::InsufficientData(format!("{n} observations for {k} coefficients")));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression data".into()));
    }
    let xm = DMatrix::from_fn(n, k, |i, j| x[i][j]);
    let yv = DVector::from_column_slice(y);
    let qr = xm.clone().qr();
    let r = qr.r();
    let scale = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..k).any(|i| r[(i, i)].abs() <= 1e-10 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::RankDeficient);
    }
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficient)?;
    let resid = &yv - &xm * &beta;
    let rss = resid.norm_squared();
    let df = n - k;
    let sigma2 = rss / df as f64;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(Error::RankDeficient)?;
    let cov = &r_inv * r_inv.transpose() * sigma2;
    let ybar = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let r_squared = if tss > 0.0 { (1.0 - rss / tss).clamp(0.0, 1.0) } else { 1.0 };
    let q = student_t_quantile(0.975, df as f64);

    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let std_errors: Vec<f64> = (0..k).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    let t_stats: Vec<f64> = coefficients
        .iter()
        .zip(&std_errors)
        .map(|(b, s)| if *s > 0.0 { b / s } else if *b == 0.0 { 0.0 } else { b.signum() * f64::INFINITY })
        .collect();
    let p_values = t_stats
        .iter()
        .map(|t| (2.0 * (1.0 - student_t_cdf(t.abs(), df as f64))).clamp(0.0, 1.0))
        .collect();
    Ok(OlsFit {
        n,
        df,
        ci_lower: coefficients.iter().zip(&std_errors).map(|(b, s)| b - q * s).collect(),
        ci_upper: coefficients.iter().zip(&std_errors).map(|(b, s)| b + q * s).collect(),
        coefficients,
        std_errors,
        t_stats,
        p_values,
        rss,
        r_squared,
    })
}

pub fn format_p(p: f64) -> String {
    if p < 1e-3 {
        "<0.001".into()
    } else {
        format!("{p:.3}")
    }
}

/// Mutant fitness against parent fitness, separately for point and cross mutants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParentRegression {
    pub point: Option<OlsFit>,
    pub cross: Option<OlsFit>,
    pub notices: Vec<String>,
}

pub fn parent_regression(records: &[Record]) -> ParentRegression {
    let fitness: HashMap<&str, f64> = records.iter().map(|r| (r.sequence.id.as_str(), r.fitness)).collect();
    let parent = |id: &Option<String>| id.as_deref().and_then(|p| fitness.get(p).copied());
    let mut point = (Vec::new(), Vec::new());
    let mut cross = (Vec::new(), Vec::new());
    for r in records {
        let Some(l) = &r.sequence.lineage else { continue };
        match l.kind {
            MutationKind::Substitution => {
                if let Some(m) = parent(&l.main_parent) {
                    point.0.push(r.fitness);
                    point.1.push(vec![1.0, m]);
                }
            }
            MutationKind::Crossover => {
                if let (Some(m), Some(s)) = (parent(&l.main_parent), parent(&l.side_parent)) {
                    cross.0.push(r.fitness);
                    cross.1.push(vec![1.0, m, s]);
                }
            }
            MutationKind::Initial => {}
        }
    }
    let mut notices = Vec::new();
    let mut fit = |label: &str, (y, x): (Vec<f64>, Vec<Vec<f64>>), k: usize| {
        if y.len() < k + 2 {
            notices.push(format!("{label} mutants: {} available, at least {} needed; fit skipped", y.len(), k + 2));
            return None;
        }
        match ols(&y, &x) {
            Ok(f) => Some(f),
            Err(e) => {
                notices.push(format!("{label} mutants: {e}; fit skipped"));
                None
            }
        }
    };
    let point = fit("point", point, 2);
    let cross = fit("cross", cross, 3);
    ParentRegression { point, cross, notices }
}

fn table(out: &mut String, title: &str, fit: &OlsFit, terms: &[&str]) {
    writeln!(out, "{title} (n = {}, r^2 = {:.3})", fit.n, fit.r_squared).unwrap();
    writeln!(
        out,
        "{:<20} {:>11} {:>11} {:>9} {:>8} {:>10} {:>10}",
        "Term", "Coefficient", "Std. Error", "t", "p", "CI Lower", "CI Upper"
    )
    .unwrap();
    for (i, term) in terms.iter().enumerate() {
        writeln!(
            out,
            "{:<20} {:>11.4} {:>11.3} {:>9.3} {:>8} {:>10.3} {:>10.3}",
            term,
            fit.coefficients[i],
            fit.std_errors[i],
            fit.t_stats[i],
            format_p(fit.p_values[i]),
            fit.ci_lower[i],
            fit.ci_upper[i]
        )
        .unwrap();
    }
    out.push('\n');
}

/// Plain-text coefficient tables with 95% confidence intervals.
pub fn regression_text(reg: &ParentRegression) -> String {
    let mut out = String::new();
    if let Some(f) = &reg.point {
        table(&mut out, "Point mutants", f, &["Intercept", "Main parent score"]);
    }
    if let Some(f) = &reg.cross {
        table(&mut out, "Cross mutants", f, &["Intercept", "Main parent score", "Side parent score"]);
    }
    for n in &reg.notices {
        writeln!(out, "note: {n}").unwrap();
    }
    out
}
