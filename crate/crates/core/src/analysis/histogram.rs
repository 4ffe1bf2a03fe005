use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::analysis::BatchSummary;
use crate::error::{Error, Result};

const MIN_BINS: usize = 10;
const MAX_BINS: usize = 200;

/// Shared bin edges plus per-batch counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub left: f64,
    pub width: f64,
    pub labels: Vec<String>,
    /// `counts[batch][bin]`
    pub counts: Vec<Vec<usize>>,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }

    pub fn bin_left(&self, k: usize) -> f64 {
        self.left + self.width * k as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("batch,bin_left,count\n");
        for (label, counts) in self.labels.iter().zip(&self.counts) {
            for (k, c) in counts.iter().enumerate() {
                let _ = writeln!(out, "{label},{},{c}", self.bin_left(k));
            }
        }
        out
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Bins every batch on one grid. The width follows Freedman-Diaconis on the
/// pooled scores, and the grid is widened until it has at least ten bins.
pub fn histogram_bins(labels: &[String], scores: &[Vec<f64>]) -> Result<Histogram> {
    if labels.len() != scores.len() {
        return Err(Error::InvalidInput(format!("{} labels for {} batches", labels.len(), scores.len())));
    }
    let mut pooled: Vec<f64> = scores.iter().flatten().copied().collect();
    if let Some(bad) = pooled.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite score {bad}")));
    }
    pooled.sort_by(f64::total_cmp);
    let (lo, hi) = match (pooled.first(), pooled.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => (0.0, 1.0),
    };
    let (left, right) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let range = right - left;
    let iqr = if pooled.len() > 1 { quantile(&pooled, 0.75) - quantile(&pooled, 0.25) } else { 0.0 };
    let fd = 2.0 * iqr / (pooled.len().max(1) as f64).cbrt();
    let bins = if fd > 0.0 { (range / fd).ceil() as usize } else { MIN_BINS };
    let bins = bins.clamp(MIN_BINS, MAX_BINS);
    let width = range / bins as f64;
    let counts = scores
        .iter()
        .map(|batch| {
            let mut c = vec![0; bins];
            for &v in batch {
                let k = (((v - left) / width).floor() as isize).clamp(0, bins as isize - 1);
                c[k as usize] += 1;
            }
            c
        })
        .collect();
    Ok(Histogram { left, width, labels: labels.to_vec(), counts })
}

const PALETTE: [&str; 6] = ["#888888", "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

fn svg(h: &Histogram, summaries: &[BatchSummary]) -> String {
    let (w, ht, pad) = (720.0, 360.0, 50.0);
    let plot_w = w - 2.0 * pad;
    let plot_h = ht - 2.0 * pad;
    let peak = h.counts.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;
    let bar = plot_w / h.bins().max(1) as f64;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{ht}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{ht}" fill="white"/>"#);
    for (b, counts) in h.counts.iter().enumerate() {
        let color = PALETTE[b % PALETTE.len()];
        for (k, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let bh = plot_h * c as f64 / peak;
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.45"/>"#,
                pad + bar * k as f64,
                ht - pad - bh,
                bar,
                bh
            );
        }
    }
    let _ = writeln!(s, r#"<line x1="{pad}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#, ht - pad, w - pad);
    let _ = writeln!(s, r#"<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{}" stroke="black"/>"#, ht - pad);
    for k in [0, h.bins() / 2, h.bins()] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{:.1}</text>"#,
            pad + bar * k as f64,
            ht - pad + 16.0,
            h.bin_left(k)
        );
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">fitness</text>"#, w / 2.0, ht - 8.0);
    let _ = writeln!(s, r#"<text x="{pad}" y="{:.2}">max count {peak}</text>"#, pad - 8.0);
    for (b, label) in h.labels.iter().enumerate() {
        let color = PALETTE[b % PALETTE.len()];
        let note = match summaries.iter().find(|x| &x.label == label) {
            Some(x) => format!("{label}: mean {:.2}, variance {:.2}", x.mean, x.variance),
            None => label.clone(),
        };
        let y = pad + 14.0 * b as f64;
        let _ = writeln!(s, r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{color}"/>"#, w - pad - 220.0, y - 9.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{y:.2}">{note}</text>"#, w - pad - 205.0);
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `histogram.csv` and `histogram.svg` into `dir`.
pub fn emit_histogram(summaries: &[BatchSummary], scores: &[Vec<f64>], dir: &Path) -> Result<(Histogram, Vec<PathBuf>)> {
    let labels: Vec<String> = summaries.iter().map(|s| s.label.clone()).collect();
    let h = histogram_bins(&labels, scores)?;
    let csv = dir.join("histogram.csv");
    let svg_path = dir.join("histogram.svg");
    std::fs::write(&csv, h.to_csv()).map_err(|e| Error::io(&csv, e))?;
    std::fs::write(&svg_path, svg(&h, summaries)).map_err(|e| Error::io(&svg_path, e))?;
    Ok((h, vec![csv, svg_path]))
}
