//! Sequence embeddings: one-hot blocks, PCA reduction, and imported vectors.

use std::collections::BTreeMap;
use std::ops::Deref;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqcore::{RegionSpan, Sequence, ALPHABET_SIZE};

/// A fixed-dimension real feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding".into()));
        }
        Ok(EmbeddingVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl Deref for EmbeddingVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// One-hot encoder bound to the layout established by the first sequence of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotEncoder {
    length: usize,
    regions: Vec<RegionSpan>,
    region_only: bool,
}

impl OneHotEncoder {
    pub fn for_layout(reference: &Sequence, region_only: bool) -> Result<Self> {
        if region_only && reference.regions().is_empty() {
            return Err(Error::LayoutMismatch(format!(
                "`{}` has no regions to encode",
                reference.id
            )));
        }
        Ok(OneHotEncoder {
            length: reference.len(),
            regions: reference.regions().to_vec(),
            region_only,
        })
    }

    pub fn dim(&self) -> usize {
        let positions = if self.region_only {
            self.regions.iter().map(|r| r.len()).sum()
        } else {
            self.length
        };
        positions * ALPHABET_SIZE
    }

    pub fn encode(&self, s: &Sequence) -> Result<Vec<f64>> {
        if s.len() != self.length || (self.region_only && s.regions() != self.regions.as_slice()) {
            return Err(Error::LayoutMismatch(format!(
                "`{}` does not share the run's sequence layout",
                s.id
            )));
        }
        Ok(if self.region_only {
            one_hot(s, true)
        } else {
            one_hot(s, false)
        })
    }
}

/// Concatenated 20-wide indicator blocks, one per encoded position.
pub fn one_hot(s: &Sequence, region_only: bool) -> Vec<f64> {
    let positions: Vec<usize> = if region_only {
        s.mutable_positions()
    } else {
        (0..s.len()).collect()
    };
    let mut v = vec![0.0; positions.len() * ALPHABET_SIZE];
    for (block, &p) in positions.iter().enumerate() {
        v[block * ALPHABET_SIZE + s.residues()[p].index()] = 1.0;
    }
    v
}

/// Linear projection onto the leading principal axes of a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `d` orthonormal rows of length `D`.
    pub components: Vec<Vec<f64>>,
    /// Sample variance along each component, non-increasing.
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.len()
    }
}

/// Fit PCA by symmetric eigendecomposition of the sample covariance.
///
/// When there are fewer samples than features the equivalent `n × n` Gram
/// matrix is decomposed instead. Directions without variance get eigenvalue 0
/// and are completed to an orthonormal set from the standard basis. Each
/// component's first nonzero entry is made positive.
pub fn pca_fit(x: &[Vec<f64>], d: usize) -> Result<PcaModel> {
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "PCA needs at least 2 samples, got {n}"
        )));
    }
    let dim = x[0].len();
    if let Some(bad) = x.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("PCA input".into()));
    }
    let max = (n - 1).min(dim);
    if d == 0 || d > max {
        return Err(Error::RankTooLow { requested: d, max });
    }

    let mut mean = vec![0.0; dim];
    for row in x {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, dim, |i, j| x[i][j] - mean[j]);
    let denom = (n - 1) as f64;

    let (values, mut vectors): (Vec<f64>, Vec<DVector<f64>>) = if dim <= n {
        let cov = centered.transpose() * &centered / denom;
        let (vals, vecs) = sorted_eigen(cov);
        (vals, vecs)
    } else {
        let gram = &centered * centered.transpose() / denom;
        let (vals, vecs) = sorted_eigen(gram);
        let top = vals.first().copied().unwrap_or(0.0).max(0.0);
        let tol = top * 1e-12;
        let vectors = vals
            .iter()
            .zip(&vecs)
            .map(|(&lambda, u)| {
                if lambda > tol && lambda > 0.0 {
                    centered.transpose() * u / (denom * lambda).sqrt()
                } else {
                    DVector::zeros(dim)
                }
            })
            .collect();
        (vals, vectors)
    };

    vectors.truncate(d);
    let top = values.first().copied().unwrap_or(0.0).max(0.0);
    let mut explained: Vec<f64> = values
        .iter()
        .take(d)
        .map(|&l| if l > top * 1e-12 { l } else { 0.0 })
        .collect();
    orthonormalize(&mut vectors, &mut explained);

    let components = vectors
        .into_iter()
        .map(|v| {
            let mut v: Vec<f64> = v.iter().copied().collect();
            if let Some(first) = v.iter().find(|c| c.abs() > 1e-10) {
                if *first < 0.0 {
                    v.iter_mut().for_each(|c| *c = -*c);
                }
            }
            v
        })
        .collect();
    Ok(PcaModel {
        mean,
        components,
        explained_variance: explained,
    })
}

fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let vecs = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();
    (vals, vecs)
}

/// Modified Gram–Schmidt in order; degenerate vectors are replaced from the
/// standard basis and marked as carrying no variance.
fn orthonormalize(vectors: &mut [DVector<f64>], explained: &mut [f64]) {
    let dim = vectors.first().map_or(0, |v| v.len());
    let mut basis_cursor = 0;
    for k in 0..vectors.len() {
        let mut v = vectors[k].clone();
        for prev in vectors.iter().take(k) {
            let c = prev.dot(&v);
            v -= prev * c;
        }
        let mut norm = v.norm();
        while norm < 0.5 {
            explained[k] = 0.0;
            let mut e = DVector::zeros(dim);
            e[basis_cursor] = 1.0;
            basis_cursor += 1;
            for prev in vectors.iter().take(k) {
                let c = prev.dot(&e);
                e -= prev * c;
            }
            v = e;
            norm = v.norm();
        }
        vectors[k] = v / norm;
    }
}

pub fn pca_project(m: &PcaModel, x: &[f64]) -> Result<EmbeddingVector> {
    if x.len() != m.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: m.input_dim(),
            got: x.len(),
        });
    }
    let out = m
        .components
        .iter()
        .map(|c| {
            c.iter()
                .zip(x.iter().zip(&m.mean))
                .map(|(ci, (xi, mi))| ci * (xi - mi))
                .sum()
        })
        .collect();
    EmbeddingVector::new(out)
}

/// Parse an embedding table: `id,v1,…,vd` per row, optional header starting with `id`.
pub fn parse_embeddings(text: &str) -> Result<BTreeMap<String, EmbeddingVector>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = BTreeMap::new();
    let mut dim: Option<usize> = None;
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        if row == 0 && rec.get(0) == Some("id") {
            continue;
        }
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let id = rec.get(0).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(Error::InvalidInput(format!("embedding row {}: empty id", row + 1)));
        }
        let values = rec
            .iter()
            .skip(1)
            .map(|f| {
                f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    Error::InvalidInput(format!("embedding `{id}`: `{f}` is not a finite number"))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        match dim {
            None if values.is_empty() => {
                return Err(Error::InvalidInput(format!("embedding `{id}` has no values")))
            }
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::InvalidInput(format!(
                    "ragged embedding row `{id}`: {} values, expected {d}",
                    values.len()
                )))
            }
            Some(_) => {}
        }
        if out.insert(id.clone(), EmbeddingVector(values)).is_some() {
            return Err(Error::DuplicateId(id));
        }
    }
    Ok(out)
}

pub fn load_embeddings(path: &Path) -> Result<BTreeMap<String, EmbeddingVector>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&text)
}

pub fn write_embeddings(map: &BTreeMap<String, EmbeddingVector>) -> String {
    let dim = map.values().next().map_or(0, |v| v.dim());
    let mut s = String::from("id");
    for k in 0..dim {
        s.push_str(&format!(",e{k}"));
    }
    s.push('\n');
    for (id, v) in map {
        s.push_str(id);
        for x in v.iter() {
            s.push(',');
            s.push_str(&x.to_string());
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqcore::{AminoAcid, RegionName};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Cyclic Jacobi eigensolver for symmetric matrices, independent of nalgebra.
    fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let n = a.len();
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i][j] * a[i][j])
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
        ev.sort_by(|x, y| y.total_cmp(x));
        ev
    }

    fn sample_cov(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let (n, d) = (x.len(), x[0].len());
        let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        x.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / (n - 1) as f64
                    })
                    .collect()
            })
            .collect()
    }

    fn gaussian_sample(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Correlated columns via a fixed random mixing.
        let mix: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        (0..n)
            .map(|_| {
                let z: Vec<f64> = (0..d)
                    .map(|_| {
                        let (u1, u2): (f64, f64) = (rng.gen_range(1e-12..1.0), rng.gen());
                        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
                    })
                    .collect();
                (0..d).map(|i| (0..d).map(|k| mix[i][k] * z[k]).sum()).collect()
            })
            .collect()
    }

    fn assert_orthonormal(m: &PcaModel, tol: f64) {
        for (i, a) in m.components.iter().enumerate() {
            for (j, b) in m.components.iter().enumerate() {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < tol, "({i},{j}) {dot}");
            }
        }
    }

    #[test]
    fn one_hot_blocks() {
        let s = Sequence::parse("a", "A").unwrap();
        let v = one_hot(&s, false);
        assert_eq!(v.len(), 20);
        assert_eq!(v[AminoAcid::A.index()], 1.0);
        let s = Sequence::parse("ac", "AC").unwrap();
        let v = one_hot(&s, false);
        assert_eq!(v.len(), 40);
        assert_eq!(v[AminoAcid::A.index()], 1.0);
        assert_eq!(v[20 + AminoAcid::C.index()], 1.0);
        assert_eq!(v.iter().sum::<f64>(), 2.0);
    }

    #[test]
    fn encoder_enforces_layout_and_region_only() {
        let reg = vec![RegionSpan::new(RegionName::CdrH3, 1, 3)];
        let a = Sequence::parse("a", "ACDE").unwrap().with_regions(reg.clone()).unwrap();
        let b = Sequence::parse("b", "AKLE").unwrap().with_regions(reg).unwrap();
        let enc = OneHotEncoder::for_layout(&a, true).unwrap();
        assert_eq!(enc.dim(), 40);
        let (va, vb) = (enc.encode(&a).unwrap(), enc.encode(&b).unwrap());
        assert_ne!(va, vb);
        assert_eq!(va.iter().sum::<f64>(), 2.0);
        let other = Sequence::parse("c", "ACDEF").unwrap();
        assert!(matches!(enc.encode(&other), Err(Error::LayoutMismatch(_))));
    }

    #[test]
    fn axis_aligned_data() {
        let xs = [1.0, 2.0, 4.0, 7.0];
        let x: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v, 0.0]).collect();
        let m = pca_fit(&x, 1).unwrap();
        assert!((m.components[0][0].abs() - 1.0).abs() < 1e-12);
        assert!(m.components[0][1].abs() < 1e-12);
        let mean = xs.iter().sum::<f64>() / 4.0;
        let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0;
        assert!((m.explained_variance[0] - var).abs() < 1e-12);
    }

    #[test]
    fn matches_jacobi_oracle_on_gaussian_sample() {
        let x = gaussian_sample(5, 40, 5);
        let oracle = jacobi_eigenvalues(sample_cov(&x));
        let m = pca_fit(&x, 3).unwrap();
        assert_orthonormal(&m, 1e-8);
        for k in 0..3 {
            assert!((m.explained_variance[k] - oracle[k]).abs() < 1e-6, "{k}");
        }
        // Projected training data reproduces the variances and is decorrelated.
        let proj: Vec<Vec<f64>> = x.iter().map(|r| pca_project(&m, r).unwrap().0).collect();
        let cov = sample_cov(&proj);
        for i in 0..3 {
            assert!((cov[i][i] - oracle[i]).abs() < 1e-6);
            for j in 0..3 {
                if i != j {
                    assert!(cov[i][j].abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn gram_path_agrees_with_oracle() {
        // Fewer samples than features.
        let x = gaussian_sample(8, 6, 12);
        let oracle = jacobi_eigenvalues(sample_cov(&x));
        let m = pca_fit(&x, 5).unwrap();
        assert_orthonormal(&m, 1e-8);
        for k in 0..5 {
            assert!((m.explained_variance[k] - oracle[k]).abs() < 1e-6, "{k}");
        }
        assert!(m.explained_variance.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn zero_variance_directions_are_completed() {
        // Duplicated rows: rank 1 but 3 components requested.
        let x = vec![vec![1.0, 0.0, 0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0, 0.0]];
        let m = pca_fit(&x, 3).unwrap();
        assert_orthonormal(&m, 1e-10);
        assert!(m.explained_variance[0] > 0.0);
        assert_eq!(&m.explained_variance[1..], &[0.0, 0.0]);
        for c in &m.components {
            let first = c.iter().find(|v| v.abs() > 1e-10).unwrap();
            assert!(*first > 0.0);
        }
        let constant = vec![vec![2.0, 2.0]; 4];
        let m = pca_fit(&constant, 1).unwrap();
        assert_eq!(m.explained_variance, vec![0.0]);
    }

    #[test]
    fn rank_limits() {
        let x = gaussian_sample(1, 4, 6);
        assert!(matches!(pca_fit(&x, 4), Err(Error::RankTooLow { max: 3, .. })));
        assert!(pca_fit(&x[..1], 1).is_err());
    }

    #[test]
    fn projection_is_affine_and_centered() {
        let x = gaussian_sample(2, 20, 4);
        let m = pca_fit(&x, 2).unwrap();
        let at_mean = pca_project(&m, &m.mean).unwrap();
        assert!(at_mean.iter().all(|v| v.abs() < 1e-12));
        let alpha = 0.3;
        let mixed: Vec<f64> = x[0].iter().zip(&m.mean).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
        let (p, q) = (pca_project(&m, &mixed).unwrap(), pca_project(&m, &x[0]).unwrap());
        for (a, b) in p.iter().zip(q.iter()) {
            assert!((a - alpha * b).abs() < 1e-12);
        }
        assert!(pca_project(&m, &[0.0; 3]).is_err());
    }

    #[test]
    fn reconstruction_error_non_increasing_in_dim() {
        let x = gaussian_sample(3, 30, 6);
        let mut last = f64::INFINITY;
        for d in 1..=6 {
            let m = pca_fit(&x, d).unwrap();
            let err: f64 = x
                .iter()
                .map(|r| {
                    let z = pca_project(&m, r).unwrap();
                    let mut rec = m.mean.clone();
                    for (zk, c) in z.iter().zip(&m.components) {
                        rec.iter_mut().zip(c).for_each(|(ri, ci)| *ri += zk * ci);
                    }
                    rec.iter().zip(r).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
                })
                .sum();
            assert!(err <= last + 1e-9);
            last = err;
        }
        assert!(last < 1e-18 * x.len() as f64 + 1e-9);
    }

    #[test]
    fn embedding_table_parsing() {
        let map = parse_embeddings("s1,0.1,0.2\ns2,0.3,0.4\n").unwrap();
        assert_eq!(map.len(), 2);
        assert_eq!(map["s2"].0, vec![0.3, 0.4]);
        assert_eq!(parse_embeddings(&write_embeddings(&map)).unwrap(), map);
        assert!(matches!(parse_embeddings("a,1\na,2\n"), Err(Error::DuplicateId(id)) if id == "a"));
        assert!(parse_embeddings("a,1,2\nb,1\n").is_err());
        assert!(parse_embeddings("a,1,x\n").is_err());
    }
}
