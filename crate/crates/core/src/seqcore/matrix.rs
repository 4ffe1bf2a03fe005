//! Residue substitution probabilities estimated from aligned homologous regions.

use serde::{Deserialize, Serialize};

use super::align::{needleman_wunsch, AlignmentParams};
use super::alphabet::{AminoAcid, ALPHABET_SIZE};
use super::sequence::{RegionName, Sequence};
use crate::error::{Error, Result};

pub type CountTable = [[u64; ALPHABET_SIZE]; ALPHABET_SIZE];

/// Row-stochastic 20×20 matrix; row = source residue, column = replacement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionMatrix {
    probs: Vec<[f64; ALPHABET_SIZE]>,
}

const ROW_SUM_TOL: f64 = 1e-12;

impl SubstitutionMatrix {
    pub fn from_rows(rows: Vec<[f64; ALPHABET_SIZE]>) -> Result<Self> {
        if rows.len() != ALPHABET_SIZE {
            return Err(Error::InvalidInput(format!(
                "substitution matrix needs {ALPHABET_SIZE} rows, got {}",
                rows.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            let sym = AminoAcid::ALL[i].to_char();
            if row.iter().any(|p| !p.is_finite() || !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidInput(format!(
                    "row {sym} has an entry outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidInput(format!("row {sym} sums to {sum}")));
            }
        }
        Ok(SubstitutionMatrix { probs: rows })
    }

    /// Equal probability for every off-diagonal replacement.
    pub fn uniform_off_diagonal() -> Self {
        let p = 1.0 / (ALPHABET_SIZE - 1) as f64;
        let rows = (0..ALPHABET_SIZE)
            .map(|i| {
                let mut row = [p; ALPHABET_SIZE];
                row[i] = 0.0;
                row
            })
            .collect();
        SubstitutionMatrix { probs: rows }
    }

    pub fn identity() -> Self {
        let rows = (0..ALPHABET_SIZE)
            .map(|i| {
                let mut row = [0.0; ALPHABET_SIZE];
                row[i] = 1.0;
                row
            })
            .collect();
        SubstitutionMatrix { probs: rows }
    }

    #[inline]
    pub fn row(&self, from: AminoAcid) -> &[f64; ALPHABET_SIZE] {
        &self.probs[from.index()]
    }

    #[inline]
    pub fn prob(&self, from: AminoAcid, to: AminoAcid) -> f64 {
        self.probs[from.index()][to.index()]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("from");
        for a in AminoAcid::ALL {
            s.push(',');
            s.push(a.to_char());
        }
        s.push('\n');
        for (a, row) in AminoAcid::ALL.iter().zip(&self.probs) {
            s.push(a.to_char());
            for p in row {
                s.push(',');
                s.push_str(&p.to_string());
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        let expected: Vec<String> = std::iter::once("from".to_string())
            .chain(AminoAcid::ALL.iter().map(|a| a.to_char().to_string()))
            .collect();
        if header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(Error::InvalidInput(
                "substitution matrix header must be `from` followed by the 20 residues in canonical order".into(),
            ));
        }
        let mut rows = Vec::with_capacity(ALPHABET_SIZE);
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let want = AminoAcid::from_index(i).map(|a| a.to_char().to_string());
            if want.as_deref() != rec.get(0) {
                return Err(Error::InvalidInput(format!(
                    "substitution matrix row {} is out of canonical order",
                    i + 1
                )));
            }
            let mut row = [0.0; ALPHABET_SIZE];
            for (k, slot) in row.iter_mut().enumerate() {
                let field = rec.get(k + 1).unwrap_or("");
                *slot = field.trim().parse().map_err(|_| {
                    Error::InvalidInput(format!("row {} column {}: `{field}` is not a number", i + 1, k + 2))
                })?;
            }
            rows.push(row);
        }
        SubstitutionMatrix::from_rows(rows)
    }
}

/// Symmetric substitution counts over the gap-free columns of each pairwise alignment.
///
/// A column pairing `a` with `b != a` adds one to both `a→b` and `b→a`; an
/// identity column adds one to `a→a`.
pub fn substitution_counts(
    pairs: &[(&[AminoAcid], &[AminoAcid])],
    params: &AlignmentParams,
) -> Result<CountTable> {
    let mut counts = [[0u64; ALPHABET_SIZE]; ALPHABET_SIZE];
    for (a, b) in pairs {
        let aln = needleman_wunsch(a, b, params)?;
        for (x, y) in aln.pairs() {
            counts[x.index()][y.index()] += 1;
            if x != y {
                counts[y.index()][x.index()] += 1;
            }
        }
    }
    Ok(counts)
}

/// Normalize counts plus a pseudocount into row probabilities.
pub fn normalize_counts(counts: &CountTable, pseudocount: f64) -> Result<SubstitutionMatrix> {
    if !(pseudocount >= 0.0 && pseudocount.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "pseudocount must be a finite nonnegative number, got {pseudocount}"
        )));
    }
    let mut rows = Vec::with_capacity(ALPHABET_SIZE);
    for (i, row) in counts.iter().enumerate() {
        let total: f64 = row.iter().map(|&c| c as f64 + pseudocount).sum();
        if total <= 0.0 {
            return Err(Error::EmptyMatrixRow {
                residue: AminoAcid::ALL[i].to_char(),
            });
        }
        let mut out = [0.0; ALPHABET_SIZE];
        for (o, &c) in out.iter_mut().zip(row) {
            *o = (c as f64 + pseudocount) / total;
        }
        rows.push(out);
    }
    Ok(SubstitutionMatrix { probs: rows })
}

pub fn build_substitution_matrix(
    pairs: &[(&[AminoAcid], &[AminoAcid])],
    params: &AlignmentParams,
    pseudocount: f64,
) -> Result<SubstitutionMatrix> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput(
            "substitution matrix needs at least one sequence pair".into(),
        ));
    }
    normalize_counts(&substitution_counts(pairs, params)?, pseudocount)
}

/// Which residues of an annotated corpus feed the alignments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionPooling {
    /// Align each CDR with its namesake and pool all counts.
    #[default]
    Pooled,
    /// Only the named region.
    Region(RegionName),
}

/// All unordered sequence pairs of a corpus, split into same-region segments.
///
/// Sequences without region annotations contribute their full length.
pub fn corpus_segments(
    corpus: &[Sequence],
    pooling: RegionPooling,
) -> Vec<(&[AminoAcid], &[AminoAcid])> {
    let segments = |s: &'_ Sequence, name: Option<RegionName>| -> Option<std::ops::Range<usize>> {
        match name {
            None if s.regions().is_empty() => Some(0..s.len()),
            None => None,
            Some(n) => s.region(n).map(|r| r.positions()),
        }
    };
    let names: Vec<Option<RegionName>> = match pooling {
        RegionPooling::Pooled => {
            let mut v: Vec<_> = RegionName::ALL.iter().map(|&n| Some(n)).collect();
            v.push(None);
            v
        }
        RegionPooling::Region(n) => vec![Some(n)],
    };
    let mut out = Vec::new();
    for i in 0..corpus.len() {
        for j in i + 1..corpus.len() {
            let (a, b) = (&corpus[i], &corpus[j]);
            for &name in &names {
                if let (Some(ra), Some(rb)) = (segments(a, name), segments(b, name)) {
                    out.push((&a.residues()[ra], &b.residues()[rb]));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqcore::alphabet::parse_residues;
    use proptest::prelude::*;

    fn res(s: &str) -> Vec<AminoAcid> {
        parse_residues(s).unwrap()
    }

    #[test]
    fn single_identity_pair_with_laplace() {
        let (a, b) = (res("AA"), res("AA"));
        let m = build_substitution_matrix(&[(&a, &b)], &AlignmentParams::default(), 1.0).unwrap();
        // Two identity columns: count(A→A) = 2, every cell +1, row total 2 + 20.
        assert!((m.prob(AminoAcid::A, AminoAcid::A) - 3.0 / 22.0).abs() < 1e-15);
        assert!((m.prob(AminoAcid::A, AminoAcid::C) - 1.0 / 22.0).abs() < 1e-15);
        assert!((m.prob(AminoAcid::R, AminoAcid::R) - 1.0 / 20.0).abs() < 1e-15);
        for from in AminoAcid::ALL {
            let s: f64 = m.row(from).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_columns_count_both_directions() {
        let (a, b) = (res("AC"), res("CA"));
        let counts = substitution_counts(&[(&a, &b)], &AlignmentParams::default()).unwrap();
        // Alignment AC/CA (score -2): columns (A,C) and (C,A).
        let (ia, ic) = (AminoAcid::A.index(), AminoAcid::C.index());
        assert_eq!(counts[ia][ic], 2);
        assert_eq!(counts[ic][ia], 2);
        assert_eq!(counts.iter().flatten().sum::<u64>(), 4);
        // Without smoothing every other row is empty.
        assert!(matches!(
            build_substitution_matrix(&[(&a, &b)], &AlignmentParams::default(), 0.0),
            Err(Error::EmptyMatrixRow { residue: 'R' })
        ));
    }

    #[test]
    fn csv_roundtrip_and_validation() {
        let (a, b) = (res("ACDEFGH"), res("ACDQFGH"));
        let m = build_substitution_matrix(&[(&a, &b)], &AlignmentParams::default(), 0.5).unwrap();
        let csv = m.to_csv();
        assert_eq!(csv.lines().count(), 21);
        assert_eq!(csv.lines().next().unwrap().split(',').count(), 21);
        assert_eq!(SubstitutionMatrix::from_csv(&csv).unwrap(), m);

        let broken = csv.replacen("\nR,", "\nX,", 1);
        assert!(SubstitutionMatrix::from_csv(&broken).is_err());
    }

    #[test]
    fn uniform_matrix_is_stochastic_with_empty_diagonal() {
        let m = SubstitutionMatrix::uniform_off_diagonal();
        for a in AminoAcid::ALL {
            assert_eq!(m.prob(a, a), 0.0);
            assert!((m.row(a).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn corpus_pairs_pool_regions() {
        use crate::seqcore::sequence::RegionSpan;
        let mk = |id: &str, s: &str| {
            Sequence::parse(id, s)
                .unwrap()
                .with_regions(vec![
                    RegionSpan::new(RegionName::CdrH1, 0, 2),
                    RegionSpan::new(RegionName::CdrH3, 4, 6),
                ])
                .unwrap()
        };
        let corpus = vec![mk("a", "ACDEFG"), mk("b", "ACDEFH"), mk("c", "KLDEFG")];
        let pooled = corpus_segments(&corpus, RegionPooling::Pooled);
        assert_eq!(pooled.len(), 3 * 2);
        let h3 = corpus_segments(&corpus, RegionPooling::Region(RegionName::CdrH3));
        assert_eq!(h3.len(), 3);
        assert!(h3.iter().all(|(a, b)| a.len() == 2 && b.len() == 2));
    }

    proptest! {
        #[test]
        fn rows_are_stochastic_for_random_corpora(
            seqs in proptest::collection::vec(proptest::collection::vec(0usize..20, 1..12), 2..6),
            lambda in 0.01f64..5.0,
        ) {
            let seqs: Vec<Vec<AminoAcid>> = seqs.into_iter()
                .map(|v| v.into_iter().map(|k| AminoAcid::ALL[k]).collect()).collect();
            let pairs: Vec<(&[AminoAcid], &[AminoAcid])> = seqs.iter()
                .flat_map(|a| seqs.iter().map(move |b| (a.as_slice(), b.as_slice())))
                .collect();
            let m = build_substitution_matrix(&pairs, &AlignmentParams::default(), lambda).unwrap();
            for a in AminoAcid::ALL {
                let row = m.row(a);
                prop_assert!(row.iter().all(|p| (0.0..=1.0).contains(p)));
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
