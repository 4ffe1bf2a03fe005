//! Global alignment with a linear gap penalty.

use serde::{Deserialize, Serialize};

use super::alphabet::AminoAcid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignmentParams {
    #[serde(rename = "match")]
    pub match_score: i32,
    pub mismatch: i32,
    pub gap: i32,
}

impl Default for AlignmentParams {
    fn default() -> Self {
        AlignmentParams {
            match_score: 1,
            mismatch: -1,
            gap: -2,
        }
    }
}

impl AlignmentParams {
    #[inline]
    pub fn pair(&self, a: AminoAcid, b: AminoAcid) -> i64 {
        if a == b {
            self.match_score as i64
        } else {
            self.mismatch as i64
        }
    }
}

/// One column of an alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Pair(AminoAcid, AminoAcid),
    /// Residue of the first sequence against a gap.
    GapB(AminoAcid),
    /// Residue of the second sequence against a gap.
    GapA(AminoAcid),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentResult {
    pub columns: Vec<Column>,
    pub score: i64,
}

impl AlignmentResult {
    /// Gapped rendering of the first sequence.
    pub fn aligned_a(&self) -> String {
        self.columns
            .iter()
            .map(|c| match c {
                Column::Pair(a, _) | Column::GapB(a) => a.to_char(),
                Column::GapA(_) => '-',
            })
            .collect()
    }

    pub fn aligned_b(&self) -> String {
        self.columns
            .iter()
            .map(|c| match c {
                Column::Pair(_, b) | Column::GapA(b) => b.to_char(),
                Column::GapB(_) => '-',
            })
            .collect()
    }

    /// Residue pairs from gap-free columns.
    pub fn pairs(&self) -> impl Iterator<Item = (AminoAcid, AminoAcid)> + '_ {
        self.columns.iter().filter_map(|c| match *c {
            Column::Pair(a, b) => Some((a, b)),
            _ => None,
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Move {
    Diag,
    Up,
    Left,
}

/// Needleman–Wunsch global alignment.
///
/// Rows of the table index `a`, columns index `b`. "Up" consumes a residue of
/// `a` against a gap, "left" a residue of `b`. Traceback prefers diagonal, then
/// up, then left among moves that attain the cell's optimum.
pub fn needleman_wunsch(
    a: &[AminoAcid],
    b: &[AminoAcid],
    params: &AlignmentParams,
) -> Result<AlignmentResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput(
            "alignment requires two nonempty sequences".into(),
        ));
    }
    let (n, m) = (a.len(), b.len());
    let gap = params.gap as i64;
    let width = m + 1;
    let mut score = vec![0i64; (n + 1) * width];
    for i in 1..=n {
        score[i * width] = gap * i as i64;
    }
    for j in 1..=m {
        score[j] = gap * j as i64;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = score[(i - 1) * width + j - 1] + params.pair(a[i - 1], b[j - 1]);
            let up = score[(i - 1) * width + j] + gap;
            let left = score[i * width + j - 1] + gap;
            score[i * width + j] = diag.max(up).max(left);
        }
    }

    let mut columns = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = score[i * width + j];
        let mv = if i > 0 && j > 0 && here == score[(i - 1) * width + j - 1] + params.pair(a[i - 1], b[j - 1]) {
            Move::Diag
        } else if i > 0 && here == score[(i - 1) * width + j] + gap {
            Move::Up
        } else {
            Move::Left
        };
        match mv {
            Move::Diag => {
                columns.push(Column::Pair(a[i - 1], b[j - 1]));
                i -= 1;
                j -= 1;
            }
            Move::Up => {
                columns.push(Column::GapB(a[i - 1]));
                i -= 1;
            }
            Move::Left => {
                columns.push(Column::GapA(b[j - 1]));
                j -= 1;
            }
        }
    }
    columns.reverse();
    Ok(AlignmentResult {
        columns,
        score: score[n * width + m],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqcore::alphabet::parse_residues;

    fn res(s: &str) -> Vec<AminoAcid> {
        parse_residues(s).unwrap()
    }

    /// Plain recursive optimum over all monotone alignments (memoised), kept
    /// separate from the table/traceback path above.
    fn brute_score(a: &[AminoAcid], b: &[AminoAcid], p: &AlignmentParams) -> i64 {
        fn go(
            a: &[AminoAcid],
            b: &[AminoAcid],
            p: &AlignmentParams,
            memo: &mut std::collections::HashMap<(usize, usize), i64>,
        ) -> i64 {
            if a.is_empty() {
                return p.gap as i64 * b.len() as i64;
            }
            if b.is_empty() {
                return p.gap as i64 * a.len() as i64;
            }
            if let Some(&v) = memo.get(&(a.len(), b.len())) {
                return v;
            }
            let v = (go(&a[1..], &b[1..], p, memo) + p.pair(a[0], b[0]))
                .max(go(&a[1..], b, p, memo) + p.gap as i64)
                .max(go(a, &b[1..], p, memo) + p.gap as i64);
            memo.insert((a.len(), b.len()), v);
            v
        }
        go(a, b, p, &mut Default::default())
    }

    fn column_score(r: &AlignmentResult, p: &AlignmentParams) -> i64 {
        r.columns
            .iter()
            .map(|c| match *c {
                Column::Pair(x, y) => p.pair(x, y),
                _ => p.gap as i64,
            })
            .sum()
    }

    #[test]
    fn identical_sequences() {
        let r = needleman_wunsch(&res("AAA"), &res("AAA"), &AlignmentParams::default()).unwrap();
        assert_eq!(r.score, 3);
        assert_eq!(r.aligned_a(), "AAA");
        assert_eq!(r.aligned_b(), "AAA");
    }

    #[test]
    fn textbook_pair_matches_recursive_optimum() {
        let p = AlignmentParams::default();
        let (a, b) = (res("HEAGAWGHEE"), res("PAWHEAE"));
        let r = needleman_wunsch(&a, &b, &p).unwrap();
        assert_eq!(r.score, brute_score(&a, &b, &p));
        assert_eq!(r.score, column_score(&r, &p));
        assert_eq!(r.aligned_a().replace('-', ""), "HEAGAWGHEE");
        assert_eq!(r.aligned_b().replace('-', ""), "PAWHEAE");
    }

    #[test]
    fn empty_input_rejected() {
        assert!(needleman_wunsch(&res("A"), &[], &AlignmentParams::default()).is_err());
        assert!(needleman_wunsch(&[], &res("A"), &AlignmentParams::default()).is_err());
    }

    #[test]
    fn tie_break_prefers_diagonal() {
        // "AC" vs "CA": the all-mismatch diagonal (-2) beats any gapped path (-3).
        let r = needleman_wunsch(&res("AC"), &res("CA"), &AlignmentParams::default()).unwrap();
        assert_eq!(r.score, -2);
        assert_eq!(r.aligned_a(), "AC");
        assert_eq!(r.aligned_b(), "CA");
        // With a cheap gap the gapped path wins and must be reconstructed consistently.
        let cheap = AlignmentParams { match_score: 1, mismatch: -3, gap: -1 };
        let r = needleman_wunsch(&res("AC"), &res("CA"), &cheap).unwrap();
        assert_eq!(r.score, column_score(&r, &cheap));
        assert_eq!(r.score, -1);
    }

    #[test]
    fn alignment_invariants_and_symmetry() {
        let p = AlignmentParams::default();
        let pool = ["ACD", "DCA", "AAAC", "C", "ACDACD", "DD"];
        for x in pool {
            for y in pool {
                let (a, b) = (res(x), res(y));
                let r = needleman_wunsch(&a, &b, &p).unwrap();
                let (ga, gb) = (r.aligned_a(), r.aligned_b());
                assert_eq!(ga.len(), gb.len());
                assert!(ga.chars().zip(gb.chars()).all(|(u, v)| !(u == '-' && v == '-')));
                assert_eq!(ga.replace('-', ""), x);
                assert_eq!(gb.replace('-', ""), y);
                let rev = needleman_wunsch(&b, &a, &p).unwrap();
                assert_eq!(r.score, rev.score);
            }
        }
    }
}
