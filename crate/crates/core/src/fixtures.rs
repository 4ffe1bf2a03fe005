//! Bundled starting material: an antibody heavy-chain variable domain and a
//! seeded library of CDR variants around it.

use crate::error::Result;
use crate::hash;
use crate::seqcore::{check_developability, AminoAcid, DevelopabilityThresholds, RegionName, RegionSpan, Sequence};

/// Trastuzumab VH.
pub const PARENT_VH: &str =
    "EVQLVESGGGLVQPGGSLRLSCAASGFNIKDTYIHWVRQAPGKGLEWVARIYPTNGYTRYADSVKGRFTISADTSKNTAYLQMNSLRAEDTAVYYCSRWGGDGFYAMDYWGQGTLVTVSS";

pub fn parent_regions() -> Vec<RegionSpan> {
    vec![
        RegionSpan::new(RegionName::CdrH1, 25, 33),
        RegionSpan::new(RegionName::CdrH2, 50, 58),
        RegionSpan::new(RegionName::CdrH3, 96, 109),
    ]
}

pub fn parent() -> Sequence {
    Sequence::parse("parent", PARENT_VH)
        .and_then(|s| s.with_regions(parent_regions()))
        .expect("bundled parent is valid")
}

/// `n` developable variants of the parent: each CDR position keeps the parent
/// residue with probability `keep`, otherwise takes a uniform residue.
pub fn initial_library(n: usize, keep: f64, seed: u64) -> Result<Vec<Sequence>> {
    let p = parent();
    let positions = p.mutable_positions();
    let thresholds = DevelopabilityThresholds::default();
    let mut out: Vec<Sequence> = Vec::with_capacity(n);
    let mut attempt = 0u64;
    while out.len() < n {
        let mut residues = p.residues().to_vec();
        for &pos in &positions {
            let h = hash::mix(seed, &[attempt, pos as u64]);
            if hash::unit_f64(h) >= keep {
                residues[pos] = AminoAcid::ALL[(hash::splitmix64(h) % 20) as usize];
            }
        }
        attempt += 1;
        let s = Sequence::new(format!("init{:03}", out.len()), residues, p.regions().to_vec(), None)?;
        if out.iter().any(|o| o.residues() == s.residues()) {
            continue;
        }
        if check_developability(s.residues(), &thresholds).passed {
            out.push(s);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parent_layout() {
        let p = parent();
        assert_eq!(p.len(), 120);
        assert_eq!(p.mutable_positions().len(), 29);
        assert!(check_developability(p.residues(), &DevelopabilityThresholds::default()).passed);
    }

    #[test]
    fn library_is_deterministic_and_varies_only_cdrs() {
        let a = initial_library(20, 0.3, 1).unwrap();
        assert_eq!(a, initial_library(20, 0.3, 1).unwrap());
        let p = parent();
        let cdr = p.mutable_positions();
        for s in &a {
            for i in 0..p.len() {
                if !cdr.contains(&i) {
                    assert_eq!(s.residues()[i], p.residues()[i]);
                }
            }
        }
    }
}
