//! Biophysical developability screen.

use serde::{Deserialize, Serialize};

use super::alphabet::AminoAcid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DevelopabilityThresholds {
    pub hydropathy_min: f64,
    pub hydropathy_max: f64,
    pub aromatic_max: f64,
    pub abs_charge_max: i32,
    /// Longest allowed homopolymer run.
    pub max_identical_run: usize,
}

impl Default for DevelopabilityThresholds {
    fn default() -> Self {
        DevelopabilityThresholds {
            hydropathy_min: -2.0,
            hydropathy_max: 2.0,
            aromatic_max: 0.35,
            abs_charge_max: 6,
            max_identical_run: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternViolation {
    pub motif: String,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DevelopabilityReport {
    pub passed: bool,
    pub hydropathy: f64,
    pub aromatic_fraction: f64,
    pub net_charge: i32,
    pub pattern_violations: Vec<PatternViolation>,
}

impl DevelopabilityReport {
    /// Short human-readable reason for a failure, empty when passed.
    pub fn reasons(&self, t: &DevelopabilityThresholds) -> Vec<String> {
        let mut out = Vec::new();
        if !(t.hydropathy_min..=t.hydropathy_max).contains(&self.hydropathy) {
            out.push(format!("mean hydropathy {:.3}", self.hydropathy));
        }
        if self.aromatic_fraction > t.aromatic_max {
            out.push(format!("aromatic fraction {:.3}", self.aromatic_fraction));
        }
        if self.net_charge.abs() > t.abs_charge_max {
            out.push(format!("net charge {}", self.net_charge));
        }
        out.extend(
            self.pattern_violations
                .iter()
                .map(|v| format!("{} at {}", v.motif, v.position)),
        );
        out
    }
}

/// Hydropathy, aromatic content, charge, and motif checks on a residue chain.
///
/// Motifs: homopolymer runs longer than `max_identical_run` (reported at the
/// run start) and N-glycosylation sites N-X-S/T with X ≠ P (reported at the N).
pub fn check_developability(
    residues: &[AminoAcid],
    t: &DevelopabilityThresholds,
) -> DevelopabilityReport {
    let n = residues.len().max(1) as f64;
    let hydropathy = residues.iter().map(|a| a.hydropathy()).sum::<f64>() / n;
    let aromatic_fraction = residues.iter().filter(|a| a.is_aromatic()).count() as f64 / n;
    let net_charge: i32 = residues.iter().map(|a| a.charge()).sum();

    let mut pattern_violations = Vec::new();
    let mut start = 0;
    while start < residues.len() {
        let mut end = start + 1;
        while end < residues.len() && residues[end] == residues[start] {
            end += 1;
        }
        if end - start > t.max_identical_run {
            pattern_violations.push(PatternViolation {
                motif: format!("{}x{}", residues[start], end - start),
                position: start,
            });
        }
        start = end;
    }
    for (i, w) in residues.windows(3).enumerate() {
        if w[0] == AminoAcid::N && w[1] != AminoAcid::P && matches!(w[2], AminoAcid::S | AminoAcid::T) {
            pattern_violations.push(PatternViolation {
                motif: format!("N-glycosylation {}{}{}", w[0], w[1], w[2]),
                position: i,
            });
        }
    }
    pattern_violations.sort_by_key(|v| v.position);

    let passed = (t.hydropathy_min..=t.hydropathy_max).contains(&hydropathy)
        && aromatic_fraction <= t.aromatic_max
        && net_charge.abs() <= t.abs_charge_max
        && pattern_violations.is_empty();
    DevelopabilityReport {
        passed,
        hydropathy,
        aromatic_fraction,
        net_charge,
        pattern_violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqcore::alphabet::parse_residues;

    fn check(s: &str) -> DevelopabilityReport {
        check_developability(&parse_residues(s).unwrap(), &DevelopabilityThresholds::default())
    }

    #[test]
    fn homopolymer_run_of_six() {
        let r = check("AAAAAA");
        assert!(!r.passed);
        assert_eq!(r.pattern_violations.len(), 1);
        assert_eq!(r.pattern_violations[0].position, 0);
        // Five in a row is allowed.
        assert!(check("GAAAAAG").pattern_violations.is_empty());
    }

    #[test]
    fn glycosylation_motif() {
        let r = check("ANGSKD");
        assert!(!r.passed);
        assert_eq!(r.pattern_violations[0].position, 1);
        assert!(check("ANPSKD").pattern_violations.is_empty());
        assert!(!check("GNQTG").pattern_violations.is_empty());
    }

    #[test]
    fn charge_and_aromatics() {
        let r = check("KDKD");
        assert_eq!(r.net_charge, 0);
        assert_eq!(check("HHHKR").net_charge, 2);
        assert!((check("FWYHA").aromatic_fraction - 0.8).abs() < 1e-15);
        assert!(!check("FWYHAGS").passed);
    }

    #[test]
    fn hydropathy_mean() {
        let r = check("IV");
        assert!((r.hydropathy - 4.35).abs() < 1e-12);
        assert!(!r.passed);
        assert!(check("EVQLVESGGGLVQPGGSLRLSCAASGFNIKDTYIHWVRQAPGKGLEWVARIYPTNGYTRYADSVKGRFTISADTSKNTAYLQMNSLRAEDTAVYYCSRWGGDGFYAMDYWGQGTLVTVSS").passed);
    }

    #[test]
    fn pure() {
        assert_eq!(check("ACDEFGHIK"), check("ACDEFGHIK"));
    }
}
