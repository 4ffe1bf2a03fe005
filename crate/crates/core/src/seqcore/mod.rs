//! Amino-acid sequences, alignment, substitution matrices, and developability.

pub mod align;
pub mod alphabet;
pub mod develop;
pub mod fasta;
pub mod matrix;
pub mod sequence;

pub use align::{needleman_wunsch, AlignmentParams, AlignmentResult, Column};
pub use alphabet::{AminoAcid, ALPHABET_SIZE};
pub use develop::{check_developability, DevelopabilityReport, DevelopabilityThresholds};
pub use fasta::{parse_fasta, write_fasta};
pub use matrix::{
    build_substitution_matrix, corpus_segments, substitution_counts, RegionPooling,
    SubstitutionMatrix,
};
pub use sequence::{
    apply_regions, parse_region_map, Lineage, MutationKind, RegionMap, RegionName, RegionSpan,
    Sequence,
};
