use std::collections::HashSet;
use std::fmt::Write as _;

use super::alphabet::AminoAcid;
use super::sequence::{Lineage, Sequence};
use crate::error::{Error, Result};

/// Parse FASTA text into sequences with initial lineage and no regions.
///
/// The record id is the first whitespace-delimited token of the header.
/// Residue positions in errors are 1-based and counted across wrapped lines.
pub fn parse_fasta(text: &str) -> Result<Vec<Sequence>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut current: Option<(String, Vec<AminoAcid>)> = None;

    let mut finish = |cur: Option<(String, Vec<AminoAcid>)>, out: &mut Vec<Sequence>| -> Result<()> {
        if let Some((id, residues)) = cur {
            if residues.is_empty() {
                return Err(Error::EmptyRecord(id));
            }
            if !seen.insert(id.clone()) {
                return Err(Error::DuplicateId(id));
            }
            out.push(Sequence::new(id, residues, Vec::new(), Some(Lineage::initial()))?);
        }
        Ok(())
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('>') {
            finish(current.take(), &mut out)?;
            let id = header.split_whitespace().next().unwrap_or("");
            if id.is_empty() {
                return Err(Error::Fasta(format!("line {}: header without an id", lineno + 1)));
            }
            current = Some((id.to_string(), Vec::new()));
            continue;
        }
        let Some((id, residues)) = current.as_mut() else {
            return Err(Error::Fasta(format!(
                "line {}: residues before the first header",
                lineno + 1
            )));
        };
        for c in line.chars().filter(|c| !c.is_whitespace()) {
            match AminoAcid::from_char(c.to_ascii_uppercase()) {
                Some(a) => residues.push(a),
                None => {
                    return Err(Error::Residue {
                        record: id.clone(),
                        position: residues.len() + 1,
                        found: c,
                    })
                }
            }
        }
    }
    finish(current.take(), &mut out)?;
    Ok(out)
}

/// Emit sequences as FASTA with 60-column residue lines.
pub fn write_fasta(seqs: &[Sequence]) -> String {
    let mut s = String::new();
    for seq in seqs {
        let _ = writeln!(s, ">{}", seq.id);
        let letters = seq.residue_string();
        for chunk in letters.as_bytes().chunks(60) {
            s.push_str(std::str::from_utf8(chunk).expect("ascii"));
            s.push('\n');
        }
    }
    s
}
