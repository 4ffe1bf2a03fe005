use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// One of the twenty canonical amino acids.
///
/// Discriminants follow the conventional substitution-matrix order
/// `ARNDCQEGHILKMFPSTWYV`, which is also the row/column order everywhere a
/// 20-wide table appears in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum AminoAcid {
    A,
    R,
    N,
    D,
    C,
    Q,
    E,
    G,
    H,
    I,
    L,
    K,
    M,
    F,
    P,
    S,
    T,
    W,
    Y,
    V,
}

pub const ALPHABET_SIZE: usize = 20;

impl AminoAcid {
    pub const ALL: [AminoAcid; ALPHABET_SIZE] = [
        AminoAcid::A,
        AminoAcid::R,
        AminoAcid::N,
        AminoAcid::D,
        AminoAcid::C,
        AminoAcid::Q,
        AminoAcid::E,
        AminoAcid::G,
        AminoAcid::H,
        AminoAcid::I,
        AminoAcid::L,
        AminoAcid::K,
        AminoAcid::M,
        AminoAcid::F,
        AminoAcid::P,
        AminoAcid::S,
        AminoAcid::T,
        AminoAcid::W,
        AminoAcid::Y,
        AminoAcid::V,
    ];

    const SYMBOLS: &'static [u8; ALPHABET_SIZE] = b"ARNDCQEGHILKMFPSTWYV";

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn from_index(i: usize) -> Option<AminoAcid> {
        Self::ALL.get(i).copied()
    }

    /// Parse an upper-case one-letter code.
    pub fn from_char(c: char) -> Option<AminoAcid> {
        Self::SYMBOLS
            .iter()
            .position(|&s| s as char == c)
            .map(|i| Self::ALL[i])
    }

    #[inline]
    pub fn to_char(self) -> char {
        Self::SYMBOLS[self.index()] as char
    }

    /// Kyte–Doolittle hydropathy index.
    pub fn hydropathy(self) -> f64 {
        use AminoAcid::*;
        match self {
            A => 1.8,
            R => -4.5,
            N => -3.5,
            D => -3.5,
            C => 2.5,
            Q => -3.5,
            E => -3.5,
            G => -0.4,
            H => -3.2,
            I => 4.5,
            L => 3.8,
            K => -3.9,
            M => 1.9,
            F => 2.8,
            P => -1.6,
            S => -0.8,
            T => -0.7,
            W => -0.9,
            Y => -1.3,
            V => 4.2,
        }
    }

    pub fn is_aromatic(self) -> bool {
        matches!(self, AminoAcid::F | AminoAcid::W | AminoAcid::Y | AminoAcid::H)
    }

    /// Formal side-chain charge at pH 7. Histidine counts as neutral.
    pub fn charge(self) -> i32 {
        match self {
            AminoAcid::K | AminoAcid::R => 1,
            AminoAcid::D | AminoAcid::E => -1,
            _ => 0,
        }
    }
}

impl fmt::Display for AminoAcid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_char())
    }
}

/// Render residues as a one-letter string.
pub fn to_string(residues: &[AminoAcid]) -> String {
    residues.iter().map(|a| a.to_char()).collect()
}

/// Parse a one-letter string, returning the 0-based index of the first bad character on failure.
pub fn parse_residues(s: &str) -> Result<Vec<AminoAcid>, (usize, char)> {
    s.chars()
        .enumerate()
        .map(|(i, c)| AminoAcid::from_char(c).ok_or((i, c)))
        .collect()
}

/// Serde adapter storing residue vectors as plain strings.
pub(crate) mod residue_string {
    use super::*;

    pub fn serialize<S: Serializer>(r: &[AminoAcid], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&to_string(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<AminoAcid>, D::Error> {
        let s = String::deserialize(d)?;
        parse_residues(&s).map_err(|(i, c)| {
            serde::de::Error::custom(format!("non-canonical residue `{c}` at position {}", i + 1))
        })
    }
}

impl Serialize for AminoAcid {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_char(self.to_char())
    }
}

impl<'de> Deserialize<'de> for AminoAcid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let c = char::deserialize(d)?;
        AminoAcid::from_char(c)
            .ok_or_else(|| serde::de::Error::custom(format!("non-canonical residue `{c}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_every_symbol() {
        for (i, aa) in AminoAcid::ALL.iter().enumerate() {
            assert_eq!(aa.index(), i);
            assert_eq!(AminoAcid::from_char(aa.to_char()), Some(*aa));
        }
        assert_eq!(to_string(&AminoAcid::ALL), "ARNDCQEGHILKMFPSTWYV");
    }

    #[test]
    fn rejects_non_canonical() {
        for c in ['X', 'B', 'Z', 'U', 'O', '*', 'a', '-'] {
            assert!(AminoAcid::from_char(c).is_none(), "{c}");
        }
        assert_eq!(parse_residues("ACX"), Err((2, 'X')));
    }
}
