use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::alphabet::{self, AminoAcid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RegionName {
    #[serde(rename = "CDR-H1")]
    CdrH1,
    #[serde(rename = "CDR-H2")]
    CdrH2,
    #[serde(rename = "CDR-H3")]
    CdrH3,
}

impl RegionName {
    pub const ALL: [RegionName; 3] = [RegionName::CdrH1, RegionName::CdrH2, RegionName::CdrH3];

    pub fn as_str(self) -> &'static str {
        match self {
            RegionName::CdrH1 => "CDR-H1",
            RegionName::CdrH2 => "CDR-H2",
            RegionName::CdrH3 => "CDR-H3",
        }
    }

    pub fn parse(s: &str) -> Option<RegionName> {
        Self::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

impl fmt::Display for RegionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A half-open span `[start, end)` of mutable positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpan {
    pub name: RegionName,
    pub start: usize,
    pub end: usize,
}

impl RegionSpan {
    pub fn new(name: RegionName, start: usize, end: usize) -> Self {
        RegionSpan { name, start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn positions(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationKind {
    Initial,
    Substitution,
    Crossover,
}

impl MutationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MutationKind::Initial => "initial",
            MutationKind::Substitution => "substitution",
            MutationKind::Crossover => "crossover",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lineage {
    pub main_parent: Option<String>,
    pub side_parent: Option<String>,
    pub kind: MutationKind,
}

impl Lineage {
    pub fn initial() -> Self {
        Lineage {
            main_parent: None,
            side_parent: None,
            kind: MutationKind::Initial,
        }
    }

    pub fn substitution(parent: impl Into<String>) -> Self {
        Lineage {
            main_parent: Some(parent.into()),
            side_parent: None,
            kind: MutationKind::Substitution,
        }
    }

    pub fn crossover(main: impl Into<String>, side: impl Into<String>) -> Self {
        Lineage {
            main_parent: Some(main.into()),
            side_parent: Some(side.into()),
            kind: MutationKind::Crossover,
        }
    }

    pub fn is_consistent(&self) -> bool {
        match self.kind {
            MutationKind::Initial => self.main_parent.is_none() && self.side_parent.is_none(),
            MutationKind::Substitution => self.main_parent.is_some() && self.side_parent.is_none(),
            MutationKind::Crossover => self.main_parent.is_some() && self.side_parent.is_some(),
        }
    }
}

/// An amino-acid chain with its mutable CDR spans and lineage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sequence {
    pub id: String,
    #[serde(with = "alphabet::residue_string")]
    residues: Vec<AminoAcid>,
    regions: Vec<RegionSpan>,
    pub lineage: Option<Lineage>,
}

impl Sequence {
    pub fn new(
        id: impl Into<String>,
        residues: Vec<AminoAcid>,
        regions: Vec<RegionSpan>,
        lineage: Option<Lineage>,
    ) -> Result<Self> {
        let s = Sequence {
            id: id.into(),
            residues,
            regions,
            lineage,
        };
        s.validate()?;
        Ok(s)
    }

    /// Parse residues from a one-letter string; no regions, initial lineage.
    pub fn parse(id: impl Into<String>, residues: &str) -> Result<Self> {
        let id = id.into();
        let residues = alphabet::parse_residues(residues).map_err(|(i, c)| Error::Residue {
            record: id.clone(),
            position: i + 1,
            found: c,
        })?;
        Sequence::new(id, residues, Vec::new(), Some(Lineage::initial()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::InvalidSequence {
            id: self.id.clone(),
            reason,
        };
        if self.residues.is_empty() {
            return Err(Error::EmptyRecord(self.id.clone()));
        }
        validate_regions(&self.regions, self.residues.len()).map_err(bad)?;
        if let Some(l) = &self.lineage {
            if !l.is_consistent() {
                return Err(bad(format!("inconsistent lineage {l:?}")));
            }
        }
        Ok(())
    }

    pub fn residues(&self) -> &[AminoAcid] {
        &self.residues
    }

    pub fn len(&self) -> usize {
        self.residues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }

    pub fn regions(&self) -> &[RegionSpan] {
        &self.regions
    }

    pub fn region(&self, name: RegionName) -> Option<&RegionSpan> {
        self.regions.iter().find(|r| r.name == name)
    }

    pub fn residue_string(&self) -> String {
        alphabet::to_string(&self.residues)
    }

    /// Replace the region annotation, re-validating bounds.
    pub fn with_regions(mut self, regions: Vec<RegionSpan>) -> Result<Self> {
        self.regions = regions;
        self.validate()?;
        Ok(self)
    }

    /// Union of all region spans, ascending.
    pub fn mutable_positions(&self) -> Vec<usize> {
        self.regions.iter().flat_map(|r| r.positions()).collect()
    }

    /// Build a sibling sequence with the same region layout.
    pub(crate) fn derive(&self, id: String, residues: Vec<AminoAcid>, lineage: Lineage) -> Self {
        debug_assert_eq!(residues.len(), self.residues.len());
        Sequence {
            id,
            residues,
            regions: self.regions.clone(),
            lineage: Some(lineage),
        }
    }
}

fn validate_regions(regions: &[RegionSpan], len: usize) -> Result<(), String> {
    let mut names = HashSet::new();
    let mut prev_end = 0;
    for r in regions {
        if r.start >= r.end {
            return Err(format!("{} span [{}, {}) is empty", r.name, r.start, r.end));
        }
        if r.end > len {
            return Err(format!(
                "{} span [{}, {}) exceeds length {len}",
                r.name, r.start, r.end
            ));
        }
        if r.start < prev_end {
            return Err(format!("{} overlaps or is out of order", r.name));
        }
        if !names.insert(r.name) {
            return Err(format!("{} annotated twice", r.name));
        }
        prev_end = r.end;
    }
    Ok(())
}

/// Region annotation file: sequence id → list of spans.
pub type RegionMap = BTreeMap<String, Vec<RegionSpan>>;

pub fn parse_region_map(json: &str) -> Result<RegionMap> {
    Ok(serde_json::from_str(json)?)
}

/// Attach regions to parsed sequences. Ids in the map that match no sequence are an error.
pub fn apply_regions(seqs: Vec<Sequence>, map: &RegionMap) -> Result<Vec<Sequence>> {
    let known: HashSet<&str> = seqs.iter().map(|s| s.id.as_str()).collect();
    if let Some(id) = map.keys().find(|k| !known.contains(k.as_str())) {
        return Err(Error::InvalidInput(format!(
            "region file names unknown sequence `{id}`"
        )));
    }
    seqs.into_iter()
        .map(|s| match map.get(&s.id) {
            Some(spans) => {
                let mut spans = spans.clone();
                spans.sort_by_key(|r| r.start);
                s.with_regions(spans)
            }
            None => Ok(s),
        })
        .collect()
}
