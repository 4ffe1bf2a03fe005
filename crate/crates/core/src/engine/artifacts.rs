//! Per-iteration CSV tables.

use std::fmt::Write as _;
use std::path::Path;

use super::state::{write_atomic, Record, RunState};
use crate::error::{Error, Result};
use crate::evolve::Population;
use crate::seqcore::{Lineage, Sequence};

/// Named file contents produced by one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationArtifacts {
    pub iteration: usize,
    pub files: Vec<(String, String)>,
}

impl IterationArtifacts {
    pub fn dir_name(&self) -> String {
        format!("iter_{:03}", self.iteration)
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    /// Write into `root/iter_NNN/`.
    pub fn write(&self, root: &Path) -> Result<()> {
        let dir = root.join(self.dir_name());
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for (name, content) in &self.files {
            write_atomic(&dir.join(name), content.as_bytes())?;
        }
        Ok(())
    }
}

fn lineage_fields(l: Option<&Lineage>) -> String {
    match l {
        Some(l) => format!(
            "{},{},{}",
            l.main_parent.as_deref().unwrap_or(""),
            l.side_parent.as_deref().unwrap_or(""),
            l.kind.as_str()
        ),
        None => ",,initial".into(),
    }
}

fn score_header(s: &mut String, r: usize) {
    for k in 1..=r {
        write!(s, ",score_{k}").unwrap();
    }
}

pub fn candidates_csv(c: &[Sequence]) -> String {
    let mut s = String::from("id,residues,main_parent,side_parent,mutation_kind\n");
    for q in c {
        writeln!(s, "{},{},{}", q.id, q.residue_string(), lineage_fields(q.lineage.as_ref())).unwrap();
    }
    s
}

pub fn selected_csv(records: &[Record]) -> String {
    let r = records.first().map_or(0, |x| x.scores.len());
    let mut s = String::from("id,residues");
    score_header(&mut s, r);
    s.push_str(",fitness\n");
    for rec in records {
        write!(s, "{},{}", rec.sequence.id, rec.sequence.residue_string()).unwrap();
        for v in &rec.scores {
            write!(s, ",{v}").unwrap();
        }
        writeln!(s, ",{}", rec.fitness).unwrap();
    }
    s
}

pub fn population_csv(pop: &Population, state: &RunState) -> String {
    let mut s = String::from("id,residues");
    score_header(&mut s, state.weights.len());
    s.push_str(",fitness,iteration_born,main_parent,side_parent,mutation_kind\n");
    for m in &pop.members {
        let seq = &m.sequence;
        write!(s, "{},{}", seq.id, seq.residue_string()).unwrap();
        if let Some(rec) = state.record(&seq.id) {
            for v in &rec.scores {
                write!(s, ",{v}").unwrap();
            }
        }
        writeln!(s, ",{},{},{}", m.fitness, m.iteration_born, lineage_fields(seq.lineage.as_ref())).unwrap();
    }
    s
}
