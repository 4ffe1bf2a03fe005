//! Line-delimited JSON protocol to an external scoring program, one process per batch.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use wait_timeout::ChildExt;

use super::{check_scores, Oracle, RankScores};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::seqcore::{AminoAcid, Sequence};

fn default_timeout() -> f64 {
    3600.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalOracleSpec {
    /// Program followed by its arguments.
    pub command: Vec<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    /// Flip signs of returned scores, e.g. for raw docking energies.
    #[serde(default)]
    pub negate_scores: bool,
}

impl ExternalOracleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.command.is_empty() || self.command[0].is_empty() {
            return Err(Error::Config("external oracle: command must name a program".into()));
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(Error::Config("external oracle: timeout_secs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ExternalOracle {
    spec: ExternalOracleSpec,
    ranks: usize,
}

impl ExternalOracle {
    pub fn new(spec: ExternalOracleSpec, ranks: usize) -> Result<Self> {
        spec.validate()?;
        Ok(ExternalOracle { spec, ranks })
    }
}

impl Oracle for ExternalOracle {
    fn ranks(&self) -> usize {
        self.ranks
    }

    fn evaluate(&mut self, batch: &[Sequence]) -> Result<Vec<RankScores>> {
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        let mut ids = HashSet::new();
        if let Some(dup) = batch.iter().find(|s| !ids.insert(s.id.as_str())) {
            return Err(Error::DuplicateId(dup.id.clone()));
        }
        let lines = run_process(&self.spec, self.ranks, batch)?;
        let mut got = parse_responses(&lines, batch, self.ranks)?;
        Ok(batch
            .iter()
            .map(|s| {
                let mut v = got.remove(&s.id).unwrap();
                if self.spec.negate_scores {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
                v
            })
            .collect())
    }
}

fn run_process(spec: &ExternalOracleSpec, ranks: usize, batch: &[Sequence]) -> Result<Vec<String>> {
    let mut child = Command::new(&spec.command[0])
        .args(&spec.command[1..])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(Error::Process)?;

    let mut requests = String::new();
    for s in batch {
        requests.push_str(&json!({"id": s.id, "sequence": s.residue_string(), "ranks": ranks}).to_string());
        requests.push('\n');
    }
    let mut stdin = child.stdin.take().unwrap();
    // A child that stops reading early surfaces through its responses, not here.
    let writer = thread::spawn(move || {
        let _ = stdin.write_all(requests.as_bytes());
    });
    let stdout = child.stdout.take().unwrap();
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in BufReader::new(stdout).lines() {
            if tx.send(line).is_err() {
                break;
            }
        }
    });
    let mut stderr = child.stderr.take().unwrap();
    let err_reader = thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr.read_to_string(&mut s);
        s
    });

    let timeout = Duration::from_secs_f64(spec.timeout_secs);
    let deadline = Instant::now() + timeout;
    let timed_out = |child: &mut std::process::Child| {
        let _ = child.kill();
        let _ = child.wait();
        Error::OracleTimeout { secs: spec.timeout_secs }
    };
    let mut lines = Vec::new();
    loop {
        let left = deadline.saturating_duration_since(Instant::now());
        match rx.recv_timeout(left) {
            Ok(Ok(line)) => lines.push(line),
            Ok(Err(e)) => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(Error::Process(e));
            }
            Err(mpsc::RecvTimeoutError::Disconnected) => break,
            Err(mpsc::RecvTimeoutError::Timeout) => return Err(timed_out(&mut child)),
        }
    }
    let left = deadline.saturating_duration_since(Instant::now());
    let status = match child.wait_timeout(left).map_err(Error::Process)? {
        Some(status) => status,
        None => return Err(timed_out(&mut child)),
    };
    let _ = writer.join();
    let stderr = err_reader.join().unwrap_or_default();
    if !status.success() {
        return Err(Error::OracleExit {
            status: status.to_string(),
            stderr: stderr.trim().to_string(),
        });
    }
    Ok(lines)
}

fn parse_responses(lines: &[String], batch: &[Sequence], ranks: usize) -> Result<HashMap<String, RankScores>> {
    let expected: HashSet<&str> = batch.iter().map(|s| s.id.as_str()).collect();
    let mut got: HashMap<String, RankScores> = HashMap::new();
    for line in lines.iter().filter(|l| !l.trim().is_empty()) {
        let malformed = || Error::MalformedResponse { line: line.clone() };
        let v: Value = serde_json::from_str(line).map_err(|_| malformed())?;
        let id = v.get("id").and_then(Value::as_str).ok_or_else(malformed)?;
        if !expected.contains(id) || got.contains_key(id) {
            return Err(Error::UnexpectedResponse(id.to_string()));
        }
        if let Some(msg) = v.get("error") {
            return Err(Error::OracleReported {
                id: id.to_string(),
                message: msg.as_str().map_or_else(|| msg.to_string(), str::to_string),
            });
        }
        let scores = v
            .get("scores")
            .and_then(Value::as_array)
            .ok_or_else(malformed)?
            .iter()
            .map(|x| x.as_f64().ok_or_else(malformed))
            .collect::<Result<Vec<f64>>>()?;
        check_scores(id, &scores, ranks)?;
        got.insert(id.to_string(), scores);
    }
    if let Some(missing) = batch.iter().find(|s| !got.contains_key(&s.id)) {
        return Err(Error::MissingResponse(missing.id.clone()));
    }
    Ok(got)
}

/// Outcome of probing an external program with the bundled fixtures.
#[derive(Debug, Clone)]
pub struct ConformanceReport {
    pub passed: bool,
    pub diagnostics: Vec<String>,
}

impl ConformanceReport {
    pub fn verdict(&self) -> &'static str {
        if self.passed {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

/// Send three fixture sequences through the protocol and validate the replies.
pub fn conformance_check(spec: &ExternalOracleSpec, ranks: usize) -> ConformanceReport {
    let parent = fixtures::parent();
    let mut batch = vec![parent.clone()];
    for (k, pos) in [(1, 100usize), (2, 30)] {
        let mut r = parent.residues().to_vec();
        r[pos] = if r[pos] == AminoAcid::A { AminoAcid::G } else { AminoAcid::A };
        batch.push(Sequence::new(format!("probe{k}"), r, parent.regions().to_vec(), None).unwrap());
    }
    let mut diagnostics = vec![format!("sent {} requests with ranks = {ranks}", batch.len())];
    let outcome = ExternalOracle::new(spec.clone(), ranks).and_then(|mut o| o.evaluate(&batch));
    let passed = match outcome {
        Ok(scores) => {
            for (s, v) in batch.iter().zip(&scores) {
                diagnostics.push(format!("{}: {} scores {:?}", s.id, v.len(), v));
            }
            true
        }
        Err(e) => {
            diagnostics.push(e.to_string());
            false
        }
    };
    ConformanceReport { passed, diagnostics }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sh(script: &str) -> ExternalOracleSpec {
        ExternalOracleSpec {
            command: vec!["sh".into(), "-c".into(), script.into()],
            timeout_secs: 10.0,
            negate_scores: false,
        }
    }

    fn batch() -> Vec<Sequence> {
        vec![Sequence::parse("s1", "ACDEF").unwrap(), Sequence::parse("s2", "KLM").unwrap()]
    }

    fn run(script: &str, ranks: usize) -> Result<Vec<RankScores>> {
        ExternalOracle::new(sh(script), ranks)?.evaluate(&batch())
    }

    #[test]
    fn out_of_order_responses_are_matched_by_id() {
        let out = run(
            r#"cat >/dev/null; echo '{"id":"s2","scores":[1,2]}'; echo '{"id":"s1","scores":[70.1,69.8]}'"#,
            2,
        )
        .unwrap();
        assert_eq!(out, vec![vec![70.1, 69.8], vec![1.0, 2.0]]);
    }

    #[test]
    fn requests_follow_the_wire_format() {
        // Echo the first request back as an error message to inspect it.
        let err = run(r#"read l; printf '{"id":"s1","error":%s}\n' "$(printf '%s' "$l" | sed 's/"/\\"/g; s/^/"/; s/$/"/')""#, 4)
            .unwrap_err();
        match err {
            Error::OracleReported { id, message } => {
                assert_eq!(id, "s1");
                let v: Value = serde_json::from_str(&message).unwrap();
                assert_eq!(v, json!({"id": "s1", "sequence": "ACDEF", "ranks": 4}));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn arity_error_names_the_sequence() {
        let err = run(r#"cat >/dev/null; echo '{"id":"s1","scores":[1,2,3]}'; echo '{"id":"s2","scores":[1,2,3,4]}'"#, 4)
            .unwrap_err();
        assert!(matches!(err, Error::ScoreArity { ref id, expected: 4, got: 3 } if id == "s1"), "{err}");
    }

    #[test]
    fn missing_unknown_and_malformed() {
        let err = run(r#"cat >/dev/null; echo '{"id":"s1","scores":[1]}'"#, 1).unwrap_err();
        assert!(matches!(err, Error::MissingResponse(ref id) if id == "s2"));
        let err = run(r#"cat >/dev/null; echo '{"id":"zz","scores":[1]}'"#, 1).unwrap_err();
        assert!(matches!(err, Error::UnexpectedResponse(ref id) if id == "zz"));
        let err = run(r#"cat >/dev/null; echo 'not json at all'"#, 1).unwrap_err();
        assert!(matches!(err, Error::MalformedResponse { ref line } if line == "not json at all"));
        let err = run(r#"cat >/dev/null; echo '{"id":"s1","scores":["x"]}'"#, 1).unwrap_err();
        assert!(matches!(err, Error::MalformedResponse { .. }));
    }

    #[test]
    fn exit_status_and_timeout() {
        let err = run("cat >/dev/null; echo boom >&2; exit 3", 1).unwrap_err();
        assert!(matches!(err, Error::OracleExit { ref stderr, .. } if stderr == "boom"), "{err}");
        let spec = ExternalOracleSpec { timeout_secs: 0.3, ..sh("sleep 5") };
        let start = Instant::now();
        let err = ExternalOracle::new(spec, 1).unwrap().evaluate(&batch()).unwrap_err();
        assert!(matches!(err, Error::OracleTimeout { .. }));
        assert!(start.elapsed() < Duration::from_secs(4));
    }

    #[test]
    fn negation_flag() {
        let spec = ExternalOracleSpec {
            negate_scores: true,
            ..sh(r#"cat >/dev/null; echo '{"id":"s1","scores":[-5]}'; echo '{"id":"s2","scores":[2.5]}'"#)
        };
        let out = ExternalOracle::new(spec, 1).unwrap().evaluate(&batch()).unwrap();
        assert_eq!(out, vec![vec![5.0], vec![-2.5]]);
    }

    #[test]
    fn spawn_failure_is_a_runtime_error() {
        let spec = ExternalOracleSpec {
            command: vec!["/nonexistent/oracle".into()],
            timeout_secs: 1.0,
            negate_scores: false,
        };
        let err = ExternalOracle::new(spec.clone(), 1).unwrap().evaluate(&batch()).unwrap_err();
        assert!(matches!(err, Error::Process(_)));
        let report = conformance_check(&spec, 4);
        assert!(!report.passed);
        assert_eq!(report.verdict(), "FAIL");
    }
}
