//! Test double for the external oracle protocol: every rank scores a
//! sequence by its length. `--corrupt <arity|missing-id|malformed>` breaks
//! the reply to the last request in the named way.

use std::io::{self, BufRead, Write};

use serde_json::{json, Value};

fn main() -> io::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let corrupt = match args.as_slice() {
        [] => None,
        [flag, kind] if flag == "--corrupt" && ["arity", "missing-id", "malformed"].contains(&kind.as_str()) => {
            Some(kind.clone())
        }
        _ => {
            eprintln!("usage: echo-oracle [--corrupt arity|missing-id|malformed]");
            std::process::exit(2);
        }
    };
    let requests: Vec<Value> = io::stdin()
        .lock()
        .lines()
        .map_while(Result::ok)
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(&l).unwrap_or(Value::Null))
        .collect();
    let mut out = io::stdout().lock();
    let last = requests.len().saturating_sub(1);
    for (k, req) in requests.iter().enumerate() {
        let id = req["id"].as_str().unwrap_or_default();
        let len = req["sequence"].as_str().map_or(0, str::len) as f64;
        let ranks = req["ranks"].as_u64().unwrap_or(1) as usize;
        let line = match (k == last, corrupt.as_deref()) {
            (true, Some("missing-id")) => continue,
            (true, Some("malformed")) => format!("{{\"id\": \"{id}\", \"scores\": [{len}"),
            (true, Some("arity")) => json!({ "id": id, "scores": vec![len; ranks + 1] }).to_string(),
            _ => json!({ "id": id, "scores": vec![len; ranks] }).to_string(),
        };
        writeln!(out, "{line}")?;
    }
    Ok(())
}
