//! Plain-text edge list: first line `n`, then `u v w` per edge, plus optional
//! `# selfloop i v` lines. Other `#` lines are comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Edge, Graph};
use crate::error::{Error, Result};

pub fn read_graph(path: impl AsRef<Path>) -> Result<Graph> {
    let text = std::fs::read_to_string(path)?;
    parse_graph(&text)
}

pub fn write_graph(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_graph(g))?;
    Ok(())
}

pub fn format_graph(g: &Graph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", g.n());
    for e in g.edges() {
        let _ = writeln!(out, "{} {} {:?}", e.u, e.v, e.w);
    }
    for (i, w) in g.self_loops() {
        let _ = writeln!(out, "# selfloop {i} {w:?}");
    }
    out
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("invalid {what} `{tok}`")))
}

pub fn parse_graph(text: &str) -> Result<Graph> {
    let mut n: Option<usize> = None;
    let mut edges = Vec::new();
    let mut loops = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut toks = rest.split_whitespace();
            if toks.next() == Some("selfloop") {
                if n.is_none() {
                    return Err(parse_err(line_no, "self-loop before node count"));
                }
                let i: usize = field(toks.next(), line_no, "node index")?;
                let w: f64 = field(toks.next(), line_no, "self-loop weight")?;
                if loops.insert(i, w).is_some() {
                    return Err(parse_err(line_no, format!("duplicate self-loop on node {i}")));
                }
            }
            continue;
        }
        let mut toks = line.split_whitespace();
        match n {
            None => {
                n = Some(field(toks.next(), line_no, "node count")?);
                if toks.next().is_some() {
                    return Err(parse_err(line_no, "trailing tokens after node count"));
                }
            }
            Some(_) => {
                let u: usize = field(toks.next(), line_no, "source index")?;
                let v: usize = field(toks.next(), line_no, "target index")?;
                let w: f64 = field(toks.next(), line_no, "weight")?;
                if toks.next().is_some() {
                    return Err(parse_err(line_no, "trailing tokens after weight"));
                }
                edges.push((line_no, Edge::new(u, v, w)));
            }
        }
    }
    let n = n.ok_or_else(|| parse_err(1, "missing node count"))?;
    // Validate per edge so errors carry the offending line.
    for (line_no, e) in &edges {
        if e.v >= n {
            return Err(parse_err(*line_no, format!("node index {} out of range", e.v)));
        }
        if e.u == e.v {
            return Err(parse_err(*line_no, "self-loop must use `# selfloop i v`"));
        }
        if !(e.w.is_finite() && e.w > 0.0) {
            return Err(parse_err(*line_no, format!("non-positive weight {}", e.w)));
        }
    }
    Graph::new(n, edges.into_iter().map(|(_, e)| e).collect(), loops)
}
