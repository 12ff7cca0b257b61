//! Text formats for graphs and partitions.
//!
//! Edge lists hold one edge per line as `u v` or `u v w`, with 0-indexed
//! vertices, `#` comments and blank lines ignored. A `# vertices N` comment
//! fixes the vertex count; otherwise it is the largest id plus one.
//! Partitions hold one `vertex color` pair per line, with an optional
//! `# colors K` comment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{check_entry, Graph, Partition};

/// Largest vertex count the parsers accept.
pub const MAX_VERTICES: usize = 1 << 22;

fn header<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let rest = line.trim_start().strip_prefix('#')?.trim_start();
    let rest = rest.strip_prefix(key)?;
    rest.starts_with(char::is_whitespace).then(|| rest.trim())
}

fn parse_count(line_no: usize, s: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::Parse { line: line_no, msg: format!("bad count {s:?}") })
}

fn fields(line: &str) -> Vec<&str> {
    let body = line.split('#').next().unwrap_or("");
    body.split_whitespace().collect()
}

fn parse_edges(text: &str, strict: bool) -> Result<Graph> {
    let mut declared = None;
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if let Some(v) = header(line, "vertices") {
            declared = Some(parse_count(line_no, v)?);
            continue;
        }
        let f = fields(line);
        if f.is_empty() {
            continue;
        }
        if f.len() != 2 && f.len() != 3 {
            return Err(Error::Parse { line: line_no, msg: format!("expected 2 or 3 fields, found {}", f.len()) });
        }
        let vertex = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::Parse { line: line_no, msg: format!("bad vertex id {s:?}") })
        };
        let u = vertex(f[0])?;
        let v = vertex(f[1])?;
        let w = match f.get(2) {
            Some(s) => s
                .parse::<f64>()
                .map_err(|_| Error::Parse { line: line_no, msg: format!("bad weight {s:?}") })?,
            None => 1.0,
        };
        entries.push((line_no, u, v, w));
    }
    let implied = entries.iter().map(|&(_, u, v, _)| u.max(v).saturating_add(1)).max().unwrap_or(0);
    let n = declared.unwrap_or(implied);
    if n > MAX_VERTICES {
        return Err(Error::Parse { line: 0, msg: format!("vertex count {n} exceeds {MAX_VERTICES}") });
    }
    let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (line, u, v, w) in entries {
        let (u, v) = match check_entry(line, n, u, v, w) {
            Err(Error::VertexOutOfRange { vertex, n }) => {
                return Err(Error::Parse { line, msg: format!("vertex {vertex} exceeds declared count {n}") })
            }
            r => r?,
        };
        let slot = merged.entry((u, v)).or_insert(0.0);
        if strict && *slot != 0.0 {
            return Err(Error::DuplicateEdge { line, u, v });
        }
        *slot += w;
    }
    Ok(Graph::from_sorted(n, merged))
}

/// Parses an edge list, summing the weights of repeated pairs.
pub fn parse_edge_list(text: &str) -> Result<Graph> {
    parse_edges(text, false)
}

/// Parses an edge list and rejects repeated pairs.
pub fn parse_edge_list_strict(text: &str) -> Result<Graph> {
    parse_edges(text, true)
}

pub fn write_edge_list(g: &Graph) -> String {
    let mut out = format!("# vertices {}\n", g.n());
    for e in g.edges() {
        if e.w == 1.0 {
            writeln!(out, "{} {}", e.u, e.v).unwrap();
        } else {
            writeln!(out, "{} {} {}", e.u, e.v, e.w).unwrap();
        }
    }
    out
}

pub fn parse_partition(text: &str) -> Result<Partition> {
    let mut declared = None;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if let Some(v) = header(line, "colors") {
            declared = Some(parse_count(line_no, v)?);
            continue;
        }
        let f = fields(line);
        if f.is_empty() {
            continue;
        }
        if f.len() != 2 {
            return Err(Error::Parse { line: line_no, msg: format!("expected 2 fields, found {}", f.len()) });
        }
        let num = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::Parse { line: line_no, msg: format!("bad integer {s:?}") })
        };
        pairs.push((line_no, num(f[0])?, num(f[1])?));
    }
    let n = pairs.len();
    if declared.is_some_and(|k| k > MAX_VERTICES) {
        return Err(Error::Parse { line: 0, msg: "color count too large".into() });
    }
    let mut chi = vec![usize::MAX; n];
    for &(line, x, c) in &pairs {
        if x >= n {
            return Err(Error::Parse { line, msg: format!("vertex {x} out of range for {n} entries") });
        }
        if chi[x] != usize::MAX {
            return Err(Error::Parse { line, msg: format!("vertex {x} listed twice") });
        }
        chi[x] = c;
    }
    let k = match declared {
        Some(k) => k,
        None => chi.iter().max().map_or(1, |&m| m + 1),
    };
    if let Some(&(line, x, c)) = pairs.iter().find(|&&(_, _, c)| c >= k) {
        return Err(Error::Parse { line, msg: format!("color {c} of vertex {x} is not below {k}") });
    }
    Partition::new(chi, k)
}

pub fn write_partition(p: &Partition) -> String {
    let mut out = format!("# colors {}\n", p.k());
    for (x, c) in p.chi().iter().enumerate() {
        writeln!(out, "{x} {c}").unwrap();
    }
    out
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<Graph> {
    parse_edge_list(&std::fs::read_to_string(path)?)
}

pub fn load_graph_strict(path: impl AsRef<Path>) -> Result<Graph> {
    parse_edge_list_strict(&std::fs::read_to_string(path)?)
}

pub fn save_graph(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    Ok(std::fs::write(path, write_edge_list(g))?)
}

pub fn load_partition(path: impl AsRef<Path>) -> Result<Partition> {
    parse_partition(&std::fs::read_to_string(path)?)
}

pub fn save_partition(p: &Partition, path: impl AsRef<Path>) -> Result<()> {
    Ok(std::fs::write(path, write_partition(p))?)
}
