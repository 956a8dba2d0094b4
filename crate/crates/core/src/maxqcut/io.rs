//! Graph text files, ULC JSON files and reduction sidecars.
//!
//! Graph files hold one `u v w` edge per line (0-based vertices, decimal
//! weight) with `#` comments. A `# vertices N` comment fixes the vertex count
//! so trailing isolated vertices survive a round trip.

use std::fmt::Write as _;
use std::path::Path;

use super::instance::{Edge, MaxQCutInstance};
use super::ulc::{ReductionMeta, UlcInstance};
use crate::error::{Error, Result};

pub fn parse_graph(text: &str, q: usize) -> Result<MaxQCutInstance> {
    let mut edges = Vec::new();
    let mut declared: Option<usize> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(comment) = line.strip_prefix('#') {
            let mut it = comment.split_whitespace();
            if it.next() == Some("vertices") {
                let n = it
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::Parse(format!("line {}: bad vertex count", lineno + 1)))?;
                declared = Some(n);
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::Parse(format!("line {}: expected 'u v w', got '{line}'", lineno + 1));
        if toks.len() != 3 {
            return Err(bad());
        }
        let u: usize = toks[0].parse().map_err(|_| bad())?;
        let v: usize = toks[1].parse().map_err(|_| bad())?;
        let w: f64 = toks[2].parse().map_err(|_| bad())?;
        edges.push(Edge { u, v, w });
    }
    let needed = edges.iter().map(|e| e.u.max(e.v) + 1).max().unwrap_or(0);
    let vertices = match declared {
        Some(n) if n < needed => {
            return Err(Error::Parse(format!("declared {n} vertices but edges reference vertex {}", needed - 1)))
        }
        Some(n) => n,
        None => needed,
    };
    MaxQCutInstance::new(vertices, edges, q)
}

/// Canonical text: `u ≤ v`, edges sorted by `(u, v)`, shortest round-trip
/// weights.
pub fn format_graph(g: &MaxQCutInstance) -> String {
    let mut edges: Vec<Edge> = g
        .edges
        .iter()
        .map(|e| Edge {
            u: e.u.min(e.v),
            v: e.u.max(e.v),
            w: e.w,
        })
        .collect();
    edges.sort_by_key(|e| (e.u, e.v));
    let mut out = format!("# vertices {}\n", g.vertices);
    for e in edges {
        writeln!(out, "{} {} {}", e.u, e.v, e.w).expect("write to string");
    }
    out
}

pub fn read_graph(path: &Path, q: usize) -> Result<MaxQCutInstance> {
    parse_graph(&std::fs::read_to_string(path)?, q)
}

pub fn write_graph(path: &Path, g: &MaxQCutInstance) -> Result<()> {
    Ok(std::fs::write(path, format_graph(g))?)
}

pub fn read_ulc(path: &Path) -> Result<UlcInstance> {
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    UlcInstance::from_json(&v)
}

pub fn write_ulc(path: &Path, l: &UlcInstance) -> Result<()> {
    Ok(std::fs::write(path, serde_json::to_string_pretty(&l.to_json())?)?)
}

/// Sidecar path for a graph file: `graph.txt` → `graph.txt.meta.json`.
pub fn sidecar_path(graph: &Path) -> std::path::PathBuf {
    let mut s = graph.as_os_str().to_owned();
    s.push(".meta.json");
    s.into()
}

pub fn read_sidecar(path: &Path) -> Result<ReductionMeta> {
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    ReductionMeta::from_sidecar(&v)
}

pub fn write_sidecar(path: &Path, meta: &ReductionMeta) -> Result<()> {
    Ok(std::fs::write(path, serde_json::to_string(&meta.to_sidecar())?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_comments_and_isolated_vertices() {
        let g = parse_graph("# a graph\n# vertices 5\n0 1 0.5\n\n2 1 1\n", 3).unwrap();
        assert_eq!(g.vertices, 5);
        assert_eq!(g.edges.len(), 2);
        assert_eq!(format_graph(&g), "# vertices 5\n0 1 0.5\n1 2 1\n");
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_graph("0 1\n", 2), Err(Error::Parse(_))));
        assert!(matches!(parse_graph("0 x 1\n", 2), Err(Error::Parse(_))));
        assert!(matches!(parse_graph("# vertices 1\n0 1 1\n", 2), Err(Error::Parse(_))));
        assert!(parse_graph("0 1 1.5\n", 2).is_err());
    }

    #[test]
    fn weights_survive_text() {
        let w = 0.1 + 0.2;
        let g = MaxQCutInstance::new(2, vec![Edge { u: 1, v: 0, w }], 2).unwrap();
        let back = parse_graph(&format_graph(&g), 2).unwrap();
        assert_eq!(back.edges[0].w, w);
    }

    #[test]
    fn files_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.txt");
        let g = MaxQCutInstance::petersen(3).unwrap();
        write_graph(&p, &g).unwrap();
        let back = read_graph(&p, 3).unwrap();
        assert_eq!(back.cut_value(&[0; 10]), 0.0);
        assert_eq!(back.total_weight(), 15.0);
        assert_eq!(sidecar_path(&p).file_name().unwrap(), "g.txt.meta.json");
    }
}
