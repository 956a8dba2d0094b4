use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{range_err, Error, Result};
use crate::rng::SeededStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

/// Weighted graph to be cut into q parts. Self-loops are kept but never cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxQCutInstance {
    pub vertices: usize,
    pub edges: Vec<Edge>,
    pub q: usize,
}

/// Largest labeling space for [`brute_force_opt`].
pub const MAX_BRUTE: usize = 1 << 24;

impl MaxQCutInstance {
    pub fn new(vertices: usize, edges: Vec<Edge>, q: usize) -> Result<Self> {
        if q < 2 {
            return Err(range_err(format!("need q >= 2, got {q}")));
        }
        let mut seen = HashSet::new();
        for e in &edges {
            if e.u >= vertices || e.v >= vertices {
                return Err(Error::Index(format!("edge ({}, {}) outside {vertices} vertices", e.u, e.v)));
            }
            if !(0.0..=1.0).contains(&e.w) {
                return Err(range_err(format!("weight {} outside [0, 1]", e.w)));
            }
            if !seen.insert((e.u.min(e.v), e.u.max(e.v))) {
                return Err(Error::Invariant(format!("duplicate edge ({}, {})", e.u, e.v)));
            }
        }
        Ok(MaxQCutInstance { vertices, edges, q })
    }

    pub fn with_q(&self, q: usize) -> Result<Self> {
        MaxQCutInstance::new(self.vertices, self.edges.clone(), q)
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.w).sum()
    }

    /// Weight of edges whose endpoints get different labels.
    pub fn cut_value(&self, labels: &[usize]) -> f64 {
        self.edges
            .iter()
            .filter(|e| e.u != e.v && labels[e.u] != labels[e.v])
            .map(|e| e.w)
            .sum()
    }

    /// Same graph with vertex `i` renamed `perm[i]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                u: perm[e.u],
                v: perm[e.v],
                w: e.w,
            })
            .collect();
        MaxQCutInstance::new(self.vertices, edges, self.q)
    }

    pub fn complete(n: usize, q: usize) -> Result<Self> {
        let edges = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| Edge { u, v, w: 1.0 }))
            .collect();
        MaxQCutInstance::new(n, edges, q)
    }

    pub fn path(n: usize, q: usize) -> Result<Self> {
        let edges = (1..n).map(|v| Edge { u: v - 1, v, w: 1.0 }).collect();
        MaxQCutInstance::new(n, edges, q)
    }

    /// Erdős–Rényi graph; unit weights or uniform `[0, 1]`.
    pub fn gnp(n: usize, p: f64, unit: bool, q: usize, rng: &mut SeededStream) -> Result<Self> {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < p {
                    let w = if unit { 1.0 } else { rng.random::<f64>() };
                    edges.push(Edge { u, v, w });
                }
            }
        }
        MaxQCutInstance::new(n, edges, q)
    }

    /// Random bipartite graph between `a` and `b` vertices.
    pub fn bipartite(a: usize, b: usize, p: f64, unit: bool, q: usize, rng: &mut SeededStream) -> Result<Self> {
        let mut edges = Vec::new();
        for u in 0..a {
            for v in a..a + b {
                if rng.random::<f64>() < p {
                    let w = if unit { 1.0 } else { rng.random::<f64>() };
                    edges.push(Edge { u, v, w });
                }
            }
        }
        MaxQCutInstance::new(a + b, edges, q)
    }

    pub fn petersen(q: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..5 {
            edges.push(Edge { u: i, v: (i + 1) % 5, w: 1.0 });
            edges.push(Edge { u: i, v: i + 5, w: 1.0 });
            edges.push(Edge { u: 5 + i, v: 5 + (i + 2) % 5, w: 1.0 });
        }
        MaxQCutInstance::new(10, edges, q)
    }
}

/// Exact optimum by enumeration, with vertex 0 fixed to label 0.
pub fn brute_force_opt(g: &MaxQCutInstance) -> Result<(f64, Vec<usize>)> {
    let q = g.q;
    let v = g.vertices;
    if v == 0 {
        return Ok((0.0, Vec::new()));
    }
    let total = q
        .checked_pow(v as u32)
        .filter(|&t| t <= MAX_BRUTE)
        .ok_or_else(|| Error::Scale(format!("{q}^{v} labelings exceed {MAX_BRUTE}")))?;
    let mut labels = vec![0usize; v];
    let mut best = (g.cut_value(&labels), labels.clone());
    for _ in 1..total / q {
        for d in labels[1..].iter_mut().rev() {
            *d += 1;
            if *d < q {
                break;
            }
            *d = 0;
        }
        let val = g.cut_value(&labels);
        if val > best.0 {
            best = (val, labels.clone());
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_small_graphs() {
        assert_eq!(brute_force_opt(&MaxQCutInstance::path(3, 2).unwrap()).unwrap().0, 2.0);
        assert_eq!(brute_force_opt(&MaxQCutInstance::complete(3, 2).unwrap()).unwrap().0, 2.0);
        assert_eq!(brute_force_opt(&MaxQCutInstance::complete(3, 3).unwrap()).unwrap().0, 3.0);
        // Petersen is 3-colorable (all 15 edges cut); its max cut is 12.
        assert_eq!(brute_force_opt(&MaxQCutInstance::petersen(3).unwrap()).unwrap().0, 15.0);
        assert_eq!(brute_force_opt(&MaxQCutInstance::petersen(2).unwrap()).unwrap().0, 12.0);
    }

    #[test]
    fn rejects_bad_instances() {
        let e = |u, v, w| Edge { u, v, w };
        assert!(matches!(MaxQCutInstance::new(2, vec![e(0, 1, 1.0), e(1, 0, 0.5)], 2), Err(Error::Invariant(_))));
        assert!(matches!(MaxQCutInstance::new(2, vec![e(0, 1, 1.5)], 2), Err(Error::Range(_))));
        assert!(matches!(MaxQCutInstance::new(2, vec![e(0, 2, 1.0)], 2), Err(Error::Index(_))));
    }

    #[test]
    fn self_loops_never_cut() {
        let g = MaxQCutInstance::new(2, vec![Edge { u: 0, v: 0, w: 1.0 }, Edge { u: 0, v: 1, w: 0.5 }], 2).unwrap();
        assert_eq!(g.cut_value(&[0, 1]), 0.5);
    }
}
