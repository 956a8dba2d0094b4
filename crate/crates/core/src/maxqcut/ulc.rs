//! Unique label cover instances and the long-code reduction to MAX-q-CUT.
//!
//! The verifier picks `v ∈ V` uniformly, two neighbours `w, w'` of `v`
//! independently (possibly equal), `x ∈ [q]^M` uniformly and `y` from the
//! ρ-correlated noise `μ(y_i | x_i)`, then queries `f_w(P_{σ_{v,w}} x)` and
//! `f_{w'}(P_{σ_{v,w'}} y)` where `P_σ(x)_i = x_{σ(i)}`. It accepts when the
//! two answers differ. Vertices of the output graph are the table entries
//! `(w, z)`, indexed `w·q^M + z` with `z` in the `[q]^M` table layout.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::instance::{Edge, MaxQCutInstance};
use crate::error::{range_err, Error, Result};
use crate::fourier::{decode, encode, table_len, transform, DiscreteFunction, RangeTag};
use crate::rng::SeededStream;

/// Largest `q^M · |W|` accepted by [`ulc_reduce`].
pub const MAX_REDUCTION_VERTICES: usize = 1 << 20;
/// Largest number of verifier outcomes `(v, w, w', x, y)` enumerated.
pub const MAX_QUERY_PAIRS: u128 = 1 << 28;
/// Exact rational weights are used when `q^M · M` is at most this.
pub const EXACT_LIMIT: usize = 1 << 12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UlcEdge {
    pub v: usize,
    pub w: usize,
    /// `σ_{v,w}` as `perm[i] = σ(i)`.
    pub perm: Vec<usize>,
}

/// Bipartite label-cover instance with bijective constraints
/// `σ_{v,w}(l(w)) = l(v)`, regular on the `V` side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UlcInstance {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "V")]
    pub v: usize,
    #[serde(rename = "W")]
    pub w: usize,
    pub edges: Vec<UlcEdge>,
}

impl UlcInstance {
    pub fn new(m: usize, v: usize, w: usize, edges: Vec<UlcEdge>) -> Result<Self> {
        let l = UlcInstance { m, v, w, edges };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.v == 0 {
            return Err(range_err("need M >= 1 and V >= 1"));
        }
        for e in &self.edges {
            if e.v >= self.v || e.w >= self.w {
                return Err(Error::Index(format!("edge ({}, {}) outside V = {}, W = {}", e.v, e.w, self.v, self.w)));
            }
            if e.perm.len() != self.m {
                return Err(Error::Dimension {
                    expected: self.m,
                    got: e.perm.len(),
                });
            }
            let mut seen = vec![false; self.m];
            for &p in &e.perm {
                if p >= self.m || std::mem::replace(&mut seen[p], true) {
                    return Err(Error::Invariant(format!("σ_({},{}) = {:?} is not a bijection", e.v, e.w, e.perm)));
                }
            }
        }
        self.degree().map(|_| ())
    }

    /// Common degree of the `V` side.
    pub fn degree(&self) -> Result<usize> {
        let mut deg = vec![0usize; self.v];
        for e in &self.edges {
            deg[e.v] += 1;
        }
        let d = deg[0];
        if d == 0 || deg.iter().any(|&x| x != d) {
            return Err(Error::Invariant(format!("graph is not regular on the V side: degrees {deg:?}")));
        }
        Ok(d)
    }

    /// Edges grouped by their `V` endpoint.
    pub fn neighbourhoods(&self) -> Vec<Vec<&UlcEdge>> {
        let mut out = vec![Vec::new(); self.v];
        for e in &self.edges {
            out[e.v].push(e);
        }
        out
    }

    /// Fraction of edges with `σ_{v,w}(l(w)) = l(v)`.
    pub fn value(&self, lv: &[usize], lw: &[usize]) -> Result<f64> {
        if lv.len() != self.v || lw.len() != self.w {
            return Err(Error::Dimension {
                expected: self.v + self.w,
                got: lv.len() + lw.len(),
            });
        }
        let sat = self.edges.iter().filter(|e| lw[e.w] < self.m && e.perm[lw[e.w]] == lv[e.v]).count();
        Ok(sat as f64 / self.edges.len() as f64)
    }

    /// A random instance satisfied by the returned labeling `(l_V, l_W)`.
    /// Every `v` gets `d` distinct neighbours.
    pub fn random_satisfiable(
        m: usize,
        v: usize,
        w: usize,
        d: usize,
        rng: &mut SeededStream,
    ) -> Result<(Self, Vec<usize>, Vec<usize>)> {
        if m == 0 || d == 0 || d > w {
            return Err(range_err(format!("need M >= 1 and 1 <= d <= W, got M = {m}, d = {d}, W = {w}")));
        }
        let lv: Vec<usize> = (0..v).map(|_| rng.random_range(0..m)).collect();
        let lw: Vec<usize> = (0..w).map(|_| rng.random_range(0..m)).collect();
        let mut edges = Vec::with_capacity(v * d);
        let all: Vec<usize> = (0..w).collect();
        for (vi, &lab) in lv.iter().enumerate() {
            for &wi in all.choose_multiple(rng, d) {
                let mut perm: Vec<usize> = (0..m).collect();
                perm.shuffle(rng);
                let at = perm.iter().position(|&p| p == lab).expect("perm covers labels");
                perm.swap(at, lw[wi]);
                edges.push(UlcEdge { v: vi, w: wi, perm });
            }
        }
        Ok((UlcInstance::new(m, v, w, edges)?, lv, lw))
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("instance serializes")
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let l: UlcInstance = serde_json::from_value(v.clone())?;
        l.validate()?;
        Ok(l)
    }
}

/// What [`influence_decode`] and the sidecar file need to interpret a
/// reduced graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionMeta {
    pub q: usize,
    pub rho: f64,
    pub ulc: UlcInstance,
    /// Edge weights as exact fractions, aligned with the graph's edges.
    pub exact_weights: Option<Vec<String>>,
}

impl ReductionMeta {
    /// `q^M`.
    pub fn table_len(&self) -> usize {
        self.q.pow(self.ulc.m as u32)
    }

    pub fn vertex_count(&self) -> usize {
        self.table_len() * self.ulc.w
    }

    /// `(w, z)` for graph vertex `idx`.
    pub fn vertex(&self, idx: usize) -> (usize, Vec<usize>) {
        let t = self.table_len();
        (idx / t, decode(idx % t, self.q, self.ulc.m))
    }

    pub fn vertex_index(&self, w: usize, z: &[usize]) -> usize {
        w * self.table_len() + encode(z, self.q)
    }

    /// Coloring of the dictator proof `f_w(z) = z_{l(w)}`.
    pub fn honest_labels(&self, lw: &[usize]) -> Result<Vec<usize>> {
        if lw.len() != self.ulc.w || lw.iter().any(|&l| l >= self.ulc.m) {
            return Err(range_err("W labeling has wrong length or labels outside [M]"));
        }
        Ok((0..self.vertex_count())
            .map(|i| {
                let (w, z) = self.vertex(i);
                z[lw[w]]
            })
            .collect())
    }

    pub fn exact(&self) -> Option<Vec<BigRational>> {
        self.exact_weights
            .as_ref()
            .map(|ws| ws.iter().map(|s| s.parse::<BigRational>().expect("stored fraction parses")).collect())
    }

    /// `ρ` as the exact rational used by the reduction.
    pub fn rho_exact(&self) -> BigRational {
        BigRational::from_float(self.rho).expect("finite rho")
    }

    /// `(q-1)/q · (1-ρ)`, exactly.
    pub fn completeness_exact(&self) -> BigRational {
        let q = BigRational::from_integer(BigInt::from(self.q));
        (q.clone() - BigRational::one()) / q * (BigRational::one() - self.rho_exact())
    }

    /// Sidecar document: `{q, rho, vertex_map, ulc, exact_weights}`.
    pub fn to_sidecar(&self) -> Value {
        let vertex_map: Vec<Value> = (0..self.vertex_count())
            .map(|i| {
                let (w, z) = self.vertex(i);
                json!([w, z])
            })
            .collect();
        json!({
            "q": self.q,
            "rho": self.rho,
            "vertex_map": vertex_map,
            "ulc": self.ulc.to_json(),
            "exact_weights": self.exact_weights,
        })
    }

    pub fn from_sidecar(v: &Value) -> Result<Self> {
        let get = |k: &str| v.get(k).ok_or_else(|| Error::Metadata(format!("sidecar lacks '{k}'")));
        let q = get("q")?.as_u64().ok_or_else(|| Error::Parse("q must be an integer".into()))? as usize;
        let rho = get("rho")?.as_f64().ok_or_else(|| Error::Parse("rho must be a number".into()))?;
        let ulc = UlcInstance::from_json(get("ulc")?)?;
        let exact_weights = match v.get("exact_weights") {
            None | Some(Value::Null) => None,
            Some(w) => Some(serde_json::from_value::<Vec<String>>(w.clone())?),
        };
        if let Some(ws) = &exact_weights {
            for s in ws {
                s.parse::<BigRational>().map_err(|e| Error::Parse(format!("bad fraction {s}: {e}")))?;
            }
        }
        let meta = ReductionMeta {
            q,
            rho,
            ulc,
            exact_weights,
        };
        if let Some(Value::Array(map)) = v.get("vertex_map") {
            if map.len() != meta.vertex_count() {
                return Err(Error::Metadata("vertex_map length disagrees with q^M·W".into()));
            }
        }
        Ok(meta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub instance: MaxQCutInstance,
    pub meta: ReductionMeta,
}

impl Reduction {
    /// Total edge mass, self-loops included, with compensated summation.
    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.instance.edges.iter().map(|e| e.w))
    }

    pub fn exact_total(&self) -> Option<BigRational> {
        self.meta.exact().map(|ws| ws.into_iter().fold(BigRational::zero(), |a, b| a + b))
    }

    /// Exact cut weight of `labels` when rational weights were kept.
    pub fn exact_cut_value(&self, labels: &[usize]) -> Option<BigRational> {
        let ws = self.meta.exact()?;
        Some(
            self.instance
                .edges
                .iter()
                .zip(ws)
                .filter(|(e, _)| e.u != e.v && labels[e.u] != labels[e.v])
                .fold(BigRational::zero(), |a, (_, w)| a + w),
        )
    }
}

/// Neumaier-compensated sum.
fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for x in xs {
        let t = s + x;
        c += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
        s = t;
    }
    s + c
}

/// Builds the MAX-q-CUT instance whose cut weight under a coloring equals the
/// verifier's acceptance probability for the corresponding proof.
pub fn ulc_reduce(l: &UlcInstance, q: usize, rho: f64) -> Result<Reduction> {
    l.validate()?;
    if q < 2 {
        return Err(range_err(format!("need q >= 2, got {q}")));
    }
    if !(-1.0 / (q as f64 - 1.0) - 1e-15..=1.0).contains(&rho) {
        return Err(range_err(format!("rho = {rho} outside [-1/(q-1), 1]")));
    }
    let m = l.m;
    let tl = table_len(q, m, MAX_REDUCTION_VERTICES)?;
    if tl.checked_mul(l.w).is_none_or(|n| n > MAX_REDUCTION_VERTICES) {
        return Err(Error::Scale(format!("q^M·W = {tl}·{} exceeds {MAX_REDUCTION_VERTICES}", l.w)));
    }
    let d = l.degree()?;
    let exact = tl * m <= EXACT_LIMIT;

    // P_σ as a table map, one per ULC edge.
    let digits: Vec<Vec<usize>> = (0..tl).map(|t| decode(t, q, m)).collect();
    let nb = l.neighbourhoods();
    let permuted = |e: &UlcEdge| -> Vec<usize> {
        digits
            .iter()
            .map(|x| encode(&e.perm.iter().map(|&s| x[s]).collect::<Vec<_>>(), q))
            .collect()
    };
    let work = (l.v * d * d) as u128 * (tl as u128) * (tl as u128);
    if work > MAX_QUERY_PAIRS {
        return Err(Error::Scale(format!("{work} verifier outcomes exceed {MAX_QUERY_PAIRS}")));
    }

    // Exact weight of an edge is Σ_a count[a]·c_a with
    // c_a = p_same^a p_diff^(M-a) / (V d² q^M), so integer counts suffice.
    let qf = q as f64;
    let p_same = rho + (1.0 - rho) / qf;
    let p_diff = (1.0 - rho) / qf;
    let alive: Vec<bool> = (0..=m)
        .map(|a| (a == 0 || p_same != 0.0) && (a == m || p_diff != 0.0))
        .collect();
    let mut counts: BTreeMap<(usize, usize), Vec<u64>> = BTreeMap::new();
    for edges in &nb {
        let maps: Vec<Vec<usize>> = edges.iter().map(|e| permuted(e)).collect();
        for (ea, ma) in edges.iter().zip(&maps) {
            for (eb, mb) in edges.iter().zip(&maps) {
                let (ba, bb) = (ea.w * tl, eb.w * tl);
                for x in 0..tl {
                    let u = ba + ma[x];
                    for y in 0..tl {
                        let a = digits[x].iter().zip(&digits[y]).filter(|(p, r)| p == r).count();
                        if !alive[a] {
                            continue;
                        }
                        let v = bb + mb[y];
                        counts.entry((u.min(v), u.max(v))).or_insert_with(|| vec![0; m + 1])[a] += 1;
                    }
                }
            }
        }
    }

    let denom = (l.v * d * d) as f64 * tl as f64;
    let coef_f: Vec<f64> = (0..=m)
        .map(|a| p_same.powi(a as i32) * p_diff.powi((m - a) as i32) / denom)
        .collect();
    let mut edges = Vec::with_capacity(counts.len());
    let mut exact_weights = exact.then(Vec::new);
    let coef_q: Option<Vec<BigRational>> = exact.then(|| {
        let r = BigRational::from_float(rho).expect("finite rho");
        let qq = BigRational::from_integer(BigInt::from(q));
        let ps = r.clone() + (BigRational::one() - r.clone()) / qq.clone();
        let pd = (BigRational::one() - r) / qq;
        let den = BigRational::from_integer(BigInt::from(l.v * d * d) * BigInt::from(tl));
        (0..=m)
            .map(|a| num_traits::pow(ps.clone(), a) * num_traits::pow(pd.clone(), m - a) / den.clone())
            .collect()
    });
    for ((u, v), cnt) in counts {
        let w = match &coef_q {
            Some(cq) => {
                let wq = cnt
                    .iter()
                    .zip(cq)
                    .filter(|(c, _)| **c > 0)
                    .fold(BigRational::zero(), |acc, (c, k)| acc + k * BigRational::from_integer(BigInt::from(*c)));
                if wq.is_zero() {
                    continue;
                }
                let wf = wq.to_f64().unwrap_or(0.0);
                exact_weights.as_mut().expect("exact path").push(wq.to_string());
                wf
            }
            None => {
                let wf = compensated_sum(cnt.iter().zip(&coef_f).map(|(&c, &k)| c as f64 * k));
                if wf == 0.0 {
                    continue;
                }
                wf
            }
        };
        edges.push(Edge { u, v, w: w.min(1.0) });
    }
    let instance = MaxQCutInstance::new(tl * l.w, edges, q)?;
    Ok(Reduction {
        instance,
        meta: ReductionMeta {
            q,
            rho,
            ulc: l.clone(),
            exact_weights,
        },
    })
}

/// Acceptance probability of the dictator proof `f_w(x) = x_{l(w)}`,
/// computed from the verifier directly rather than from the reduced graph.
pub fn long_code_value(l: &UlcInstance, lw: &[usize], q: usize, rho: f64) -> Result<f64> {
    l.validate()?;
    if lw.len() != l.w || lw.iter().any(|&x| x >= l.m) {
        return Err(range_err("W labeling has wrong length or labels outside [M]"));
    }
    let qf = q as f64;
    let differ_same = (qf - 1.0) / qf * (1.0 - rho);
    let differ_indep = (qf - 1.0) / qf;
    let mut total = 0.0;
    for edges in l.neighbourhoods() {
        let d2 = (edges.len() * edges.len()) as f64;
        let mut s = 0.0;
        for a in &edges {
            for b in &edges {
                // Queried coordinates are σ_{v,w}(l(w)) of x and σ_{v,w'}(l(w')) of y.
                s += if a.perm[lw[a.w]] == b.perm[lw[b.w]] { differ_same } else { differ_indep };
            }
        }
        total += s / d2;
    }
    Ok(total / l.v as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub lv: Vec<usize>,
    pub lw: Vec<usize>,
    /// `influences[w][i] = Inf_i^{≤d}(f_w)`.
    pub influences: Vec<Vec<f64>>,
    /// Number of `w` whose largest influence is below `τ`.
    pub below_tau: usize,
    pub value: f64,
}

/// Reads each table `f_w` off the coloring as a vertex-valued function,
/// labels `w` by its most influential low-degree coordinate, and labels `v`
/// by plurality of `σ_{v,w}(l(w))`.
pub fn influence_decode(
    g: &MaxQCutInstance,
    meta: Option<&ReductionMeta>,
    labels: &[usize],
    d: usize,
    tau: f64,
) -> Result<DecodeResult> {
    let meta = meta.ok_or_else(|| Error::Metadata("graph was not produced by ulc_reduce".into()))?;
    if g.vertices != meta.vertex_count() || g.q != meta.q {
        return Err(Error::Metadata(format!(
            "graph has {} vertices and q = {}, metadata expects {} and q = {}",
            g.vertices,
            g.q,
            meta.vertex_count(),
            meta.q
        )));
    }
    if labels.len() != g.vertices || labels.iter().any(|&c| c >= g.q) {
        return Err(range_err("coloring has wrong length or colors outside [q]"));
    }
    let (q, m) = (meta.q, meta.ulc.m);
    let tl = meta.table_len();
    let mut lw = Vec::with_capacity(meta.ulc.w);
    let mut influences = Vec::with_capacity(meta.ulc.w);
    let mut below_tau = 0;
    for w in 0..meta.ulc.w {
        let mut values = vec![0.0; tl * q];
        for t in 0..tl {
            values[t * q + labels[w * tl + t]] = 1.0;
        }
        let f = DiscreteFunction::new(q, m, q, RangeTag::Vertex, values)?;
        let p = transform(&f)?;
        let inf: Vec<f64> = (0..m).map(|i| p.low_degree_influence(i, d)).collect::<Result<_>>()?;
        let best = inf
            .iter()
            .enumerate()
            .fold(0, |b, (i, &x)| if x > inf[b] { i } else { b });
        if inf[best] < tau {
            below_tau += 1;
        }
        lw.push(best);
        influences.push(inf);
    }
    let lv: Vec<usize> = meta
        .ulc
        .neighbourhoods()
        .iter()
        .map(|edges| {
            let mut votes = vec![0usize; m];
            for e in edges {
                votes[e.perm[lw[e.w]]] += 1;
            }
            votes.iter().enumerate().fold(0, |b, (i, &c)| if c > votes[b] { i } else { b })
        })
        .collect();
    let value = meta.ulc.value(&lv, &lw)?;
    Ok(DecodeResult {
        lv,
        lw,
        influences,
        below_tau,
        value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn single_edge(m: usize) -> UlcInstance {
        UlcInstance::new(m, 1, 1, vec![UlcEdge { v: 0, w: 0, perm: (0..m).collect() }]).unwrap()
    }

    #[test]
    fn single_edge_anti_correlated() {
        let l = single_edge(1);
        let red = ulc_reduce(&l, 2, -1.0).unwrap();
        let labels = red.meta.honest_labels(&[0]).unwrap();
        assert_eq!(red.exact_cut_value(&labels).unwrap(), BigRational::one());
        assert_eq!(red.exact_total().unwrap(), BigRational::one());
        assert!((long_code_value(&l, &[0], 2, -1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rho_one_never_accepts() {
        let mut rng = stream(4, 0);
        let (l, _, lw) = UlcInstance::random_satisfiable(2, 3, 3, 2, &mut rng).unwrap();
        let red = ulc_reduce(&l, 3, 1.0).unwrap();
        let labels = red.meta.honest_labels(&lw).unwrap();
        assert!(red.exact_cut_value(&labels).unwrap().is_zero());
    }

    #[test]
    fn completeness_is_exact() {
        let mut rng = stream(9, 1);
        for (q, m) in [(2, 2), (3, 2), (2, 3)] {
            let rho = -1.0 / (q as f64 - 1.0);
            let (l, lv, lw) = UlcInstance::random_satisfiable(m, 2, 3, 2, &mut rng).unwrap();
            assert_eq!(l.value(&lv, &lw).unwrap(), 1.0);
            let red = ulc_reduce(&l, q, rho).unwrap();
            let labels = red.meta.honest_labels(&lw).unwrap();
            assert_eq!(red.exact_total().unwrap(), BigRational::one());
            assert_eq!(red.exact_cut_value(&labels).unwrap(), red.meta.completeness_exact());
            let direct = long_code_value(&l, &lw, q, rho).unwrap();
            assert!((direct - (q as f64 - 1.0) / q as f64 * (1.0 - rho)).abs() < 1e-12);
            let dec = influence_decode(&red.instance, Some(&red.meta), &labels, m, 0.1).unwrap();
            assert_eq!(dec.value, 1.0);
            assert_eq!(dec.lw, lw);
        }
    }

    #[test]
    fn constant_proof_cuts_nothing() {
        let mut rng = stream(2, 2);
        let (l, _, _) = UlcInstance::random_satisfiable(2, 2, 2, 2, &mut rng).unwrap();
        let red = ulc_reduce(&l, 2, 0.3).unwrap();
        let labels = vec![1; red.instance.vertices];
        assert!(red.exact_cut_value(&labels).unwrap().is_zero());
    }

    #[test]
    fn float_path_total_mass() {
        let mut rng = stream(3, 3);
        let (l, _, lw) = UlcInstance::random_satisfiable(10, 1, 1, 1, &mut rng).unwrap();
        let red = ulc_reduce(&l, 2, -0.6).unwrap();
        assert!(red.meta.exact_weights.is_none());
        assert!((red.total_mass() - 1.0).abs() < 1e-12, "{}", red.total_mass());
        let cut = red.instance.cut_value(&red.meta.honest_labels(&lw).unwrap());
        assert!((cut - 0.5 * 1.6).abs() < 1e-10);
    }

    #[test]
    fn decode_requires_metadata() {
        let g = MaxQCutInstance::complete(4, 2).unwrap();
        assert!(matches!(influence_decode(&g, None, &[0; 4], 1, 0.1), Err(Error::Metadata(_))));
    }

    #[test]
    fn rejects_irregular_and_non_bijective() {
        let e = |v, w, perm: Vec<usize>| UlcEdge { v, w, perm };
        assert!(UlcInstance::new(2, 2, 1, vec![e(0, 0, vec![0, 1])]).is_err());
        assert!(UlcInstance::new(2, 1, 1, vec![e(0, 0, vec![1, 1])]).is_err());
    }

    #[test]
    fn sidecar_roundtrip() {
        let red = ulc_reduce(&single_edge(2), 2, 0.25).unwrap();
        let back = ReductionMeta::from_sidecar(&red.meta.to_sidecar()).unwrap();
        assert_eq!(back, red.meta);
    }
}
