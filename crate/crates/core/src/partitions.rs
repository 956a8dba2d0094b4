//! Measurable q-cell partitions of Gaussian space and the sets they are
//! built from.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::gauss::{normal_cdf, normal_inv_cdf, normal_mass, normal_pdf, normal_quantile_extended, normal_sf, TAIL_CUTOFF};
use crate::rng::SeededStream;

/// f64 vectors in JSON with `"inf"` / `"-inf"` for the infinite endpoints.
mod ext_f64 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    fn to_repr(x: f64) -> Repr {
        if x == f64::INFINITY {
            Repr::Str("inf".into())
        } else if x == f64::NEG_INFINITY {
            Repr::Str("-inf".into())
        } else {
            Repr::Num(x)
        }
    }

    fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(E::custom(format!("bad number {other}"))),
            },
        }
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|&x| to_repr(x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Repr>::deserialize(d)?.into_iter().map(from_repr).collect()
    }
}

/// Orthonormal basis of the hyperplane `Σx = 0` in ℝ^q (Helmert rows).
pub fn helmert_basis(q: usize) -> Vec<Vec<f64>> {
    (1..q)
        .map(|k| {
            let norm = ((k * (k + 1)) as f64).sqrt();
            (0..q)
                .map(|i| match i.cmp(&k) {
                    std::cmp::Ordering::Less => 1.0 / norm,
                    std::cmp::Ordering::Equal => -(k as f64) / norm,
                    std::cmp::Ordering::Greater => 0.0,
                })
                .collect()
        })
        .collect()
}

/// q unit vectors in ℝ^{q-1} with pairwise inner product `-1/(q-1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexVectors {
    pub q: usize,
    pub vectors: Vec<Vec<f64>>,
}

impl SimplexVectors {
    pub fn dim(&self) -> usize {
        self.q - 1
    }

    pub fn gram(&self) -> Vec<Vec<f64>> {
        self.vectors
            .iter()
            .map(|a| self.vectors.iter().map(|b| dot(a, b)).collect())
            .collect()
    }
}

/// `a_i = √(q/(q-1)) (e_i - (1/q) Σ_j e_j)`, written in the Helmert basis of
/// the zero-sum hyperplane.
pub fn simplex_vectors(q: usize) -> Result<SimplexVectors> {
    if q < 2 {
        return Err(Error::Range(format!("simplex needs q >= 2, got {q}")));
    }
    let basis = helmert_basis(q);
    let scale = (q as f64 / (q as f64 - 1.0)).sqrt();
    let vectors = (0..q)
        .map(|i| {
            let centered: Vec<f64> = (0..q)
                .map(|j| scale * (if i == j { 1.0 } else { 0.0 } - 1.0 / q as f64))
                .collect();
            basis.iter().map(|h| dot(h, &centered)).collect()
        })
        .collect();
    Ok(SimplexVectors { q, vectors })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Haar-random orthogonal n×n matrix (rows orthonormal).
pub fn random_rotation(n: usize, rng: &mut SeededStream) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    while rows.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for r in &rows {
            let p = dot(&v, r);
            v.iter_mut().zip(r).for_each(|(x, y)| *x -= p * y);
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            rows.push(v);
        }
    }
    rows
}

/// Uniformly random unit vector in ℝⁿ.
pub fn random_direction(n: usize, rng: &mut SeededStream) -> Vec<f64> {
    random_rotation(n, rng).swap_remove(0)
}

/// Half-open axis-aligned box `[lo, hi)`; bounds may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    #[serde(with = "ext_f64")]
    pub lo: Vec<f64>,
    #[serde(with = "ext_f64")]
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Dimension {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        Ok(AxisBox { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&xi, (&l, &h))| xi >= l && xi < h)
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l >= h)
    }

    pub fn intersect(&self, other: &AxisBox) -> AxisBox {
        AxisBox {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect(),
        }
    }

    /// Standard Gaussian measure: product of 1D normal masses.
    pub fn measure(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(&l, &h)| normal_mass(l, h)).product()
    }
}

/// Gaussian measure of a union of (possibly overlapping) boxes by
/// inclusion–exclusion, pruning empty intersections.
pub fn box_union_measure(boxes: &[AxisBox]) -> f64 {
    fn walk(boxes: &[AxisBox], start: usize, current: &AxisBox, depth: usize) -> f64 {
        let mut total = 0.0;
        for i in start..boxes.len() {
            let next = current.intersect(&boxes[i]);
            if next.is_empty() {
                continue;
            }
            let sign = if depth.is_multiple_of(2) { 1.0 } else { -1.0 };
            total += sign * next.measure();
            total += walk(boxes, i + 1, &next, depth + 1);
        }
        total
    }
    if boxes.is_empty() {
        return 0.0;
    }
    let n = boxes[0].dim();
    let all = AxisBox {
        lo: vec![f64::NEG_INFINITY; n],
        hi: vec![f64::INFINITY; n],
    };
    walk(boxes, 0, &all, 0).clamp(0.0, 1.0)
}

/// Membership-testable subset of ℝⁿ.
#[derive(Debug, Clone)]
pub enum GaussianSet {
    Everything,
    /// `{x : direction · x ≤ threshold}`.
    HalfSpace { direction: Vec<f64>, threshold: f64 },
    /// Union of boxes; overlaps allowed.
    Boxes(Vec<AxisBox>),
    Cell { partition: Arc<GaussianPartition>, cell: usize },
}

impl GaussianSet {
    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            GaussianSet::Everything => true,
            GaussianSet::HalfSpace { direction, threshold } => dot(direction, x) <= *threshold,
            GaussianSet::Boxes(bs) => bs.iter().any(|b| b.contains(x)),
            GaussianSet::Cell { partition, cell } => partition.classify_unchecked(x) == *cell,
        }
    }

    /// Exact Gaussian measure when available.
    pub fn measure(&self) -> Option<f64> {
        match self {
            GaussianSet::Everything => Some(1.0),
            GaussianSet::HalfSpace { direction, threshold } => {
                let norm = dot(direction, direction).sqrt();
                Some(normal_cdf(threshold / norm))
            }
            GaussianSet::Boxes(bs) => Some(box_union_measure(bs)),
            GaussianSet::Cell { partition, cell } => partition.cell_measures().map(|m| m[*cell]),
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            GaussianSet::Everything => None,
            GaussianSet::HalfSpace { direction, .. } => Some(direction.len()),
            GaussianSet::Boxes(bs) => bs.first().map(AxisBox::dim),
            GaussianSet::Cell { partition, .. } => Some(partition.n()),
        }
    }

    /// The canonical half-space `{x_1 ≤ a}` of the given measure.
    pub fn canonical_halfspace(n: usize, measure: f64) -> Result<Self> {
        let mut direction = vec![0.0; n];
        direction[0] = 1.0;
        Ok(GaussianSet::HalfSpace {
            direction,
            threshold: normal_quantile_extended(measure)?,
        })
    }
}

/// Arbitrary classifier ℝⁿ → [q].
#[derive(Clone)]
pub struct Classifier(pub Arc<dyn Fn(&[f64]) -> usize + Send + Sync>);

impl fmt::Debug for Classifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Classifier(..)")
    }
}

/// Output of [`defuzzify`]: a lattice of δ-cubes, each split along axis 0
/// into q consecutive sub-boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeGrid {
    pub delta: f64,
    pub lo: f64,
    pub per_axis: usize,
    /// q-1 cut points per cube, cube-major.
    pub cuts: Vec<f64>,
    pub default_cell: usize,
    pub measures: Vec<f64>,
}

impl CubeGrid {
    fn cube_index(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0usize;
        for &xi in x {
            let c = ((xi - self.lo) / self.delta).floor();
            if !(c >= 0.0 && c < self.per_axis as f64) {
                return None;
            }
            idx = idx * self.per_axis + c as usize;
        }
        Some(idx)
    }
}

#[derive(Debug, Clone)]
pub enum PartitionKind {
    /// Slabs along `direction`: cell i is `cuts[i-1] < u·x ≤ cuts[i]`.
    HalfSpaceStack { direction: Vec<f64>, cuts: Vec<f64> },
    /// argmax_i `x · generators[i]`, ties to the lowest index.
    Simplex { vectors: SimplexVectors, generators: Vec<Vec<f64>> },
    /// Disjoint labeled boxes; points in no box go to `default_cell`.
    BoxUnion { boxes: Vec<(AxisBox, usize)>, default_cell: usize },
    CubeGrid(CubeGrid),
    Callback(Classifier),
}

/// q labeled cells covering ℝⁿ.
#[derive(Debug, Clone)]
pub struct GaussianPartition {
    n: usize,
    q: usize,
    kind: PartitionKind,
}

impl GaussianPartition {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn kind(&self) -> &PartitionKind {
        &self.kind
    }

    pub fn callback(n: usize, q: usize, f: impl Fn(&[f64]) -> usize + Send + Sync + 'static) -> Self {
        GaussianPartition {
            n,
            q,
            kind: PartitionKind::Callback(Classifier(Arc::new(f))),
        }
    }

    /// Standard simplex partition of ℝⁿ using the first q-1 coordinates.
    pub fn simplex(q: usize, n: usize) -> Result<Self> {
        let vectors = simplex_vectors(q)?;
        if n < q - 1 {
            return Err(Error::Range(format!("simplex partition with q = {q} needs n >= {}", q - 1)));
        }
        let generators = vectors
            .vectors
            .iter()
            .map(|a| {
                let mut g = a.clone();
                g.resize(n, 0.0);
                g
            })
            .collect();
        Ok(GaussianPartition {
            n,
            q,
            kind: PartitionKind::Simplex { vectors, generators },
        })
    }

    pub fn box_union(n: usize, q: usize, boxes: Vec<(AxisBox, usize)>, default_cell: usize) -> Result<Self> {
        if default_cell >= q {
            return Err(Error::Index(format!("default cell {default_cell} >= q = {q}")));
        }
        for (b, c) in &boxes {
            if b.dim() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: b.dim(),
                });
            }
            if *c >= q {
                return Err(Error::Index(format!("cell {c} >= q = {q}")));
            }
        }
        for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                if !boxes[i].0.intersect(&boxes[j].0).is_empty() {
                    return Err(Error::Invariant(format!("boxes {i} and {j} overlap")));
                }
            }
        }
        Ok(GaussianPartition {
            n,
            q,
            kind: PartitionKind::BoxUnion { boxes, default_cell },
        })
    }

    /// Applies an orthogonal change of coordinates: the new partition
    /// classifies `x` as the old one classifies `R x`. Gaussian measures are
    /// unchanged. Supported for half-space stacks and simplex partitions.
    pub fn rotated(&self, rotation: &[Vec<f64>]) -> Result<Self> {
        if rotation.len() != self.n || rotation.iter().any(|r| r.len() != self.n) {
            return Err(Error::Dimension {
                expected: self.n,
                got: rotation.len(),
            });
        }
        // (R x)·u = x·(Rᵀ u)
        let pull = |u: &[f64]| -> Vec<f64> {
            (0..self.n)
                .map(|j| rotation.iter().zip(u).map(|(row, ui)| row[j] * ui).sum())
                .collect()
        };
        let kind = match &self.kind {
            PartitionKind::HalfSpaceStack { direction, cuts } => PartitionKind::HalfSpaceStack {
                direction: pull(direction),
                cuts: cuts.clone(),
            },
            PartitionKind::Simplex { vectors, generators } => PartitionKind::Simplex {
                vectors: vectors.clone(),
                generators: generators.iter().map(|g| pull(g)).collect(),
            },
            _ => return Err(Error::Invariant("only linear partitions can be rotated".into())),
        };
        Ok(GaussianPartition {
            n: self.n,
            q: self.q,
            kind,
        })
    }

    pub fn classify(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(self.classify_unchecked(x))
    }

    #[inline]
    pub fn classify_unchecked(&self, x: &[f64]) -> usize {
        match &self.kind {
            PartitionKind::HalfSpaceStack { direction, cuts } => {
                let t = dot(direction, x);
                cuts.iter().position(|&c| t <= c).unwrap_or(cuts.len())
            }
            PartitionKind::Simplex { generators, .. } => {
                let mut best = 0;
                let mut best_val = dot(&generators[0], x);
                for (i, g) in generators.iter().enumerate().skip(1) {
                    let v = dot(g, x);
                    if v > best_val {
                        best = i;
                        best_val = v;
                    }
                }
                best
            }
            PartitionKind::BoxUnion { boxes, default_cell } => boxes
                .iter()
                .find(|(b, _)| b.contains(x))
                .map(|(_, c)| *c)
                .unwrap_or(*default_cell),
            PartitionKind::CubeGrid(g) => match g.cube_index(x) {
                None => g.default_cell,
                Some(ci) => {
                    let cuts = &g.cuts[ci * (self.q - 1)..(ci + 1) * (self.q - 1)];
                    cuts.iter().position(|&c| x[0] < c).unwrap_or(self.q - 1)
                }
            },
            PartitionKind::Callback(f) => (f.0)(x),
        }
    }

    /// Closed-form cell measures when the kind admits them.
    pub fn cell_measures(&self) -> Option<Vec<f64>> {
        match &self.kind {
            PartitionKind::HalfSpaceStack { direction, cuts } => {
                let norm = dot(direction, direction).sqrt();
                let mut edges = vec![f64::NEG_INFINITY];
                edges.extend(cuts.iter().map(|c| c / norm));
                edges.push(f64::INFINITY);
                Some(edges.windows(2).map(|w| normal_mass(w[0], w[1])).collect())
            }
            PartitionKind::Simplex { .. } => Some(vec![1.0 / self.q as f64; self.q]),
            PartitionKind::BoxUnion { boxes, default_cell } => {
                let mut m = vec![0.0; self.q];
                for (b, c) in boxes {
                    m[*c] += b.measure();
                }
                let rest: f64 = 1.0 - m.iter().sum::<f64>();
                m[*default_cell] += rest.max(0.0);
                Some(m)
            }
            PartitionKind::CubeGrid(g) => Some(g.measures.clone()),
            PartitionKind::Callback(_) => None,
        }
    }

    pub fn is_serializable(&self) -> bool {
        !matches!(self.kind, PartitionKind::Callback(_))
    }

    /// JSON document `{kind, q, n, parameters}`; callbacks are flagged
    /// `serializable: false`.
    pub fn to_json(&self) -> Value {
        let (kind, parameters) = match &self.kind {
            PartitionKind::HalfSpaceStack { direction, cuts } => (
                "halfspace_stack",
                json!({ "direction": direction, "cuts": ext_vec(cuts) }),
            ),
            PartitionKind::Simplex { vectors, generators } => (
                "simplex",
                json!({ "vectors": vectors.vectors, "generators": generators }),
            ),
            PartitionKind::BoxUnion { boxes, default_cell } => (
                "box_union",
                json!({
                    "boxes": boxes.iter().map(|(b, c)| json!({"box": b, "cell": c})).collect::<Vec<_>>(),
                    "default_cell": default_cell,
                }),
            ),
            PartitionKind::CubeGrid(g) => ("cube_grid", serde_json::to_value(g).expect("grid serializes")),
            PartitionKind::Callback(_) => {
                return json!({ "kind": "callback", "q": self.q, "n": self.n, "serializable": false });
            }
        };
        json!({ "kind": kind, "q": self.q, "n": self.n, "parameters": parameters })
    }

    pub fn from_json(doc: &Value) -> Result<Self> {
        let get_usize = |k: &str| {
            doc.get(k)
                .and_then(Value::as_u64)
                .map(|v| v as usize)
                .ok_or_else(|| Error::Parse(format!("missing field {k}")))
        };
        let q = get_usize("q")?;
        let n = get_usize("n")?;
        let kind = doc.get("kind").and_then(Value::as_str).unwrap_or_default();
        let p = doc.get("parameters").cloned().unwrap_or(Value::Null);
        match kind {
            "halfspace_stack" => {
                #[derive(Deserialize)]
                struct P {
                    direction: Vec<f64>,
                    #[serde(with = "ext_f64")]
                    cuts: Vec<f64>,
                }
                let p: P = serde_json::from_value(p)?;
                Ok(GaussianPartition {
                    n,
                    q,
                    kind: PartitionKind::HalfSpaceStack {
                        direction: p.direction,
                        cuts: p.cuts,
                    },
                })
            }
            "simplex" => {
                #[derive(Deserialize)]
                struct P {
                    vectors: Vec<Vec<f64>>,
                    generators: Vec<Vec<f64>>,
                }
                let p: P = serde_json::from_value(p)?;
                Ok(GaussianPartition {
                    n,
                    q,
                    kind: PartitionKind::Simplex {
                        vectors: SimplexVectors { q, vectors: p.vectors },
                        generators: p.generators,
                    },
                })
            }
            "box_union" => {
                #[derive(Deserialize)]
                struct Entry {
                    #[serde(rename = "box")]
                    bx: AxisBox,
                    cell: usize,
                }
                #[derive(Deserialize)]
                struct P {
                    boxes: Vec<Entry>,
                    default_cell: usize,
                }
                let p: P = serde_json::from_value(p)?;
                GaussianPartition::box_union(n, q, p.boxes.into_iter().map(|e| (e.bx, e.cell)).collect(), p.default_cell)
            }
            "cube_grid" => Ok(GaussianPartition {
                n,
                q,
                kind: PartitionKind::CubeGrid(serde_json::from_value(p)?),
            }),
            "callback" => Err(Error::Parse("callback partitions are not serializable".into())),
            other => Err(Error::Parse(format!("unknown partition kind {other:?}"))),
        }
    }
}

fn ext_vec(v: &[f64]) -> Value {
    Value::Array(
        v.iter()
            .map(|&x| {
                if x == f64::INFINITY {
                    json!("inf")
                } else if x == f64::NEG_INFINITY {
                    json!("-inf")
                } else {
                    json!(x)
                }
            })
            .collect(),
    )
}

/// Consecutive slabs in coordinate 1 of ℝⁿ with the requested cell measures.
pub fn halfspace_stack(measures: &[f64], n: usize) -> Result<GaussianPartition> {
    let q = measures.len();
    if q < 1 || n < 1 {
        return Err(Error::Range("need at least one cell and one dimension".into()));
    }
    if measures.iter().any(|&m| !(m >= 0.0)) {
        return Err(Error::Balance(format!("negative or NaN measure in {measures:?}")));
    }
    let total: f64 = measures.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Balance(format!("measures sum to {total}")));
    }
    let mut cuts = Vec::with_capacity(q - 1);
    let mut below = 0.0;
    for i in 0..q - 1 {
        below += measures[i];
        let above: f64 = measures[i + 1..].iter().sum();
        // Invert from whichever tail is smaller.
        let cut = if above <= 0.0 {
            f64::INFINITY
        } else if below <= 0.0 {
            f64::NEG_INFINITY
        } else if below <= 0.5 {
            normal_inv_cdf(below)?
        } else {
            -normal_inv_cdf(above)?
        };
        cuts.push(cut);
    }
    let mut direction = vec![0.0; n];
    direction[0] = 1.0;
    Ok(GaussianPartition {
        n,
        q,
        kind: PartitionKind::HalfSpaceStack { direction, cuts },
    })
}

/// Map ℝⁿ → Δ_q.
#[derive(Clone)]
pub struct FuzzyPartition {
    pub n: usize,
    pub q: usize,
    map: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
}

impl fmt::Debug for FuzzyPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FuzzyPartition {{ n: {}, q: {} }}", self.n, self.q)
    }
}

impl FuzzyPartition {
    pub fn new(n: usize, q: usize, map: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        FuzzyPartition {
            n,
            q,
            map: Arc::new(map),
        }
    }

    /// Vertex-valued fuzzy map of a crisp partition.
    pub fn from_partition(p: Arc<GaussianPartition>) -> Self {
        let q = p.q();
        FuzzyPartition::new(p.n(), q, move |x| {
            let mut v = vec![0.0; q];
            v[p.classify_unchecked(x)] = 1.0;
            v
        })
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: x.len(),
            });
        }
        let v = (self.map)(x);
        if v.len() != self.q {
            return Err(Error::Dimension {
                expected: self.q,
                got: v.len(),
            });
        }
        let s: f64 = v.iter().sum();
        if v.iter().any(|&p| p < 0.0) || (s - 1.0).abs() > 1e-12 {
            return Err(Error::Invariant(format!("fuzzy value {v:?} not in the simplex")));
        }
        Ok(v)
    }
}

/// Diagnostics of a defuzzification run.
#[derive(Debug, Clone, Serialize)]
pub struct DefuzzifyReport {
    /// Cell measures of the output partition.
    pub cell_measures: Vec<f64>,
    /// `E g_j` as integrated cube by cube.
    pub input_expectations: Vec<f64>,
    /// Gaussian mass outside the cube window, given to the default cell.
    pub tail_mass: f64,
    pub cubes: usize,
}

const MAX_CUBES: usize = 1 << 22;

// 3-point Gauss–Legendre on [-1, 1].
const GL3_NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GL3_WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// Cut point splitting the Gaussian mass of `[z, z+δ)` at fraction `frac`.
fn split_point(z: f64, delta: f64, frac: f64) -> f64 {
    if frac <= 0.0 {
        return z;
    }
    if frac >= 1.0 {
        return z + delta;
    }
    let lin = z + frac * delta;
    let x = if z >= 0.0 {
        let (a, b) = (normal_sf(z), normal_sf(z + delta));
        let target = a - frac * (a - b);
        if a - b <= 0.0 || !(target > 0.0 && target < 1.0) {
            lin
        } else {
            normal_inv_cdf(target).map(|v| -v).unwrap_or(lin)
        }
    } else {
        let (a, b) = (normal_cdf(z), normal_cdf(z + delta));
        let target = a + frac * (b - a);
        if b - a <= 0.0 || !(target > 0.0 && target < 1.0) {
            lin
        } else {
            normal_inv_cdf(target).unwrap_or(lin)
        }
    };
    if x.is_finite() {
        x.clamp(z, z + delta)
    } else {
        lin
    }
}

/// Turns a fuzzy partition into a crisp one: every δ-cube is split along
/// axis 0 into q sub-boxes whose Gaussian masses are the cube-averages of
/// `g`, so per-cell expectations carry over. With `targets`, mass is then
/// transferred proportionally from cells in excess to cells in deficit until
/// the cell measures hit the targets.
pub fn defuzzify(
    g: &FuzzyPartition,
    delta: f64,
    targets: Option<&[f64]>,
) -> Result<(GaussianPartition, DefuzzifyReport)> {
    let (n, q) = (g.n, g.q);
    if n == 0 || n > 3 {
        return Err(Error::Scale(format!("defuzzify supports n <= 3, got {n}")));
    }
    if !(delta > 0.0) {
        return Err(Error::Range(format!("delta must be positive, got {delta}")));
    }
    if let Some(t) = targets {
        if t.len() != q {
            return Err(Error::Dimension { expected: q, got: t.len() });
        }
        let s: f64 = t.iter().sum();
        if (s - 1.0).abs() > 1e-9 || t.iter().any(|&x| x < 0.0) {
            return Err(Error::Balance(format!("targets sum to {s}")));
        }
    }
    let half = (TAIL_CUTOFF / delta).ceil() as usize;
    let per_axis = 2 * half;
    let lo = -(half as f64) * delta;
    let cubes = per_axis
        .checked_pow(n as u32)
        .filter(|&c| c <= MAX_CUBES)
        .ok_or_else(|| Error::Scale(format!("{per_axis}^{n} cubes exceed the limit")))?;

    let axis_mass: Vec<f64> = (0..per_axis)
        .map(|i| {
            let z = lo + i as f64 * delta;
            normal_mass(z, z + delta)
        })
        .collect();

    let mut probs = vec![0.0; cubes * q];
    let mut cube_mass = vec![0.0; cubes];
    let mut idx = vec![0usize; n];
    let mut point = vec![0.0; n];
    let nodes = 3usize.pow(n as u32);
    for c in 0..cubes {
        let mut rem = c;
        for a in (0..n).rev() {
            idx[a] = rem % per_axis;
            rem /= per_axis;
        }
        cube_mass[c] = idx.iter().map(|&i| axis_mass[i]).product();
        let avg = &mut probs[c * q..(c + 1) * q];
        let mut wsum = 0.0;
        for node in 0..nodes {
            let mut r = node;
            let mut w = 1.0;
            for a in 0..n {
                let l = r % 3;
                r /= 3;
                let z = lo + idx[a] as f64 * delta;
                let x = z + 0.5 * delta * (1.0 + GL3_NODES[l]);
                point[a] = x;
                w *= GL3_WEIGHTS[l] * normal_pdf(x);
            }
            let v = g.eval(&point)?;
            if w == 0.0 {
                continue;
            }
            wsum += w;
            avg.iter_mut().zip(&v).for_each(|(s, p)| *s += w * p);
        }
        if wsum > 0.0 {
            avg.iter_mut().for_each(|s| *s /= wsum);
        } else {
            for a in 0..n {
                point[a] = lo + (idx[a] as f64 + 0.5) * delta;
            }
            avg.copy_from_slice(&g.eval(&point)?);
        }
    }

    let mut expectations = vec![0.0; q];
    for c in 0..cubes {
        for j in 0..q {
            expectations[j] += cube_mass[c] * probs[c * q + j];
        }
    }
    let tail_mass = -(n as f64 * (-2.0 * normal_sf(-lo)).ln_1p()).exp_m1();
    let default_cell = (0..q)
        .max_by(|&a, &b| expectations[a].partial_cmp(&expectations[b]).unwrap())
        .unwrap_or(0);

    let mut measures = expectations.clone();
    measures[default_cell] += tail_mass;

    if let Some(t) = targets {
        let excess: Vec<f64> = (0..q).map(|j| measures[j] - t[j]).collect();
        let deficit_total: f64 = excess.iter().filter(|&&e| e < 0.0).map(|e| -e).sum();
        if deficit_total > 0.0 {
            let shrink: Vec<f64> = (0..q)
                .map(|j| {
                    if excess[j] > 0.0 && measures[j] > 0.0 {
                        excess[j] / measures[j]
                    } else {
                        0.0
                    }
                })
                .collect();
            for c in 0..cubes {
                let p = &mut probs[c * q..(c + 1) * q];
                let mut freed = 0.0;
                for j in 0..q {
                    freed += p[j] * shrink[j];
                    p[j] *= 1.0 - shrink[j];
                }
                for j in 0..q {
                    if excess[j] < 0.0 {
                        p[j] += freed * (-excess[j]) / deficit_total;
                    }
                }
            }
            measures = vec![0.0; q];
            for c in 0..cubes {
                for j in 0..q {
                    measures[j] += cube_mass[c] * probs[c * q + j];
                }
            }
            measures[default_cell] += tail_mass;
        }
    }

    let mut cuts = Vec::with_capacity(cubes * (q - 1));
    for c in 0..cubes {
        let z0 = lo + (c / per_axis.pow(n as u32 - 1)) as f64 * delta;
        let p = &probs[c * q..(c + 1) * q];
        let mut cum = 0.0;
        for &pj in &p[..q - 1] {
            cum += pj;
            cuts.push(split_point(z0, delta, cum));
        }
    }
    let grid = CubeGrid {
        delta,
        lo,
        per_axis,
        cuts,
        default_cell,
        measures: measures.clone(),
    };
    let report = DefuzzifyReport {
        cell_measures: measures,
        input_expectations: expectations,
        tail_mass,
        cubes,
    };
    Ok((
        GaussianPartition {
            n,
            q,
            kind: PartitionKind::CubeGrid(grid),
        },
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn simplex_q2_is_plus_minus_one() {
        let s = simplex_vectors(2).unwrap();
        assert_eq!(s.vectors.len(), 2);
        assert!((s.vectors[0][0].abs() - 1.0).abs() < 1e-12);
        assert!((s.vectors[0][0] + s.vectors[1][0]).abs() < 1e-12);
    }

    #[test]
    fn simplex_gram_matrices() {
        for q in [3usize, 5] {
            let s = simplex_vectors(q).unwrap();
            let g = s.gram();
            for i in 0..q {
                for j in 0..q {
                    let want = if i == j { 1.0 } else { -1.0 / (q as f64 - 1.0) };
                    assert!((g[i][j] - want).abs() < 1e-12, "q={q} ({i},{j})");
                }
            }
            for d in 0..q - 1 {
                let s: f64 = s.vectors.iter().map(|v| v[d]).sum();
                assert!(s.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn simplex_classify_examples() {
        let p = GaussianPartition::simplex(3, 2).unwrap();
        let a = simplex_vectors(3).unwrap().vectors;
        assert_eq!(p.classify(&a[0]).unwrap(), 0);
        assert_eq!(p.classify(&[0.0, 0.0]).unwrap(), 0);
        let x: Vec<f64> = a[1].iter().map(|v| v * 1.001).collect();
        assert_eq!(p.classify(&x).unwrap(), 1);
        assert!(matches!(p.classify(&[1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn peace_sign_aligned_generator() {
        // Rotate so that a_1 points along (1, 0).
        let p = GaussianPartition::simplex(3, 2).unwrap();
        let a0 = simplex_vectors(3).unwrap().vectors[0].clone();
        let rot = vec![vec![a0[0], -a0[1]], vec![a0[1], a0[0]]];
        let r = p.rotated(&rot).unwrap();
        assert_eq!(r.classify(&[1.0, 0.0]).unwrap(), 0);
    }

    #[test]
    fn halfspace_stack_cuts() {
        let p = halfspace_stack(&[0.5, 0.5], 1).unwrap();
        match p.kind() {
            PartitionKind::HalfSpaceStack { cuts, .. } => assert!(cuts[0].abs() < 1e-15),
            _ => unreachable!(),
        }
        let p = halfspace_stack(&[1.0 / 3.0; 3], 2).unwrap();
        match p.kind() {
            PartitionKind::HalfSpaceStack { cuts, .. } => {
                assert!((cuts[0] + 0.430_727_299_295_457_5).abs() < 1e-9);
                assert!((cuts[1] - 0.430_727_299_295_457_5).abs() < 1e-9);
            }
            _ => unreachable!(),
        }
        for (m, want) in p.cell_measures().unwrap().iter().zip([1.0 / 3.0; 3]) {
            assert!((m - want).abs() < 1e-8);
        }
    }

    #[test]
    fn degenerate_stack_is_one_cell() {
        let p = halfspace_stack(&[1.0, 0.0], 2).unwrap();
        let mut rng = stream(3, 0);
        for _ in 0..100 {
            let x: Vec<f64> = (0..2).map(|_| rng.sample(StandardNormal)).collect();
            assert_eq!(p.classify(&x).unwrap(), 0);
        }
        assert!(matches!(halfspace_stack(&[0.5, 0.6], 1), Err(Error::Balance(_))));
    }

    #[test]
    fn box_union_rejects_overlap_and_measures() {
        let b1 = AxisBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let b2 = AxisBox::new(vec![0.5, 0.5], vec![2.0, 2.0]).unwrap();
        assert!(matches!(
            GaussianPartition::box_union(2, 2, vec![(b1.clone(), 1), (b2.clone(), 1)], 0),
            Err(Error::Invariant(_))
        ));
        let inter = b1.intersect(&b2).measure();
        let u = box_union_measure(&[b1.clone(), b2.clone()]);
        assert!((u - (b1.measure() + b2.measure() - inter)).abs() < 1e-15);
    }

    #[test]
    fn partition_json_roundtrip() {
        let p = halfspace_stack(&[1.0, 0.0, 0.0], 2).unwrap();
        let doc = p.to_json();
        let back = GaussianPartition::from_json(&doc).unwrap();
        assert_eq!(back.to_json(), doc);
        let cb = GaussianPartition::callback(2, 2, |x| usize::from(x[0] > 0.0));
        assert_eq!(cb.to_json()["serializable"], json!(false));
        assert!(GaussianPartition::from_json(&cb.to_json()).is_err());
    }

    #[test]
    fn defuzzify_uniform_splits_evenly() {
        let g = FuzzyPartition::new(1, 3, |_| vec![1.0 / 3.0; 3]);
        let (p, rep) = defuzzify(&g, 0.1, None).unwrap();
        for m in p.cell_measures().unwrap() {
            assert!((m - 1.0 / 3.0).abs() < 1e-9);
        }
        assert!(rep.tail_mass < 1e-16);
    }

    #[test]
    fn defuzzify_scale_error() {
        let g = FuzzyPartition::new(4, 2, |_| vec![0.5, 0.5]);
        assert!(matches!(defuzzify(&g, 0.5, None), Err(Error::Scale(_))));
    }

    #[test]
    fn defuzzify_crisp_input_is_preserved() {
        // Cube-constant vertex map: label by parity of floor(x / 0.25).
        let g = FuzzyPartition::new(2, 2, |x: &[f64]| {
            let c = ((x[0] / 0.25).floor() as i64 + (x[1] / 0.25).floor() as i64).rem_euclid(2) as usize;
            let mut v = vec![0.0; 2];
            v[c] = 1.0;
            v
        });
        let (p, _) = defuzzify(&g, 0.25, None).unwrap();
        let mut rng = stream(5, 0);
        for _ in 0..2000 {
            let x: Vec<f64> = (0..2).map(|_| rng.sample(StandardNormal)).collect();
            let want = g.eval(&x).unwrap().iter().position(|&v| v == 1.0).unwrap();
            assert_eq!(p.classify(&x).unwrap(), want);
        }
    }

    #[test]
    fn defuzzify_hits_targets() {
        let g = FuzzyPartition::new(1, 2, |x: &[f64]| {
            let s = 1.0 / (1.0 + (-x[0]).exp());
            vec![s, 1.0 - s]
        });
        let (p, _) = defuzzify(&g, 0.1, Some(&[0.3, 0.7])).unwrap();
        let m = p.cell_measures().unwrap();
        assert!((m[0] - 0.3).abs() < 1e-12, "{m:?}");
    }
}
