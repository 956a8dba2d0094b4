//! Functions on `[q]^n` as multilinear polynomials over an orthonormal
//! ensemble: transforms, the noise operator, noise stability, influences,
//! maximal correlation, invariance gaps, and block-sum functions built from
//! Gaussian partitions.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{range_err, Error, Result};
use crate::estimate::StabilityEstimate;
use crate::partitions::{helmert_basis, random_rotation, GaussianPartition};
use crate::rng::{derive_seed, stream, McConfig, MeanVar};

/// Largest table handled by the transforms.
pub const MAX_TABLE: usize = 1 << 24;
/// Largest pair count for the brute-force noise stability.
pub const MAX_BRUTE_PAIRS: usize = 1 << 26;

pub(crate) fn table_len(q: usize, n: usize, limit: usize) -> Result<usize> {
    q.checked_pow(n as u32)
        .filter(|&l| l <= limit)
        .ok_or_else(|| Error::Scale(format!("{q}^{n} exceeds {limit}")))
}

/// Digits of `index` in base q, most significant first.
pub fn decode(index: usize, q: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    let mut r = index;
    for i in (0..n).rev() {
        out[i] = r % q;
        r /= q;
    }
    out
}

pub fn encode(digits: &[usize], q: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * q + d)
}

/// A multi-index σ ∈ {0,…,q-1}ⁿ; 0 is the constant basis element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn degree(&self) -> usize {
        self.0.iter().filter(|&&s| s > 0).count()
    }
}

fn degrees(q: usize, n: usize) -> Vec<u32> {
    let len = q.pow(n as u32);
    let mut deg = vec![0u32; len];
    // Degree of index t: nonzero digits.
    for (t, d) in deg.iter_mut().enumerate() {
        let mut r = t;
        let mut c = 0;
        for _ in 0..n {
            c += u32::from(r % q != 0);
            r /= q;
        }
        *d = c;
    }
    deg
}

/// Real orthonormal basis of functions on `[q]` under the uniform measure.
/// `rows[s][ω]` is basis function s at symbol ω; row 0 is the constant 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthoBasis {
    pub name: String,
    pub q: usize,
    pub rows: Vec<Vec<f64>>,
}

impl OrthoBasis {
    /// Helmert rows scaled to unit norm under the uniform measure.
    pub fn helmert(q: usize) -> Self {
        let scale = (q as f64).sqrt();
        let mut rows = vec![vec![1.0; q]];
        rows.extend(helmert_basis(q).into_iter().map(|h| h.into_iter().map(|v| v * scale).collect()));
        OrthoBasis {
            name: "helmert".into(),
            q,
            rows,
        }
    }

    /// Helmert basis with its non-constant part rotated by a fixed random
    /// orthogonal matrix.
    pub fn rotated(q: usize, seed: u64) -> Self {
        let h = OrthoBasis::helmert(q);
        if q < 3 {
            // Only ±1 rotations exist; flip the sign.
            let mut b = h;
            if q == 2 {
                b.rows[1].iter_mut().for_each(|v| *v = -*v);
            }
            b.name = "rotated".into();
            return b;
        }
        let r = random_rotation(q - 1, &mut stream(seed, 0));
        let mut rows = vec![vec![1.0; q]];
        for rs in &r {
            rows.push(
                (0..q)
                    .map(|w| rs.iter().enumerate().map(|(t, c)| c * h.rows[t + 1][w]).sum())
                    .collect(),
            );
        }
        OrthoBasis {
            name: "rotated".into(),
            q,
            rows,
        }
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let q = self.q as f64;
        let mut worst: f64 = 0.0;
        for (s, a) in self.rows.iter().enumerate() {
            for (t, b) in self.rows.iter().enumerate() {
                let g: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / q;
                worst = worst.max((g - if s == t { 1.0 } else { 0.0 }).abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeTag {
    Real,
    Simplex,
    Vertex,
    UnitInterval,
}

/// Table of `ℝ^k` values on `[q]^n`, lexicographic with ω_1 most significant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteFunction {
    pub q: usize,
    pub n: usize,
    pub k: usize,
    pub range_tag: RangeTag,
    pub values: Vec<f64>,
}

impl DiscreteFunction {
    pub fn new(q: usize, n: usize, k: usize, range_tag: RangeTag, values: Vec<f64>) -> Result<Self> {
        if q < 2 || k < 1 {
            return Err(range_err(format!("need q >= 2 and k >= 1, got q = {q}, k = {k}")));
        }
        let len = table_len(q, n, MAX_TABLE)?;
        if values.len() != len * k {
            return Err(Error::Dimension {
                expected: len * k,
                got: values.len(),
            });
        }
        let f = DiscreteFunction {
            q,
            n,
            k,
            range_tag,
            values,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn from_fn(q: usize, n: usize, k: usize, range_tag: RangeTag, f: impl Fn(&[usize]) -> Vec<f64>) -> Result<Self> {
        let len = table_len(q, n, MAX_TABLE)?;
        let mut values = Vec::with_capacity(len * k);
        for t in 0..len {
            let v = f(&decode(t, q, n));
            if v.len() != k {
                return Err(Error::Dimension { expected: k, got: v.len() });
            }
            values.extend(v);
        }
        DiscreteFunction::new(q, n, k, range_tag, values)
    }

    fn validate(&self) -> Result<()> {
        for (t, v) in self.values.chunks(self.k).enumerate() {
            let ok = match self.range_tag {
                RangeTag::Real => v.iter().all(|x| x.is_finite()),
                RangeTag::UnitInterval => v.iter().all(|x| (0.0..=1.0).contains(x)),
                RangeTag::Simplex => {
                    v.iter().all(|&x| x >= 0.0) && (v.iter().sum::<f64>() - 1.0).abs() <= 1e-12
                }
                RangeTag::Vertex => {
                    v.iter().filter(|&&x| x == 1.0).count() == 1 && v.iter().all(|&x| x == 0.0 || x == 1.0)
                }
            };
            if !ok {
                return Err(Error::Invariant(format!("value {v:?} at index {t} violates range {:?}", self.range_tag)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, omega: &[usize]) -> &[f64] {
        let t = encode(omega, self.q);
        &self.values[t * self.k..(t + 1) * self.k]
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("function serializes")
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let f: DiscreteFunction = serde_json::from_value(v.clone())?;
        DiscreteFunction::new(f.q, f.n, f.k, f.range_tag, f.values)
    }

    /// Mean of `‖f‖²`.
    pub fn mean_square(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum::<f64>() / self.len() as f64
    }
}

/// Applies `mat` (q×q) along one axis of a k-valued tensor on `[q]^n`.
fn apply_axis(data: &mut [f64], q: usize, n: usize, k: usize, axis: usize, mat: &[Vec<f64>]) {
    let stride = q.pow((n - 1 - axis) as u32) * k;
    let block = stride * q;
    let mut buf = vec![0.0; q];
    for start in (0..data.len()).step_by(block) {
        for off in 0..stride {
            for (s, b) in buf.iter_mut().enumerate() {
                *b = (0..q).map(|w| mat[s][w] * data[start + w * stride + off]).sum();
            }
            for (s, b) in buf.iter().enumerate() {
                data[start + s * stride + off] = *b;
            }
        }
    }
}

/// `Σ_σ c_σ X_σ` with dense coefficients in the table layout.
#[derive(Debug, Clone, PartialEq)]
pub struct MultilinearPoly {
    pub q: usize,
    pub n: usize,
    pub k: usize,
    pub basis: OrthoBasis,
    pub coeffs: Vec<f64>,
}

/// Coefficients of `f` in `basis` (applied on every coordinate).
pub fn transform_with(f: &DiscreteFunction, basis: &OrthoBasis) -> Result<MultilinearPoly> {
    if basis.q != f.q {
        return Err(Error::Dimension {
            expected: f.q,
            got: basis.q,
        });
    }
    table_len(f.q, f.n, MAX_TABLE)?;
    let q = f.q;
    let mat: Vec<Vec<f64>> = basis.rows.iter().map(|r| r.iter().map(|v| v / q as f64).collect()).collect();
    let mut c = f.values.clone();
    for axis in 0..f.n {
        apply_axis(&mut c, q, f.n, f.k, axis, &mat);
    }
    Ok(MultilinearPoly {
        q,
        n: f.n,
        k: f.k,
        basis: basis.clone(),
        coeffs: c,
    })
}

/// Coefficients in the Helmert basis.
pub fn transform(f: &DiscreteFunction) -> Result<MultilinearPoly> {
    transform_with(f, &OrthoBasis::helmert(f.q))
}

pub fn inverse_transform(p: &MultilinearPoly) -> DiscreteFunction {
    let q = p.q;
    let mat: Vec<Vec<f64>> = (0..q).map(|w| (0..q).map(|s| p.basis.rows[s][w]).collect()).collect();
    let mut v = p.coeffs.clone();
    for axis in 0..p.n {
        apply_axis(&mut v, q, p.n, p.k, axis, &mat);
    }
    DiscreteFunction {
        q,
        n: p.n,
        k: p.k,
        range_tag: RangeTag::Real,
        values: v,
    }
}

/// `ρ ∈ [-1/(q-1), 1]`, the range where the noisy copy is a probability law.
pub fn check_noise_rho(q: usize, rho: f64) -> Result<()> {
    let lo = -1.0 / (q as f64 - 1.0);
    if rho < lo - 1e-12 || rho > 1.0 || rho.is_nan() {
        return Err(range_err(format!("rho = {rho} outside [{lo}, 1] for q = {q}")));
    }
    Ok(())
}

impl MultilinearPoly {
    pub fn coeff(&self, sigma: &MultiIndex) -> &[f64] {
        let t = encode(&sigma.0, self.q);
        &self.coeffs[t * self.k..(t + 1) * self.k]
    }

    fn sq_norms(&self) -> impl Iterator<Item = f64> + '_ {
        self.coeffs.chunks(self.k).map(|c| c.iter().map(|x| x * x).sum())
    }

    pub fn mean(&self) -> Vec<f64> {
        self.coeffs[..self.k].to_vec()
    }

    /// `Σ_{|σ|>0} ‖c_σ‖²`.
    pub fn variance(&self) -> f64 {
        self.sq_norms().skip(1).sum()
    }

    /// `Σ_σ ‖c_σ‖²`, equal to `E‖f‖²`.
    pub fn squared_norm(&self) -> f64 {
        self.sq_norms().sum()
    }

    /// Largest |σ| with a nonzero coefficient.
    pub fn degree(&self) -> usize {
        let deg = degrees(self.q, self.n);
        self.sq_norms()
            .zip(&deg)
            .filter(|(c, _)| *c > 1e-24)
            .map(|(_, &d)| d as usize)
            .max()
            .unwrap_or(0)
    }

    /// `c_σ ↦ ρ^{|σ|} c_σ`.
    pub fn noise_operator(&self, rho: f64) -> Result<MultilinearPoly> {
        check_noise_rho(self.q, rho)?;
        let deg = degrees(self.q, self.n);
        let pows: Vec<f64> = (0..=self.n).map(|d| rho.powi(d as i32)).collect();
        let mut out = self.clone();
        for (c, &d) in out.coeffs.chunks_mut(self.k).zip(&deg) {
            c.iter_mut().for_each(|x| *x *= pows[d as usize]);
        }
        Ok(out)
    }

    /// `Σ_σ ρ^{|σ|} ‖c_σ‖²`.
    pub fn noise_stability(&self, rho: f64) -> Result<f64> {
        check_noise_rho(self.q, rho)?;
        let deg = degrees(self.q, self.n);
        let pows: Vec<f64> = (0..=self.n).map(|d| rho.powi(d as i32)).collect();
        Ok(self.sq_norms().zip(&deg).map(|(c, &d)| pows[d as usize] * c).sum())
    }

    /// `Inf_i^{≤d} = Σ_{σ_i>0, |σ|≤d} ‖c_σ‖²`; coordinates are 0-based.
    pub fn low_degree_influence(&self, i: usize, d: usize) -> Result<f64> {
        if i >= self.n {
            return Err(Error::Index(format!("coordinate {i} out of range for n = {}", self.n)));
        }
        let deg = degrees(self.q, self.n);
        let stride = self.q.pow((self.n - 1 - i) as u32);
        Ok(self
            .sq_norms()
            .zip(&deg)
            .enumerate()
            .filter(|(t, (_, &dg))| !(t / stride).is_multiple_of(self.q) && dg as usize <= d)
            .map(|(_, (c, _))| c)
            .sum())
    }

    pub fn influence(&self, i: usize) -> Result<f64> {
        self.low_degree_influence(i, self.n)
    }

    pub fn max_influence(&self) -> f64 {
        (0..self.n).map(|i| self.influence(i).unwrap_or(0.0)).fold(0.0, f64::max)
    }

    /// Nonzero coefficients as `{q, n, k, basis, coeffs: [{sigma, c}]}`.
    pub fn to_json(&self) -> Value {
        let coeffs: Vec<Value> = self
            .coeffs
            .chunks(self.k)
            .enumerate()
            .filter(|(_, c)| c.iter().any(|&x| x != 0.0))
            .map(|(t, c)| json!({ "sigma": decode(t, self.q, self.n), "c": c }))
            .collect();
        json!({ "q": self.q, "n": self.n, "k": self.k, "basis": self.basis, "coeffs": coeffs })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Entry {
            sigma: Vec<usize>,
            c: Vec<f64>,
        }
        #[derive(Deserialize)]
        struct Doc {
            q: usize,
            n: usize,
            k: usize,
            basis: Option<OrthoBasis>,
            coeffs: Vec<Entry>,
        }
        let d: Doc = serde_json::from_value(v.clone())?;
        let len = table_len(d.q, d.n, MAX_TABLE)?;
        let mut coeffs = vec![0.0; len * d.k];
        for e in d.coeffs {
            if e.sigma.len() != d.n || e.c.len() != d.k || e.sigma.iter().any(|&s| s >= d.q) {
                return Err(Error::Parse(format!("bad coefficient entry {:?}", e.sigma)));
            }
            let t = encode(&e.sigma, d.q);
            coeffs[t * d.k..(t + 1) * d.k].copy_from_slice(&e.c);
        }
        Ok(MultilinearPoly {
            q: d.q,
            n: d.n,
            k: d.k,
            basis: d.basis.unwrap_or_else(|| OrthoBasis::helmert(d.q)),
            coeffs,
        })
    }
}

/// `E_ω ⟨f(ω), f(λ)⟩` by summing over all pairs with
/// `μ(λ_i|ω_i) = ρ 1{λ_i = ω_i} + (1-ρ)/q`.
pub fn noise_stability_brute(f: &DiscreteFunction, rho: f64) -> Result<f64> {
    check_noise_rho(f.q, rho)?;
    let len = table_len(f.q, f.n, MAX_TABLE)?;
    if len.checked_mul(len).is_none_or(|p| p > MAX_BRUTE_PAIRS) {
        return Err(Error::Scale(format!("{len}² pairs exceed {MAX_BRUTE_PAIRS}")));
    }
    let q = f.q;
    let same = rho + (1.0 - rho) / q as f64;
    let diff = (1.0 - rho) / q as f64;
    // Transition weight depends only on the number of agreeing coordinates.
    let weights: Vec<f64> = (0..=f.n)
        .map(|agree| same.powi(agree as i32) * diff.powi((f.n - agree) as i32))
        .collect();
    let digits: Vec<Vec<usize>> = (0..len).map(|t| decode(t, q, f.n)).collect();
    let mut total = 0.0;
    for a in 0..len {
        let fa = &f.values[a * f.k..(a + 1) * f.k];
        let mut row = 0.0;
        for b in 0..len {
            let agree = digits[a].iter().zip(&digits[b]).filter(|(x, y)| x == y).count();
            let fb = &f.values[b * f.k..(b + 1) * f.k];
            row += weights[agree] * fa.iter().zip(fb).map(|(x, y)| x * y).sum::<f64>();
        }
        total += row;
    }
    Ok(total / len as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityPath {
    Fourier,
    Brute,
}

pub fn noise_stability(f: &DiscreteFunction, rho: f64, path: StabilityPath) -> Result<f64> {
    match path {
        StabilityPath::Fourier => transform(f)?.noise_stability(rho),
        StabilityPath::Brute => noise_stability_brute(f, rho),
    }
}

/// Monte Carlo `E ⟨f(ω), f(λ)⟩`; for vertex-valued f this is
/// `P(f(ω) = f(λ))`.
pub fn noise_stability_mc(f: &DiscreteFunction, rho: f64, mc: &McConfig) -> Result<StabilityEstimate> {
    check_noise_rho(f.q, rho)?;
    let q = f.q;
    let stay = rho + (1.0 - rho) / q as f64;
    let parts = mc.run_blocks(|rng, len| {
        let mut acc = MeanVar::default();
        let mut w = vec![0usize; f.n];
        let mut l = vec![0usize; f.n];
        for _ in 0..len {
            for (wi, li) in w.iter_mut().zip(l.iter_mut()) {
                *wi = rng.random_range(0..q);
                *li = if rng.random::<f64>() < stay {
                    *wi
                } else {
                    // Uniform over the other q-1 symbols.
                    let o = rng.random_range(0..q - 1);
                    if o >= *wi {
                        o + 1
                    } else {
                        o
                    }
                };
            }
            let a = f.value(&w);
            let b = f.value(&l);
            acc.push(a.iter().zip(b).map(|(x, y)| x * y).sum());
        }
        acc
    });
    let m = MeanVar::merged(&parts);
    Ok(StabilityEstimate::from_mean(m.mean, m.std_error(), mc.samples, mc.seed))
}

/// `E_ω[Var_{ω_i} f]` summed over the k components, computed from the table.
pub fn influence_direct(f: &DiscreteFunction, i: usize) -> Result<f64> {
    if i >= f.n {
        return Err(Error::Index(format!("coordinate {i} out of range for n = {}", f.n)));
    }
    let q = f.q;
    let stride = q.pow((f.n - 1 - i) as u32);
    let len = f.len();
    let mut total = 0.0;
    for t in 0..len {
        if !(t / stride).is_multiple_of(q) {
            continue;
        }
        for c in 0..f.k {
            let vals: Vec<f64> = (0..q).map(|s| f.values[(t + s * stride) * f.k + c]).collect();
            let mean = vals.iter().sum::<f64>() / q as f64;
            total += vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / q as f64;
        }
    }
    Ok(total / (len / q) as f64)
}

/// Joint distribution on a finite product space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteJoint {
    pub probs: Vec<Vec<f64>>,
}

impl FiniteJoint {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        let cols = probs.first().map(Vec::len).unwrap_or(0);
        if probs.is_empty() || cols == 0 || probs.iter().any(|r| r.len() != cols) {
            return Err(range_err("joint table must be a nonempty rectangle"));
        }
        let total: f64 = probs.iter().flatten().sum();
        if probs.iter().flatten().any(|&p| p < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Invariant(format!("joint probabilities must be >= 0 and sum to 1, got {total}")));
        }
        Ok(FiniteJoint { probs })
    }

    /// `μ(ω, λ) = ρ 1{ω=λ}/q + (1-ρ)/q²` on `[q]²`.
    pub fn correlated_uniform(q: usize, rho: f64) -> Result<Self> {
        check_noise_rho(q, rho)?;
        let qf = q as f64;
        FiniteJoint::new(
            (0..q)
                .map(|a| {
                    (0..q)
                        .map(|b| if a == b { rho / qf } else { 0.0 } + (1.0 - rho) / (qf * qf))
                        .collect()
                })
                .collect(),
        )
    }

    pub fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        let rows = self.probs.iter().map(|r| r.iter().sum()).collect();
        let cols = (0..self.probs[0].len())
            .map(|j| self.probs.iter().map(|r| r[j]).sum())
            .collect();
        (rows, cols)
    }

    /// Whether the support graph (edges where μ > 0) is connected.
    pub fn support_connected(&self) -> bool {
        let (s1, s2) = (self.probs.len(), self.probs[0].len());
        let mut seen = vec![false; s1 + s2];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            let nbrs: Vec<usize> = if v < s1 {
                (0..s2).filter(|&b| self.probs[v][b] > 0.0).map(|b| s1 + b).collect()
            } else {
                (0..s1).filter(|&a| self.probs[a][v - s1] > 0.0).collect()
            };
            for u in nbrs {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MaximalCorrelation {
    pub value: f64,
    pub connected: bool,
    /// Smallest positive probability.
    pub alpha: f64,
    /// `1 - α²/2` when the support graph is connected.
    pub bound: Option<f64>,
    pub bound_holds: Option<bool>,
}

/// Second singular value of `μ(a,b)/√(μ₁(a) μ₂(b))`.
pub fn maximal_correlation(j: &FiniteJoint) -> Result<MaximalCorrelation> {
    let (m1, m2) = j.marginals();
    if m1.iter().chain(&m2).any(|&m| m <= 0.0) {
        return Err(Error::Degenerate("a marginal has zero mass".into()));
    }
    let (s1, s2) = (m1.len(), m2.len());
    let mat = DMatrix::from_fn(s1, s2, |a, b| j.probs[a][b] / (m1[a] * m2[b]).sqrt());
    let mut sv: Vec<f64> = mat.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let value = sv.get(1).copied().unwrap_or(0.0).clamp(0.0, 1.0);
    let connected = j.support_connected();
    let alpha = j
        .probs
        .iter()
        .flatten()
        .copied()
        .filter(|&p| p > 0.0)
        .fold(f64::INFINITY, f64::min);
    let bound = connected.then(|| 1.0 - alpha * alpha / 2.0);
    Ok(MaximalCorrelation {
        value,
        connected,
        alpha,
        bound,
        bound_holds: bound.map(|b| value <= b + 1e-12),
    })
}

/// Lipschitz test functionals applied to the pair `(Q(X), Q(Y))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    /// `Σ_j clamp(a_j) clamp(b_j)`, clamping to `[0, 1]`.
    ClampProduct,
    /// Euclidean projection of both onto the simplex, then inner product.
    SimplexInner,
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

impl Functional {
    pub fn apply(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Functional::ClampProduct => a
                .iter()
                .zip(b)
                .map(|(x, y)| x.clamp(0.0, 1.0) * y.clamp(0.0, 1.0))
                .sum(),
            Functional::SimplexInner => {
                let (pa, pb) = (project_simplex(a), project_simplex(b));
                pa.iter().zip(&pb).map(|(x, y)| x * y).sum()
            }
        }
    }
}

/// `±1` majority Fourier weight at odd level j:
/// `(-1)^{(j-1)/2} C((n-1)/2, (j-1)/2) / C(n-1, j-1) · C(n-1, (n-1)/2) 2^{1-n}`.
pub fn majority_coefficient(n: usize, j: usize) -> f64 {
    if j.is_multiple_of(2) || j > n || n.is_multiple_of(2) {
        return 0.0;
    }
    let h = (n - 1) / 2;
    let a = (j - 1) / 2;
    let ln_c = |m: usize, r: usize| libm::lgamma(m as f64 + 1.0) - libm::lgamma(r as f64 + 1.0) - libm::lgamma((m - r) as f64 + 1.0);
    let mag = (ln_c(h, a) - ln_c(n - 1, j - 1) + ln_c(n - 1, h) + (1.0 - n as f64) * std::f64::consts::LN_2).exp();
    if a.is_multiple_of(2) {
        mag
    } else {
        -mag
    }
}

/// Elementary symmetric polynomials `e_0..e_d` from power sums `p_1..p_d`.
fn elementary_from_power(p: &[f64], d: usize) -> Vec<f64> {
    let mut e = vec![0.0; d + 1];
    e[0] = 1.0;
    for j in 1..=d {
        let mut s = 0.0;
        for i in 1..=j {
            let term = e[j - i] * p[i];
            s += if i % 2 == 1 { term } else { -term };
        }
        e[j] = s / j as f64;
    }
    e
}

/// Degree-≤d part of `{0,1}`-valued majority on n bits, evaluated through
/// power sums so inputs can be bits or Gaussians.
#[derive(Debug, Clone)]
pub struct TruncatedMajority {
    pub n: usize,
    pub degree: usize,
    coeffs: Vec<f64>,
}

impl TruncatedMajority {
    pub fn new(n: usize, degree: usize) -> Result<Self> {
        if n.is_multiple_of(2) {
            return Err(range_err(format!("majority needs odd n, got {n}")));
        }
        let degree = degree.min(n);
        let coeffs = (0..=degree).map(|j| 0.5 * majority_coefficient(n, j)).collect();
        Ok(TruncatedMajority { n, degree, coeffs })
    }

    /// Value from power sums `p[1..=degree]`.
    pub fn eval_power_sums(&self, p: &[f64]) -> f64 {
        let e = elementary_from_power(p, self.degree);
        0.5 + self.coeffs.iter().zip(&e).skip(1).map(|(c, e)| c * e).sum::<f64>()
    }

    /// Value at a ±1 vector summing to `s`.
    pub fn eval_bits(&self, s: f64) -> f64 {
        let p: Vec<f64> = (0..=self.degree)
            .map(|i| if i % 2 == 1 { s } else { self.n as f64 })
            .collect();
        self.eval_power_sums(&p)
    }

    pub fn eval_reals(&self, x: &[f64]) -> f64 {
        let mut p = vec![0.0; self.degree + 1];
        for &v in x {
            let mut pw = 1.0;
            for pi in p.iter_mut().skip(1) {
                pw *= v;
                *pi += pw;
            }
        }
        self.eval_power_sums(&p)
    }

    /// Influence of every coordinate: `Σ_{j odd ≤ d} C(n-1, j-1) c_j²`.
    pub fn influence(&self) -> f64 {
        let n = self.n;
        (1..=self.degree)
            .filter(|j| j % 2 == 1)
            .map(|j| {
                let lc = libm::lgamma(n as f64) - libm::lgamma(j as f64) - libm::lgamma((n - j + 1) as f64);
                lc.exp() * self.coeffs[j].powi(2)
            })
            .sum()
    }
}

/// What the invariance gap is measured on.
#[derive(Debug, Clone)]
pub enum GapSubject {
    Table(MultilinearPoly),
    Majority(TruncatedMajority),
}

#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    pub gap: f64,
    pub std_error: f64,
    pub discrete: StabilityEstimate,
    pub gaussian: StabilityEstimate,
    pub degree: usize,
    pub max_influence: f64,
    pub n: usize,
    pub rho: f64,
    pub functional: Functional,
}

fn eval_gaussian(p: &MultilinearPoly, g: &[f64], scratch: &mut Vec<f64>) -> Vec<f64> {
    // Contract coefficients with (1, g_{i,1}, …, g_{i,q-1}) axis by axis,
    // last axis first.
    let (q, n, k) = (p.q, p.n, p.k);
    scratch.clear();
    scratch.extend_from_slice(&p.coeffs);
    let mut len = scratch.len();
    for axis in (0..n).rev() {
        let v = &g[axis * (q - 1)..(axis + 1) * (q - 1)];
        let out_len = len / q;
        for o in 0..out_len / k {
            for c in 0..k {
                let base = o * q * k;
                let mut s = scratch[base + c];
                for t in 1..q {
                    s += v[t - 1] * scratch[base + t * k + c];
                }
                scratch[o * k + c] = s;
            }
        }
        len = out_len;
    }
    scratch[..k].to_vec()
}

/// `|E Ψ(Q(X), Q(Y)) - E Ψ(Q(G), Q(H))|` where `(X, Y)` is the ρ-correlated
/// discrete pair and `(G, H)` replaces every basis variable by a ρ-correlated
/// standard Gaussian pair. Both sides are independent Monte Carlo runs.
pub fn invariance_gap(subject: &GapSubject, psi: Functional, rho: f64, mc: &McConfig) -> Result<GapReport> {
    let disc_cfg = mc.with_seed(derive_seed(mc.seed, 0));
    let gauss_cfg = mc.with_seed(derive_seed(mc.seed, 1));
    let s = (1.0 - rho * rho).max(0.0).sqrt();
    let (discrete, gaussian, degree, tau, n) = match subject {
        GapSubject::Table(p) => {
            check_noise_rho(p.q, rho)?;
            let f = inverse_transform(p);
            let q = p.q;
            let stay = rho + (1.0 - rho) / q as f64;
            let dparts = disc_cfg.run_blocks(|rng, len| {
                let mut acc = MeanVar::default();
                let mut w = vec![0usize; p.n];
                let mut l = vec![0usize; p.n];
                for _ in 0..len {
                    for (wi, li) in w.iter_mut().zip(l.iter_mut()) {
                        *wi = rng.random_range(0..q);
                        *li = if rng.random::<f64>() < stay {
                            *wi
                        } else {
                            let o = rng.random_range(0..q - 1);
                            if o >= *wi {
                                o + 1
                            } else {
                                o
                            }
                        };
                    }
                    acc.push(psi.apply(f.value(&w), f.value(&l)));
                }
                acc
            });
            let m = (q - 1) * p.n;
            let gparts = gauss_cfg.run_blocks(|rng, len| {
                let mut acc = MeanVar::default();
                let mut g = vec![0.0; m];
                let mut h = vec![0.0; m];
                let mut scratch = Vec::new();
                for _ in 0..len {
                    for (gi, hi) in g.iter_mut().zip(h.iter_mut()) {
                        let a: f64 = rng.sample(StandardNormal);
                        let b: f64 = rng.sample(StandardNormal);
                        *gi = a;
                        *hi = rho * a + s * b;
                    }
                    let qa = eval_gaussian(p, &g, &mut scratch);
                    let qb = eval_gaussian(p, &h, &mut scratch);
                    acc.push(psi.apply(&qa, &qb));
                }
                acc
            });
            let d = MeanVar::merged(&dparts);
            let g = MeanVar::merged(&gparts);
            (d, g, p.degree(), p.max_influence(), p.n)
        }
        GapSubject::Majority(maj) => {
            check_noise_rho(2, rho)?;
            let n = maj.n;
            let dparts = disc_cfg.run_blocks(|rng, len| {
                let mut acc = MeanVar::default();
                let half = Binomial::new(n as u64, 0.5).expect("valid binomial");
                let p_keep = (1.0 + rho) / 2.0;
                let p_flip = (1.0 - rho) / 2.0;
                for _ in 0..len {
                    let a = half.sample(rng);
                    let kept = Binomial::new(a, p_keep).expect("valid binomial").sample(rng);
                    let flipped = Binomial::new(n as u64 - a, p_flip).expect("valid binomial").sample(rng);
                    let sx = 2.0 * a as f64 - n as f64;
                    let sy = 2.0 * (kept + flipped) as f64 - n as f64;
                    acc.push(psi.apply(&[maj.eval_bits(sx)], &[maj.eval_bits(sy)]));
                }
                acc
            });
            let gparts = gauss_cfg.run_blocks(|rng, len| {
                let mut acc = MeanVar::default();
                let d = maj.degree;
                let mut pg = vec![0.0; d + 1];
                let mut ph = vec![0.0; d + 1];
                for _ in 0..len {
                    pg.iter_mut().for_each(|v| *v = 0.0);
                    ph.iter_mut().for_each(|v| *v = 0.0);
                    for _ in 0..n {
                        let a: f64 = rng.sample(StandardNormal);
                        let b: f64 = rng.sample(StandardNormal);
                        let h = rho * a + s * b;
                        let (mut wa, mut wh) = (1.0, 1.0);
                        for i in 1..=d {
                            wa *= a;
                            wh *= h;
                            pg[i] += wa;
                            ph[i] += wh;
                        }
                    }
                    acc.push(psi.apply(&[maj.eval_power_sums(&pg)], &[maj.eval_power_sums(&ph)]));
                }
                acc
            });
            (
                MeanVar::merged(&dparts),
                MeanVar::merged(&gparts),
                maj.degree,
                maj.influence(),
                n,
            )
        }
    };
    let discrete = StabilityEstimate::from_mean(discrete.mean, discrete.std_error(), disc_cfg.samples, disc_cfg.seed);
    let gaussian = StabilityEstimate::from_mean(gaussian.mean, gaussian.std_error(), gauss_cfg.samples, gauss_cfg.seed);
    Ok(GapReport {
        gap: (discrete.value - gaussian.value).abs(),
        std_error: (discrete.std_error.powi(2) + gaussian.std_error.powi(2)).sqrt(),
        discrete,
        gaussian,
        degree,
        max_influence: tau,
        n,
        rho,
        functional: psi,
    })
}

/// `f(ω) = e_{g(V(ω))}` on `[q]^{rn}` with block sums
/// `V_i = (q/√(q-1)) (1/√r) Σ_{l ∈ block i} (1{ω_l = 0} - 1/q)`.
#[derive(Debug, Clone)]
pub struct BlockSumFunction {
    pub q: usize,
    pub r: usize,
    pub g: GaussianPartition,
}

/// Largest table `BlockSumFunction::to_table` will build.
pub const MAX_BLOCK_TABLE: usize = 1 << 20;

pub fn gaussian_to_discrete(g: GaussianPartition, q: usize, r: usize) -> Result<BlockSumFunction> {
    if q < 2 || r < 1 {
        return Err(range_err(format!("need q >= 2 and r >= 1, got q = {q}, r = {r}")));
    }
    Ok(BlockSumFunction { q, r, g })
}

impl BlockSumFunction {
    /// Number of discrete coordinates, `r·n`.
    pub fn m(&self) -> usize {
        self.r * self.g.n()
    }

    fn scale(&self) -> f64 {
        self.q as f64 / ((self.q as f64 - 1.0).sqrt() * (self.r as f64).sqrt())
    }

    /// `V` from per-block counts of symbol 0.
    pub fn block_point(&self, zeros: &[u64]) -> Vec<f64> {
        let c = self.r as f64 / self.q as f64;
        zeros.iter().map(|&z| self.scale() * (z as f64 - c)).collect()
    }

    pub fn cell(&self, omega: &[usize]) -> Result<usize> {
        if omega.len() != self.m() {
            return Err(Error::Dimension {
                expected: self.m(),
                got: omega.len(),
            });
        }
        let zeros: Vec<u64> = omega
            .chunks(self.r)
            .map(|b| b.iter().filter(|&&w| w == 0).count() as u64)
            .collect();
        Ok(self.g.classify_unchecked(&self.block_point(&zeros)))
    }

    pub fn eval(&self, omega: &[usize]) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.g.q()];
        v[self.cell(omega)?] = 1.0;
        Ok(v)
    }

    pub fn to_table(&self) -> Result<DiscreteFunction> {
        table_len(self.q, self.m(), MAX_BLOCK_TABLE)?;
        DiscreteFunction::from_fn(self.q, self.m(), self.g.q(), RangeTag::Vertex, |w| {
            self.eval(w).expect("length matches")
        })
    }

    /// Monte Carlo cell frequencies `E f`, sampling block counts.
    pub fn mean_mc(&self, mc: &McConfig) -> Result<Vec<StabilityEstimate>> {
        let k = self.g.q();
        let n = self.g.n();
        let counts = mc.run_blocks(|rng, len| {
            let bin = Binomial::new(self.r as u64, 1.0 / self.q as f64).expect("valid binomial");
            let mut c = vec![0u64; k];
            let mut z = vec![0u64; n];
            for _ in 0..len {
                z.iter_mut().for_each(|v| *v = bin.sample(rng));
                c[self.g.classify_unchecked(&self.block_point(&z))] += 1;
            }
            c
        });
        Ok((0..k)
            .map(|j| StabilityEstimate::from_count(counts.iter().map(|c| c[j]).sum(), mc.samples, mc.seed))
            .collect())
    }

    /// Monte Carlo `P(f(ω) = f(λ))` for the ρ-correlated pair, sampling
    /// block counts.
    pub fn noise_stability_mc(&self, rho: f64, mc: &McConfig) -> Result<StabilityEstimate> {
        check_noise_rho(self.q, rho)?;
        let n = self.g.n();
        let qf = self.q as f64;
        let p_same = rho + (1.0 - rho) / qf;
        let p_diff = (1.0 - rho) / qf;
        let hits = mc.count(|rng, len| {
            let bin = Binomial::new(self.r as u64, 1.0 / qf).expect("valid binomial");
            let mut zw = vec![0u64; n];
            let mut zl = vec![0u64; n];
            let mut hits = 0;
            for _ in 0..len {
                for (a, b) in zw.iter_mut().zip(zl.iter_mut()) {
                    *a = bin.sample(rng);
                    let stay = Binomial::new(*a, p_same).expect("valid binomial").sample(rng);
                    let arrive = Binomial::new(self.r as u64 - *a, p_diff).expect("valid binomial").sample(rng);
                    *b = stay + arrive;
                }
                let ca = self.g.classify_unchecked(&self.block_point(&zw));
                let cb = self.g.classify_unchecked(&self.block_point(&zl));
                hits += u64::from(ca == cb);
            }
            hits
        });
        Ok(StabilityEstimate::from_count(hits, mc.samples, mc.seed))
    }
}
