//! Gaussian noise stability of sets and partitions, and the property checks
//! built on it: the exchangeable Gaussian isoperimetric inequality for k
//! sets, and the standard simplex comparison for balanced partitions.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use serde_json::Value;

use crate::error::{range_err, Error, Result};
use crate::estimate::StabilityEstimate;
use crate::gauss::{bivariate_orthant, exchangeable_orthant, normal_quantile_extended, ExchangeableCov, ExchangeableSampler};
use crate::partitions::{
    defuzzify, random_direction, AxisBox, FuzzyPartition, GaussianPartition, GaussianSet, PartitionKind,
};
use crate::rng::{derive_seed, stream, McConfig, MeanVar, SeededStream};

/// Margins below `-VIOLATION_Z * combined_se` are flagged.
pub const VIOLATION_Z: f64 = 3.0;

/// `P(X_1 ∈ A_1, …, X_k ∈ A_k)` for exchangeable `X_j ∈ ℝⁿ` with pairwise
/// correlation `cov.rho()`.
pub fn stab_sigma(sets: &[GaussianSet], cov: &ExchangeableCov, n: usize, mc: &McConfig) -> Result<StabilityEstimate> {
    let k = cov.k();
    if sets.len() != k {
        return Err(Error::Dimension {
            expected: k,
            got: sets.len(),
        });
    }
    for s in sets {
        if let Some(d) = s.dim() {
            if d != n {
                return Err(Error::Dimension { expected: n, got: d });
            }
        }
    }
    if sets.iter().all(|s| matches!(s, GaussianSet::Everything)) {
        return Ok(StabilityEstimate::exact(1.0));
    }
    let sampler = ExchangeableSampler::new(cov, n)?;
    let hits = mc.count(|rng, len| {
        let mut x = vec![0.0; k * n];
        let mut g = vec![0.0; k];
        let mut hits = 0;
        for _ in 0..len {
            sampler.fill(rng, &mut x, &mut g);
            if sets.iter().enumerate().all(|(j, s)| s.contains(&x[j * n..(j + 1) * n])) {
                hits += 1;
            }
        }
        hits
    });
    Ok(StabilityEstimate::from_count(hits, mc.samples, mc.seed))
}

/// `P(X ≤ a, Y ≤ b)` with infinite endpoints allowed.
fn bvn_cdf(a: f64, b: f64, rho: f64) -> Result<f64> {
    bivariate_orthant(a, b, rho)
}

/// Probability that a ρ-correlated pair lands in the same slab, by
/// inclusion–exclusion on bivariate orthants.
fn stack_pair_stability(cuts: &[f64], norm: f64, rho: f64) -> Result<f64> {
    let mut edges = vec![f64::NEG_INFINITY];
    edges.extend(cuts.iter().map(|c| c / norm));
    edges.push(f64::INFINITY);
    let mut total = 0.0;
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if lo >= hi {
            continue;
        }
        total += bvn_cdf(hi, hi, rho)? - 2.0 * bvn_cdf(lo, hi, rho)? + bvn_cdf(lo, lo, rho)?;
    }
    Ok(total.clamp(0.0, 1.0))
}

fn check_pair_rho(rho: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(range_err(format!("correlation {rho} outside [-1, 1]")));
    }
    Ok(())
}

/// Draws a ρ-correlated pair `(x, y)` in ℝⁿ.
#[inline]
fn draw_pair(rng: &mut SeededStream, rho: f64, s: f64, x: &mut [f64], y: &mut [f64]) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        *xi = a;
        *yi = rho * a + s * b;
    }
}

/// Monte Carlo `P(classify(X) = classify(Y))`, ignoring closed forms.
pub fn pair_partition_stability_mc(p: &GaussianPartition, rho: f64, mc: &McConfig) -> Result<StabilityEstimate> {
    check_pair_rho(rho)?;
    let n = p.n();
    let s = (1.0 - rho * rho).max(0.0).sqrt();
    let hits = mc.count(|rng, len| {
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut hits = 0;
        for _ in 0..len {
            draw_pair(rng, rho, s, &mut x, &mut y);
            if p.classify_unchecked(&x) == p.classify_unchecked(&y) {
                hits += 1;
            }
        }
        hits
    });
    Ok(StabilityEstimate::from_count(hits, mc.samples, mc.seed))
}

/// `P(classify(X) = classify(Y))` for the ρ-correlated Gaussian pair.
/// Half-space stacks are evaluated by bivariate quadrature; other kinds by
/// Monte Carlo.
pub fn pair_partition_stability(p: &GaussianPartition, rho: f64, mc: &McConfig) -> Result<StabilityEstimate> {
    check_pair_rho(rho)?;
    if rho == 1.0 {
        return Ok(StabilityEstimate::exact(1.0));
    }
    if let PartitionKind::HalfSpaceStack { direction, cuts } = p.kind() {
        let norm = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
        return Ok(StabilityEstimate::quadrature(stack_pair_stability(cuts, norm, rho)?));
    }
    pair_partition_stability_mc(p, rho, mc)
}

/// Whether `rho` lies in `[-1/(q-1), 1]`, the range where the simplex
/// quantity is used.
pub fn simplex_rho_in_range(q: usize, rho: f64) -> bool {
    rho >= -1.0 / (q as f64 - 1.0) - 1e-12 && rho <= 1.0
}

/// Simplex stability by Monte Carlo regardless of q. A fixed seed gives
/// common random numbers across `rho`.
pub fn simplex_pair_stability_mc(q: usize, rho: f64, mc: &McConfig) -> Result<StabilityEstimate> {
    let p = GaussianPartition::simplex(q, q - 1)?;
    pair_partition_stability_mc(&p, rho, mc)
}

/// Noise stability of the standard simplex partition in ℝ^{q-1}; `q = 2` is
/// `1/2 + arcsin(ρ)/π`.
pub fn simplex_pair_stability(q: usize, rho: f64, mc: &McConfig) -> Result<StabilityEstimate> {
    if q < 2 {
        return Err(range_err(format!("q must be >= 2, got {q}")));
    }
    check_pair_rho(rho)?;
    if rho == 1.0 {
        return Ok(StabilityEstimate::exact(1.0));
    }
    if q == 2 {
        return Ok(StabilityEstimate::closed_form(0.5 + rho.asin() / std::f64::consts::PI));
    }
    simplex_pair_stability_mc(q, rho, mc)
}

/// k sets with their Gaussian measures.
#[derive(Debug, Clone)]
pub struct SetFamily {
    pub label: String,
    pub sets: Vec<GaussianSet>,
    pub measures: Vec<f64>,
    /// Standard errors of `measures`; zero when exact.
    pub measure_se: Vec<f64>,
}

impl SetFamily {
    /// Fills in measures from the sets; fails if any set lacks one.
    pub fn from_sets(label: impl Into<String>, sets: Vec<GaussianSet>) -> Result<Self> {
        let measures = sets
            .iter()
            .map(|s| s.measure().ok_or_else(|| Error::Invariant("set has no exact measure".into())))
            .collect::<Result<Vec<_>>>()?;
        let k = sets.len();
        Ok(SetFamily {
            label: label.into(),
            sets,
            measures,
            measure_se: vec![0.0; k],
        })
    }

    pub fn k(&self) -> usize {
        self.sets.len()
    }
}

/// The equality case: parallel half-spaces `{x_1 ≤ Φ⁻¹(m_i)}`.
pub fn halfspace_family(measures: &[f64], n: usize) -> Result<SetFamily> {
    let sets = measures
        .iter()
        .map(|&m| GaussianSet::canonical_halfspace(n, m))
        .collect::<Result<Vec<_>>>()?;
    SetFamily::from_sets("parallel_halfspaces", sets)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Boxes,
    HalfSpaces,
    Defuzzified,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 3] = [FamilyKind::Boxes, FamilyKind::HalfSpaces, FamilyKind::Defuzzified];
}

/// Union of ≤ 8 random boxes, scaled by bisection to the target measure.
fn random_box_set(n: usize, target: f64, rng: &mut SeededStream) -> Result<GaussianSet> {
    let count = rng.random_range(1..=8usize);
    let centers: Vec<Vec<f64>> = (0..count)
        .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let widths: Vec<Vec<f64>> = (0..count)
        .map(|_| (0..n).map(|_| rng.random_range(0.3..1.5)).collect())
        .collect();
    let boxes_at = |s: f64| -> Vec<AxisBox> {
        centers
            .iter()
            .zip(&widths)
            .map(|(c, w)| AxisBox {
                lo: c.iter().zip(w).map(|(ci, wi)| ci - s * wi).collect(),
                hi: c.iter().zip(w).map(|(ci, wi)| ci + s * wi).collect(),
            })
            .collect()
    };
    let measure = |s: f64| GaussianSet::Boxes(boxes_at(s)).measure().unwrap_or(0.0);
    let mut hi = 1.0;
    while measure(hi) < target {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Invariant("box scale search diverged".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if measure(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(GaussianSet::Boxes(boxes_at(hi)))
}

/// Cell 0 of a defuzzified wavy sigmoid in ℝⁿ (n ≤ 3), mass-transferred to
/// the target measure.
fn random_defuzzified_set(n: usize, target: f64, rng: &mut SeededStream) -> Result<GaussianSet> {
    let u = random_direction(n, rng);
    let v = random_direction(n, rng);
    let beta = rng.random_range(1.0..6.0);
    let amp = rng.random_range(0.0..1.5);
    let freq = rng.random_range(0.5..3.0);
    let shift = crate::gauss::normal_inv_cdf(1.0 - target)?;
    let g = FuzzyPartition::new(n, 2, move |x: &[f64]| {
        let t = crate::partitions::dot(&u, x) + amp * (freq * crate::partitions::dot(&v, x)).sin() - shift;
        let s = 1.0 / (1.0 + (beta * t).exp());
        vec![s, 1.0 - s]
    });
    let (p, _) = defuzzify(&g, 0.1, Some(&[target, 1.0 - target]))?;
    Ok(GaussianSet::Cell {
        partition: Arc::new(p),
        cell: 0,
    })
}

/// One random family of k sets in ℝⁿ with target measures drawn from
/// `[0.15, 0.85]`.
pub fn random_family(kind: FamilyKind, k: usize, n: usize, seed: u64) -> Result<SetFamily> {
    let mut rng = stream(seed, 0);
    let targets: Vec<f64> = (0..k).map(|_| rng.random_range(0.15..0.85)).collect();
    let sets = match kind {
        FamilyKind::Boxes => targets
            .iter()
            .map(|&m| random_box_set(n, m, &mut rng))
            .collect::<Result<Vec<_>>>()?,
        FamilyKind::HalfSpaces => targets
            .iter()
            .map(|&m| {
                Ok(GaussianSet::HalfSpace {
                    direction: random_direction(n, &mut rng),
                    threshold: normal_quantile_extended(m)?,
                })
            })
            .collect::<Result<Vec<_>>>()?,
        FamilyKind::Defuzzified => targets
            .iter()
            .map(|&m| random_defuzzified_set(n, m, &mut rng))
            .collect::<Result<Vec<_>>>()?,
    };
    let label = serde_json::to_value(kind)?.as_str().unwrap_or_default().to_string();
    SetFamily::from_sets(label, sets)
}

/// `count` families cycling through the generator kinds.
pub fn random_families(count: usize, k: usize, n: usize, seed: u64) -> Result<Vec<SetFamily>> {
    (0..count)
        .map(|i| random_family(FamilyKind::ALL[i % 3], k, n, derive_seed(seed, i as u64)))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct EgtEntry {
    pub label: String,
    pub measures: Vec<f64>,
    pub lhs: StabilityEstimate,
    pub rhs: f64,
    pub rhs_se: f64,
    /// `rhs - lhs`.
    pub margin: f64,
    pub combined_se: f64,
    pub violation: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EgtReport {
    pub k: usize,
    pub rho: f64,
    pub entries: Vec<EgtEntry>,
    pub violations: usize,
}

/// Compares `P(∀i: X_i ∈ A_i)` against the parallel half-space value
/// `P(∀i: X_i ∈ H_i)` for every family.
pub fn egt_check(families: &[SetFamily], rho: f64, mc: &McConfig) -> Result<EgtReport> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(range_err(format!("rho must be in [0, 1], got {rho}")));
    }
    let k = families.first().map(SetFamily::k).unwrap_or(0);
    let mut entries = Vec::with_capacity(families.len());
    for (f, fam) in families.iter().enumerate() {
        if fam.k() != k {
            return Err(Error::Dimension { expected: k, got: fam.k() });
        }
        let n = fam.sets.iter().find_map(GaussianSet::dim).unwrap_or(1);
        let cov = ExchangeableCov::new(k, rho)?;
        let lhs = stab_sigma(&fam.sets, &cov, n, &mc.with_seed(derive_seed(mc.seed, f as u64)))?;
        let rhs_at = |m: &[f64]| -> Result<f64> {
            let t = m
                .iter()
                .map(|&x| normal_quantile_extended(x.clamp(0.0, 1.0)))
                .collect::<Result<Vec<_>>>()?;
            exchangeable_orthant(&t, rho)
        };
        let rhs = rhs_at(&fam.measures)?;
        let mut rhs_var = 0.0;
        for i in 0..k {
            if fam.measure_se[i] > 0.0 {
                let h = 1e-4;
                let mut up = fam.measures.clone();
                let mut dn = fam.measures.clone();
                up[i] += h;
                dn[i] -= h;
                let d = (rhs_at(&up)? - rhs_at(&dn)?) / (2.0 * h);
                rhs_var += (d * fam.measure_se[i]).powi(2);
            }
        }
        let rhs_se = rhs_var.sqrt();
        let margin = rhs - lhs.value;
        let combined_se = (lhs.std_error.powi(2) + rhs_se.powi(2)).sqrt();
        entries.push(EgtEntry {
            label: fam.label.clone(),
            measures: fam.measures.clone(),
            lhs,
            rhs,
            rhs_se,
            margin,
            combined_se,
            violation: margin < -VIOLATION_Z * combined_se,
        });
    }
    let violations = entries.iter().filter(|e| e.violation).count();
    Ok(EgtReport {
        k,
        rho,
        entries,
        violations,
    })
}

/// Cell-measure drift tolerated before a candidate is rebalanced.
pub const BALANCE_TOL: f64 = 1e-3;
const REPAIR_DELTA: f64 = 0.05;

/// A candidate partition for the simplex comparison.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub label: String,
    pub partition: GaussianPartition,
}

#[derive(Debug, Clone, Serialize)]
pub struct SscEntry {
    pub label: String,
    pub candidate: StabilityEstimate,
    pub simplex: StabilityEstimate,
    /// Signed so that a negative value goes against the conjectured order:
    /// `simplex - candidate` for `rho ≥ 0`, `candidate - simplex` for `rho < 0`.
    pub margin: f64,
    pub combined_se: f64,
    /// Standard error of the paired difference under common random numbers.
    pub paired_se: f64,
    pub repaired: bool,
    pub violation: bool,
    /// Serialized partition, present only for flagged candidates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Value>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SscReport {
    pub q: usize,
    pub n: usize,
    pub rho: f64,
    pub entries: Vec<SscEntry>,
    pub violations: usize,
}

/// Rebalances a partition of ℝⁿ (n ≤ 3) to cell measures `1/q` by
/// defuzzifying its indicator map with mass transfer.
pub fn rebalance(p: &GaussianPartition) -> Result<GaussianPartition> {
    let q = p.q();
    let g = FuzzyPartition::from_partition(Arc::new(p.clone()));
    let targets = vec![1.0 / q as f64; q];
    Ok(defuzzify(&g, REPAIR_DELTA, Some(&targets))?.0)
}

fn needs_rebalance(p: &GaussianPartition) -> bool {
    let q = p.q() as f64;
    match p.cell_measures() {
        Some(m) => m.iter().any(|&x| (x - 1.0 / q).abs() > BALANCE_TOL),
        None => true,
    }
}

/// Compares each candidate's pair stability with the standard simplex
/// partition on shared draws. For `rho ≥ 0` candidates are rebalanced first
/// when their measures drift.
pub fn ssc_probe(q: usize, n: usize, rho: f64, candidates: &[Candidate], mc: &McConfig) -> Result<SscReport> {
    if q < 3 {
        return Err(range_err(format!("simplex comparison needs q >= 3, got {q}")));
    }
    if q > n + 1 {
        return Err(range_err(format!("q = {q} exceeds n + 1 = {}", n + 1)));
    }
    check_pair_rho(rho)?;
    let simplex = GaussianPartition::simplex(q, n)?;
    let s = (1.0 - rho * rho).max(0.0).sqrt();
    let mut entries = Vec::with_capacity(candidates.len());
    for (c, cand) in candidates.iter().enumerate() {
        if cand.partition.n() != n || cand.partition.q() != q {
            return Err(Error::Dimension {
                expected: n,
                got: cand.partition.n(),
            });
        }
        let mut repaired = false;
        let part = if rho >= 0.0 && needs_rebalance(&cand.partition) {
            repaired = true;
            rebalance(&cand.partition)?
        } else {
            cand.partition.clone()
        };
        let cfg = mc.with_seed(derive_seed(mc.seed, c as u64));
        let blocks = cfg.run_blocks(|rng, len| {
            let mut x = vec![0.0; n];
            let mut y = vec![0.0; n];
            let (mut a, mut b) = (0u64, 0u64);
            let mut diff = MeanVar::default();
            for _ in 0..len {
                draw_pair(rng, rho, s, &mut x, &mut y);
                let ca = part.classify_unchecked(&x) == part.classify_unchecked(&y);
                let cb = simplex.classify_unchecked(&x) == simplex.classify_unchecked(&y);
                a += u64::from(ca);
                b += u64::from(cb);
                diff.push(f64::from(u8::from(ca)) - f64::from(u8::from(cb)));
            }
            (a, b, diff)
        });
        let hits_c: u64 = blocks.iter().map(|t| t.0).sum();
        let hits_s: u64 = blocks.iter().map(|t| t.1).sum();
        let diff = MeanVar::merged(&blocks.iter().map(|t| t.2).collect::<Vec<_>>());
        let candidate = StabilityEstimate::from_count(hits_c, cfg.samples, cfg.seed);
        let simplex_est = StabilityEstimate::from_count(hits_s, cfg.samples, cfg.seed);
        let margin = if rho >= 0.0 {
            simplex_est.value - candidate.value
        } else {
            candidate.value - simplex_est.value
        };
        let combined_se = (candidate.std_error.powi(2) + simplex_est.std_error.powi(2)).sqrt();
        let violation = margin < -VIOLATION_Z * combined_se;
        entries.push(SscEntry {
            label: cand.label.clone(),
            candidate,
            simplex: simplex_est,
            margin,
            combined_se,
            paired_se: diff.std_error(),
            repaired,
            violation,
            counterexample: violation.then(|| part.to_json()),
        });
    }
    let violations = entries.iter().filter(|e| e.violation).count();
    Ok(SscReport {
        q,
        n,
        rho,
        entries,
        violations,
    })
}

/// Balanced random labeling of an `m × m` quantile grid in the first two
/// coordinates (`q` must divide `m²`).
pub fn random_grid_labeling(q: usize, n: usize, m: usize, rng: &mut SeededStream) -> Result<GaussianPartition> {
    if n < 2 || !(m * m).is_multiple_of(q) {
        return Err(range_err(format!("grid {m}x{m} cannot be split evenly into {q} labels in n = {n}")));
    }
    let edges: Vec<f64> = (0..=m)
        .map(|i| normal_quantile_extended(i as f64 / m as f64))
        .collect::<Result<_>>()?;
    let mut labels: Vec<usize> = (0..m * m).map(|i| i % q).collect();
    for i in (1..labels.len()).rev() {
        labels.swap(i, rng.random_range(0..=i));
    }
    let mut boxes = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let mut lo = vec![f64::NEG_INFINITY; n];
            let mut hi = vec![f64::INFINITY; n];
            lo[0] = edges[i];
            hi[0] = edges[i + 1];
            lo[1] = edges[j];
            hi[1] = edges[j + 1];
            boxes.push((AxisBox { lo, hi }, labels[i * m + j]));
        }
    }
    let last = boxes.pop().map(|(_, c)| c).unwrap_or(0);
    GaussianPartition::box_union(n, q, boxes, last)
}

/// Random candidates: balanced half-space stacks in random directions,
/// balanced quantile-grid labelings, and perturbed simplex partitions
/// (which need rebalancing). Exact simplex partitions are never produced.
pub fn random_candidates(q: usize, n: usize, count: usize, seed: u64) -> Result<Vec<Candidate>> {
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = stream(derive_seed(seed, i as u64), 0);
        let cand = match i % 3 {
            0 => {
                let stack = crate::partitions::halfspace_stack(&vec![1.0 / q as f64; q], n)?;
                let rot = crate::partitions::random_rotation(n, &mut rng);
                Candidate {
                    label: "halfspace_stack".into(),
                    partition: stack.rotated(&rot)?,
                }
            }
            1 => {
                let m = if q == 3 { [3, 6, 9][rng.random_range(0..3)] } else { q };
                Candidate {
                    label: format!("grid_{m}x{m}"),
                    partition: random_grid_labeling(q, n, m, &mut rng)?,
                }
            }
            _ => {
                let base = GaussianPartition::simplex(q, n)?;
                let PartitionKind::Simplex { generators, .. } = base.kind() else {
                    unreachable!()
                };
                let eps = rng.random_range(0.1..0.6);
                let generators: Vec<Vec<f64>> = generators
                    .iter()
                    .map(|g| {
                        g.iter()
                            .map(|&v| v + eps * rng.sample::<f64, _>(StandardNormal))
                            .collect()
                    })
                    .collect();
                let gens = Arc::new(generators);
                let p = GaussianPartition::callback(n, q, move |x| {
                    let mut best = 0;
                    let mut val = f64::NEG_INFINITY;
                    for (i, g) in gens.iter().enumerate() {
                        let v = crate::partitions::dot(g, x);
                        if v > val {
                            best = i;
                            val = v;
                        }
                    }
                    best
                });
                Candidate {
                    label: "perturbed_simplex".into(),
                    partition: p,
                }
            }
        };
        out.push(cand);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partitions::halfspace_stack;
    use std::f64::consts::PI;

    fn sheppard(rho: f64) -> f64 {
        0.25 + rho.asin() / (2.0 * PI)
    }

    #[test]
    fn everything_is_exactly_one() {
        let cov = ExchangeableCov::new(3, 0.2).unwrap();
        let e = stab_sigma(&vec![GaussianSet::Everything; 3], &cov, 2, &McConfig::new(10, 0)).unwrap();
        assert_eq!(e.value, 1.0);
    }

    #[test]
    fn stab_sigma_halfspaces_match_orthants() {
        let mc = McConfig::new(400_000, 1);
        let h = GaussianSet::canonical_halfspace(2, 0.5).unwrap();
        let cov = ExchangeableCov::new(2, 0.5).unwrap();
        let e = stab_sigma(&[h.clone(), h.clone()], &cov, 2, &mc).unwrap();
        assert!(e.agrees_with(1.0 / 3.0, 3.0), "{e:?}");
        let cov = ExchangeableCov::new(3, 0.0).unwrap();
        let e = stab_sigma(&[h.clone(), h.clone(), h], &cov, 2, &mc).unwrap();
        assert!(e.agrees_with(0.125, 3.0), "{e:?}");
    }

    #[test]
    fn two_cell_stack_closed_form() {
        let p = halfspace_stack(&[0.5, 0.5], 3).unwrap();
        let e = pair_partition_stability(&p, 0.6, &McConfig::new(1, 0)).unwrap();
        assert!((e.value - (0.5 + 0.6f64.asin() / PI)).abs() < 1e-9);
        assert!((e.value - 0.704_833).abs() < 1e-6);
        assert!((e.value - 2.0 * sheppard(0.6)).abs() < 1e-12);
    }

    #[test]
    fn stack_at_zero_is_sum_of_squares() {
        let m = [0.2, 0.5, 0.3];
        let p = halfspace_stack(&m, 1).unwrap();
        let e = pair_partition_stability(&p, 0.0, &McConfig::new(1, 0)).unwrap();
        let want: f64 = m.iter().map(|x| x * x).sum();
        assert!((e.value - want).abs() < 1e-10);
        let mc = pair_partition_stability_mc(&p, 0.0, &McConfig::new(200_000, 4)).unwrap();
        assert!(mc.agrees_with(want, 3.0));
    }

    #[test]
    fn simplex_trivial_points() {
        let mc = McConfig::new(200_000, 2);
        assert!(simplex_pair_stability(3, 0.0, &mc).unwrap().agrees_with(1.0 / 3.0, 3.0));
        assert_eq!(simplex_pair_stability(3, 1.0, &mc).unwrap().value, 1.0);
        let e = simplex_pair_stability(2, 0.3, &mc).unwrap();
        assert_eq!(e.value, 0.5 + 0.3f64.asin() / PI);
        assert!(simplex_rho_in_range(3, -0.5) && !simplex_rho_in_range(3, -0.6));
    }

    #[test]
    fn egt_equality_case_has_zero_margin() {
        let fam = halfspace_family(&[0.3, 0.6, 0.5], 2).unwrap();
        let r = egt_check(&[fam], 0.4, &McConfig::new(300_000, 9)).unwrap();
        let e = &r.entries[0];
        assert!(e.margin.abs() <= 3.0 * e.combined_se, "{e:?}");
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn egt_two_directions() {
        let mut rng = stream(11, 0);
        let sets: Vec<GaussianSet> = (0..2)
            .map(|_| GaussianSet::HalfSpace {
                direction: random_direction(3, &mut rng),
                threshold: 0.0,
            })
            .collect();
        let fam = SetFamily::from_sets("dirs", sets).unwrap();
        let r = egt_check(&[fam], 0.5, &McConfig::new(200_000, 5)).unwrap();
        assert!(r.entries[0].margin > -3.0 * r.entries[0].combined_se);
        assert!((r.entries[0].rhs - sheppard(0.5)).abs() < 1e-10);
    }

    #[test]
    fn generated_families_hit_targets() {
        for kind in FamilyKind::ALL {
            let fam = random_family(kind, 3, 2, 17).unwrap();
            let mut rng = stream(17, 0);
            for (i, m) in fam.measures.iter().enumerate() {
                let want: f64 = rng.random_range(0.15..0.85);
                assert!((m - want).abs() < 1e-6, "{kind:?} set {i}: {m} vs {want}");
            }
        }
    }

    #[test]
    fn grid_labeling_is_balanced() {
        let mut rng = stream(3, 0);
        let p = random_grid_labeling(3, 2, 6, &mut rng).unwrap();
        for m in p.cell_measures().unwrap() {
            assert!((m - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rebalance_hits_uniform_measures() {
        let c = &random_candidates(3, 2, 3, 5).unwrap()[2];
        let p = rebalance(&c.partition).unwrap();
        for m in p.cell_measures().unwrap() {
            assert!((m - 1.0 / 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn ssc_rejects_too_many_cells() {
        assert!(ssc_probe(4, 2, 0.5, &[], &McConfig::new(10, 0)).is_err());
    }
}
