//! Condorcet voting, cosmic coin flipping, and plurality.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{range_err, Error, Result};
use crate::estimate::StabilityEstimate;
use crate::fourier::{check_noise_rho, DiscreteFunction, RangeTag};
use crate::gauss::exchangeable_orthant;
use crate::rng::{stream, McConfig, MeanVar, SeededStream};
use crate::stability::simplex_pair_stability;

/// Largest enumeration for the exact modes.
pub const MAX_EXACT: usize = 1 << 24;
/// Largest `2^{2n}` for exact coin computation.
pub const MAX_COIN_STATES: usize = 1 << 20;
const SAMPLED_CHECKS: usize = 10_000;

/// Boolean decision rule `{±1}^n → {0, 1}`; 1 means the first candidate wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BooleanRule {
    /// 1 iff the sum is positive; at even n a zero sum also gives 1.
    Majority { n: usize },
    Dictator { n: usize, voter: usize },
    /// Truth table indexed by the bits `x_i = +1` (most significant first).
    Table { n: usize, values: Vec<u8> },
}

impl BooleanRule {
    pub fn n(&self) -> usize {
        match self {
            BooleanRule::Majority { n } | BooleanRule::Dictator { n, .. } | BooleanRule::Table { n, .. } => *n,
        }
    }

    pub fn majority(n: usize) -> Self {
        BooleanRule::Majority { n }
    }

    #[inline]
    pub fn eval(&self, x: &[i8]) -> u8 {
        match self {
            BooleanRule::Majority { .. } => {
                let s: i64 = x.iter().map(|&v| i64::from(v)).sum();
                u8::from(s >= 0 && (s > 0 || x.len().is_multiple_of(2)))
            }
            BooleanRule::Dictator { voter, .. } => u8::from(x[*voter] > 0),
            BooleanRule::Table { values, .. } => {
                let idx = x.iter().fold(0usize, |acc, &v| (acc << 1) | usize::from(v > 0));
                values[idx]
            }
        }
    }

    /// Majority decision from the number of `+1` entries.
    fn eval_count(&self, plus: u64) -> Option<u8> {
        match self {
            BooleanRule::Majority { n } => {
                let s = 2 * plus as i64 - *n as i64;
                Some(u8::from(s > 0 || (s == 0 && n % 2 == 0)))
            }
            _ => None,
        }
    }

    /// Table form of `1 - f`.
    pub fn negated(&self) -> Result<Self> {
        let n = self.n();
        if n > 24 {
            return Err(Error::Scale(format!("cannot table a rule on {n} bits")));
        }
        let values = (0..1usize << n).map(|i| 1 - self.eval(&bits(i, n))).collect();
        Ok(BooleanRule::Table { n, values })
    }

    /// `f(-x) = 1 - f(x)`, exactly for n ≤ 20, else on sampled inputs.
    pub fn check_antisymmetric(&self, seed: u64) -> Result<()> {
        let n = self.n();
        let bad = |x: &[i8]| {
            let neg: Vec<i8> = x.iter().map(|v| -v).collect();
            self.eval(&neg) != 1 - self.eval(x)
        };
        if n <= 20 {
            for i in 0..1usize << n {
                let x = bits(i, n);
                if bad(&x) {
                    return Err(Error::AntiSymmetry(format!("f(-x) != 1 - f(x) at {x:?}")));
                }
            }
        } else {
            let mut rng = stream(seed, 0);
            for _ in 0..SAMPLED_CHECKS {
                let x: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
                if bad(&x) {
                    return Err(Error::AntiSymmetry("f(-x) != 1 - f(x) on a sampled input".into()));
                }
            }
        }
        Ok(())
    }
}

fn bits(i: usize, n: usize) -> Vec<i8> {
    (0..n).map(|j| if (i >> (n - 1 - j)) & 1 == 1 { 1 } else { -1 }).collect()
}

/// All permutations of `[k]` in lexicographic order.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        // Next lexicographic permutation.
        let Some(i) = (0..k.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            break;
        };
        let j = (i + 1..k).rev().find(|&j| cur[j] > cur[i]).unwrap();
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
    out
}

/// n voters' rankings of k candidates, best first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingProfile {
    pub k: usize,
    pub orders: Vec<Vec<usize>>,
}

impl RankingProfile {
    pub fn new(k: usize, orders: Vec<Vec<usize>>) -> Result<Self> {
        for o in &orders {
            let mut s = o.clone();
            s.sort_unstable();
            if s != (0..k).collect::<Vec<_>>() {
                return Err(Error::Invariant(format!("{o:?} is not a permutation of [{k}]")));
            }
        }
        Ok(RankingProfile { k, orders })
    }

    pub fn random(k: usize, n: usize, rng: &mut SeededStream) -> Self {
        let orders = (0..n)
            .map(|_| {
                let mut o: Vec<usize> = (0..k).collect();
                o.shuffle(rng);
                o
            })
            .collect();
        RankingProfile { k, orders }
    }

    pub fn n(&self) -> usize {
        self.orders.len()
    }

    /// `x^{a>b}`: +1 where the voter ranks a above b.
    pub fn pairwise(&self, a: usize, b: usize) -> Vec<i8> {
        self.orders
            .iter()
            .map(|o| {
                let pa = o.iter().position(|&c| c == a).unwrap();
                let pb = o.iter().position(|&c| c == b).unwrap();
                if pa < pb {
                    1
                } else {
                    -1
                }
            })
            .collect()
    }
}

/// Complete directed graph on `[k]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tournament {
    pub k: usize,
    /// `beats[a][b]` iff a → b.
    pub beats: Vec<Vec<bool>>,
}

impl Tournament {
    /// The candidate beating every other one, if any.
    pub fn unique_best(&self) -> Option<usize> {
        (0..self.k).find(|&a| (0..self.k).all(|b| b == a || self.beats[a][b]))
    }

    pub fn is_valid(&self) -> bool {
        (0..self.k).all(|a| !self.beats[a][a] && (0..self.k).all(|b| a == b || self.beats[a][b] != self.beats[b][a]))
    }
}

/// `(a > b) ∈ G` iff `f(x^{a>b}) = 1`, for anti-symmetric f.
pub fn aggregate(profile: &RankingProfile, f: &BooleanRule) -> Result<Tournament> {
    if f.n() != profile.n() {
        return Err(Error::Dimension {
            expected: f.n(),
            got: profile.n(),
        });
    }
    f.check_antisymmetric(0)?;
    Ok(tournament_of(profile, f))
}

fn tournament_of(profile: &RankingProfile, f: &BooleanRule) -> Tournament {
    let k = profile.k;
    let mut beats = vec![vec![false; k]; k];
    for a in 0..k {
        for b in a + 1..k {
            let w = f.eval(&profile.pairwise(a, b)) == 1;
            beats[a][b] = w;
            beats[b][a] = !w;
        }
    }
    Tournament { k, beats }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    MonteCarlo,
}

/// Exact `P[candidate c is the unique best]` for each c, over all `(k!)^n`
/// profiles.
pub fn unique_best_exact_per_candidate(f: &BooleanRule, k: usize) -> Result<Vec<f64>> {
    let n = f.n();
    f.check_antisymmetric(0)?;
    let perms = permutations(k);
    let total = perms
        .len()
        .checked_pow(n as u32)
        .filter(|&t| t <= MAX_EXACT)
        .ok_or_else(|| Error::Scale(format!("({k}!)^{n} profiles exceed {MAX_EXACT}")))?;
    // Sign of every pair for every permutation.
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();
    let signs: Vec<Vec<i8>> = perms
        .iter()
        .map(|o| {
            pairs
                .iter()
                .map(|&(a, b)| {
                    if o.iter().position(|&c| c == a) < o.iter().position(|&c| c == b) {
                        1
                    } else {
                        -1
                    }
                })
                .collect()
        })
        .collect();
    let mut wins = vec![0u64; k];
    let mut idx = vec![0usize; n];
    let mut x = vec![0i8; n];
    let mut beats = vec![vec![false; k]; k];
    for _ in 0..total {
        for (p, &(a, b)) in pairs.iter().enumerate() {
            for v in 0..n {
                x[v] = signs[idx[v]][p];
            }
            let w = f.eval(&x) == 1;
            beats[a][b] = w;
            beats[b][a] = !w;
        }
        if let Some(c) = (0..k).find(|&a| (0..k).all(|b| b == a || beats[a][b])) {
            wins[c] += 1;
        }
        for d in idx.iter_mut().rev() {
            *d += 1;
            if *d < perms.len() {
                break;
            }
            *d = 0;
        }
    }
    Ok(wins.into_iter().map(|w| w as f64 / total as f64).collect())
}

/// Draws multinomial counts by sequential binomials.
pub fn multinomial(rng: &mut SeededStream, n: u64, probs: &[f64], out: &mut [u64]) {
    let mut left = n;
    let mut mass = 1.0;
    let last = probs.len() - 1;
    for (i, &p) in probs.iter().enumerate() {
        if i == last || left == 0 {
            out[i] = if i == last { left } else { 0 };
            left -= out[i];
            continue;
        }
        let pr = (p / mass).clamp(0.0, 1.0);
        out[i] = Binomial::new(left, pr).expect("valid binomial").sample(rng);
        left -= out[i];
        mass -= p;
    }
}

/// `P[UniqueBest]` under i.i.d. uniform rankings.
pub fn unique_best_prob(f: &BooleanRule, k: usize, mode: Mode, mc: &McConfig) -> Result<StabilityEstimate> {
    if k < 2 {
        return Err(range_err(format!("need k >= 2, got {k}")));
    }
    match mode {
        Mode::Exact => {
            let p: f64 = unique_best_exact_per_candidate(f, k)?.iter().sum();
            Ok(StabilityEstimate::exact(p))
        }
        Mode::MonteCarlo => {
            f.check_antisymmetric(mc.seed)?;
            let n = f.n();
            let perms = permutations(k);
            let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();
            let hits = if let BooleanRule::Majority { .. } = f {
                // Only the ranking counts matter.
                let above: Vec<Vec<bool>> = perms
                    .iter()
                    .map(|o| {
                        pairs
                            .iter()
                            .map(|&(a, b)| o.iter().position(|&c| c == a) < o.iter().position(|&c| c == b))
                            .collect()
                    })
                    .collect();
                let probs = vec![1.0 / perms.len() as f64; perms.len()];
                mc.count(|rng, len| {
                    let mut counts = vec![0u64; perms.len()];
                    let mut beats = vec![vec![false; k]; k];
                    let mut hits = 0;
                    for _ in 0..len {
                        multinomial(rng, n as u64, &probs, &mut counts);
                        for (p, &(a, b)) in pairs.iter().enumerate() {
                            let plus: u64 = counts.iter().zip(&above).filter(|(_, ab)| ab[p]).map(|(c, _)| c).sum();
                            let w = f.eval_count(plus) == Some(1);
                            beats[a][b] = w;
                            beats[b][a] = !w;
                        }
                        if (0..k).any(|a| (0..k).all(|b| b == a || beats[a][b])) {
                            hits += 1;
                        }
                    }
                    hits
                })
            } else {
                mc.count(|rng, len| {
                    let mut hits = 0;
                    for _ in 0..len {
                        let prof = RankingProfile::random(k, n, rng);
                        if tournament_of(&prof, f).unique_best().is_some() {
                            hits += 1;
                        }
                    }
                    hits
                })
            };
            Ok(StabilityEstimate::from_count(hits, mc.samples, mc.seed))
        }
    }
}

/// `k · P(Z_2 ≤ 0, …, Z_k ≤ 0)` with pairwise correlation 1/3.
pub fn majority_unique_best_limit(k: usize) -> Result<f64> {
    if k < 2 {
        return Err(range_err(format!("need k >= 2, got {k}")));
    }
    Ok(k as f64 * exchangeable_orthant(&vec![0.0; k - 1], 1.0 / 3.0)?)
}

/// One draw of the coin protocol: a uniform source `x` and k copies, each
/// bit flipped with probability `(1-ρ)/2`.
pub fn sample_coin(n: usize, k: usize, rho: f64, rng: &mut SeededStream) -> (Vec<i8>, Vec<Vec<i8>>) {
    let flip = (1.0 - rho) / 2.0;
    let x: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    let ys = (0..k)
        .map(|_| x.iter().map(|&v| if rng.random::<f64>() < flip { -v } else { v }).collect())
        .collect();
    (x, ys)
}

/// `P(f(Y_1) = … = f(Y_k))`.
pub fn cosmic_coin_prob(f: &BooleanRule, k: usize, rho: f64, mode: Mode, mc: &McConfig) -> Result<StabilityEstimate> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(range_err(format!("rho must be in [0, 1], got {rho}")));
    }
    if k < 1 {
        return Err(range_err("need k >= 1"));
    }
    let n = f.n();
    let flip = (1.0 - rho) / 2.0;
    match mode {
        Mode::Exact => {
            if n >= 16 || 1usize << (2 * n) > MAX_COIN_STATES {
                return Err(Error::Scale(format!("2^(2·{n}) coin states exceed {MAX_COIN_STATES}")));
            }
            let size = 1usize << n;
            let values: Vec<u8> = (0..size).map(|i| f.eval(&bits(i, n))).collect();
            let weights: Vec<f64> = (0..=n)
                .map(|d| flip.powi(d as i32) * (1.0 - flip).powi((n - d) as i32))
                .collect();
            let mut total = 0.0;
            for x in 0..size {
                let p1: f64 = (0..size)
                    .filter(|&y| values[y] == 1)
                    .map(|y| weights[(x ^ y).count_ones() as usize])
                    .sum();
                total += p1.powi(k as i32) + (1.0 - p1).powi(k as i32);
            }
            Ok(StabilityEstimate::exact(total / size as f64))
        }
        Mode::MonteCarlo => {
            let hits = if let BooleanRule::Majority { .. } = f {
                mc.count(|rng, len| {
                    let src = Binomial::new(n as u64, 0.5).expect("valid binomial");
                    let mut hits = 0;
                    for _ in 0..len {
                        let s = src.sample(rng);
                        let keep = Binomial::new(s, 1.0 - flip).expect("valid binomial");
                        let turn = Binomial::new(n as u64 - s, flip).expect("valid binomial");
                        let first = f.eval_count(keep.sample(rng) + turn.sample(rng));
                        if (1..k).all(|_| f.eval_count(keep.sample(rng) + turn.sample(rng)) == first) {
                            hits += 1;
                        }
                    }
                    hits
                })
            } else {
                mc.count(|rng, len| {
                    let mut hits = 0;
                    for _ in 0..len {
                        let (_, ys) = sample_coin(n, k, rho, rng);
                        let first = f.eval(&ys[0]);
                        if ys[1..].iter().all(|y| f.eval(y) == first) {
                            hits += 1;
                        }
                    }
                    hits
                })
            };
            Ok(StabilityEstimate::from_count(hits, mc.samples, mc.seed))
        }
    }
}

/// `2 · P(∀j: Z_j ≤ 0)` with pairwise correlation ρ².
pub fn majority_coin_limit(k: usize, rho: f64) -> Result<f64> {
    if k < 2 || !(0.0..=1.0).contains(&rho) {
        return Err(range_err(format!("need k >= 2 and rho in [0, 1], got k = {k}, rho = {rho}")));
    }
    Ok((2.0 * exchangeable_orthant(&vec![0.0; k], rho * rho)?).min(1.0))
}

/// Plurality of n votes over q candidates; ties split the mass equally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plurality {
    pub q: usize,
    pub n: usize,
}

/// Largest table `Plurality::to_table` builds.
pub const MAX_PLURALITY_TABLE: usize = 1 << 20;

impl Plurality {
    pub fn new(q: usize, n: usize) -> Result<Self> {
        if q < 2 || n < 1 {
            return Err(range_err(format!("need q >= 2 and n >= 1, got q = {q}, n = {n}")));
        }
        Ok(Plurality { q, n })
    }

    /// Output from vote counts per candidate.
    pub fn from_counts(&self, counts: &[u64]) -> Vec<f64> {
        let top = counts.iter().copied().max().unwrap_or(0);
        let ties = counts.iter().filter(|&&c| c == top).count() as f64;
        counts.iter().map(|&c| if c == top { 1.0 / ties } else { 0.0 }).collect()
    }

    pub fn eval(&self, omega: &[usize]) -> Result<Vec<f64>> {
        if omega.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: omega.len(),
            });
        }
        let mut counts = vec![0u64; self.q];
        for &w in omega {
            if w >= self.q {
                return Err(Error::Index(format!("symbol {w} >= q = {}", self.q)));
            }
            counts[w] += 1;
        }
        Ok(self.from_counts(&counts))
    }

    pub fn to_table(&self) -> Result<DiscreteFunction> {
        crate::fourier::table_len(self.q, self.n, MAX_PLURALITY_TABLE)?;
        DiscreteFunction::from_fn(self.q, self.n, self.q, RangeTag::Simplex, |w| self.eval(w).expect("valid input"))
    }

    /// Monte Carlo `E ⟨PLUR(ω), PLUR(λ)⟩` from sampled vote counts.
    pub fn noise_stability_mc(&self, rho: f64, mc: &McConfig) -> Result<StabilityEstimate> {
        check_noise_rho(self.q, rho)?;
        let q = self.q;
        let qf = q as f64;
        let uniform = vec![1.0 / qf; q];
        let moves: Vec<Vec<f64>> = (0..q)
            .map(|a| (0..q).map(|b| if a == b { rho } else { 0.0 } + (1.0 - rho) / qf).collect())
            .collect();
        let parts = mc.run_blocks(|rng, len| {
            let mut acc = MeanVar::default();
            let mut cw = vec![0u64; q];
            let mut cl = vec![0u64; q];
            let mut tmp = vec![0u64; q];
            for _ in 0..len {
                multinomial(rng, self.n as u64, &uniform, &mut cw);
                cl.iter_mut().for_each(|c| *c = 0);
                for a in 0..q {
                    multinomial(rng, cw[a], &moves[a], &mut tmp);
                    cl.iter_mut().zip(&tmp).for_each(|(c, t)| *c += t);
                }
                let fa = self.from_counts(&cw);
                let fb = self.from_counts(&cl);
                acc.push(fa.iter().zip(&fb).map(|(x, y)| x * y).sum());
            }
            acc
        });
        let m = MeanVar::merged(&parts);
        Ok(StabilityEstimate::from_mean(m.mean, m.std_error(), mc.samples, mc.seed))
    }
}

/// Limit of plurality stability as n → ∞: the simplex partition's stability.
pub fn plurality_stability_limit(q: usize, rho: f64, mc: &McConfig) -> Result<StabilityEstimate> {
    check_noise_rho(q, rho)?;
    simplex_pair_stability(q, rho, mc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{noise_stability, StabilityPath};
    use std::f64::consts::PI;

    #[test]
    fn permutations_of_three() {
        let p = permutations(3);
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], vec![0, 1, 2]);
        assert_eq!(p[5], vec![2, 1, 0]);
    }

    #[test]
    fn dictator_and_unanimous_profiles() {
        let prof = RankingProfile::new(4, vec![vec![2, 0, 3, 1]]).unwrap();
        let t = aggregate(&prof, &BooleanRule::Dictator { n: 1, voter: 0 }).unwrap();
        assert!(t.is_valid());
        assert_eq!(t.unique_best(), Some(2));
        assert!(t.beats[0][3] && t.beats[3][1]);
        let prof = RankingProfile::new(3, vec![vec![1, 2, 0]; 5]).unwrap();
        let t = aggregate(&prof, &BooleanRule::majority(5)).unwrap();
        assert_eq!(t.unique_best(), Some(1));
        assert!(t.beats[2][0]);
    }

    #[test]
    fn condorcet_cycle() {
        let prof = RankingProfile::new(3, vec![vec![0, 1, 2], vec![1, 2, 0], vec![2, 0, 1]]).unwrap();
        let t = aggregate(&prof, &BooleanRule::majority(3)).unwrap();
        assert!(t.beats[0][1] && t.beats[1][2] && t.beats[2][0]);
        assert_eq!(t.unique_best(), None);
    }

    #[test]
    fn even_majority_is_not_antisymmetric() {
        let prof = RankingProfile::new(3, vec![vec![0, 1, 2]; 2]).unwrap();
        assert!(matches!(aggregate(&prof, &BooleanRule::majority(2)), Err(Error::AntiSymmetry(_))));
    }

    #[test]
    fn unique_best_small_cases() {
        let mc = McConfig::new(1000, 0);
        assert_eq!(unique_best_prob(&BooleanRule::majority(1), 3, Mode::Exact, &mc).unwrap().value, 1.0);
        assert_eq!(unique_best_prob(&BooleanRule::majority(3), 2, Mode::Exact, &mc).unwrap().value, 1.0);
        // MAJ_3 on three candidates: 1 - P(cycle) = 1 - 12/216.
        let p = unique_best_prob(&BooleanRule::majority(3), 3, Mode::Exact, &mc).unwrap().value;
        assert!((p - (1.0 - 12.0 / 216.0)).abs() < 1e-15);
    }

    #[test]
    fn unique_best_limits() {
        assert!((majority_unique_best_limit(2).unwrap() - 1.0).abs() < 1e-12);
        let want = 3.0 * (0.25 + (1.0f64 / 3.0).asin() / (2.0 * PI));
        assert!((majority_unique_best_limit(3).unwrap() - want).abs() < 1e-10);
        assert!((want - 0.912_260).abs() < 1e-6);
    }

    #[test]
    fn coin_exact_cases() {
        let mc = McConfig::new(10, 0);
        let id = BooleanRule::Dictator { n: 1, voter: 0 };
        for rho in [0.0, 0.3, 0.8] {
            let p = cosmic_coin_prob(&id, 2, rho, Mode::Exact, &mc).unwrap().value;
            assert!((p - (1.0 + rho * rho) / 2.0).abs() < 1e-14);
        }
        let maj = BooleanRule::majority(5);
        assert!((cosmic_coin_prob(&maj, 4, 1.0, Mode::Exact, &mc).unwrap().value - 1.0).abs() < 1e-14);
        assert!(matches!(
            cosmic_coin_prob(&BooleanRule::majority(11), 3, 0.5, Mode::Exact, &mc),
            Err(Error::Scale(_))
        ));
    }

    #[test]
    fn coin_limits() {
        assert!((majority_coin_limit(3, 0.0).unwrap() - 0.25).abs() < 1e-14);
        assert!((majority_coin_limit(4, 1.0).unwrap() - 1.0).abs() < 1e-14);
        let r: f64 = 0.7;
        let want = 2.0 * (0.25 + (r * r).asin() / (2.0 * PI));
        assert!((majority_coin_limit(2, r).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn plurality_ties_and_q2() {
        let p = Plurality::new(3, 2).unwrap();
        assert_eq!(p.eval(&[1, 2]).unwrap(), vec![0.0, 0.5, 0.5]);
        let p2 = Plurality::new(2, 3).unwrap();
        let t = p2.to_table().unwrap();
        for w in [[0, 0, 1], [1, 1, 0], [1, 1, 1]] {
            let ones = w.iter().filter(|&&x| x == 1).count();
            assert_eq!(t.value(&w)[1], f64::from(u8::from(ones >= 2)));
        }
    }

    #[test]
    fn plurality_mc_matches_table() {
        let p = Plurality::new(3, 4).unwrap();
        let exact = noise_stability(&p.to_table().unwrap(), 0.4, StabilityPath::Fourier).unwrap();
        let mc = p.noise_stability_mc(0.4, &McConfig::new(400_000, 3)).unwrap();
        assert!(mc.agrees_with(exact, 3.0), "{mc:?} vs {exact}");
    }

    #[test]
    fn multinomial_sums() {
        let mut rng = stream(1, 0);
        let mut out = vec![0u64; 4];
        for _ in 0..100 {
            multinomial(&mut rng, 37, &[0.1, 0.2, 0.3, 0.4], &mut out);
            assert_eq!(out.iter().sum::<u64>(), 37);
        }
    }
}
