//! Randomized rounding of relaxation vectors through a Gaussian partition.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::instance::{brute_force_opt, MaxQCutInstance};
use super::sdp::{sdp_solve, SdpOptions, SdpSolution};
use crate::error::{Error, Result};
use crate::partitions::GaussianPartition;
use crate::rng::{derive_seed, McConfig, MeanVar, SeededStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingResult {
    pub best_labels: Vec<usize>,
    pub best_value: f64,
    pub mean_value: f64,
    pub std_error: f64,
    pub repeats: u64,
    pub seed: u64,
}

/// One rounding: `l(u) = cell of T z_u` with `T` an `m × r` Gaussian matrix.
fn round_once(
    sol: &SdpSolution,
    partition: &GaussianPartition,
    rng: &mut SeededStream,
    t: &mut [f64],
    proj: &mut [f64],
    labels: &mut [usize],
) {
    let r = sol.rank;
    t.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
    for (u, z) in sol.vectors.iter().enumerate() {
        for (i, p) in proj.iter_mut().enumerate() {
            *p = t[i * r..(i + 1) * r].iter().zip(z).map(|(a, b)| a * b).sum();
        }
        labels[u] = partition.classify_unchecked(proj);
    }
}

/// Rounds `sol` `repeats` times and reports the best and mean cut values.
/// `partition` must have `g.q` cells; its dimension is the projection rank `m`.
pub fn round(
    sol: &SdpSolution,
    g: &MaxQCutInstance,
    partition: &GaussianPartition,
    repeats: u64,
    seed: u64,
) -> Result<RoundingResult> {
    if partition.q() != g.q {
        return Err(Error::Invariant(format!("partition has {} cells, instance needs {}", partition.q(), g.q)));
    }
    if sol.vectors.len() != g.vertices {
        return Err(Error::Dimension {
            expected: g.vertices,
            got: sol.vectors.len(),
        });
    }
    if repeats == 0 {
        return Err(Error::Range("need at least one rounding repeat".into()));
    }
    let m = partition.n();
    let mc = McConfig::new(repeats, seed);
    let blocks = mc.run_blocks(|rng, len| {
        let mut t = vec![0.0; m * sol.rank];
        let mut proj = vec![0.0; m];
        let mut labels = vec![0; g.vertices];
        let mut stats = MeanVar::default();
        let mut best: Option<(f64, Vec<usize>)> = None;
        for _ in 0..len {
            round_once(sol, partition, rng, &mut t, &mut proj, &mut labels);
            let v = g.cut_value(&labels);
            stats.push(v);
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, labels.clone()));
            }
        }
        (stats, best)
    });
    let stats = MeanVar::merged(&blocks.iter().map(|(s, _)| *s).collect::<Vec<_>>());
    let (best_value, best_labels) = blocks
        .into_iter()
        .filter_map(|(_, b)| b)
        .fold(None, |acc: Option<(f64, Vec<usize>)>, (v, l)| match acc {
            Some((bv, bl)) if bv >= v => Some((bv, bl)),
            _ => Some((v, l)),
        })
        .expect("repeats > 0");
    Ok(RoundingResult {
        best_labels,
        best_value,
        mean_value: stats.mean,
        std_error: stats.std_error(),
        repeats,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessEntry {
    pub index: usize,
    pub vertices: usize,
    pub edges: usize,
    pub opt: f64,
    pub sdp: f64,
    pub rounded_best: f64,
    pub rounded_mean: f64,
    pub rounded_se: f64,
    /// `rounded_best / OPT`.
    pub ratio_opt: f64,
    /// `rounded_mean / SDP-VAL`.
    pub ratio_sdp: f64,
    pub ratio_sdp_se: f64,
    /// `SDP-VAL / OPT`.
    pub sdp_over_opt: f64,
    /// `SDP-VAL + δ ≥ OPT`.
    pub relaxation_ok: bool,
    /// The best labeling's cut value, recomputed, equals `rounded_best`.
    pub recomputed_ok: bool,
    /// `ratio_sdp < α_q - 3·SE`.
    pub below_alpha: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessReport {
    pub q: usize,
    pub alpha: f64,
    pub repeats: u64,
    pub entries: Vec<HarnessEntry>,
    pub mean_ratio_sdp: f64,
    pub relaxation_failures: usize,
    pub flagged: usize,
}

/// Solves, brute-forces and rounds each instance with the simplex partition
/// in `ℝ^{q-1}`. Instances with zero total weight are skipped.
pub fn approx_ratio_harness(
    instances: &[MaxQCutInstance],
    alpha: f64,
    repeats: u64,
    seed: u64,
    sdp_opts: &SdpOptions,
) -> Result<HarnessReport> {
    let q = instances.first().map_or(2, |g| g.q);
    let mut entries = Vec::with_capacity(instances.len());
    for (i, g) in instances.iter().enumerate() {
        if g.q != q {
            return Err(Error::Invariant("all harness instances must share q".into()));
        }
        let total = g.total_weight();
        if total <= 0.0 {
            continue;
        }
        let (opt, _) = brute_force_opt(g)?;
        let opts = SdpOptions {
            seed: derive_seed(sdp_opts.seed, i as u64),
            ..*sdp_opts
        };
        let sol = sdp_solve(g, &opts)?;
        let partition = GaussianPartition::simplex(q, q - 1)?;
        let rr = round(&sol, g, &partition, repeats, derive_seed(seed, i as u64))?;
        let delta = opts.delta * total;
        let ratio_sdp = rr.mean_value / sol.objective;
        let ratio_sdp_se = rr.std_error / sol.objective;
        entries.push(HarnessEntry {
            index: i,
            vertices: g.vertices,
            edges: g.edges.len(),
            opt,
            sdp: sol.objective,
            rounded_best: rr.best_value,
            rounded_mean: rr.mean_value,
            rounded_se: rr.std_error,
            ratio_opt: if opt > 0.0 { rr.best_value / opt } else { 1.0 },
            ratio_sdp,
            ratio_sdp_se,
            sdp_over_opt: if opt > 0.0 { sol.objective / opt } else { 1.0 },
            relaxation_ok: sol.objective + delta >= opt,
            recomputed_ok: g.cut_value(&rr.best_labels) == rr.best_value,
            below_alpha: ratio_sdp < alpha - 3.0 * ratio_sdp_se,
        });
    }
    let mean_ratio_sdp = if entries.is_empty() {
        f64::NAN
    } else {
        entries.iter().map(|e| e.ratio_sdp).sum::<f64>() / entries.len() as f64
    };
    Ok(HarnessReport {
        q,
        alpha,
        repeats,
        relaxation_failures: entries.iter().filter(|e| !e.relaxation_ok).count(),
        flagged: entries.iter().filter(|e| e.below_alpha || !e.recomputed_ok).count(),
        entries,
        mean_ratio_sdp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxqcut::instance::Edge;

    fn manual(vectors: Vec<Vec<f64>>, q: usize) -> SdpSolution {
        SdpSolution {
            q,
            rank: vectors[0].len(),
            vectors,
            objective: 0.0,
            norm_residual: 0.0,
            pair_residual: 0.0,
            kkt_residual: 0.0,
            restart: 0,
        }
    }

    #[test]
    fn identical_vectors_never_cut() {
        let g = MaxQCutInstance::complete(4, 3).unwrap();
        let sol = manual(vec![vec![1.0, 0.0]; 4], 3);
        let p = GaussianPartition::simplex(3, 2).unwrap();
        let r = round(&sol, &g, &p, 200, 1).unwrap();
        assert_eq!(r.best_value, 0.0);
        assert_eq!(r.mean_value, 0.0);
    }

    #[test]
    fn antipodal_edge_always_cut() {
        let g = MaxQCutInstance::new(2, vec![Edge { u: 0, v: 1, w: 1.0 }], 2).unwrap();
        let sol = manual(vec![vec![0.6, 0.8], vec![-0.6, -0.8]], 2);
        let p = GaussianPartition::simplex(2, 1).unwrap();
        let r = round(&sol, &g, &p, 500, 2).unwrap();
        assert_eq!(r.mean_value, 1.0);
        assert_eq!(r.best_labels.len(), 2);
    }

    #[test]
    fn triangle_three_colors_ratio() {
        let g = MaxQCutInstance::complete(3, 3).unwrap();
        let sol = sdp_solve(&g, &SdpOptions::default()).unwrap();
        let p = GaussianPartition::simplex(3, 2).unwrap();
        let r = round(&sol, &g, &p, 10_000, 3).unwrap();
        assert!(r.mean_value / sol.objective >= 0.836 - 0.02, "{}", r.mean_value);
        assert!(r.best_value == 3.0);
    }

    #[test]
    fn rejects_mismatched_partition() {
        let g = MaxQCutInstance::complete(3, 3).unwrap();
        let sol = manual(vec![vec![1.0]; 3], 3);
        let p = GaussianPartition::simplex(2, 1).unwrap();
        assert!(round(&sol, &g, &p, 10, 0).is_err());
    }
}
