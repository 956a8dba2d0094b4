//! Low-rank solver for the vector relaxation
//! `max ((q-1)/q) Σ w (1 - z_u·z_v)` subject to `‖z_u‖ = 1` and
//! `z_u·z_v ≥ -1/(q-1)` for all pairs.
//!
//! Rows of `Z ∈ ℝ^{V×r}` live on unit spheres; the pair constraints enter an
//! augmented Lagrangian whose inner problem is solved by Riemannian gradient
//! descent with Barzilai–Borwein steps and backtracking.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::instance::MaxQCutInstance;
use crate::error::{Error, Result};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdpOptions {
    /// Allowed objective shortfall, relative to total weight.
    pub delta: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Largest acceptable KKT residual of the best restart.
    pub kkt_tol: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions {
            delta: 1e-4,
            restarts: 8,
            seed: 0,
            kkt_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution {
    pub q: usize,
    pub rank: usize,
    /// Row-major `V × rank`.
    pub vectors: Vec<Vec<f64>>,
    pub objective: f64,
    /// Largest `|‖z_u‖ - 1|`.
    pub norm_residual: f64,
    /// Largest violation of `z_u·z_v ≥ -1/(q-1)`.
    pub pair_residual: f64,
    pub kkt_residual: f64,
    pub restart: usize,
}

impl SdpSolution {
    pub fn dot(&self, u: usize, v: usize) -> f64 {
        self.vectors[u].iter().zip(&self.vectors[v]).map(|(a, b)| a * b).sum()
    }
}

/// `min(V, ⌈√(2V)⌉ + 1)`.
pub fn default_rank(v: usize) -> usize {
    v.min(((2.0 * v as f64).sqrt().ceil() as usize) + 1).max(1)
}

struct Problem<'a> {
    g: &'a MaxQCutInstance,
    v: usize,
    r: usize,
    /// `1/(q-1)`; pair constraints are `z_u·z_v + c ≥ 0`.
    c: f64,
    constrained: bool,
}

impl Problem<'_> {
    fn dot(&self, z: &[f64], u: usize, v: usize) -> f64 {
        let r = self.r;
        z[u * r..(u + 1) * r].iter().zip(&z[v * r..(v + 1) * r]).map(|(a, b)| a * b).sum()
    }

    fn pair_index(&self, u: usize, v: usize) -> usize {
        // u < v, row-major upper triangle.
        u * self.v - u * (u + 1) / 2 + (v - u - 1)
    }

    /// Augmented Lagrangian value and Euclidean gradient.
    fn eval(&self, z: &[f64], lam: &[f64], mu: f64, grad: &mut [f64]) -> f64 {
        let r = self.r;
        grad.iter_mut().for_each(|x| *x = 0.0);
        let mut val = 0.0;
        for e in &self.g.edges {
            if e.u == e.v {
                continue;
            }
            val += e.w * self.dot(z, e.u, e.v);
            for k in 0..r {
                grad[e.u * r + k] += e.w * z[e.v * r + k];
                grad[e.v * r + k] += e.w * z[e.u * r + k];
            }
        }
        if self.constrained {
            for u in 0..self.v {
                for v in u + 1..self.v {
                    let l = lam[self.pair_index(u, v)];
                    let gval = self.dot(z, u, v) + self.c;
                    let d = if mu * gval < l {
                        val += -l * gval + 0.5 * mu * gval * gval;
                        -l + mu * gval
                    } else {
                        val += -l * l / (2.0 * mu);
                        0.0
                    };
                    if d != 0.0 {
                        for k in 0..r {
                            grad[u * r + k] += d * z[v * r + k];
                            grad[v * r + k] += d * z[u * r + k];
                        }
                    }
                }
            }
        }
        val
    }

    /// Projects the Euclidean gradient onto the tangent space of each row.
    fn riemannian(&self, z: &[f64], grad: &mut [f64]) {
        let r = self.r;
        for u in 0..self.v {
            let row = &z[u * r..(u + 1) * r];
            let p: f64 = row.iter().zip(&grad[u * r..(u + 1) * r]).map(|(a, b)| a * b).sum();
            for k in 0..r {
                grad[u * r + k] -= p * row[k];
            }
        }
    }

    fn retract(&self, z: &mut [f64]) {
        for row in z.chunks_mut(self.r) {
            let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            row.iter_mut().for_each(|x| *x /= n);
        }
    }

    fn max_violation(&self, z: &[f64]) -> f64 {
        if !self.constrained {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for u in 0..self.v {
            for v in u + 1..self.v {
                worst = worst.max(-(self.dot(z, u, v) + self.c));
            }
        }
        worst
    }

    fn objective(&self, z: &[f64]) -> f64 {
        let q = self.g.q as f64;
        (q - 1.0) / q
            * self
                .g
                .edges
                .iter()
                .filter(|e| e.u != e.v)
                .map(|e| e.w * (1.0 - self.dot(z, e.u, e.v)))
                .sum::<f64>()
    }

    /// Riemannian gradient descent on the augmented Lagrangian, with
    /// Barzilai–Borwein steps and a nonmonotone Armijo test over the last
    /// few values.
    fn inner(&self, z: &mut Vec<f64>, lam: &[f64], mu: f64, tol: f64, max_iter: usize) -> f64 {
        const MEMORY: usize = 8;
        let n = z.len();
        let mut grad = vec![0.0; n];
        let mut val = self.eval(z, lam, mu, &mut grad);
        self.riemannian(z, &mut grad);
        let mut history = std::collections::VecDeque::with_capacity(MEMORY);
        history.push_back(val);
        let mut step = 0.1;
        let mut trial = vec![0.0; n];
        let mut tgrad = vec![0.0; n];
        let mut gnorm = norm(&grad);
        for _ in 0..max_iter {
            if gnorm <= tol {
                break;
            }
            let g2 = gnorm * gnorm;
            let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut accepted = false;
            for _ in 0..60 {
                for i in 0..n {
                    trial[i] = z[i] - step * grad[i];
                }
                self.retract(&mut trial);
                let tv = self.eval(&trial, lam, mu, &mut tgrad);
                if tv <= reference - 1e-4 * step * g2 {
                    accepted = true;
                    self.riemannian(&trial, &mut tgrad);
                    let mut ss = 0.0;
                    let mut sy = 0.0;
                    for i in 0..n {
                        let s = trial[i] - z[i];
                        let y = tgrad[i] - grad[i];
                        ss += s * s;
                        sy += s * y;
                    }
                    std::mem::swap(z, &mut trial);
                    std::mem::swap(&mut grad, &mut tgrad);
                    val = tv;
                    step = if sy > 1e-300 { (ss / sy).clamp(1e-10, 1e4) } else { step * 2.0 };
                    break;
                }
                step *= 0.5;
            }
            gnorm = norm(&grad);
            if !accepted {
                break;
            }
            if history.len() == MEMORY {
                history.pop_front();
            }
            history.push_back(val);
        }
        gnorm
    }

    /// Stationarity of `f - Σ λ g`, complementarity and feasibility.
    fn kkt(&self, z: &[f64], lam: &[f64]) -> f64 {
        let r = self.r;
        let mut grad = vec![0.0; z.len()];
        for e in &self.g.edges {
            if e.u == e.v {
                continue;
            }
            for k in 0..r {
                grad[e.u * r + k] += e.w * z[e.v * r + k];
                grad[e.v * r + k] += e.w * z[e.u * r + k];
            }
        }
        let mut comp: f64 = 0.0;
        if self.constrained {
            for u in 0..self.v {
                for v in u + 1..self.v {
                    let l = lam[self.pair_index(u, v)];
                    if l == 0.0 {
                        continue;
                    }
                    comp = comp.max((l * (self.dot(z, u, v) + self.c)).abs());
                    for k in 0..r {
                        grad[u * r + k] -= l * z[v * r + k];
                        grad[v * r + k] -= l * z[u * r + k];
                    }
                }
            }
        }
        self.riemannian(z, &mut grad);
        let stat = grad.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let scale = self.g.total_weight().max(1.0);
        (stat / scale).max(comp / scale).max(self.max_violation(z))
    }
}

/// Past this the inner problem is too ill-conditioned for first-order steps.
const MU_MAX: f64 = 1e5;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Solves the relaxation from `restarts` random starts and keeps the best.
pub fn sdp_solve(g: &MaxQCutInstance, opts: &SdpOptions) -> Result<SdpSolution> {
    let v = g.vertices;
    let q = g.q;
    if v == 0 {
        return Ok(SdpSolution {
            q,
            rank: 0,
            vectors: Vec::new(),
            objective: 0.0,
            norm_residual: 0.0,
            pair_residual: 0.0,
            kkt_residual: 0.0,
            restart: 0,
        });
    }
    let r = default_rank(v);
    let prob = Problem {
        g,
        v,
        r,
        c: 1.0 / (q as f64 - 1.0),
        // On unit vectors `z_u·z_v ≥ -1` always holds.
        constrained: q > 2 && v > 1,
    };
    let pairs = v * (v - 1) / 2;
    let mut best: Option<(f64, f64, Vec<f64>, usize)> = None;
    for restart in 0..opts.restarts.max(1) {
        let mut rng = stream(opts.seed, restart as u64);
        let mut z: Vec<f64> = (0..v * r).map(|_| rng.sample(StandardNormal)).collect();
        prob.retract(&mut z);
        let mut lam = vec![0.0; pairs];
        let mut mu = 10.0;
        let mut last_viol = f64::INFINITY;
        let mut tol = 1e-3;
        for _ in 0..80 {
            prob.inner(&mut z, &lam, mu, tol, 20_000);
            if !prob.constrained {
                if tol <= 1e-10 {
                    break;
                }
                tol = (tol * 0.01).max(1e-10);
                continue;
            }
            for u in 0..v {
                for w in u + 1..v {
                    let i = prob.pair_index(u, w);
                    let gval = prob.dot(&z, u, w) + prob.c;
                    lam[i] = (lam[i] - mu * gval).max(0.0);
                }
            }
            let viol = prob.max_violation(&z);
            if viol > 1e-10 && viol > 0.25 * last_viol {
                mu = (mu * 4.0).min(MU_MAX);
            }
            last_viol = viol;
            tol = (tol * 0.1).max(1e-10);
            if viol <= 1e-9 && tol <= 1e-10 && prob.kkt(&z, &lam) <= 1e-8 {
                break;
            }
        }
        let kkt = prob.kkt(&z, &lam);
        let obj = prob.objective(&z);
        let viol = prob.max_violation(&z);
        let usable = viol <= 1e-6;
        let better = match &best {
            None => true,
            Some((bo, bk, _, _)) => {
                usable && (obj > bo + 1e-12 || (obj > bo - 1e-12 && kkt < *bk))
            }
        };
        if better && (usable || best.is_none()) {
            best = Some((obj, kkt, z, restart));
        }
    }
    let (objective, kkt_residual, z, restart) = best.expect("at least one restart");
    if kkt_residual > opts.kkt_tol {
        return Err(Error::Convergence(format!(
            "best restart has KKT residual {kkt_residual:.3e} > {:.1e}",
            opts.kkt_tol
        )));
    }
    let vectors: Vec<Vec<f64>> = z.chunks(r).map(<[f64]>::to_vec).collect();
    let norm_residual = vectors
        .iter()
        .map(|row| (norm(row) - 1.0).abs())
        .fold(0.0, f64::max);
    let pair_residual = prob.max_violation(&z);
    Ok(SdpSolution {
        q,
        rank: r,
        vectors,
        objective,
        norm_residual,
        pair_residual,
        kkt_residual,
        restart,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxqcut::instance::Edge;

    #[test]
    fn single_edge_is_antipodal() {
        let g = MaxQCutInstance::new(2, vec![Edge { u: 0, v: 1, w: 1.0 }], 2).unwrap();
        let s = sdp_solve(&g, &SdpOptions::default()).unwrap();
        assert!((s.objective - 1.0).abs() < 1e-6);
        assert!((s.dot(0, 1) + 1.0).abs() < 1e-6);
    }

    #[test]
    fn triangle_values() {
        let s2 = sdp_solve(&MaxQCutInstance::complete(3, 2).unwrap(), &SdpOptions::default()).unwrap();
        assert!((s2.objective - 2.25).abs() < 1e-4, "{}", s2.objective);
        let s3 = sdp_solve(&MaxQCutInstance::complete(3, 3).unwrap(), &SdpOptions::default()).unwrap();
        assert!((s3.objective - 3.0).abs() < 1e-4, "{}", s3.objective);
        assert!(s3.pair_residual <= 1e-6 && s3.norm_residual <= 1e-6);
    }

    #[test]
    fn k4_three_colors_respects_pair_bound() {
        // Unconstrained optimum would use the tetrahedron (dot -1/3); with
        // q = 3 that is still feasible, so the value is (2/3)·6·(4/3).
        let s = sdp_solve(&MaxQCutInstance::complete(4, 3).unwrap(), &SdpOptions::default()).unwrap();
        assert!((s.objective - 16.0 / 3.0).abs() < 1e-4, "{}", s.objective);
        // K5 with q = 3: pair bound -1/2 is slack at -1/4, value (2/3)·10·(5/4).
        let s = sdp_solve(&MaxQCutInstance::complete(5, 3).unwrap(), &SdpOptions::default()).unwrap();
        assert!((s.objective - 25.0 / 3.0).abs() < 1e-4, "{}", s.objective);
    }
}
