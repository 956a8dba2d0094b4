//! `α_q = inf_ρ (q/(q-1))·(1 - qI(ρ))/(1 - ρ)` with `qI` the simplex pair
//! stability, minimized over `ρ ∈ [-1/(q-1), 0]`.

use serde::{Deserialize, Serialize};

use crate::error::{range_err, Result};
use crate::estimate::Method;
use crate::rng::McConfig;
use crate::stability::{simplex_pair_stability, simplex_pair_stability_mc};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaOptions {
    pub mc: McConfig,
    pub grid: usize,
    /// Use the Monte Carlo path even for `q = 2`.
    pub force_mc: bool,
    /// Search `[-1/(q-1), 1)` instead of `[-1/(q-1), 0]`.
    pub full_interval: bool,
}

impl AlphaOptions {
    pub fn new(samples: u64, seed: u64) -> Self {
        AlphaOptions {
            mc: McConfig::new(samples, seed),
            grid: 64,
            force_mc: false,
            full_interval: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaResult {
    pub q: usize,
    pub alpha: f64,
    pub rho_star: f64,
    /// Standard error of the ratio at `rho_star`; zero on the closed-form path.
    pub std_error: f64,
    pub method: Method,
    pub evaluations: usize,
    pub lo: f64,
    pub hi: f64,
}

/// Upper end of the full-interval scan; the ratio is continuous up to 1.
const FULL_HI: f64 = 0.999;
const GOLDEN_ITERS: usize = 40;

fn golden(mut a: f64, mut b: f64, iters: usize, tol: f64, f: &mut impl FnMut(f64) -> f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

pub fn alpha_q(q: usize, opts: &AlphaOptions) -> Result<AlphaResult> {
    if q < 2 {
        return Err(range_err(format!("need q >= 2, got {q}")));
    }
    let qf = q as f64;
    let lo = -1.0 / (qf - 1.0);
    let hi = if opts.full_interval { FULL_HI } else { 0.0 };
    let scale = qf / (qf - 1.0);

    if q == 2 && !opts.force_mc {
        // 2·arccos(ρ)/(π(1-ρ)) is unimodal on [-1, 1).
        let mut evals = 0;
        let mut f = |rho: f64| {
            evals += 1;
            2.0 * rho.acos() / (std::f64::consts::PI * (1.0 - rho))
        };
        let (rho_star, alpha) = golden(lo, hi, 200, 1e-13, &mut f);
        let (rho_star, alpha) = [(lo, f(lo)), (hi, f(hi)), (rho_star, alpha)]
            .into_iter()
            .fold((rho_star, alpha), |m, p| if p.1 < m.1 { p } else { m });
        return Ok(AlphaResult {
            q,
            alpha,
            rho_star,
            std_error: 0.0,
            method: Method::ClosedForm,
            evaluations: evals,
            lo,
            hi,
        });
    }

    // The same seed at every ρ gives common random numbers along the search.
    let mut evals = 0;
    let mut ratio = |rho: f64| -> Result<(f64, f64)> {
        evals += 1;
        let est = if opts.force_mc {
            simplex_pair_stability_mc(q, rho, &opts.mc)?
        } else {
            simplex_pair_stability(q, rho, &opts.mc)?
        };
        let s = scale / (1.0 - rho);
        Ok((s * (1.0 - est.value), s * est.std_error))
    };
    let grid = opts.grid.max(2);
    let step = (hi - lo) / (grid - 1) as f64;
    let mut vals = Vec::with_capacity(grid);
    for i in 0..grid {
        let rho = if i + 1 == grid { hi } else { lo + step * i as f64 };
        vals.push((rho, ratio(rho)?));
    }
    let (imin, _) = vals
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |m, (i, (_, (v, _)))| if *v < m.1 { (i, *v) } else { m });
    let a = vals[imin.saturating_sub(1)].0;
    let b = vals[(imin + 1).min(grid - 1)].0;
    let mut err = None;
    let mut f = |rho: f64| match ratio(rho) {
        Ok((v, _)) => v,
        Err(e) => {
            err = Some(e);
            f64::INFINITY
        }
    };
    let (rho_g, val_g) = golden(a, b, GOLDEN_ITERS, 1e-9, &mut f);
    if let Some(e) = err {
        return Err(e);
    }
    let (rho_star, alpha, se) = if val_g < vals[imin].1 .0 {
        let (_, se) = ratio(rho_g)?;
        (rho_g, val_g, se)
    } else {
        (vals[imin].0, vals[imin].1 .0, vals[imin].1 .1)
    };
    Ok(AlphaResult {
        q,
        alpha,
        rho_star,
        std_error: se,
        method: Method::MonteCarlo,
        evaluations: evals,
        lo,
        hi,
    })
}
