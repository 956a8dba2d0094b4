//! Correlated Gaussian linear algebra, exchangeable sampling, and the scalar
//! normal kernels (CDF, quantile, bivariate and exchangeable orthants).

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{range_err, Error, Result};
use crate::estimate::StabilityEstimate;
use crate::quadrature::{integrate, integrate_with_breaks};
use crate::rng::{McConfig, SeededStream};

/// Truncation window for integrals against the normal density; the mass
/// outside is below 1e-17.
pub const TAIL_CUTOFF: f64 = 8.5;

const QUAD_TOL: f64 = 1e-13;

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Φ(x)` without cancellation.
pub fn normal_sf(x: f64) -> f64 {
    normal_cdf(-x)
}

/// `Φ(b) - Φ(a)` evaluated on whichever side of zero keeps precision.
pub fn normal_mass(a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if a >= 0.0 {
        normal_sf(a) - normal_sf(b)
    } else {
        normal_cdf(b) - normal_cdf(a)
    }
}

const ACKLAM_A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const ACKLAM_B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const ACKLAM_C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const ACKLAM_D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];

fn acklam(p: f64) -> f64 {
    let (a, b, c, d) = (ACKLAM_A, ACKLAM_B, ACKLAM_C, ACKLAM_D);
    if p < 0.02425 {
        let q = (-2.0 * p.ln()).sqrt();
        (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    }
}

/// Inverse of [`normal_cdf`]: rational initializer refined by two Halley
/// steps. Lower tail is computed directly, upper tail by symmetry.
pub fn normal_inv_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("probability {p} not in (0, 1)")));
    }
    if p > 0.5 {
        return Ok(-lower_quantile(1.0 - p));
    }
    Ok(lower_quantile(p))
}

fn lower_quantile(p: f64) -> f64 {
    let mut x = acklam(p);
    for _ in 0..2 {
        let e = normal_cdf(x) - p;
        let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// Quantile that maps the closed endpoints to ±∞; used for thresholds of
/// sets with measure 0 or 1.
pub fn normal_quantile_extended(p: f64) -> Result<f64> {
    if p <= 0.0 {
        if p < -1e-12 {
            return Err(Error::Domain(format!("probability {p} negative")));
        }
        return Ok(f64::NEG_INFINITY);
    }
    if p >= 1.0 {
        if p > 1.0 + 1e-12 {
            return Err(Error::Domain(format!("probability {p} above one")));
        }
        return Ok(f64::INFINITY);
    }
    normal_inv_cdf(p)
}

/// The k×k covariance `ρ J + (1-ρ) I` shared coordinatewise by k exchangeable
/// Gaussian vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExchangeableCov {
    k: usize,
    rho: f64,
}

impl ExchangeableCov {
    pub fn new(k: usize, rho: f64) -> Result<Self> {
        if k < 2 {
            return Err(range_err(format!("need at least two vectors, got k = {k}")));
        }
        let lower = -1.0 / (k as f64 - 1.0);
        // Admit rounding of the boundary value -1/(k-1).
        if !(rho >= lower - 1e-12 && rho <= 1.0) || rho.is_nan() {
            return Err(range_err(format!(
                "rho = {rho} outside [{lower}, 1] for k = {k}; covariance not PSD"
            )));
        }
        Ok(ExchangeableCov { k, rho: rho.max(lower) })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `(1 + (k-1)ρ, 1 - ρ)`, the latter with multiplicity k-1.
    pub fn eigenvalues(&self) -> (f64, f64) {
        (1.0 + (self.k as f64 - 1.0) * self.rho, 1.0 - self.rho)
    }

    pub fn is_degenerate(&self) -> bool {
        let (top, rest) = self.eigenvalues();
        top <= 1e-14 || rest <= 1e-14
    }

    /// `(a, b)` with `Σ⁻¹ = -a J + b I`, i.e. entries `-a + b δ_ij`.
    pub fn inverse_coeffs(&self) -> Option<(f64, f64)> {
        if self.is_degenerate() {
            return None;
        }
        let r = self.rho;
        let b = 1.0 / (1.0 - r);
        let a = r / ((1.0 - r) * (1.0 + r * (self.k as f64 - 1.0)));
        Some((a, b))
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        (0..self.k)
            .map(|i| (0..self.k).map(|j| if i == j { 1.0 } else { self.rho }).collect())
            .collect()
    }

    pub fn inverse_matrix(&self) -> Option<Vec<Vec<f64>>> {
        let (a, b) = self.inverse_coeffs()?;
        Some(
            (0..self.k)
                .map(|i| (0..self.k).map(|j| -a + if i == j { b } else { 0.0 }).collect())
                .collect(),
        )
    }
}

pub fn exchangeable_cov(k: usize, rho: f64) -> Result<ExchangeableCov> {
    ExchangeableCov::new(k, rho)
}

/// One draw of k vectors in ℝⁿ; row j is `X_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSample {
    pub k: usize,
    pub n: usize,
    pub data: Vec<f64>,
}

impl GaussianSample {
    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }
}

/// Spectral-form sampler:
/// `X = √(1-ρ) G + ((√(1+(k-1)ρ) - √(1-ρ)) / k) (Σ_j G_j) 1`, coordinatewise.
#[derive(Debug, Clone, Copy)]
pub struct ExchangeableSampler {
    k: usize,
    n: usize,
    own: f64,
    shared: f64,
}

impl ExchangeableSampler {
    pub fn new(cov: &ExchangeableCov, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(range_err("dimension n must be at least 1"));
        }
        let (top, rest) = cov.eigenvalues();
        let own = rest.max(0.0).sqrt();
        let shared = (top.max(0.0).sqrt() - own) / cov.k as f64;
        Ok(ExchangeableSampler {
            k: cov.k,
            n,
            own,
            shared,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Fills `out` (length k·n, row-major by vector) with one draw. `g` is
    /// scratch of length k.
    #[inline]
    pub fn fill(&self, rng: &mut SeededStream, out: &mut [f64], g: &mut [f64]) {
        debug_assert_eq!(out.len(), self.k * self.n);
        for i in 0..self.n {
            let mut s = 0.0;
            for gj in g.iter_mut() {
                *gj = rng.sample(StandardNormal);
                s += *gj;
            }
            let common = self.shared * s;
            for (j, gj) in g.iter().enumerate() {
                out[j * self.n + i] = self.own * gj + common;
            }
        }
    }

    pub fn draw(&self, rng: &mut SeededStream) -> GaussianSample {
        let mut data = vec![0.0; self.k * self.n];
        let mut g = vec![0.0; self.k];
        self.fill(rng, &mut data, &mut g);
        GaussianSample {
            k: self.k,
            n: self.n,
            data,
        }
    }
}

/// Stream of `count` i.i.d. exchangeable draws.
pub fn sample_exchangeable<'a>(
    cov: &ExchangeableCov,
    n: usize,
    count: usize,
    rng: &'a mut SeededStream,
) -> Result<impl Iterator<Item = GaussianSample> + 'a> {
    let sampler = ExchangeableSampler::new(cov, n)?;
    Ok((0..count).map(move |_| sampler.draw(rng)))
}

/// `P(X ≤ a, Y ≤ b)` for a standard bivariate normal with correlation `rho`.
pub fn bivariate_orthant(a: f64, b: f64, rho: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(range_err(format!("correlation {rho} outside [-1, 1]")));
    }
    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if a == f64::INFINITY {
        return Ok(normal_cdf(b));
    }
    if b == f64::INFINITY {
        return Ok(normal_cdf(a));
    }
    if rho == 1.0 {
        return Ok(normal_cdf(a.min(b)));
    }
    if rho == -1.0 {
        return Ok((normal_cdf(a) - normal_sf(b)).max(0.0));
    }
    let s = (1.0 - rho * rho).sqrt();
    let hi = a.min(TAIL_CUTOFF);
    if hi <= -TAIL_CUTOFF {
        return Ok(0.0);
    }
    let mut breaks = vec![0.0];
    if rho != 0.0 {
        breaks.push(b / rho);
    }
    let (v, _) = integrate_with_breaks(
        |x| normal_pdf(x) * normal_cdf((b - rho * x) / s),
        -TAIL_CUTOFF,
        hi,
        &breaks,
        QUAD_TOL,
    );
    Ok(v.clamp(0.0, 1.0))
}

/// Orthant probability of an exchangeable normal vector: how it was computed
/// and its uncertainty.
pub type OrthantEstimate = StabilityEstimate;

/// `P(∀j: Z_j ≤ a_j)` for pairwise correlation `rho ∈ [0, 1]`, by
/// conditioning on the shared factor:
/// `∫ φ(g) ∏_j Φ((a_j - √ρ g)/√(1-ρ)) dg`.
pub fn exchangeable_orthant(thresholds: &[f64], rho: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(range_err(format!(
            "quadrature path needs rho in [0, 1], got {rho}; use exchangeable_orthant_auto"
        )));
    }
    if thresholds.contains(&f64::NEG_INFINITY) {
        return Ok(0.0);
    }
    let finite: Vec<f64> = thresholds.iter().copied().filter(|a| a.is_finite()).collect();
    if finite.is_empty() {
        return Ok(1.0);
    }
    if rho == 1.0 {
        let m = finite.iter().copied().fold(f64::INFINITY, f64::min);
        return Ok(normal_cdf(m));
    }
    if rho == 0.0 {
        return Ok(finite.iter().map(|&a| normal_cdf(a)).product());
    }
    let sr = rho.sqrt();
    let s = (1.0 - rho).sqrt();
    let breaks: Vec<f64> = finite.iter().map(|a| a / sr).collect();
    let (v, _) = integrate_with_breaks(
        |g| {
            let mut p = normal_pdf(g);
            for &a in &finite {
                p *= normal_cdf((a - sr * g) / s);
            }
            p
        },
        -TAIL_CUTOFF,
        TAIL_CUTOFF,
        &breaks,
        QUAD_TOL,
    );
    Ok(v.clamp(0.0, 1.0))
}

/// Monte Carlo orthant probability under the exchangeable law, any rho in
/// the PSD range.
pub fn exchangeable_orthant_mc(thresholds: &[f64], rho: f64, mc: &McConfig) -> Result<OrthantEstimate> {
    let k = thresholds.len();
    if k == 0 {
        return Ok(StabilityEstimate::exact(1.0));
    }
    if k == 1 {
        return Ok(StabilityEstimate::closed_form(normal_cdf(thresholds[0])));
    }
    let cov = ExchangeableCov::new(k, rho)?;
    let sampler = ExchangeableSampler::new(&cov, 1)?;
    let hits = mc.count(|rng, len| {
        let mut x = vec![0.0; k];
        let mut g = vec![0.0; k];
        let mut hits = 0u64;
        for _ in 0..len {
            sampler.fill(rng, &mut x, &mut g);
            if x.iter().zip(thresholds).all(|(xi, a)| xi <= a) {
                hits += 1;
            }
        }
        hits
    });
    Ok(StabilityEstimate::from_count(hits, mc.samples, mc.seed))
}

/// Quadrature for `rho ≥ 0`, exact bivariate integral for `k = 2`, Monte
/// Carlo for negative `rho` with `k ≥ 3`.
pub fn exchangeable_orthant_auto(thresholds: &[f64], rho: f64, mc: &McConfig) -> Result<OrthantEstimate> {
    let k = thresholds.len();
    if k >= 2 {
        ExchangeableCov::new(k, rho)?;
    }
    match k {
        0 => Ok(StabilityEstimate::exact(1.0)),
        1 => Ok(StabilityEstimate::closed_form(normal_cdf(thresholds[0]))),
        2 if rho < 0.0 => Ok(StabilityEstimate::quadrature(bivariate_orthant(
            thresholds[0],
            thresholds[1],
            rho,
        )?)),
        _ if rho >= 0.0 => Ok(StabilityEstimate::quadrature(exchangeable_orthant(thresholds, rho)?)),
        _ => exchangeable_orthant_mc(thresholds, rho, mc),
    }
}

/// `∫ φ(x) f(x) dx` over the truncation window.
pub fn gaussian_expectation<F: Fn(f64) -> f64>(f: F, tol: f64) -> f64 {
    integrate(|x| normal_pdf(x) * f(x), -TAIL_CUTOFF, TAIL_CUTOFF, tol).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn cov_inverse_k3_half() {
        let c = exchangeable_cov(3, 0.5).unwrap();
        let inv = c.inverse_matrix().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.5 } else { -0.5 };
                assert!((inv[i][j] - want).abs() < 1e-12);
            }
        }
        let m = c.matrix();
        for i in 0..3 {
            for j in 0..3 {
                let prod: f64 = (0..3).map(|l| m[i][l] * inv[l][j]).sum();
                assert!((prod - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cov_identity_case() {
        let c = exchangeable_cov(2, 0.0).unwrap();
        assert_eq!(c.inverse_matrix().unwrap(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn cov_rejects_non_psd() {
        assert!(matches!(exchangeable_cov(4, -0.4), Err(Error::Range(_))));
        assert!(matches!(exchangeable_cov(2, 1.01), Err(Error::Range(_))));
        assert!(exchangeable_cov(4, -1.0 / 3.0).is_ok());
        assert!(exchangeable_cov(4, -1.0 / 3.0).unwrap().inverse_coeffs().is_none());
    }

    #[test]
    fn cdf_and_quantile_basics() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!(normal_inv_cdf(0.5).unwrap().abs() < 1e-15);
        assert!((normal_inv_cdf(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-9);
        assert!(matches!(normal_inv_cdf(0.0), Err(Error::Domain(_))));
        assert!(matches!(normal_inv_cdf(1.0), Err(Error::Domain(_))));
        assert!(matches!(normal_inv_cdf(f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn perfectly_correlated_rows_coincide() {
        let c = exchangeable_cov(3, 1.0).unwrap();
        let mut rng = stream(1, 0);
        for s in sample_exchangeable(&c, 4, 50, &mut rng).unwrap() {
            for i in 0..4 {
                assert!((s.row(0)[i] - s.row(1)[i]).abs() < 1e-12);
                assert!((s.row(0)[i] - s.row(2)[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn orthant_trivial_values() {
        assert!((bivariate_orthant(0.0, 0.0, 0.0).unwrap() - 0.25).abs() < 1e-12);
        assert!((bivariate_orthant(0.0, 0.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((exchangeable_orthant(&[0.0; 3], 0.0).unwrap() - 0.125).abs() < 1e-15);
        assert!((exchangeable_orthant(&[0.0; 5], 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(bivariate_orthant(0.0, 0.0, 1.5), Err(Error::Range(_))));
    }

    #[test]
    fn orthant_infinite_thresholds() {
        assert_eq!(exchangeable_orthant(&[f64::INFINITY, f64::INFINITY], 0.3).unwrap(), 1.0);
        assert_eq!(exchangeable_orthant(&[0.0, f64::NEG_INFINITY], 0.3).unwrap(), 0.0);
        let one = exchangeable_orthant(&[0.3, f64::INFINITY], 0.3).unwrap();
        assert!((one - normal_cdf(0.3)).abs() < 1e-10);
    }
}
