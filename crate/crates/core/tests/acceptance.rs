//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.
//!
//! Run a subset with `cargo test --test acceptance -- 3 9`.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use noisestab::fourier::{
    invariance_gap, noise_stability, transform, transform_with, DiscreteFunction, Functional, GapSubject,
    OrthoBasis, RangeTag, StabilityPath, TruncatedMajority,
};
use noisestab::gauss::{bivariate_orthant, exchangeable_orthant, exchangeable_orthant_mc};
use noisestab::maxqcut::{
    alpha_q, brute_force_opt, influence_decode, round, sdp_solve, ulc_reduce, AlphaOptions, MaxQCutInstance,
    SdpOptions, UlcInstance,
};
use noisestab::partitions::GaussianPartition;
use noisestab::social_choice::{cosmic_coin_prob, unique_best_prob, BooleanRule, Mode, Plurality};
use noisestab::stability::{egt_check, random_candidates, random_families, simplex_pair_stability, ssc_probe};
use noisestab::{derive_seed, stream, McConfig};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_constants() -> Outcome {
    let t = Instant::now();
    let a2 = alpha_q(2, &AlphaOptions::new(0, 0)).map_err(|e| e.to_string())?;
    let t2 = t.elapsed();
    let mut detail = format!("alpha_2 = {:.7} in {:.2?}", a2.alpha, t2);
    let mut ok = (a2.alpha - 0.878567).abs() <= 1e-6 && t2 < Duration::from_secs(1);
    for (q, target) in [(3, 0.836008), (4, 0.857487)] {
        let t = Instant::now();
        let r = alpha_q(q, &AlphaOptions::new(10_000_000, 2024)).map_err(|e| e.to_string())?;
        let el = t.elapsed();
        detail += &format!(
            "; alpha_{q} = {:.6} (se {:.1e}, rho* {:.4}) in {:.0?}",
            r.alpha, r.std_error, r.rho_star, el
        );
        ok &= (r.alpha - target).abs() <= 5e-3 && el < Duration::from_secs(300);
    }
    check(ok, detail)
}

fn c2_sheppard() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut mc_fail = Vec::new();
    for i in 0..=20 {
        let rho = -1.0 + 0.1 * i as f64;
        let exact = 0.25 + rho.asin() / (2.0 * PI);
        let v = bivariate_orthant(0.0, 0.0, rho).map_err(|e| e.to_string())?;
        worst = worst.max((v - exact).abs());
        let mc = exchangeable_orthant_mc(&[0.0, 0.0], rho, &McConfig::new(1_000_000, derive_seed(2, i)))
            .map_err(|e| e.to_string())?;
        if (mc.value - exact).abs() > 3.0 * mc.std_error {
            mc_fail.push(format!("rho {rho:.1}: {:.5} vs {exact:.5}", mc.value));
        }
    }
    check(
        worst <= 1e-9 && mc_fail.is_empty(),
        format!("max quadrature error {worst:.2e}; MC outside 3 SE at {} points {mc_fail:?}", mc_fail.len()),
    )
}

fn c3_egt() -> Outcome {
    let t = Instant::now();
    let mut parts = Vec::new();
    let mut total = 0;
    for (i, (k, rho)) in [(2, 0.3), (2, 0.9), (3, 0.5), (4, 1.0 / 3.0)].into_iter().enumerate() {
        let fams = random_families(100, k, 2, derive_seed(3, i as u64)).map_err(|e| e.to_string())?;
        let rep = egt_check(&fams, rho, &McConfig::new(1_000_000, derive_seed(30, i as u64))).map_err(|e| e.to_string())?;
        total += rep.violations;
        parts.push(format!("(k={k}, rho={rho:.3}): {} violations", rep.violations));
    }
    let el = t.elapsed();
    check(
        total == 0 && el < Duration::from_secs(600),
        format!("{} in {:.0?}", parts.join(", "), el),
    )
}

fn c4_condorcet() -> Outcome {
    let maj = BooleanRule::majority(1001);
    let mc = McConfig::new(200_000, 4);
    let p3 = unique_best_prob(&maj, 3, Mode::MonteCarlo, &mc).map_err(|e| e.to_string())?;
    let lim3 = 3.0 * (0.25 + (1.0f64 / 3.0).asin() / (2.0 * PI));
    let p5 = unique_best_prob(&maj, 5, Mode::MonteCarlo, &mc.with_seed(5)).map_err(|e| e.to_string())?;
    let lim5 = 5.0 * exchangeable_orthant(&[0.0; 4], 1.0 / 3.0).map_err(|e| e.to_string())?;
    check(
        (p3.value - lim3).abs() <= 0.01 && (p5.value - lim5).abs() <= 0.015,
        format!("k=3: {:.5} vs {lim3:.6}; k=5: {:.5} vs {lim5:.5}", p3.value, p5.value),
    )
}

fn c5_coin() -> Outcome {
    let maj = BooleanRule::majority(1001);
    let p = cosmic_coin_prob(&maj, 3, 0.5, Mode::MonteCarlo, &McConfig::new(1_000_000, 5)).map_err(|e| e.to_string())?;
    let lim = 2.0 * exchangeable_orthant(&[0.0; 3], 0.25).map_err(|e| e.to_string())?;
    check((p.value - lim).abs() <= 0.01, format!("{:.5} vs {lim:.5}", p.value))
}

/// 100 random real-valued functions per `(q, n)`.
fn corpus() -> Vec<DiscreteFunction> {
    let mut out = Vec::new();
    for (c, (q, n)) in [(2usize, 4usize), (3, 3), (4, 2)].into_iter().enumerate() {
        let mut rng = stream(6, c as u64);
        for i in 0..100 {
            let len = q.pow(n as u32);
            let k = 1 + i % 2;
            let values = (0..len * k).map(|_| rng.random_range(-1.0..1.0)).collect();
            out.push(DiscreteFunction::new(q, n, k, RangeTag::Real, values).unwrap());
        }
    }
    out
}

fn c6_fourier() -> Outcome {
    let mut worst: f64 = 0.0;
    for f in corpus() {
        let lo = -1.0 / (f.q as f64 - 1.0);
        for j in 0..=4 {
            let rho = lo + (1.0 - lo) * j as f64 / 4.0;
            let a = noise_stability(&f, rho, StabilityPath::Fourier).map_err(|e| e.to_string())?;
            let b = noise_stability(&f, rho, StabilityPath::Brute).map_err(|e| e.to_string())?;
            worst = worst.max((a - b).abs());
        }
    }
    let maj3 = DiscreteFunction::from_fn(2, 3, 1, RangeTag::UnitInterval, |w| {
        vec![f64::from(u8::from(w.iter().filter(|&&b| b == 0).count() >= 2))]
    })
    .map_err(|e| e.to_string())?;
    let mut worst_maj: f64 = 0.0;
    for j in 0..=10 {
        let rho = -1.0 + 0.2 * j as f64;
        let v = noise_stability(&maj3, rho, StabilityPath::Fourier).map_err(|e| e.to_string())?;
        worst_maj = worst_maj.max((v - (0.25 + 3.0 * rho / 16.0 + rho.powi(3) / 16.0)).abs());
    }
    check(
        worst <= 1e-10 && worst_maj <= 1e-10,
        format!("fourier vs brute max diff {worst:.2e} on 300 functions; MAJ3 max error {worst_maj:.2e}"),
    )
}

fn c7_influence() -> Outcome {
    let mut bound_fail = 0;
    let mut worst_basis: f64 = 0.0;
    for (i, f) in corpus().iter().enumerate() {
        let p = transform(f).map_err(|e| e.to_string())?;
        let var = p.variance();
        for d in 1..=f.n {
            let s: f64 = (0..f.n).map(|j| p.low_degree_influence(j, d).unwrap()).sum();
            if s > d as f64 * var + 1e-10 {
                bound_fail += 1;
            }
        }
        let r = transform_with(f, &OrthoBasis::rotated(f.q, derive_seed(7, i as u64))).map_err(|e| e.to_string())?;
        for j in 0..f.n {
            for d in 1..=f.n {
                let a = p.low_degree_influence(j, d).unwrap();
                let b = r.low_degree_influence(j, d).unwrap();
                worst_basis = worst_basis.max((a - b).abs());
            }
        }
        for rho in [-0.3, 0.2, 0.7] {
            let a = p.noise_stability(rho).map_err(|e| e.to_string())?;
            let b = r.noise_stability(rho).map_err(|e| e.to_string())?;
            worst_basis = worst_basis.max((a - b).abs());
        }
    }
    check(
        bound_fail == 0 && worst_basis <= 1e-10,
        format!("{bound_fail} bound failures; helmert vs rotated basis max diff {worst_basis:.2e}"),
    )
}

fn c8_plurality() -> Outcome {
    let mc = McConfig::new(1_000_000, 8);
    let plur = Plurality::new(3, 999)
        .and_then(|p| p.noise_stability_mc(0.4, &mc))
        .map_err(|e| e.to_string())?;
    let simp = simplex_pair_stability(3, 0.4, &mc.with_seed(88)).map_err(|e| e.to_string())?;
    check(
        (plur.value - simp.value).abs() <= 0.02,
        format!("plurality {:.5} vs simplex {:.5}", plur.value, simp.value),
    )
}

fn c9_sdp() -> Outcome {
    let opts = SdpOptions::default();
    let tri2 = sdp_solve(&MaxQCutInstance::complete(3, 2).unwrap(), &opts).map_err(|e| e.to_string())?;
    let tri3 = sdp_solve(&MaxQCutInstance::complete(3, 3).unwrap(), &opts).map_err(|e| e.to_string())?;
    let mut ok = (tri2.objective - 2.25).abs() <= 1e-4 && (tri3.objective - 3.0).abs() <= 1e-4;
    let alpha2 = alpha_q(2, &AlphaOptions::new(0, 0)).unwrap().alpha;
    let alpha3 = alpha_q(3, &AlphaOptions::new(1_000_000, 9)).map_err(|e| e.to_string())?.alpha;
    let mut rng = stream(9, 0);
    let (mut dominance_fail, mut ratio_fail, mut worst_ratio) = (0, 0, f64::INFINITY);
    for i in 0..50 {
        let q = 2 + i % 2;
        let g = loop {
            let v = rng.random_range(4..=10);
            let g = MaxQCutInstance::gnp(v, 0.5, false, q, &mut rng).unwrap();
            if !g.edges.is_empty() {
                break g;
            }
        };
        let (opt, _) = brute_force_opt(&g).map_err(|e| e.to_string())?;
        let sol = sdp_solve(&g, &SdpOptions { seed: derive_seed(9, i as u64), ..opts }).map_err(|e| e.to_string())?;
        if sol.objective + opts.delta * g.total_weight() < opt {
            dominance_fail += 1;
        }
        let part = GaussianPartition::simplex(q, q - 1).unwrap();
        let rr = round(&sol, &g, &part, 10_000, derive_seed(90, i as u64)).map_err(|e| e.to_string())?;
        let ratio = rr.mean_value / sol.objective;
        let alpha = if q == 2 { alpha2 } else { alpha3 };
        worst_ratio = worst_ratio.min(ratio - alpha);
        if ratio < alpha - 0.02 {
            ratio_fail += 1;
        }
    }
    ok &= dominance_fail == 0 && ratio_fail == 0;
    check(
        ok,
        format!(
            "K3: {:.6} (q=2), {:.6} (q=3); dominance failures {dominance_fail}/50; ratio failures {ratio_fail}/50, min ratio - alpha {worst_ratio:+.4}",
            tri2.objective, tri3.objective
        ),
    )
}

fn c10_pcp() -> Outcome {
    let mut rng = stream(10, 0);
    let (mut exact_fail, mut decode_fail) = (0, 0);
    for i in 0..20 {
        let q = 2 + i % 2;
        let m = 1 + (i / 2) % 3;
        let rho = -1.0 / (q as f64 - 1.0);
        let (l, _, lw) = UlcInstance::random_satisfiable(m, 3, 4, 2, &mut rng).map_err(|e| e.to_string())?;
        let red = ulc_reduce(&l, q, rho).map_err(|e| e.to_string())?;
        let labels = red.meta.honest_labels(&lw).map_err(|e| e.to_string())?;
        let (cut, total) = (red.exact_cut_value(&labels), red.exact_total());
        match (cut, total) {
            (Some(c), Some(t)) if c == red.meta.completeness_exact() * &t => {}
            _ => exact_fail += 1,
        }
        let dec = influence_decode(&red.instance, Some(&red.meta), &labels, m, 0.1).map_err(|e| e.to_string())?;
        if dec.value != 1.0 {
            decode_fail += 1;
        }
    }
    check(
        exact_fail == 0 && decode_fail == 0,
        format!("exact completeness failures {exact_fail}/20; decode failures {decode_fail}/20"),
    )
}

fn c11_invariance() -> Outcome {
    let mc = McConfig::new(1_000_000, 11);
    let mut gaps = Vec::new();
    for n in [11, 101, 1001] {
        let maj = TruncatedMajority::new(n, 5).map_err(|e| e.to_string())?;
        let r = invariance_gap(&GapSubject::Majority(maj), Functional::ClampProduct, 0.5, &mc).map_err(|e| e.to_string())?;
        gaps.push((n, r.gap, r.std_error));
    }
    let monotone = gaps
        .windows(2)
        .all(|w| w[1].1 <= w[0].1 + 3.0 * (w[0].2.powi(2) + w[1].2.powi(2)).sqrt());
    let dict = DiscreteFunction::from_fn(2, 3, 1, RangeTag::UnitInterval, |w| vec![f64::from(u8::from(w[0] == 0))])
        .and_then(|f| transform(&f))
        .map_err(|e| e.to_string())?;
    let d = invariance_gap(&GapSubject::Table(dict), Functional::ClampProduct, 0.5, &mc).map_err(|e| e.to_string())?;
    let dict_ok = d.gap - 3.0 * d.std_error > 0.05;
    let shown: Vec<String> = gaps.iter().map(|(n, g, s)| format!("n={n}: {g:.5}±{s:.5}")).collect();
    check(
        monotone && dict_ok,
        format!("majority gaps {}; dictator gap {:.5}±{:.5}", shown.join(", "), d.gap, d.std_error),
    )
}

fn c12_ssc() -> Outcome {
    let cands = random_candidates(3, 2, 200, 12).map_err(|e| e.to_string())?;
    let mc = McConfig::new(1_000_000, 120);
    let pos = ssc_probe(3, 2, 0.5, &cands, &mc).map_err(|e| e.to_string())?;
    let neg = ssc_probe(3, 2, -0.5, &cands, &mc).map_err(|e| e.to_string())?;
    check(
        pos.violations == 0 && neg.violations == 0,
        format!("rho=0.5: {} flagged; rho=-0.5: {} flagged (200 candidates)", pos.violations, neg.violations),
    )
}

type Criterion = (usize, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 12] = [
    (1, "alpha_q constants", c1_constants),
    (2, "Sheppard consistency", c2_sheppard),
    (3, "exchangeable Gaussian isoperimetry", c3_egt),
    (4, "Condorcet limit", c4_condorcet),
    (5, "cosmic coin limit", c5_coin),
    (6, "Fourier oracle equivalence", c6_fourier),
    (7, "influence bound and basis independence", c7_influence),
    (8, "plurality convergence", c8_plurality),
    (9, "SDP correctness and rounding ratio", c9_sdp),
    (10, "PCP completeness", c10_pcp),
    (11, "invariance gap decay", c11_invariance),
    (12, "simplex conjecture probe", c12_ssc),
];

fn main() {
    let wanted: Vec<usize> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (id, name, f) in CRITERIA {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {id:>2} {tag} [{name}] {detail} ({:.1?})", t.elapsed());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
