//! Quick checks with known answers, run by `noisestab selftest`.

use noisestab::fourier::{transform, DiscreteFunction, RangeTag};
use noisestab::gauss::{bivariate_orthant, exchangeable_orthant, normal_cdf, normal_inv_cdf};
use noisestab::maxqcut::{brute_force_opt, sdp_solve, ulc_reduce, MaxQCutInstance, SdpOptions, UlcEdge, UlcInstance};
use noisestab::partitions::{halfspace_stack, GaussianPartition};
use noisestab::social_choice::{cosmic_coin_prob, unique_best_prob, BooleanRule, Mode};
use noisestab::stability::{pair_partition_stability, simplex_pair_stability};
use noisestab::{McConfig, Result};

use crate::commands::CmdResult;
use serde_json::json;

use crate::{Ctx, Status};

type Check = (&'static str, f64, fn(&McConfig) -> Result<f64>, f64);

fn edge_graph() -> Result<MaxQCutInstance> {
    MaxQCutInstance::new(2, vec![noisestab::maxqcut::Edge { u: 0, v: 1, w: 1.0 }], 2)
}

const CHECKS: &[Check] = &[
    ("normal_cdf(0)", 0.5, |_| Ok(normal_cdf(0.0)), 1e-15),
    ("normal_inv_cdf(0.5)", 0.0, |_| normal_inv_cdf(0.5), 1e-12),
    ("orthant(0,0,0)", 0.25, |_| bivariate_orthant(0.0, 0.0, 0.0), 1e-12),
    ("orthant(0,0,1)", 0.5, |_| bivariate_orthant(0.0, 0.0, 1.0), 1e-12),
    ("orthant(0^3, rho=0)", 0.125, |_| exchangeable_orthant(&[0.0; 3], 0.0), 1e-9),
    ("orthant(0^5, rho=1)", 0.5, |_| exchangeable_orthant(&[0.0; 5], 1.0), 1e-9),
    ("simplex q=3 tie at origin -> cell 0", 0.0, |_| {
        Ok(GaussianPartition::simplex(3, 2)?.classify(&[0.0, 0.0])? as f64)
    }, 0.0),
    ("stack (1/2,1/2) cut", 0.0, |_| {
        let p = halfspace_stack(&[0.5, 0.5], 1)?;
        Ok(p.classify(&[1e-9])? as f64 - 1.0)
    }, 0.0),
    ("stack stability rho=0", 0.38, |mc| {
        Ok(pair_partition_stability(&halfspace_stack(&[0.2, 0.3, 0.5], 2)?, 0.0, mc)?.value)
    }, 1e-9),
    ("simplex q=3 stability rho=1", 1.0, |mc| Ok(simplex_pair_stability(3, 1.0, mc)?.value), 0.0),
    ("dictator influence", 0.25, |_| {
        let f = DiscreteFunction::from_fn(2, 3, 1, RangeTag::UnitInterval, |w| vec![f64::from(u8::from(w[0] == 1))])?;
        transform(&f)?.influence(0)
    }, 1e-12),
    ("constant influence", 0.0, |_| {
        let f = DiscreteFunction::from_fn(3, 2, 1, RangeTag::Real, |_| vec![0.7])?;
        transform(&f)?.influence(1)
    }, 1e-12),
    ("MAJ_1 unique best, k=3", 1.0, |mc| Ok(unique_best_prob(&BooleanRule::majority(1), 3, Mode::Exact, mc)?.value), 1e-12),
    ("unique best, k=2", 1.0, |mc| Ok(unique_best_prob(&BooleanRule::majority(5), 2, Mode::Exact, mc)?.value), 1e-12),
    ("coin rho=1", 1.0, |mc| Ok(cosmic_coin_prob(&BooleanRule::majority(3), 3, 1.0, Mode::Exact, mc)?.value), 1e-12),
    ("coin rho=0, k=3", 0.25, |mc| Ok(cosmic_coin_prob(&BooleanRule::majority(3), 3, 0.0, Mode::Exact, mc)?.value), 1e-12),
    ("path P3 q=2 OPT", 2.0, |_| Ok(brute_force_opt(&MaxQCutInstance::path(3, 2)?)?.0), 0.0),
    ("K3 q=2 OPT", 2.0, |_| Ok(brute_force_opt(&MaxQCutInstance::complete(3, 2)?)?.0), 0.0),
    ("K3 q=3 OPT", 3.0, |_| Ok(brute_force_opt(&MaxQCutInstance::complete(3, 3)?)?.0), 0.0),
    ("single edge relaxation", 1.0, |_| Ok(sdp_solve(&edge_graph()?, &SdpOptions::default())?.objective), 1e-6),
    ("ULC honest proof at rho=1", 0.0, |_| {
        let l = UlcInstance::new(2, 1, 2, vec![
            UlcEdge { v: 0, w: 0, perm: vec![0, 1] },
            UlcEdge { v: 0, w: 1, perm: vec![1, 0] },
        ])?;
        let red = ulc_reduce(&l, 2, 1.0)?;
        Ok(red.instance.cut_value(&red.meta.honest_labels(&[0, 1])?))
    }, 1e-15),
    ("ULC constant proof", 0.0, |_| {
        let l = UlcInstance::new(1, 1, 1, vec![UlcEdge { v: 0, w: 0, perm: vec![0] }])?;
        let red = ulc_reduce(&l, 2, -1.0)?;
        Ok(red.instance.cut_value(&vec![0; red.instance.vertices]))
    }, 0.0),
];

pub fn run(ctx: &mut Ctx) -> CmdResult {
    let mc = McConfig::new(10_000, ctx.mc.seed).with_workers(ctx.mc.workers);
    let mut failures = 0;
    for (name, expected, f, tol) in CHECKS {
        let (value, pass, error) = match f(&mc) {
            Ok(v) => (Some(v), (v - expected).abs() <= *tol, None),
            Err(e) => (None, false, Some(e.to_string())),
        };
        if !pass {
            failures += 1;
        }
        ctx.emit(json!({
            "op": "selftest",
            "check": name,
            "expected": expected,
            "value": value,
            "pass": pass,
            "error": error,
        }))?;
    }
    ctx.emit(json!({ "op": "selftest-summary", "checks": CHECKS.len(), "failures": failures }))?;
    Ok(if failures > 0 { Status::Violation } else { Status::Ok })
}
