use std::fmt::Display;
use std::path::Path;

use noisestab::fourier::{
    influence_direct, invariance_gap, noise_stability, noise_stability_mc, transform, DiscreteFunction, Functional,
    GapSubject, RangeTag, StabilityPath, TruncatedMajority,
};
use noisestab::gauss::{bivariate_orthant, exchangeable_orthant_auto};
use noisestab::maxqcut::io::{read_graph, read_ulc, sidecar_path, write_graph, write_sidecar, write_ulc};
use noisestab::maxqcut::{
    alpha_q, approx_ratio_harness, brute_force_opt, influence_decode, long_code_value, round, sdp_solve,
    ulc_reduce, AlphaOptions, MaxQCutInstance, SdpOptions, UlcInstance,
};
use noisestab::partitions::{halfspace_stack, GaussianPartition};
use noisestab::report::Report;
use noisestab::social_choice::{
    cosmic_coin_prob, majority_coin_limit, majority_unique_best_limit, plurality_stability_limit,
    unique_best_prob, BooleanRule, Mode, Plurality,
};
use noisestab::stability::{
    egt_check, pair_partition_stability, pair_partition_stability_mc, random_candidates, random_families,
    ssc_probe, Candidate,
};
use noisestab::{derive_seed, stream, StabilityEstimate};
use serde_json::{json, Value};

use crate::{
    AlphaArgs, BenchArgs, BuiltinFunction, CoinArgs, Command, Ctx, EgtArgs, FunctionArgs, FunctionalName,
    GeneratorName, InvarianceArgs, ModeArg, OrthantArgs, PartitionName, PluralityArgs, RoundArgs, RuleName,
    SolveArgs, SscArgs, StabilityArgs, Status, UlcArgs, VoteArgs,
};

pub type CmdResult = Result<Status, String>;

trait Msg<T> {
    fn msg(self) -> Result<T, String>;
}

impl<T, E: Display> Msg<T> for Result<T, E> {
    fn msg(self) -> Result<T, String> {
        self.map_err(|e| e.to_string())
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("record serializes")
}

fn read_json(path: &Path) -> Result<Value, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
        b.extend(e);
    }
    base
}

fn status(violation: bool) -> Status {
    if violation {
        Status::Violation
    } else {
        Status::Ok
    }
}

pub fn run(cmd: &Command, ctx: &mut Ctx) -> CmdResult {
    match cmd {
        Command::Orthant(a) => orthant(a, ctx),
        Command::Stability(a) => stability(a, ctx),
        Command::EgtCheck(a) => egt(a, ctx),
        Command::SscProbe(a) => ssc(a, ctx),
        Command::Fourier(a) => fourier(a, ctx),
        Command::Influence(a) => influence(a, ctx),
        Command::Invariance(a) => invariance(a, ctx),
        Command::Condorcet(a) => condorcet(a, ctx),
        Command::Coin(a) => coin(a, ctx),
        Command::Plurality(a) => plurality(a, ctx),
        Command::Alpha(a) => alpha(a, ctx),
        Command::MaxqcutSolve(a) => maxqcut_solve(a, ctx),
        Command::MaxqcutRound(a) => maxqcut_round(a, ctx),
        Command::MaxqcutBench(a) => maxqcut_bench(a, ctx),
        Command::UlcReduce(a) => ulc(a, ctx),
        Command::Selftest => crate::selftest::run(ctx),
    }
}

fn report(ctx: &mut Ctx, op: &str, params: Value, est: &StabilityEstimate) -> Result<(), String> {
    let r = Report::new(op, merge(ctx.run_params(), params), est);
    ctx.emit(to_value(&r))
}

fn orthant(a: &OrthantArgs, ctx: &mut Ctx) -> CmdResult {
    let (est, params) = match &a.thresholds {
        Some(t) => (
            exchangeable_orthant_auto(t, a.rho, &ctx.mc).msg()?,
            json!({ "rho": a.rho, "thresholds": t }),
        ),
        None => (
            StabilityEstimate::quadrature(bivariate_orthant(a.a, a.b, a.rho).msg()?),
            json!({ "rho": a.rho, "a": a.a, "b": a.b }),
        ),
    };
    report(ctx, "orthant", params, &est)?;
    Ok(Status::Ok)
}

fn stability(a: &StabilityArgs, ctx: &mut Ctx) -> CmdResult {
    let n = a.n.unwrap_or(a.q.saturating_sub(1).max(1));
    let p = match &a.partition_file {
        Some(path) => GaussianPartition::from_json(&read_json(path)?).msg()?,
        None => match a.partition {
            PartitionName::Simplex => GaussianPartition::simplex(a.q, n).msg()?,
            PartitionName::Stack => {
                let m = a.measures.clone().unwrap_or_else(|| vec![1.0 / a.q as f64; a.q]);
                halfspace_stack(&m, n).msg()?
            }
        },
    };
    let est = if a.force_mc {
        pair_partition_stability_mc(&p, a.rho, &ctx.mc).msg()?
    } else {
        pair_partition_stability(&p, a.rho, &ctx.mc).msg()?
    };
    let params = json!({ "rho": a.rho, "q": p.q(), "n": p.n(), "partition": p.to_json() });
    let r = Report::new("stability", merge(ctx.run_params(), params), &est)
        .with_extra(json!({ "cell_measures": p.cell_measures() }));
    ctx.emit(to_value(&r))?;
    Ok(Status::Ok)
}

fn egt(a: &EgtArgs, ctx: &mut Ctx) -> CmdResult {
    let fams = random_families(a.families, a.k, a.n, ctx.mc.seed).msg()?;
    let rep = egt_check(&fams, a.rho, &ctx.mc).msg()?;
    for (i, e) in rep.entries.iter().enumerate() {
        ctx.emit(merge(json!({ "op": "egt-entry", "index": i }), to_value(e)))?;
    }
    let params = json!({ "k": a.k, "rho": a.rho, "n": a.n, "families": a.families });
    ctx.emit(json!({
        "op": "egt-check",
        "params": merge(ctx.run_params(), params),
        "violations": rep.violations,
    }))?;
    Ok(status(rep.violations > 0))
}

fn ssc(a: &SscArgs, ctx: &mut Ctx) -> CmdResult {
    let cands = match &a.partition_file {
        Some(path) => vec![Candidate {
            label: path.display().to_string(),
            partition: GaussianPartition::from_json(&read_json(path)?).msg()?,
        }],
        None => random_candidates(a.q, a.n, a.candidates, ctx.mc.seed).msg()?,
    };
    let rep = ssc_probe(a.q, a.n, a.rho, &cands, &ctx.mc).msg()?;
    for (i, e) in rep.entries.iter().enumerate() {
        ctx.emit(merge(json!({ "op": "ssc-entry", "index": i }), to_value(e)))?;
    }
    let params = json!({ "q": a.q, "n": a.n, "rho": a.rho, "candidates": cands.len() });
    ctx.emit(json!({
        "op": "ssc-probe",
        "params": merge(ctx.run_params(), params),
        "violations": rep.violations,
    }))?;
    Ok(status(rep.violations > 0))
}

fn load_function(a: &FunctionArgs) -> Result<DiscreteFunction, String> {
    if let Some(path) = &a.function {
        return DiscreteFunction::from_json(&read_json(path)?).msg();
    }
    let (q, n) = (a.q, a.n);
    match a.f.unwrap_or(BuiltinFunction::Majority) {
        BuiltinFunction::Majority => {
            if q != 2 {
                return Err("majority needs --q 2; use plurality for q > 2".into());
            }
            DiscreteFunction::from_fn(2, n, 1, RangeTag::UnitInterval, |w| {
                let zeros = w.iter().filter(|&&b| b == 0).count();
                vec![f64::from(u8::from(2 * zeros > n))]
            })
            .msg()
        }
        BuiltinFunction::Dictator => DiscreteFunction::from_fn(q, n, q, RangeTag::Vertex, |w| {
            let mut v = vec![0.0; q];
            v[w[0]] = 1.0;
            v
        })
        .msg(),
        BuiltinFunction::Plurality => Plurality::new(q, n).and_then(|p| p.to_table()).msg(),
    }
}

fn function_params(a: &FunctionArgs, f: &DiscreteFunction) -> Value {
    json!({
        "function": a.function.as_ref().map(|p| p.display().to_string()),
        "f": a.f.map(|f| format!("{f:?}").to_lowercase()),
        "q": f.q,
        "n": f.n,
        "k": f.k,
        "rho": a.rho,
    })
}

fn fourier(a: &FunctionArgs, ctx: &mut Ctx) -> CmdResult {
    let f = load_function(a)?;
    let fourier = noise_stability(&f, a.rho, StabilityPath::Fourier).msg()?;
    let brute = noise_stability(&f, a.rho, StabilityPath::Brute).ok();
    let mc = noise_stability_mc(&f, a.rho, &ctx.mc).msg()?;
    let params = merge(ctx.run_params(), function_params(a, &f));
    let r = Report::new("fourier", params, &StabilityEstimate::exact(fourier)).with_extra(json!({
        "brute": brute,
        "monte_carlo": mc,
    }));
    ctx.emit(to_value(&r))?;
    Ok(Status::Ok)
}

fn influence(a: &FunctionArgs, ctx: &mut Ctx) -> CmdResult {
    let f = load_function(a)?;
    let p = transform(&f).msg()?;
    let d = a.d.unwrap_or(f.n);
    let mut total_low = 0.0;
    for i in 0..f.n {
        let low = p.low_degree_influence(i, d).msg()?;
        total_low += low;
        ctx.emit(json!({
            "op": "influence-entry",
            "coordinate": i,
            "influence": p.influence(i).msg()?,
            "low_degree": low,
            "direct": influence_direct(&f, i).msg()?,
        }))?;
    }
    let var = p.variance();
    let holds = total_low <= d as f64 * var + 1e-10;
    let params = merge(ctx.run_params(), merge(function_params(a, &f), json!({ "d": d })));
    ctx.emit(json!({
        "op": "influence",
        "params": params,
        "variance": var,
        "sum_low_degree": total_low,
        "bound": d as f64 * var,
        "bound_holds": holds,
    }))?;
    Ok(status(!holds))
}

fn invariance(a: &InvarianceArgs, ctx: &mut Ctx) -> CmdResult {
    let subject = match a.f {
        RuleName::Majority => GapSubject::Majority(TruncatedMajority::new(a.n, a.degree).msg()?),
        RuleName::Dictator => {
            let f = DiscreteFunction::from_fn(2, a.n, 1, RangeTag::UnitInterval, |w| {
                vec![f64::from(u8::from(w[0] == 0))]
            })
            .msg()?;
            GapSubject::Table(transform(&f).msg()?)
        }
    };
    let psi = match a.functional {
        FunctionalName::Clamp => Functional::ClampProduct,
        FunctionalName::Simplex => Functional::SimplexInner,
    };
    let rep = invariance_gap(&subject, psi, a.rho, &ctx.mc).msg()?;
    let params = json!({
        "f": format!("{:?}", a.f).to_lowercase(),
        "n": a.n,
        "rho": a.rho,
        "degree": a.degree,
    });
    let est = StabilityEstimate::from_mean(rep.gap, rep.std_error, ctx.mc.samples, ctx.mc.seed);
    let r = Report::new("invariance", merge(ctx.run_params(), params), &est).with_extra(to_value(&rep));
    ctx.emit(to_value(&r))?;
    Ok(Status::Ok)
}

fn rule(name: RuleName, n: usize) -> BooleanRule {
    match name {
        RuleName::Majority => BooleanRule::majority(n),
        RuleName::Dictator => BooleanRule::Dictator { n, voter: 0 },
    }
}

fn mode(m: ModeArg) -> Mode {
    match m {
        ModeArg::Exact => Mode::Exact,
        ModeArg::Mc => Mode::MonteCarlo,
    }
}

fn vote_params(a: &VoteArgs) -> Value {
    json!({
        "k": a.k,
        "f": format!("{:?}", a.f).to_lowercase(),
        "n": a.n,
        "mode": format!("{:?}", a.mode).to_lowercase(),
    })
}

fn condorcet(a: &VoteArgs, ctx: &mut Ctx) -> CmdResult {
    let est = unique_best_prob(&rule(a.f, a.n), a.k, mode(a.mode), &ctx.mc).msg()?;
    let limit = match a.f {
        RuleName::Majority => Some(majority_unique_best_limit(a.k).msg()?),
        RuleName::Dictator => None,
    };
    let r = Report::new("condorcet", merge(ctx.run_params(), vote_params(a)), &est)
        .with_extra(json!({ "majority_limit": limit }));
    ctx.emit(to_value(&r))?;
    Ok(Status::Ok)
}

fn coin(a: &CoinArgs, ctx: &mut Ctx) -> CmdResult {
    let v = &a.vote;
    let est = cosmic_coin_prob(&rule(v.f, v.n), v.k, a.rho, mode(v.mode), &ctx.mc).msg()?;
    let limit = match v.f {
        RuleName::Majority => Some(majority_coin_limit(v.k, a.rho).msg()?),
        RuleName::Dictator => None,
    };
    let params = merge(vote_params(v), json!({ "rho": a.rho }));
    let r = Report::new("coin", merge(ctx.run_params(), params), &est).with_extra(json!({ "majority_limit": limit }));
    ctx.emit(to_value(&r))?;
    Ok(Status::Ok)
}

fn plurality(a: &PluralityArgs, ctx: &mut Ctx) -> CmdResult {
    let est = Plurality::new(a.q, a.n)
        .and_then(|p| p.noise_stability_mc(a.rho, &ctx.mc))
        .msg()?;
    let limit = plurality_stability_limit(a.q, a.rho, &ctx.mc.with_seed(derive_seed(ctx.mc.seed, 1))).msg()?;
    let params = json!({ "q": a.q, "n": a.n, "rho": a.rho });
    let r = Report::new("plurality", merge(ctx.run_params(), params), &est)
        .with_extra(json!({ "simplex_limit": limit, "difference": est.value - limit.value }));
    ctx.emit(to_value(&r))?;
    Ok(Status::Ok)
}

fn alpha_options(ctx: &Ctx, grid: usize, force_mc: bool, full_interval: bool) -> AlphaOptions {
    AlphaOptions {
        mc: ctx.mc,
        grid,
        force_mc,
        full_interval,
    }
}

fn alpha(a: &AlphaArgs, ctx: &mut Ctx) -> CmdResult {
    let res = alpha_q(a.q, &alpha_options(ctx, a.grid, a.force_mc, a.full_interval)).msg()?;
    let params = json!({ "q": a.q, "grid": a.grid, "force_mc": a.force_mc, "full_interval": a.full_interval });
    ctx.emit(merge(
        json!({ "op": "alpha", "params": merge(ctx.run_params(), params) }),
        to_value(&res),
    ))?;
    Ok(Status::Ok)
}

fn solve_graph(a: &SolveArgs, seed: u64) -> Result<(MaxQCutInstance, noisestab::maxqcut::SdpSolution), String> {
    let g = read_graph(&a.graph, a.q).msg()?;
    let opts = SdpOptions {
        delta: a.delta,
        restarts: a.restarts,
        seed,
        ..SdpOptions::default()
    };
    let sol = sdp_solve(&g, &opts).msg()?;
    Ok((g, sol))
}

fn solve_params(a: &SolveArgs) -> Value {
    json!({
        "graph": a.graph.display().to_string(),
        "q": a.q,
        "delta": a.delta,
        "restarts": a.restarts,
    })
}

fn maxqcut_solve(a: &SolveArgs, ctx: &mut Ctx) -> CmdResult {
    let (g, sol) = solve_graph(a, ctx.mc.seed)?;
    let mut rec = json!({
        "op": "maxqcut-solve",
        "params": merge(ctx.run_params(), solve_params(a)),
        "vertices": g.vertices,
        "total_weight": g.total_weight(),
        "solution": sol,
    });
    let mut violation = false;
    if a.brute {
        let (opt, labels) = brute_force_opt(&g).msg()?;
        violation = sol.objective + a.delta * g.total_weight() < opt;
        rec["opt"] = json!(opt);
        rec["opt_labels"] = json!(labels);
        rec["relaxation_ok"] = json!(!violation);
    }
    ctx.emit(rec)?;
    Ok(status(violation))
}

fn maxqcut_round(a: &RoundArgs, ctx: &mut Ctx) -> CmdResult {
    let (g, sol) = solve_graph(&a.solve, ctx.mc.seed)?;
    let part = match &a.partition_file {
        Some(p) => GaussianPartition::from_json(&read_json(p)?).msg()?,
        None => GaussianPartition::simplex(g.q, g.q - 1).msg()?,
    };
    let rr = round(&sol, &g, &part, a.repeats, derive_seed(ctx.mc.seed, 1)).msg()?;
    let params = merge(solve_params(&a.solve), json!({ "repeats": a.repeats, "m": part.n() }));
    ctx.emit(json!({
        "op": "maxqcut-round",
        "params": merge(ctx.run_params(), params),
        "sdp": sol.objective,
        "ratio_mean": rr.mean_value / sol.objective,
        "rounding": rr,
    }))?;
    Ok(Status::Ok)
}

fn maxqcut_bench(a: &BenchArgs, ctx: &mut Ctx) -> CmdResult {
    let mut rng = stream(ctx.mc.seed, 0);
    let mut instances = Vec::with_capacity(a.trials);
    for _ in 0..a.trials {
        let g = match a.generator {
            GeneratorName::Gnp => MaxQCutInstance::gnp(a.vertices, a.p, a.unit, a.q, &mut rng),
            GeneratorName::Bipartite => {
                let left = a.vertices / 2;
                MaxQCutInstance::bipartite(left, a.vertices - left, a.p, a.unit, a.q, &mut rng)
            }
            GeneratorName::Complete => MaxQCutInstance::complete(a.vertices, a.q),
            GeneratorName::Petersen => MaxQCutInstance::petersen(a.q),
        }
        .msg()?;
        instances.push(g);
    }
    let alpha = match a.alpha {
        Some(v) => v,
        None => alpha_q(a.q, &alpha_options(ctx, 64, false, false)).msg()?.alpha,
    };
    let sdp_opts = SdpOptions {
        seed: derive_seed(ctx.mc.seed, 1),
        ..SdpOptions::default()
    };
    let rep = approx_ratio_harness(&instances, alpha, a.repeats, derive_seed(ctx.mc.seed, 2), &sdp_opts).msg()?;
    for e in &rep.entries {
        ctx.emit(merge(json!({ "op": "maxqcut-bench-entry" }), to_value(e)))?;
    }
    let params = json!({
        "q": a.q,
        "trials": a.trials,
        "generator": format!("{:?}", a.generator).to_lowercase(),
        "vertices": a.vertices,
        "p": a.p,
        "unit": a.unit,
        "repeats": a.repeats,
    });
    ctx.emit(json!({
        "op": "maxqcut-bench",
        "params": merge(ctx.run_params(), params),
        "alpha": alpha,
        "mean_ratio_sdp": rep.mean_ratio_sdp,
        "relaxation_failures": rep.relaxation_failures,
        "flagged": rep.flagged,
    }))?;
    Ok(status(rep.relaxation_failures > 0 || rep.flagged > 0))
}

fn ulc(a: &UlcArgs, ctx: &mut Ctx) -> CmdResult {
    let (l, known) = match (&a.ulc, &a.random) {
        (Some(path), _) => (read_ulc(path).msg()?, None),
        (None, Some(r)) => {
            if r.len() != 4 {
                return Err(format!("--random takes M,V,W,d; got {} values", r.len()));
            }
            let mut rng = stream(ctx.mc.seed, 0);
            let (l, lv, lw) = UlcInstance::random_satisfiable(r[0], r[1], r[2], r[3], &mut rng).msg()?;
            if let Some(p) = &a.save_ulc {
                write_ulc(p, &l).msg()?;
            }
            (l, Some((lv, lw)))
        }
        (None, None) => return Err("either --ulc or --random is required".into()),
    };
    let red = ulc_reduce(&l, a.q, a.rho).msg()?;
    if let Some(p) = &a.graph {
        write_graph(p, &red.instance).msg()?;
        write_sidecar(&sidecar_path(p), &red.meta).msg()?;
    }
    let mut rec = json!({
        "op": "ulc-reduce",
        "params": merge(ctx.run_params(), json!({
            "q": a.q,
            "rho": a.rho,
            "ulc": a.ulc.as_ref().map(|p| p.display().to_string()),
            "random": a.random,
        })),
        "vertices": red.instance.vertices,
        "edges": red.instance.edges.len(),
        "total_mass": red.total_mass(),
        "exact": red.meta.exact_weights.is_some(),
        "completeness": (a.q as f64 - 1.0) / a.q as f64 * (1.0 - a.rho),
    });
    let mut violation = false;
    if let Some((lv, lw)) = known {
        let labels = red.meta.honest_labels(&lw).msg()?;
        let honest = red.instance.cut_value(&labels);
        let exact_match = red
            .exact_cut_value(&labels)
            .zip(red.exact_total())
            .map(|(c, t)| c == red.meta.completeness_exact() * t);
        let dec = influence_decode(&red.instance, Some(&red.meta), &labels, l.m, 0.1).msg()?;
        violation = exact_match == Some(false);
        rec["ulc_value"] = json!(l.value(&lv, &lw).msg()?);
        rec["honest_cut"] = json!(honest);
        rec["long_code_value"] = json!(long_code_value(&l, &lw, a.q, a.rho).msg()?);
        rec["exact_completeness_holds"] = json!(exact_match);
        rec["decoded_value"] = json!(dec.value);
    }
    ctx.emit(rec)?;
    Ok(status(violation))
}
