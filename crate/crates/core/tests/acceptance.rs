//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! `cargo test --test acceptance -- 6 8` runs only criteria 6 and 8.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use common::{LeftmostOracle, RandomGrammar};
use ggsr_core::benchmarks::{Sampler, BENCHMARKS};
use ggsr_core::evaluator::units::{audit_units, Dimension};
use ggsr_core::evaluator::{evaluate, expression_mse, parse_expression, reward, reward_from_mse};
use ggsr_core::policy::{masked_softmax, sample_action, HiddenState};
use ggsr_core::reporting::mann_whitney_u;
use ggsr_core::trainer::{quantile_filter, run_ablation, sample_episode};
use ggsr_core::{
    builtin, generate_benchmark, load_csv, train, Ablation, ActionId, Dataset, DerivationState, EpisodeTrace, Grammar,
    ParseOptions, PolicyParameters, PolicyShape, RunResult, Split, StateToggles, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Settings for desk-scale recovery runs.
fn desk_config(seed: u64) -> TrainConfig {
    TrainConfig {
        horizon: 50,
        batch_size: 256,
        iterations: 300,
        epsilon: 0.05,
        entropy_weight: 0.005,
        learning_rate: 0.001,
        hidden: 32,
        seed,
        ..TrainConfig::default()
    }
}

fn nguyen_for(data: &Dataset) -> Grammar {
    Grammar::parse(builtin::NGUYEN, &ParseOptions::with_nvar(data.width())).unwrap()
}

fn criterion_1() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    let mut slowest = Duration::ZERO;
    for (name, need) in [("N1", 8), ("N2", 6), ("N3", 6)] {
        let mut recovered = 0;
        for seed in 0..10 {
            let b = generate_benchmark(name, seed).unwrap();
            let g = nguyen_for(&b.train);
            let t = Instant::now();
            let r = train(&desk_config(seed), &g, &b.train, Some(&b.test), None).map_err(|e| e.to_string())?;
            slowest = slowest.max(t.elapsed());
            recovered += usize::from(r.recovered);
        }
        ok &= recovered >= need;
        lines.push(format!("{name} {recovered}/10 (need {need})"));
    }
    ok &= slowest <= Duration::from_secs(600);
    let msg = format!("{}; slowest run {:.1}s", lines.join(", "), slowest.as_secs_f64());
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn criterion_2() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for name in ["N4", "N5", "N6"] {
        let mut by_variant = [Vec::new(), Vec::new(), Vec::new()];
        for seed in 0..10 {
            let b = generate_benchmark(name, seed).unwrap();
            let g = nguyen_for(&b.train);
            let cfg = desk_config(seed);
            for (slot, which) in [Ablation::None, Ablation::NoRiskSeeking, Ablation::NoEntropy].into_iter().enumerate() {
                let r = run_ablation(&cfg, which, &g, &b.train, Some(&b.test), None).map_err(|e| e.to_string())?;
                by_variant[slot].push(r.best_test_mse.unwrap_or(f64::INFINITY));
            }
        }
        let [base, no_rs, no_ent] = by_variant.map(median);
        ok &= no_rs > base && no_ent > base;
        lines.push(format!(
            "{name} median MSE baseline {base:.3e}, no_risk_seeking {no_rs:.3e}, no_entropy {no_ent:.3e}"
        ));
    }
    if ok {
        Ok(lines.join("; "))
    } else {
        Err(lines.join("; "))
    }
}

/// Count the points of one sampler by walking it.
fn enumerate_points(s: &Sampler) -> usize {
    match *s {
        Sampler::Uniform { c, .. } => c,
        Sampler::Grid { a, b, step } => {
            let mut n = 0;
            while a + n as f64 * step <= b + 1e-9 * step.abs() {
                n += 1;
            }
            n
        }
    }
}

fn oracle_rows(samplers: &[Sampler], nvar: usize) -> usize {
    let uniform = samplers.iter().all(|s| matches!(s, Sampler::Uniform { .. }));
    let per_var: Vec<usize> = (0..nvar).map(|i| enumerate_points(&samplers[i.min(samplers.len() - 1)])).collect();
    if uniform {
        // Joint rows: one draw of every variable per row.
        per_var[0]
    } else {
        per_var.iter().product()
    }
}

fn criterion_3() -> Outcome {
    let mut mismatches = Vec::new();
    for spec in BENCHMARKS.iter() {
        let b = generate_benchmark(spec.name, 0).unwrap();
        for (split, samplers, got) in [("train", spec.train, b.train.rows()), ("test", spec.test, b.test.rows())] {
            let want = oracle_rows(samplers, spec.nvar);
            if want != got {
                mismatches.push(format!("{} {split}: {got} != {want}", spec.name));
            }
        }
    }
    let fixed = [("K7", 100, true), ("K1", 21, true), ("P1", 676, false), ("V4", 1024, true)];
    for (name, rows, is_train) in fixed {
        let b = generate_benchmark(name, 0).unwrap();
        let got = if is_train { b.train.rows() } else { b.test.rows() };
        if got != rows {
            mismatches.push(format!("{name}: {got} != {rows}"));
        }
    }
    if BENCHMARKS.len() != 34 {
        mismatches.push(format!("{} benchmarks instead of 34", BENCHMARKS.len()));
    }
    if mismatches.is_empty() {
        Ok(format!("{} benchmarks, 68 splits match the enumeration", BENCHMARKS.len()))
    } else {
        Err(mismatches.join("; "))
    }
}

fn criterion_4() -> Outcome {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/airfoil_synthetic.dat");
    let (train_set, test_set) = load_csv(&path, "SSPL", 0.7, 0).map_err(|e| e.to_string())?;
    check(train_set.rows() == 1052, || format!("{} train rows, expected 1052", train_set.rows()))?;
    let g = Grammar::parse(builtin::AIRFOIL, &ParseOptions::default()).unwrap();
    let cfg = TrainConfig {
        batch_size: 256,
        iterations: 500,
        hidden: 32,
        seed: 0,
        ..TrainConfig::default()
    };
    let r: RunResult = train(&cfg, &g, &train_set, Some(&test_set), None).map_err(|e| e.to_string())?;
    let text = r.best_expression.clone().ok_or("no complete expression")?;
    let state = DerivationState::replay(&g, &r.best_actions).map_err(|e| e.to_string())?;
    check(state.is_complete(), || "best derivation is incomplete".into())?;
    state.audit(&g)?;
    let skeleton = state.to_expression(&g, train_set.names()).map_err(|e| e.to_string())?;
    let units: Vec<Dimension> = ["Hz", "deg", "m", "m/s", "m"].iter().map(|u| Dimension::parse(u).unwrap()).collect();
    audit_units(&skeleton, &units).map_err(|e| format!("unit violation: {e}"))?;

    let fitted = parse_expression(&text, train_set.names()).map_err(|e| e.to_string())?;
    check(fitted.const_count() == 0, || "reported expression still has free constants".into())?;
    let preds = evaluate(&fitted, test_set.columns());
    check(preds.iter().all(|v| v.is_finite()), || "non-finite test prediction".into())?;
    let c = r.complexity.ok_or("no complexity")?;
    check(c <= 50, || format!("complexity {c} > 50"))?;
    Ok(format!(
        "C={c}, test MSE {:.3}, R2 {:.3}: {text}",
        r.best_test_mse.unwrap_or(f64::NAN),
        r.test_r2.unwrap_or(f64::NAN)
    ))
}

/// A policy with large random weights, so probabilities are far from the
/// grammar prior.
fn random_policy(g: &Grammar, rng: &mut ChaCha8Rng) -> PolicyParameters {
    let mut shape = PolicyShape::for_grammar(g, rng.gen_range(2..=8));
    shape.embedding = rng.gen_range(1..=4);
    shape.encoder = rng.gen_range(1..=4);
    let mut p = PolicyParameters::init(shape, rng.gen()).unwrap();
    let scale = rng.gen_range(0.5..5.0);
    for v in p.as_mut_slice() {
        *v *= scale;
    }
    p
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let target = 100_000;
    let (mut sampled, mut bad_mask, mut worst_sum) = (0usize, 0usize, 0.0f64);
    let mut grammars = 0;
    while sampled < target {
        let g = if grammars % 4 == 0 {
            Grammar::parse(builtin::NGUYEN, &ParseOptions::with_nvar(rng.gen_range(1..=3))).unwrap()
        } else {
            RandomGrammar::generate(&mut rng).parse()
        };
        grammars += 1;
        let policy = random_policy(&g, &mut rng);
        let shape = policy.shape().observation_shape();
        for _ in 0..20 {
            let mut state = DerivationState::new(&g);
            let mut eta = HiddenState::random(policy.shape().hidden, &mut rng);
            for _ in 0..40 {
                if state.is_complete() {
                    break;
                }
                let obs = state.observation(&g, &shape, StateToggles::default()).unwrap();
                let (probs, next) = policy.forward(&obs, &eta).map_err(|e| e.to_string())?;
                worst_sum = worst_sum.max((probs.iter().sum::<f64>() - 1.0).abs());
                let a = sample_action(&probs, &mut rng);
                if !obs.mask.allows(a) {
                    bad_mask += 1;
                }
                state.apply(&g, a).map_err(|e| e.to_string())?;
                eta = next;
                sampled += 1;
            }
        }
    }
    check(bad_mask == 0 && worst_sum <= 1e-9, || {
        format!("{bad_mask} masked actions sampled, worst |sum-1| {worst_sum:.2e}")
    })?;
    // Hard logits must not leak either.
    let logits = [1e3, -1e3, 50.0, 0.0];
    let mask = ggsr_core::Mask::from_bools(vec![false, true, false, true]);
    let p = masked_softmax(&logits, &mask).map_err(|e| e.to_string())?;
    check(p[0] == 0.0 && p[2] == 0.0, || format!("masked probability leaked: {p:?}"))?;
    Ok(format!(
        "{sampled} actions over {grammars} grammars, 0 masked, worst |sum-1| {worst_sum:.1e}"
    ))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    let configs = 24;
    for cfg_i in 0..configs {
        let g = if cfg_i % 3 == 0 {
            Grammar::parse(builtin::NGUYEN, &ParseOptions::with_nvar(1 + cfg_i % 2)).unwrap()
        } else {
            RandomGrammar::generate(&mut rng).parse()
        };
        let mut shape = PolicyShape::for_grammar(&g, rng.gen_range(1..=4));
        shape.embedding = rng.gen_range(1..=3);
        shape.encoder = rng.gen_range(1..=3);
        shape.past_window = rng.gen_range(1..=4);
        shape.sibling_window = rng.gen_range(1..=3);
        shape.horizon = rng.gen_range(4..=12);
        let mut p = PolicyParameters::init(shape, rng.gen()).unwrap();
        for v in p.as_mut_slice() {
            *v += rng.gen_range(-0.3..0.3);
        }
        let toggles = StateToggles {
            parent: rng.gen_bool(0.8),
            siblings: rng.gen_bool(0.8),
            past: rng.gen_bool(0.8),
            depth: rng.gen_bool(0.8),
            symbol: rng.gen_bool(0.8),
        };
        let lambda = if rng.gen_bool(0.7) { rng.gen_range(0.0..0.5) } else { 0.0 };
        let batch: Vec<(EpisodeTrace, f64)> = (0..rng.gen_range(1..=3))
            .map(|_| {
                let mut ep_rng = ChaCha8Rng::seed_from_u64(rng.gen());
                let ep = sample_episode(&p, &g, shape.horizon, &mut ep_rng, toggles, &[]).unwrap();
                (ep.trace, rng.gen_range(-1.0..1.0))
            })
            .collect();
        let analytic = p.gradient(&g, &batch, lambda).map_err(|e| e.to_string())?;
        let h = 1e-5;
        for i in 0..p.len() {
            let orig = p.as_slice()[i];
            p.as_mut_slice()[i] = orig + h;
            let up = p.objective(&g, &batch, lambda).unwrap();
            p.as_mut_slice()[i] = orig - h;
            let down = p.objective(&g, &batch, lambda).unwrap();
            p.as_mut_slice()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic.0[i];
            // Absolute floor: entries that are zero up to rounding carry no
            // relative information.
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            if rel > worst {
                worst = rel;
            }
            if rel >= 1e-4 {
                return Err(format!(
                    "config {cfg_i}: parameter {i} ({}) analytic {a:.6e} numeric {numeric:.6e} rel {rel:.2e}",
                    p.block_name(i)
                ));
            }
            checked += 1;
        }
    }
    Ok(format!("{configs} configurations, {checked} partials, max relative error {worst:.2e}"))
}

fn criterion_7() -> Outcome {
    for (m, want) in [(0.0, 1.0), (1.0, 0.5), (9.0, 0.1)] {
        let r = reward_from_mse(m);
        check((r - want).abs() < 1e-15, || format!("reward({m}) = {r}, expected {want}"))?;
    }
    for m in [f64::NAN, f64::INFINITY, -1.0] {
        check(reward_from_mse(m) == 0.0, || format!("reward({m}) should be 0"))?;
    }
    let data = Dataset::unnamed(vec![vec![0.0, 1.0, 2.0]], vec![1.0, 2.0, 3.0], Split::Train).unwrap();
    check(reward(None, &data) == 0.0, || "incomplete expression scored".into())?;
    let exact = parse_expression("x[1] + 1", &[]).unwrap();
    check(reward(Some(&exact), &data) == 1.0, || "exact fit should score 1".into())?;
    let off_by_3 = parse_expression("x[1] + 4", &[]).unwrap();
    check((reward(Some(&off_by_3), &data) - 0.1).abs() < 1e-15, || "MSE 9 should score 0.1".into())?;
    for bad in ["1 / x[1]", "log(x[1] - 1)"] {
        let e = parse_expression(bad, &[]).unwrap();
        check(reward(Some(&e), &data) == 0.0, || format!("{bad} has non-finite values but scored"))?;
        check(expression_mse(&e, &data).is_infinite(), || format!("{bad} MSE should be infinite"))?;
    }
    // An unfinished derivation has no expression.
    let g = Grammar::parse(builtin::NGUYEN, &ParseOptions::with_nvar(1)).unwrap();
    let state = DerivationState::replay(&g, &[ActionId(0)]).unwrap();
    check(state.to_expression(&g, &[]).is_err(), || "incomplete derivation produced an expression".into())?;
    Ok("1/(1+MSE) at 0, 1, 9; incomplete and non-finite score 0".into())
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..2000 {
        let b = rng.gen_range(1..=300);
        let eps = rng.gen_range(0.001..=1.0);
        let rewards: Vec<f64> = (0..b)
            .map(|_| if rng.gen_bool(0.3) { 0.0 } else { (rng.gen_range(0..20) as f64) / 20.0 })
            .collect();
        let (kept, r_eps) = quantile_filter(&rewards, eps);
        let want = ((eps * b as f64 - 1e-9).ceil() as usize).max(1);
        check(kept.len() == want, || format!("B={b} eps={eps}: kept {} not {want}", kept.len()))?;
        check(kept.iter().all(|&i| rewards[i] >= r_eps), || format!("B={b} eps={eps}: kept reward below R_eps"))?;
        let mut sorted = rewards.clone();
        sorted.sort_by(|x, y| y.total_cmp(x));
        let min_kept = kept.iter().map(|&i| rewards[i]).fold(f64::INFINITY, f64::min);
        check(min_kept == sorted[want - 1], || "kept set is not the top of the batch".into())?;
    }

    // Equal rewards: every advantage is zero, so the risk-seeking part of
    // the gradient vanishes.
    let g = Grammar::parse(builtin::NGUYEN, &ParseOptions::with_nvar(1)).unwrap();
    let p = PolicyParameters::init(PolicyShape::for_grammar(&g, 8), 1).unwrap();
    let mut ep_rng = ChaCha8Rng::seed_from_u64(3);
    let eps: Vec<_> = (0..40)
        .map(|_| sample_episode(&p, &g, 50, &mut ep_rng, StateToggles::default(), &[]).unwrap())
        .collect();
    let rewards = vec![0.42; eps.len()];
    let (kept, r_eps) = quantile_filter(&rewards, 0.05);
    let batch: Vec<(EpisodeTrace, f64)> = kept.iter().map(|&i| (eps[i].trace.clone(), rewards[i] - r_eps)).collect();
    let grad = p.gradient(&g, &batch, 0.0).map_err(|e| e.to_string())?;
    check(grad.norm() == 0.0, || format!("gradient norm {} on an all-equal batch", grad.norm()))?;
    Ok("2000 random batches keep max(1, ceil(eps*B)) at or above R_eps; equal batch gives zero gradient".into())
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut steps = 0;
    for gi in 0..100 {
        let rg = RandomGrammar::generate(&mut rng);
        let g = rg.parse();
        check(g.action_count() == rg.action_count(), || format!("grammar {gi}: action count differs"))?;
        for _ in 0..10 {
            let mut oracle = LeftmostOracle::new(&rg);
            let mut state = DerivationState::new(&g);
            for _ in 0..30 {
                let Some((_, nt)) = oracle.leftmost() else { break };
                let sym = state.current_symbol().ok_or_else(|| format!("grammar {gi}: derivation finished early"))?;
                check(g.symbol_name(sym) == RandomGrammar::name(nt), || {
                    format!("grammar {gi}: expanding {} but leftmost is {}", g.symbol_name(sym), RandomGrammar::name(nt))
                })?;
                let mask = state.current_mask(&g).unwrap();
                let off = rg.offsets()[nt];
                let n_rules = rg.productions[nt].len();
                let allowed: Vec<usize> = (0..g.action_count()).filter(|&a| mask.allows(ActionId(a))).collect();
                check(allowed == (off..off + n_rules).collect::<Vec<_>>(), || format!("grammar {gi}: mask {allowed:?}"))?;
                let rule = rng.gen_range(0..n_rules);
                let a = oracle.expand(rule);
                state.apply(&g, ActionId(a)).map_err(|e| e.to_string())?;
                check(state.text(&g) == oracle.text(), || {
                    format!("grammar {gi}: text {:?} vs oracle {:?}", state.text(&g), oracle.text())
                })?;
                steps += 1;
            }
            check(state.is_complete() == oracle.leftmost().is_none(), || format!("grammar {gi}: completion differs"))?;
        }
    }

    let mut complete = 0;
    for nvar in 1..=3 {
        let g = Grammar::parse(builtin::NGUYEN, &ParseOptions::with_nvar(nvar)).unwrap();
        let names: Vec<String> = (1..=nvar).map(|i| format!("x{i}")).collect();
        for _ in 0..3334 {
            let mut state = DerivationState::new(&g);
            while !state.is_complete() && state.trajectory().len() < 50 {
                let mask = state.current_mask(&g).unwrap();
                let legal: Vec<usize> = (0..g.action_count()).filter(|&a| mask.allows(ActionId(a))).collect();
                state.apply(&g, ActionId(legal[rng.gen_range(0..legal.len())])).map_err(|e| e.to_string())?;
            }
            state.audit(&g)?;
            if state.is_complete() {
                let e = state.to_expression(&g, &names).map_err(|e| format!("malformed: {} ({e})", state.text(&g)))?;
                let again = parse_expression(&e.to_string(), &names).map_err(|e| e.to_string())?;
                check(again == e, || format!("round trip changed {}", state.text(&g)))?;
                complete += 1;
            }
        }
    }
    Ok(format!(
        "100 random grammars, {steps} leftmost steps match; 10002 fuzzed rollouts, {complete} complete, none malformed"
    ))
}

fn pairwise_u(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| (x, y)))
        .map(|(x, y)| if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 })
        .sum()
}

fn criterion_10() -> Outcome {
    // Every sample of size <= 8 over a 3-value alphabet, against every
    // sample of the same kind, up to size 4 on each side exhaustively,
    // and all size pairs up to 8 over the 2-value alphabet.
    let mut cases = 0usize;
    let all = |n: usize, k: usize| -> Vec<Vec<f64>> {
        (0..k.pow(n as u32))
            .map(|mut code| {
                (0..n)
                    .map(|_| {
                        let v = (code % k) as f64;
                        code /= k;
                        v
                    })
                    .collect()
            })
            .collect()
    };
    for (max_n, k) in [(4usize, 3usize), (8, 2)] {
        for n1 in 1..=max_n {
            let left = all(n1, k);
            for n2 in 1..=max_n {
                let right = all(n2, k);
                for a in &left {
                    for b in &right {
                        let r = mann_whitney_u(a, b);
                        if r.u_a != pairwise_u(a, b) || r.u_a + r.u_b != (n1 * n2) as f64 {
                            return Err(format!("{a:?} vs {b:?}: U {} oracle {}", r.u_a, pairwise_u(a, b)));
                        }
                        cases += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{cases} sample pairs match the pairwise count"))
}

fn criterion_11() -> Outcome {
    let b = generate_benchmark("N2", 11).unwrap();
    let g = nguyen_for(&b.train);
    let cfg = TrainConfig {
        batch_size: 64,
        iterations: 30,
        hidden: 16,
        seed: 11,
        ..TrainConfig::default()
    };
    let run = || -> Result<(String, Vec<u8>), String> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        pool.install(|| {
            let mut ledger = Vec::new();
            let r = train(&cfg, &g, &b.train, Some(&b.test), Some(&mut ledger)).map_err(|e| e.to_string())?;
            Ok((serde_json::to_string(&r).unwrap(), ledger))
        })
    };
    let (a, la) = run()?;
    let (b2, lb) = run()?;
    check(a == b2, || "RunResult differs between runs".into())?;
    check(la == lb, || "ledger differs between runs".into())?;
    Ok(format!("RunResult ({} bytes) and ledger identical", a.len()))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("easy Nguyen recovery", criterion_1),
        ("ablation direction", criterion_2),
        ("benchmark golden counts", criterion_3),
        ("airfoil smoke run", criterion_4),
        ("masking soundness", criterion_5),
        ("gradient check", criterion_6),
        ("reward law", criterion_7),
        ("quantile filter", criterion_8),
        ("leftmost derivation", criterion_9),
        ("Mann-Whitney U", criterion_10),
        ("determinism", criterion_11),
    ];
    let filters: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filters.is_empty() && !filters.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {n:>2} {name}: PASS ({secs:.1}s) {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {n:>2} {name}: FAIL ({secs:.1}s) {msg}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
