//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Tolerances are pinned below; nothing here is tuned to the outcome.

use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use magicrect_core::coloring::{self, PairSchedule};
use magicrect_core::engine::{expectation_full, NoiseModel, Observable, SharedState};
use magicrect_core::games::{classical_value, GameSpec};
use magicrect_core::ledger::{
    bound_catalog, catalog_delta, delta_log_slope, exact_epsilons, ledger_verify, VerifyOptions,
};
use magicrect_core::protocol::estimate::hoeffding_half_width;
use magicrect_core::protocol::{
    estimate_epsilons, evaluate, run_protocol, run_protocol_with, Inputs, JointSampler, RoundMix,
};
use magicrect_core::strategies::{DeviceModel, RoundType};
use magicrect_core::wire::run_local_session;
use magicrect_core::{Pauli, PauliString, Phase};

const EXACT_TOL: f64 = 1e-12;
const MARGIN_TOL: f64 = 1e-9;
const SLOPE_TARGET: f64 = 0.5;
const SLOPE_TOL: f64 = 0.02;
const RATIO_CAP: f64 = 20.0;
const CONFIDENCE_ALPHA: f64 = 0.01;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn questions(n: usize) -> Vec<Inputs> {
    let mut out = Vec::new();
    for c in RoundType::ALL {
        if c == RoundType::PairCheck && n <= 3 {
            continue;
        }
        let xs: &[usize] = if c == RoundType::Game { &[1, 2, 3] } else { &[1, 3] };
        for &x in xs {
            for y in 1..=n {
                out.push(Inputs { c, x, y });
            }
        }
    }
    out
}

/// Exact probability that the referee accepts question `q`, from the joint
/// outcome law and the round predicates.
fn accept_probability(s: &JointSampler, q: Inputs) -> Result<f64, String> {
    let n = s.device().n();
    let ka = n;
    let kb = q.c.bob_arity(n);
    let law = s.distribution(q.c, q.x, q.y).map_err(err)?;
    let mut p = 0.0;
    for (mask, &w) in law.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let bits: Vec<i8> = (0..ka + kb).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect();
        if evaluate(n, q, &bits[..ka], &bits[ka..]).map_err(err)?.accept {
            p += w;
        }
    }
    Ok(p)
}

/// One-sided upper confidence end for an acceptance rate.
fn rate_upper(accepts: u64, trials: u64) -> f64 {
    accepts as f64 / trials as f64 + ((1.0 / CONFIDENCE_ALPHA).ln() / (2.0 * trials as f64)).sqrt()
}

fn c1_honest_perfection() -> Outcome {
    let mut summary = Vec::new();
    for n in [3, 7] {
        let dev = DeviceModel::honest(n).map_err(err)?;
        let (eps, _) = exact_epsilons(&dev).map_err(err)?;
        ensure(eps.iter().all(|&e| e.abs() <= EXACT_TOL), || format!("n={n}: correlation deficits {eps:?}"))?;
        let s = JointSampler::new(dev.clone()).map_err(err)?;
        let qs = questions(n);
        for &q in &qs {
            let p = accept_probability(&s, q)?;
            ensure((p - 1.0).abs() <= EXACT_TOL, || format!("n={n} {q:?}: accept probability {p}"))?;
        }
        let t = run_protocol_with(&s, 10_000, &RoundMix::uniform(n), 1).map_err(err)?;
        let rejected = t.records.iter().filter(|r| !r.accept).count();
        ensure(rejected == 0, || format!("n={n}: {rejected} rejections in 10^4 rounds"))?;
        summary.push(format!("n={n}: {} questions exact, 0/10^4 rejected", qs.len()));
    }
    Ok(summary.join("; "))
}

fn c2_classical_value() -> Outcome {
    let v = classical_value(&GameSpec::magic_square()).map_err(err)?;
    ensure(v == Ratio::new(8, 9), || format!("classical value {v}"))?;
    Ok(format!("value = {v}"))
}

fn c3_ledger() -> Outcome {
    let mut worst_margin = f64::INFINITY;
    for n in [3, 7] {
        for theta in [0.0, 0.05, 0.1, 0.2, 0.5] {
            let dev = DeviceModel::noisy_honest(n, NoiseModel::YRotation { theta }).map_err(err)?;
            let rep = ledger_verify(&dev, VerifyOptions::default()).map_err(err)?;
            for e in &rep.entries {
                let m = e.margin.ok_or_else(|| format!("{}: unmeasured", e.name))?;
                worst_margin = worst_margin.min(m);
                ensure(m >= -MARGIN_TOL, || format!("n={n} θ={theta}: {} margin {m:e}", e.name))?;
                if theta == 0.0 {
                    let lhs = e.lhs.unwrap_or(f64::NAN);
                    ensure(lhs.abs() <= MARGIN_TOL, || format!("n={n} θ=0: {} lhs {lhs:e}", e.name))?;
                }
            }
        }
    }
    let grid: Vec<f64> = (0..=16).map(|k| 10f64.powf(-6.0 + 0.25 * k as f64)).collect();
    let mut slopes = Vec::new();
    for n in [3, 7, 11] {
        let s = delta_log_slope(n, &grid).map_err(err)?;
        ensure((s - SLOPE_TARGET).abs() <= SLOPE_TOL, || format!("n={n}: slope {s}"))?;
        slopes.push(s);
    }
    let eps = 1e-4;
    let mut ratios = Vec::new();
    for n in (7..=43).step_by(4) {
        let d = catalog_delta(&bound_catalog(n, [eps; 3]).map_err(err)?);
        ratios.push(d / (n as f64 * eps.sqrt()));
    }
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    ensure(hi <= RATIO_CAP, || format!("δ/(n√ε) up to {hi}"))?;
    Ok(format!(
        "min margin {worst_margin:.3e}; slopes {:.4?}; δ/(n√ε) in [{:.3}, {hi:.3}] for n=7..43",
        slopes,
        ratios.iter().copied().fold(f64::INFINITY, f64::min)
    ))
}

fn sampled_rate(dev: &DeviceModel, weights: &[f64], rounds: u64, seed: u64) -> Result<(u64, u64), String> {
    let mix = RoundMix::new(weights, dev.n()).map_err(err)?;
    let t = run_protocol(dev, rounds, &mix, seed).map_err(err)?;
    Ok((t.records.iter().filter(|r| r.accept).count() as u64, rounds))
}

fn c4_check_rounds() -> Outcome {
    let mut parts = Vec::new();
    for (dev, failing) in [
        (DeviceModel::standard_square().map_err(err)?, RoundType::LocalCheck),
        (DeviceModel::padded_adversary(7).map_err(err)?, RoundType::PairCheck),
    ] {
        let n = dev.n();
        let s = JointSampler::new(dev.clone()).map_err(err)?;
        for q in questions(n).into_iter().filter(|q| q.c == RoundType::Game) {
            let p = accept_probability(&s, q)?;
            ensure((p - 1.0).abs() <= EXACT_TOL, || format!("{:?} game {q:?}: {p}", dev.kind()))?;
        }
        let mut w = [0.0; 3];
        w[failing.code() as usize] = 1.0;
        let (acc, total) = sampled_rate(&dev, &w, 100_000, 4)?;
        let upper = rate_upper(acc, total);
        ensure(upper < 1.0, || format!("{:?}: {failing:?} rate {acc}/{total}, upper {upper}", dev.kind()))?;
        parts.push(format!(
            "{:?}: game rate 1 exact, {failing:?} rate {:.4} (99% upper {:.4})",
            dev.kind(),
            acc as f64 / total as f64,
            upper
        ));
    }
    Ok(parts.join("; "))
}

fn c5_estimator() -> Outcome {
    let theta: f64 = 0.1;
    let truth = 1.0 - theta.cos();
    let dev = DeviceModel::noisy_honest(3, NoiseModel::YRotation { theta }).map_err(err)?;
    let s = JointSampler::new(dev).map_err(err)?;
    let mix = RoundMix::uniform(3);
    let mut inside = 0;
    for seed in 0..100u64 {
        let t = run_protocol_with(&s, 100_000, &mix, seed).map_err(err)?;
        let rep = estimate_epsilons(&t, CONFIDENCE_ALPHA).map_err(err)?;
        let fam = rep.family(RoundType::LocalCheck);
        let worst = fam.worst_member().ok_or("no local-check members")?;
        let hat = rep.eps1_hat.ok_or("ε̂₁ missing")?;
        // interval on ε̂ itself, from the worst member's trial count
        let hw = hoeffding_half_width(worst.trials, CONFIDENCE_ALPHA);
        if (hat - truth).abs() <= hw {
            inside += 1;
        }
    }
    ensure(inside >= 99, || format!("{inside}/100 runs cover 1-cos(0.1)"))?;
    Ok(format!("{inside}/100 runs cover ε₁ = {truth:.6}"))
}

fn c6_coloring() -> Outcome {
    let mut checked = 0;
    for n in (3..=201).step_by(2) {
        let sched = PairSchedule::new(n).map_err(err)?;
        sched.verify()?;
        let mut seen = vec![vec![false; n + 1]; n + 1];
        for v in 1..=n {
            let class = sched.class(v);
            ensure(class.len() == (n - 1) / 2, || format!("n={n} class {v} has {}", class.len()))?;
            let mut used = vec![false; n + 1];
            for &(a, b) in class {
                ensure(a != b && !used[a] && !used[b], || format!("n={n} class {v} not a matching"))?;
                used[a] = true;
                used[b] = true;
                ensure(!seen[a][b], || format!("n={n} edge {{{a},{b}}} twice"))?;
                seen[a][b] = true;
                seen[b][a] = true;
                // the class of {v-i, v+i} is v
                ensure((a + b) % n == (2 * v) % n, || format!("n={n} edge {{{a},{b}}} in class {v}"))?;
                ensure(coloring::color_of(a, b, n).map_err(err)? == v, || format!("n={n} color_of({a},{b})"))?;
            }
        }
        for a in 1..=n {
            for b in a + 1..=n {
                ensure(seen[a][b], || format!("n={n} edge {{{a},{b}}} uncovered"))?;
            }
        }
        checked += 1;
    }
    Ok(format!("{checked} odd n in 3..=201"))
}

fn pauli_from_index(mut k: usize, width: usize, phase: u8) -> PauliString {
    let letters = (0..width)
        .map(|_| {
            let l = Pauli::ALL[k % 4];
            k /= 4;
            l
        })
        .collect();
    PauliString::new(Phase::from_power(phase), letters).unwrap()
}

fn c7_engines() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in 1..=3usize {
        let angles: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
        for noise in [NoiseModel::None, NoiseModel::PerPair { angles }] {
            let state = SharedState::prepare(n, &noise).map_err(err)?;
            for k in 0..4usize.pow(2 * n as u32) {
                let p = pauli_from_index(k, 2 * n, (k % 4) as u8);
                let a = expectation_full(&p, &noise).map_err(err)?;
                let d = state.expectation(&Observable::from(p)).map_err(err)?;
                worst = worst.max((a - d).norm());
                count += 1;
            }
        }
    }
    let n = 7;
    let angles: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
    let noise = NoiseModel::PerPair { angles };
    let state = SharedState::prepare(n, &noise).map_err(err)?;
    for _ in 0..200 {
        let k: usize = rng.gen_range(0..4usize.pow(2 * n as u32));
        let p = pauli_from_index(k, 2 * n, rng.gen_range(0..4));
        let a = expectation_full(&p, &noise).map_err(err)?;
        let d = state.expectation(&Observable::from(p)).map_err(err)?;
        worst = worst.max((a - d).norm());
        count += 1;
    }
    ensure(worst <= EXACT_TOL, || format!("max |analytic - dense| = {worst:e}"))?;
    Ok(format!("{count} strings, max diff {worst:.2e}"))
}

fn c8_wire() -> Outcome {
    let n = 3;
    let rounds = 10_000;
    let seed = 2024;
    let dev = DeviceModel::noisy_honest(n, NoiseModel::YRotation { theta: 0.2 }).map_err(err)?;
    let mix = RoundMix::uniform(n);
    let wire = run_local_session(&dev, rounds, &mix, seed, Duration::from_secs(30)).map_err(err)?;
    let local = run_protocol(&dev, rounds, &mix, seed).map_err(err)?;
    ensure(wire.voided.is_empty(), || format!("{} voided rounds", wire.voided.len()))?;
    for c in [None, Some(RoundType::Game), Some(RoundType::LocalCheck)] {
        let (w, l) = (wire.transcript.accept_rate(c), local.accept_rate(c));
        ensure(w == l, || format!("{c:?}: wire {w:?} vs in-process {l:?}"))?;
    }
    ensure(wire.transcript.records == local.records, || "records differ".into())?;
    Ok(format!("accept rate {:.4} on both paths, records identical", local.accept_rate(None).unwrap_or(0.0)))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("honest perfection", c1_honest_perfection),
        ("classical value 8/9", c2_classical_value),
        ("bound ledger soundness and scaling", c3_ledger),
        ("check rounds reject adversaries", c4_check_rounds),
        ("estimator coverage", c5_estimator),
        ("edge colouring", c6_coloring),
        ("analytic vs dense engine", c7_engines),
        ("wire vs in-process", c8_wire),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let res = f();
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("PASS [{}] {name}: {detail} ({secs:.1}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name}: {why} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
