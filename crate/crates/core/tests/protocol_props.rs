//! Referee predicates and the ε estimator checked against a second,
//! independently written implementation.

use proptest::prelude::*;

use magicrect_core::protocol::estimate::{hoeffding_half_width, members_of};
use magicrect_core::protocol::{
    estimate_epsilons, evaluate, Evaluation, Inputs, RoundMix, RoundRecord, Transcript, TranscriptHeader,
};
use magicrect_core::strategies::RoundType;

fn wrap(k: i64, n: usize) -> usize {
    (k - 1).rem_euclid(n as i64) as usize + 1
}

/// Pairs {y-i, y+i}, i = 1..(n-1)/2.
fn class(y: usize, n: usize) -> Vec<(usize, usize)> {
    (1..=(n as i64 - 1) / 2).map(|i| (wrap(y as i64 - i, n), wrap(y as i64 + i, n))).collect()
}

fn bob_len(c: u8, n: usize) -> usize {
    [3, n, n - 1][c as usize]
}

/// Returns (accept, malformed).
fn oracle(n: usize, c: u8, x: usize, y: usize, a: &[i8], b: &[i8]) -> (bool, bool) {
    let pm = |v: &[i8]| v.iter().all(|&s| s == 1 || s == -1);
    if a.len() != n || b.len() != bob_len(c, n) || !pm(a) || !pm(b) {
        return (false, true);
    }
    match c {
        0 => {
            if b[0] * b[1] * b[2] != -1 {
                return (false, true);
            }
            let all: i8 = a.iter().product();
            (all * a[y - 1] == b[x - 1], false)
        }
        1 if x == 1 => (a[y - 1] == b[y - 1], false),
        1 => ((0..n).filter(|&j| j != y - 1).all(|j| a[j] == b[j]), false),
        _ => {
            let pairs = class(y, n);
            let off = if x == 1 { 0 } else { pairs.len() };
            (pairs.iter().enumerate().all(|(k, &(p, q))| a[p - 1] * a[q - 1] == b[off + k]), false)
        }
    }
}

#[derive(Debug, Clone)]
struct Case {
    n: usize,
    c: u8,
    x: usize,
    y: usize,
    a: Vec<i8>,
    b: Vec<i8>,
}

fn bits(len: usize) -> impl Strategy<Value = Vec<i8>> {
    prop::collection::vec(prop::bool::ANY.prop_map(|s| if s { 1 } else { -1 }), len)
}

fn case() -> impl Strategy<Value = Case> {
    (prop::sample::select(vec![3usize, 7, 11]), 0u8..3)
        .prop_filter("pair checks need n > 3", |(n, c)| *c < 2 || *n > 3)
        .prop_flat_map(|(n, c)| {
            let x = if c == 0 { (1usize..=3).boxed() } else { prop::sample::select(vec![1usize, 3]).boxed() };
            // arity occasionally off by one, entries occasionally 0
            let la = prop::sample::select(vec![n, n, n, n, n, n, n - 1, n + 1]);
            let lb = prop::sample::select(vec![0i64, 0, 0, 0, 0, 0, -1, 1])
                .prop_map(move |d| (bob_len(c, n) as i64 + d) as usize);
            (Just(n), Just(c), x, 1..=n, la.prop_flat_map(bits), lb.prop_flat_map(bits), any::<Option<prop::sample::Index>>())
        })
        .prop_map(|(n, c, x, y, a, mut b, zero)| {
            if let (Some(i), false) = (zero, b.is_empty()) {
                if i.index(8) == 0 {
                    let k = i.index(b.len());
                    b[k] = 0;
                }
            }
            Case { n, c, x, y, a, b }
        })
}

fn record(round: u64, k: &Case, ev: Evaluation) -> RoundRecord {
    let inputs = Inputs { c: RoundType::from_code(k.c).unwrap(), x: k.x, y: k.y };
    RoundRecord::new(round, inputs, k.a.clone(), k.b.clone(), ev)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn predicates_double_entry(k in case()) {
        let inputs = Inputs { c: RoundType::from_code(k.c).unwrap(), x: k.x, y: k.y };
        let ev = evaluate(k.n, inputs, &k.a, &k.b).unwrap();
        let (accept, malformed) = oracle(k.n, k.c, k.x, k.y, &k.a, &k.b);
        prop_assert_eq!(ev.accept, accept);
        prop_assert_eq!(ev.malformed, malformed);
        prop_assert_eq!(ev.accept, ev.sub.iter().all(|&s| s));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn estimator_counts_add_up(cases in prop::collection::vec(case().prop_filter("n = 7", |k| k.n == 7), 1..300)) {
        let n = 7;
        let records: Vec<RoundRecord> = cases
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let inputs = Inputs { c: RoundType::from_code(k.c).unwrap(), x: k.x, y: k.y };
                record(i as u64, k, evaluate(n, inputs, &k.a, &k.b).unwrap())
            })
            .collect();
        let t = Transcript {
            header: TranscriptHeader { n, seed: 0, rounds: records.len() as u64, mix: RoundMix::uniform(n), device: "test".into() },
            records,
        };
        let rep = estimate_epsilons(&t, 0.05).unwrap();
        for c in RoundType::ALL {
            let expected: u64 = t
                .records
                .iter()
                .filter(|r| r.c == c.code())
                .map(|r| members_of(n, c, r.x, r.y).unwrap().len() as u64)
                .sum();
            let fam = rep.family(c);
            prop_assert_eq!(fam.members.iter().map(|m| m.trials).sum::<u64>(), expected);
            for m in &fam.members {
                prop_assert!(m.accepts <= m.trials);
                prop_assert!((0.0..=2.0).contains(&m.eps));
                prop_assert!((m.eps - 2.0 * (1.0 - m.accepts as f64 / m.trials as f64)).abs() < 1e-12);
                prop_assert!((m.eps_half_width - 2.0 * hoeffding_half_width(m.trials, 0.05)).abs() < 1e-15);
            }
            if let (Some(hat), Some(up)) = (fam.eps_hat, fam.eps_upper) {
                prop_assert!(up >= hat);
            }
        }
        let back = Transcript::read_jsonl(t.to_jsonl().as_bytes()).unwrap();
        prop_assert_eq!(back, t);
    }
}

#[test]
fn hoeffding_width_formula() {
    // sqrt(ln(2/α) / 2N)
    assert!((hoeffding_half_width(1000, 0.05) - ((2.0f64 / 0.05).ln() / 2000.0).sqrt()).abs() < 1e-15);
    assert!(hoeffding_half_width(4, 0.01) > hoeffding_half_width(400, 0.01));
}
