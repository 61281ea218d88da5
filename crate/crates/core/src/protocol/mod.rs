//! Referee logic for the self-test protocols: question sampling, acceptance
//! predicates, the batch driver and transcripts.
//!
//! Round types: `c = 0` game, `c = 1` local check, `c = 2` pair check (only
//! for `n > 3`). Alice only ever sees `x`.

pub mod estimate;
pub mod sampler;
pub mod transcript;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coloring;
use crate::engine::EngineError;
use crate::games::{self, GameError};
use crate::strategies::{DeviceError, DeviceModel, RoundType};

pub use estimate::{estimate_epsilons, EpsilonReport, FamilyEstimate, MemberEstimate};
pub use sampler::JointSampler;
pub use transcript::{RoundRecord, Transcript, TranscriptHeader};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("invalid round mix: {0}")]
    Mix(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("transcript format: {0}")]
    Format(String),
}

/// Probability weights over round types `c = 0, 1, 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundMix {
    pub weights: [f64; 3],
}

impl RoundMix {
    /// Uniform over the round types allowed for `n`.
    pub fn uniform(n: usize) -> Self {
        if n > 3 {
            RoundMix { weights: [1.0 / 3.0; 3] }
        } else {
            RoundMix { weights: [0.5, 0.5, 0.0] }
        }
    }

    /// Normalises the weights and checks them against `n`.
    pub fn new(weights: &[f64], n: usize) -> Result<Self, ProtocolError> {
        if weights.is_empty() || weights.len() > 3 {
            return Err(ProtocolError::Mix(format!("{} weights given", weights.len())));
        }
        let mut w = [0.0; 3];
        w[..weights.len()].copy_from_slice(weights);
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(ProtocolError::Mix("weights must be finite and non-negative".into()));
        }
        if n <= 3 && w[2] > 0.0 {
            return Err(ProtocolError::Mix("pair checks (c = 2) need n > 3".into()));
        }
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Err(ProtocolError::Mix("weights sum to zero".into()));
        }
        Ok(RoundMix { weights: w.map(|v| v / total) })
    }

    /// Parses comma-separated weights such as `1,1,0`.
    pub fn parse(text: &str, n: usize) -> Result<Self, ProtocolError> {
        let w: Vec<f64> = text
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| ProtocolError::Mix(format!("bad weight `{t}`"))))
            .collect::<Result<_, _>>()?;
        Self::new(&w, n)
    }
}

/// Question tuple `(c, x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Inputs {
    pub c: RoundType,
    pub x: usize,
    pub y: usize,
}

impl Inputs {
    pub fn validate(&self, n: usize) -> Result<(), ProtocolError> {
        if self.y == 0 || self.y > n {
            return Err(ProtocolError::Input(format!("y = {} outside 1..={n}", self.y)));
        }
        let ok_x = match self.c {
            RoundType::Game => (1..=3).contains(&self.x),
            _ => self.x == 1 || self.x == 3,
        };
        if !ok_x {
            return Err(ProtocolError::Input(format!("x = {} not allowed for {:?}", self.x, self.c)));
        }
        if self.c == RoundType::PairCheck && n <= 3 {
            return Err(ProtocolError::Input("pair checks need n > 3".into()));
        }
        Ok(())
    }
}

/// Per-round RNG streams: one for the referee's questions, one for the
/// device's outcomes. Both are keyed by `(seed, round)`.
pub fn round_rngs(seed: u64, round: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut inputs = ChaCha8Rng::seed_from_u64(seed);
    inputs.set_stream(round.wrapping_mul(2));
    let mut outcomes = ChaCha8Rng::seed_from_u64(seed);
    outcomes.set_stream(round.wrapping_mul(2).wrapping_add(1));
    (inputs, outcomes)
}

/// Draws `c` from the mix, `y` uniformly, and `x` uniformly from `{1,2,3}`
/// for games or `{1,3}` for checks.
pub fn sample_inputs<R: Rng + ?Sized>(n: usize, mix: &RoundMix, rng: &mut R) -> Result<Inputs, ProtocolError> {
    if n <= 3 && mix.weights[2] > 0.0 {
        return Err(ProtocolError::Input("pair checks requested with n = 3".into()));
    }
    let u: f64 = rng.gen();
    let c = if u < mix.weights[0] {
        RoundType::Game
    } else if u < mix.weights[0] + mix.weights[1] || mix.weights[2] == 0.0 {
        RoundType::LocalCheck
    } else {
        RoundType::PairCheck
    };
    let c = if mix.weights[c.code() as usize] == 0.0 {
        // only reachable through round-off at the top of the range
        *RoundType::ALL.iter().rev().find(|t| mix.weights[t.code() as usize] > 0.0).unwrap()
    } else {
        c
    };
    let x = match c {
        RoundType::Game => rng.gen_range(1..=3),
        _ => {
            if rng.gen::<bool>() {
                1
            } else {
                3
            }
        }
    };
    let y = rng.gen_range(1..=n);
    Ok(Inputs { c, x, y })
}

/// Outcome of applying the acceptance predicates to one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub accept: bool,
    pub sub: Vec<bool>,
    pub malformed: bool,
}

impl Evaluation {
    fn malformed() -> Self {
        Evaluation { accept: false, sub: vec![false], malformed: true }
    }
}

fn well_formed(v: &[i8], len: usize) -> bool {
    v.len() == len && v.iter().all(|&s| s == 1 || s == -1)
}

/// Applies the round predicates. Malformed answers (wrong arity, entries
/// other than ±1, or `b₁b₂b₃ ≠ -1` in game rounds) reject the round.
pub fn evaluate(n: usize, inputs: Inputs, a: &[i8], b: &[i8]) -> Result<Evaluation, ProtocolError> {
    inputs.validate(n)?;
    let Inputs { c, x, y } = inputs;
    if !well_formed(a, n) || !well_formed(b, c.bob_arity(n)) {
        return Ok(Evaluation::malformed());
    }
    let sub = match c {
        RoundType::Game => match games::game_round_accept(n, x, y, a, b) {
            Ok(win) => vec![win],
            Err(GameError::Malformed(_)) => return Ok(Evaluation::malformed()),
            Err(e) => return Err(ProtocolError::Input(e.to_string())),
        },
        RoundType::LocalCheck => {
            if x == 1 {
                vec![a[y - 1] == b[y - 1]]
            } else {
                (1..=n).filter(|&j| j != y).map(|j| a[j - 1] == b[j - 1]).collect()
            }
        }
        RoundType::PairCheck => {
            let pairs = coloring::edges_of_color(y, n).map_err(|e| ProtocolError::Input(e.to_string()))?;
            let offset = if x == 1 { 0 } else { pairs.len() };
            pairs
                .iter()
                .enumerate()
                .map(|(k, &(p, q))| a[p - 1] * a[q - 1] == b[offset + k])
                .collect()
        }
    };
    Ok(Evaluation { accept: sub.iter().all(|&s| s), sub, malformed: false })
}

/// One referee round against a device.
pub fn run_round<R: Rng + ?Sized>(
    sampler: &JointSampler,
    round: u64,
    inputs: Inputs,
    rng: &mut R,
) -> Result<RoundRecord, ProtocolError> {
    let n = sampler.device().n();
    inputs.validate(n)?;
    let (a, b) = sampler.sample(inputs.c, inputs.x, inputs.y, rng)?;
    let ev = evaluate(n, inputs, &a, &b)?;
    Ok(RoundRecord::new(round, inputs, a, b, ev))
}

/// `N` rounds with per-round randomness from `(seed, round)`.
pub fn run_protocol(
    device: &DeviceModel,
    rounds: u64,
    mix: &RoundMix,
    seed: u64,
) -> Result<Transcript, ProtocolError> {
    let sampler = JointSampler::new(device.clone())?;
    run_protocol_with(&sampler, rounds, mix, seed)
}

/// As [`run_protocol`] but reusing a sampler (and its cached tables).
pub fn run_protocol_with(
    sampler: &JointSampler,
    rounds: u64,
    mix: &RoundMix,
    seed: u64,
) -> Result<Transcript, ProtocolError> {
    if rounds == 0 {
        return Err(ProtocolError::Input("need at least one round".into()));
    }
    let device = sampler.device();
    let n = device.n();
    let mut records = Vec::with_capacity(rounds as usize);
    for round in 0..rounds {
        let (mut in_rng, mut out_rng) = round_rngs(seed, round);
        let inputs = sample_inputs(n, mix, &mut in_rng)?;
        records.push(run_round(sampler, round, inputs, &mut out_rng)?);
    }
    Ok(Transcript {
        header: TranscriptHeader {
            n,
            seed,
            rounds,
            mix: *mix,
            device: format!("{:?}", device.kind()),
        },
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(c: RoundType, x: usize, y: usize) -> Inputs {
        Inputs { c, x, y }
    }

    #[test]
    fn local_check_examples() {
        let ev = evaluate(3, inputs(RoundType::LocalCheck, 1, 2), &[1, -1, 1], &[1, -1, -1]).unwrap();
        assert!(ev.accept);
        let ev = evaluate(3, inputs(RoundType::LocalCheck, 3, 2), &[1, -1, 1], &[1, 1, -1]).unwrap();
        assert_eq!(ev.sub, vec![true, false]);
        assert!(!ev.accept);
    }

    #[test]
    fn pair_check_indices() {
        // y = 1, n = 7: pairs (7,2), (6,3), (5,4)
        let n = 7;
        let a = [1, -1, 1, 1, -1, 1, 1];
        let good: Vec<i8> = vec![1, 1, 1, -1, -1, -1];
        let ev = evaluate(n, inputs(RoundType::PairCheck, 3, 1), &a, &{
            let mut b = good.clone();
            b[3] = a[6] * a[1];
            b[4] = a[5] * a[2];
            b[5] = a[4] * a[3];
            b
        })
        .unwrap();
        assert!(ev.accept);
        assert_eq!(ev.sub.len(), 3);
    }

    #[test]
    fn malformed_rounds() {
        let ev = evaluate(3, inputs(RoundType::Game, 1, 1), &[1, 1, 1], &[1, 1, 1]).unwrap();
        assert_eq!(ev, Evaluation { accept: false, sub: vec![false], malformed: true });
        let ev = evaluate(3, inputs(RoundType::LocalCheck, 1, 1), &[1, 1], &[1, 1, 1]).unwrap();
        assert!(ev.malformed);
        let ev = evaluate(3, inputs(RoundType::LocalCheck, 1, 1), &[1, 1, 2], &[1, 1, 1]).unwrap();
        assert!(ev.malformed);
    }

    #[test]
    fn input_contracts() {
        let mix = RoundMix { weights: [0.0, 0.0, 1.0] };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_inputs(3, &mix, &mut rng).is_err());
        assert!(RoundMix::new(&[1.0, 1.0, 1.0], 3).is_err());
        assert!(inputs(RoundType::LocalCheck, 2, 1).validate(3).is_err());
        assert!(inputs(RoundType::PairCheck, 1, 1).validate(3).is_err());
        assert_eq!(RoundMix::parse("1,1", 3).unwrap(), RoundMix::uniform(3));
    }

    #[test]
    fn input_marginals() {
        let n = 3;
        let mix = RoundMix::uniform(n);
        let draws = 100_000;
        let mut x2 = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..draws {
            if sample_inputs(n, &mix, &mut rng).unwrap().x == 2 {
                x2 += 1;
            }
        }
        let p = 0.5 / 3.0;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        assert!((x2 as f64 - draws as f64 * p).abs() < 3.0 * sigma);

        let mix7 = RoundMix::uniform(7);
        let mut pairs = 0;
        for _ in 0..draws {
            if sample_inputs(7, &mix7, &mut rng).unwrap().c == RoundType::PairCheck {
                pairs += 1;
            }
        }
        let p = 1.0 / 3.0;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        assert!((pairs as f64 - draws as f64 * p).abs() < 3.0 * sigma);
    }

    #[test]
    fn honest_runs_accept_and_are_deterministic() {
        let dev = DeviceModel::honest(3).unwrap();
        let mix = RoundMix::uniform(3);
        let t1 = run_protocol(&dev, 2_000, &mix, 11).unwrap();
        assert!(t1.records.iter().all(|r| r.accept));
        let t2 = run_protocol(&dev, 2_000, &mix, 11).unwrap();
        assert_eq!(t1, t2);
    }
}
