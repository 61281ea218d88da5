//! Referee side: handshake, lockstep rounds, server-side evaluation.

use std::time::{Duration, Instant};

use crossbeam_channel::select;

use super::{Endpoint, Role, WireError, WireMessage, VERSION};
use crate::protocol::{evaluate, round_rngs, sample_inputs, Inputs, RoundMix, RoundRecord, Transcript, TranscriptHeader};

#[derive(Debug, Clone)]
pub struct RefereeConfig {
    pub n: usize,
    pub rounds: u64,
    pub mix: RoundMix,
    pub seed: u64,
    /// Per-round answer deadline; also bounds the handshake.
    pub timeout: Duration,
}

#[derive(Debug, Clone)]
pub struct RefereeOutcome {
    /// Completed rounds only; voided rounds are listed separately.
    pub transcript: Transcript,
    pub voided: Vec<u64>,
}

fn expect_hello(ep: &Endpoint, n: usize, timeout: Duration) -> Result<Role, WireError> {
    match ep.recv_timeout(timeout, "hello")? {
        WireMessage::Hello { role, n: got, version, .. } => {
            if version != VERSION {
                return Err(WireError::Handshake(format!("version `{version}`, expected `{VERSION}`")));
            }
            if got != n {
                return Err(WireError::Handshake(format!("prover {role} declared n = {got}, referee has n = {n}")));
            }
            Ok(role)
        }
        other => Err(WireError::Protocol(format!("expected hello, got {}", other.kind()))),
    }
}

/// Which answer slot a message fills, or `None` for a stale answer.
fn take_answer(msg: Result<WireMessage, WireError>, round: u64, who: Role) -> Result<Option<Vec<i8>>, WireError> {
    match msg? {
        WireMessage::Answer { round: r, bits } if r == round => Ok(Some(bits)),
        WireMessage::Answer { round: r, .. } if r < round => {
            log::debug!("dropping stale answer from {who} for round {r}");
            Ok(None)
        }
        WireMessage::Answer { round: r, .. } => {
            Err(WireError::Protocol(format!("prover {who} answered round {r} during round {round}")))
        }
        other => Err(WireError::Protocol(format!("prover {who} sent {} during a round", other.kind()))),
    }
}

/// Runs a full session against two connected provers. The endpoints may
/// arrive in either order; roles come from the hello messages.
pub fn referee_serve(cfg: &RefereeConfig, ep1: Endpoint, ep2: Endpoint) -> Result<RefereeOutcome, WireError> {
    let n = cfg.n;
    let r1 = expect_hello(&ep1, n, cfg.timeout)?;
    let r2 = expect_hello(&ep2, n, cfg.timeout)?;
    if r1 == r2 {
        let mut ep1 = ep1;
        let mut ep2 = ep2;
        let _ = ep1.send(&WireMessage::EndSession);
        let _ = ep2.send(&WireMessage::EndSession);
        return Err(WireError::RoleConflict(r1));
    }
    let (mut alice, mut bob) = if r1 == Role::A { (ep1, ep2) } else { (ep2, ep1) };
    log::info!("session start: n = {n}, {} rounds, seed {}", cfg.rounds, cfg.seed);

    let mut records = Vec::with_capacity(cfg.rounds as usize);
    let mut voided = Vec::new();
    for round in 0..cfg.rounds {
        let (mut rng, _) = round_rngs(cfg.seed, round);
        let inputs = sample_inputs(n, &cfg.mix, &mut rng)?;
        alice.send(&WireMessage::QuestionAlice { round, x: inputs.x })?;
        bob.send(&WireMessage::QuestionBob { round, c: inputs.c.code(), y: inputs.y })?;

        let deadline = Instant::now() + cfg.timeout;
        let mut a: Option<Vec<i8>> = None;
        let mut b: Option<Vec<i8>> = None;
        while a.is_none() || b.is_none() {
            let left = deadline.saturating_duration_since(Instant::now());
            select! {
                recv(alice.inbox()) -> m => {
                    let m = m.map_err(|_| WireError::Closed)?;
                    if let Some(bits) = take_answer(m, round, Role::A)? {
                        a.get_or_insert(bits);
                    }
                }
                recv(bob.inbox()) -> m => {
                    let m = m.map_err(|_| WireError::Closed)?;
                    if let Some(bits) = take_answer(m, round, Role::B)? {
                        b.get_or_insert(bits);
                    }
                }
                default(left) => break,
            }
        }
        let record = match (a, b) {
            (Some(a), Some(b)) => Some(score(n, round, inputs, a, b)?),
            _ => None,
        };
        let accept = match record {
            Some(r) => {
                let acc = r.accept;
                records.push(r);
                acc
            }
            None => {
                log::warn!("round {round} voided: no answer within {:?}", cfg.timeout);
                voided.push(round);
                false
            }
        };
        alice.send(&WireMessage::RoundResult { round, accept })?;
        bob.send(&WireMessage::RoundResult { round, accept })?;
    }
    alice.send(&WireMessage::EndSession)?;
    bob.send(&WireMessage::EndSession)?;
    log::info!("session end: {} rounds recorded, {} voided", records.len(), voided.len());

    Ok(RefereeOutcome {
        transcript: Transcript {
            header: TranscriptHeader {
                n,
                seed: cfg.seed,
                rounds: cfg.rounds,
                mix: cfg.mix,
                device: "wire".into(),
            },
            records,
        },
        voided,
    })
}

fn score(n: usize, round: u64, inputs: Inputs, a: Vec<i8>, b: Vec<i8>) -> Result<RoundRecord, WireError> {
    let ev = evaluate(n, inputs, &a, &b)?;
    if ev.malformed {
        log::warn!("round {round}: malformed answers ({} and {} bits)", a.len(), b.len());
    }
    Ok(RoundRecord::new(round, inputs, a, b, ev))
}
