//! State service: owns the simulated joint state and answers measurement
//! requests tagged by role.
//!
//! A round is sampled once both parties' requests for it have arrived, using
//! the outcome stream of `round_rngs(seed, round)`; with the referee on the
//! same seed this reproduces the in-process run exactly.

use crossbeam_channel::select;

use super::{Endpoint, Role, WireError, WireMessage, VERSION};
use crate::protocol::{round_rngs, Inputs, JointSampler};
use crate::strategies::{DeviceKind, RoundType};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ServiceStats {
    pub rounds: u64,
    pub invalid: u64,
    pub stale: u64,
}

pub fn device_kind_name(kind: DeviceKind) -> String {
    serde_json::to_value(kind).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

fn expect_hello(ep: &Endpoint, sampler: &JointSampler) -> Result<Role, WireError> {
    let n = sampler.device().n();
    match ep.recv()? {
        WireMessage::Hello { role, n: got, version, device } => {
            if version != VERSION {
                return Err(WireError::Handshake(format!("version `{version}`, expected `{VERSION}`")));
            }
            if got != n {
                return Err(WireError::Handshake(format!("prover {role} declared n = {got}, service has n = {n}")));
            }
            let held = device_kind_name(sampler.device().kind());
            if let Some(d) = device {
                if d != held {
                    return Err(WireError::Handshake(format!("prover {role} expects device `{d}`, service holds `{held}`")));
                }
            }
            Ok(role)
        }
        other => Err(WireError::Protocol(format!("expected hello, got {}", other.kind()))),
    }
}

enum Event {
    Alice(u64, usize),
    Bob(u64, u8, usize),
    Done,
}

fn classify(msg: Result<WireMessage, WireError>, who: Role) -> Result<Event, WireError> {
    match msg {
        Err(WireError::Closed) | Ok(WireMessage::EndSession) => Ok(Event::Done),
        Err(e) => Err(e),
        Ok(WireMessage::MeasureAlice { round, x }) if who == Role::A => Ok(Event::Alice(round, x)),
        Ok(WireMessage::MeasureBob { round, c, y }) if who == Role::B => Ok(Event::Bob(round, c, y)),
        Ok(other) => Err(WireError::Protocol(format!("prover {who} sent {} to the state service", other.kind()))),
    }
}

/// Serves both provers until each has ended its session or disconnected.
pub fn state_service(
    sampler: &JointSampler,
    seed: u64,
    ep1: Endpoint,
    ep2: Endpoint,
) -> Result<ServiceStats, WireError> {
    let n = sampler.device().n();
    let r1 = expect_hello(&ep1, sampler)?;
    let r2 = expect_hello(&ep2, sampler)?;
    if r1 == r2 {
        return Err(WireError::RoleConflict(r1));
    }
    let (mut alice, mut bob) = if r1 == Role::A { (ep1, ep2) } else { (ep2, ep1) };

    let mut stats = ServiceStats::default();
    let mut pending_a: Option<(u64, usize)> = None;
    let mut pending_b: Option<(u64, u8, usize)> = None;
    let (mut a_done, mut b_done) = (false, false);
    while !(a_done && b_done) {
        let ev = if a_done {
            classify(bob.inbox().recv().unwrap_or(Err(WireError::Closed)), Role::B)?
        } else if b_done {
            classify(alice.inbox().recv().unwrap_or(Err(WireError::Closed)), Role::A)?
        } else {
            select! {
                recv(alice.inbox()) -> m => match classify(m.unwrap_or(Err(WireError::Closed)), Role::A)? {
                    Event::Done => { a_done = true; continue; }
                    e => e,
                },
                recv(bob.inbox()) -> m => match classify(m.unwrap_or(Err(WireError::Closed)), Role::B)? {
                    Event::Done => { b_done = true; continue; }
                    e => e,
                },
            }
        };
        match ev {
            Event::Done if !a_done && b_done => a_done = true,
            Event::Done => b_done = true,
            Event::Alice(r, x) => pending_a = Some((r, x)),
            Event::Bob(r, c, y) => pending_b = Some((r, c, y)),
        }
        // a request older than the other side's is for a voided round
        match (pending_a, pending_b) {
            (Some((ra, _)), Some((rb, ..))) if ra < rb => {
                stats.stale += 1;
                pending_a = None;
            }
            (Some((ra, _)), Some((rb, ..))) if rb < ra => {
                stats.stale += 1;
                pending_b = None;
            }
            (Some((round, x)), Some((_, c, y))) => {
                pending_a = None;
                pending_b = None;
                let inputs = RoundType::from_code(c).map(|c| Inputs { c, x, y });
                let sampled = match inputs {
                    Some(i) if i.validate(n).is_ok() => {
                        let (_, mut rng) = round_rngs(seed, round);
                        Some(sampler.sample(i.c, i.x, i.y, &mut rng)?)
                    }
                    _ => None,
                };
                let (a, b) = sampled.unwrap_or_else(|| {
                    log::warn!("round {round}: invalid question (c = {c}, x = {x}, y = {y})");
                    stats.invalid += 1;
                    (Vec::new(), Vec::new())
                });
                stats.rounds += 1;
                alice.send(&WireMessage::Outcome { round, bits: a })?;
                bob.send(&WireMessage::Outcome { round, bits: b })?;
            }
            _ => {}
        }
    }
    Ok(stats)
}
