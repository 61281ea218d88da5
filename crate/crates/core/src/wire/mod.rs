//! Framed message transport between referee, provers and the state service.
//!
//! Frames are a 4-byte big-endian length followed by one JSON object. Alice's
//! questions carry `x` only; `c` and `y` travel to Bob alone.
//!
//! Classical processes cannot share entanglement, so a state service owns the
//! simulated joint state. Each prover forwards its own question to the
//! service and receives only its own outcome bits; the service never relays
//! one party's inputs to the other.

pub mod frame;
pub mod prover;
pub mod referee;
pub mod service;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use std::time::Duration;

use crate::protocol::{JointSampler, ProtocolError, RoundMix};
use crate::strategies::DeviceModel;

pub use frame::{connect_with_retry, memory_pair, read_frame, write_frame, Endpoint, MAX_FRAME};
pub use prover::{prover_loop, FnResponder, Question, Responder, ServiceResponder, SessionStats};
pub use referee::{referee_serve, RefereeConfig, RefereeOutcome};
pub use service::{device_kind_name, state_service, ServiceStats};

pub const VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    A,
    B,
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Role::A => "A",
            Role::B => "B",
        })
    }
}

impl std::str::FromStr for Role {
    type Err = WireError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" | "alice" => Ok(Role::A),
            "B" | "b" | "bob" => Ok(Role::B),
            _ => Err(WireError::Config(format!("unknown role `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WireMessage {
    Hello {
        role: Role,
        n: usize,
        version: String,
        /// Device kind a prover expects the state service to hold.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        device: Option<String>,
    },
    QuestionAlice {
        round: u64,
        x: usize,
    },
    QuestionBob {
        round: u64,
        c: u8,
        y: usize,
    },
    Answer {
        round: u64,
        bits: Vec<i8>,
    },
    RoundResult {
        round: u64,
        accept: bool,
    },
    EndSession,
    /// Prover A to state service.
    MeasureAlice {
        round: u64,
        x: usize,
    },
    /// Prover B to state service.
    MeasureBob {
        round: u64,
        c: u8,
        y: usize,
    },
    /// State service to one prover: that prover's bits only.
    Outcome {
        round: u64,
        bits: Vec<i8>,
    },
}

impl WireMessage {
    pub fn hello(role: Role, n: usize) -> Self {
        WireMessage::Hello { role, n, version: VERSION.to_string(), device: None }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            WireMessage::Hello { .. } => "hello",
            WireMessage::QuestionAlice { .. } => "question-alice",
            WireMessage::QuestionBob { .. } => "question-bob",
            WireMessage::Answer { .. } => "answer",
            WireMessage::RoundResult { .. } => "round-result",
            WireMessage::EndSession => "end-session",
            WireMessage::MeasureAlice { .. } => "measure-alice",
            WireMessage::MeasureBob { .. } => "measure-bob",
            WireMessage::Outcome { .. } => "outcome",
        }
    }
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed frame: {0}")]
    Frame(String),
    #[error("peer closed the connection")]
    Closed,
    #[error("timed out waiting for {0}")]
    Timeout(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("both provers claimed role {0}")]
    RoleConflict(Role),
    #[error("handshake mismatch: {0}")]
    Handshake(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Referee(#[from] ProtocolError),
}

/// Runs referee, both provers and the state service on threads connected by
/// in-memory endpoints. The service samples with the referee's seed.
pub fn run_local_session(
    device: &DeviceModel,
    rounds: u64,
    mix: &RoundMix,
    seed: u64,
    timeout: Duration,
) -> Result<RefereeOutcome, WireError> {
    let n = device.n();
    let sampler = JointSampler::new(device.clone())?;
    let kind = device_kind_name(device.kind());
    let (ref_a, prover_a) = memory_pair();
    let (ref_b, prover_b) = memory_pair();
    let (svc_a, link_a) = memory_pair();
    let (svc_b, link_b) = memory_pair();
    let cfg = RefereeConfig { n, rounds, mix: *mix, seed, timeout };
    std::thread::scope(|s| {
        let svc = s.spawn(|| state_service(&sampler, seed, svc_a, svc_b));
        let prover = |role: Role, link: Endpoint, mut ep: Endpoint| {
            let kind = kind.clone();
            move || -> Result<SessionStats, WireError> {
                let mut r = ServiceResponder::connect(link, role, n, Some(kind), timeout)?;
                prover_loop(&mut r, role, n, &mut ep)
            }
        };
        let pa = s.spawn(prover(Role::A, link_a, prover_a));
        let pb = s.spawn(prover(Role::B, link_b, prover_b));
        let outcome = referee_serve(&cfg, ref_a, ref_b);
        let panicked = |_| WireError::Protocol("worker thread panicked".into());
        let (ra, rb, rs) = (pa.join().map_err(panicked), pb.join().map_err(panicked), svc.join().map_err(panicked));
        let outcome = outcome?;
        ra??;
        rb??;
        rs??;
        Ok(outcome)
    })
}
