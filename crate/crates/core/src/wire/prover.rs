//! Prover side: answers referee questions through a [`Responder`].

use std::time::Duration;

use super::{Endpoint, Role, WireError, WireMessage, VERSION};

/// A question as seen by one prover.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Question {
    Alice { round: u64, x: usize },
    Bob { round: u64, c: u8, y: usize },
}

impl Question {
    pub fn round(&self) -> u64 {
        match *self {
            Question::Alice { round, .. } | Question::Bob { round, .. } => round,
        }
    }
}

/// Produces the answer bits for one question.
pub trait Responder {
    fn answer(&mut self, q: &Question) -> Result<Vec<i8>, WireError>;

    /// Called once when the referee ends the session.
    fn finish(&mut self) -> Result<(), WireError> {
        Ok(())
    }
}

/// Adapts a closure; handy for scripted and faulty provers.
pub struct FnResponder<F>(pub F);

impl<F: FnMut(&Question) -> Vec<i8>> Responder for FnResponder<F> {
    fn answer(&mut self, q: &Question) -> Result<Vec<i8>, WireError> {
        Ok((self.0)(q))
    }
}

/// Forwards each question to the state service and returns the bits it
/// sends back for this prover.
#[derive(Debug)]
pub struct ServiceResponder {
    endpoint: Endpoint,
    role: Role,
    timeout: Duration,
}

impl ServiceResponder {
    /// Performs the hello exchange with the service. `device` optionally
    /// names the device kind this prover expects the service to hold.
    pub fn connect(
        mut endpoint: Endpoint,
        role: Role,
        n: usize,
        device: Option<String>,
        timeout: Duration,
    ) -> Result<Self, WireError> {
        endpoint.send(&WireMessage::Hello { role, n, version: VERSION.into(), device })?;
        Ok(ServiceResponder { endpoint, role, timeout })
    }
}

impl Responder for ServiceResponder {
    fn answer(&mut self, q: &Question) -> Result<Vec<i8>, WireError> {
        let round = q.round();
        let req = match (*q, self.role) {
            (Question::Alice { round, x }, Role::A) => WireMessage::MeasureAlice { round, x },
            (Question::Bob { round, c, y }, Role::B) => WireMessage::MeasureBob { round, c, y },
            _ => return Err(WireError::Protocol(format!("{q:?} routed to prover {}", self.role))),
        };
        self.endpoint.send(&req)?;
        loop {
            match self.endpoint.recv_timeout(self.timeout, "state service outcome")? {
                WireMessage::Outcome { round: r, bits } if r == round => return Ok(bits),
                WireMessage::Outcome { round: r, .. } if r < round => {
                    log::debug!("dropping stale outcome for round {r}");
                }
                other => {
                    return Err(WireError::Protocol(format!("state service sent {} for round {round}", other.kind())))
                }
            }
        }
    }

    fn finish(&mut self) -> Result<(), WireError> {
        self.endpoint.send(&WireMessage::EndSession)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SessionStats {
    pub answered: u64,
    pub accepted: u64,
    pub rejected: u64,
}

/// Sends hello, then answers questions until the referee ends the session.
/// A question addressed to the other role is a protocol violation.
pub fn prover_loop(
    responder: &mut dyn Responder,
    role: Role,
    n: usize,
    endpoint: &mut Endpoint,
) -> Result<SessionStats, WireError> {
    endpoint.send(&WireMessage::hello(role, n))?;
    let mut stats = SessionStats::default();
    loop {
        let q = match endpoint.recv()? {
            WireMessage::QuestionAlice { round, x } if role == Role::A => Question::Alice { round, x },
            WireMessage::QuestionBob { round, c, y } if role == Role::B => Question::Bob { round, c, y },
            m @ (WireMessage::QuestionAlice { .. } | WireMessage::QuestionBob { .. }) => {
                return Err(WireError::Protocol(format!("prover {role} received {}", m.kind())));
            }
            WireMessage::RoundResult { accept, .. } => {
                if accept {
                    stats.accepted += 1;
                } else {
                    stats.rejected += 1;
                }
                continue;
            }
            WireMessage::EndSession => {
                responder.finish()?;
                return Ok(stats);
            }
            other => return Err(WireError::Protocol(format!("prover {role} received {}", other.kind()))),
        };
        let bits = responder.answer(&q)?;
        endpoint.send(&WireMessage::Answer { round: q.round(), bits })?;
        stats.answered += 1;
    }
}
