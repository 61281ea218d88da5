//! Per-member correlation estimates and the family deficits ε̂₀, ε̂₁, ε̂₂.
//!
//! Every member predicate of a round is one Bernoulli sample for that
//! member. A malformed round counts as a failure for each member it would
//! have tested.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ProtocolError, Transcript};
use crate::coloring;
use crate::strategies::RoundType;

pub const DEFAULT_ALPHA: f64 = 0.01;

/// Identifies one correlation within a family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Member {
    /// Game product for question pair `(x, y)`.
    Game { x: usize, y: usize },
    /// `X` on qubit `i`, Bob asked `y = i`.
    LocalX { i: usize },
    /// `Z` on qubit `j`, Bob asked `y`.
    LocalZ { j: usize, y: usize },
    PairX { p: usize, q: usize },
    PairZ { p: usize, q: usize },
}

impl Member {
    pub fn family(&self) -> RoundType {
        match self {
            Member::Game { .. } => RoundType::Game,
            Member::LocalX { .. } | Member::LocalZ { .. } => RoundType::LocalCheck,
            _ => RoundType::PairCheck,
        }
    }
}

impl std::fmt::Display for Member {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Member::Game { x, y } => write!(f, "game({x},{y})"),
            Member::LocalX { i } => write!(f, "X{i}"),
            Member::LocalZ { j, y } => write!(f, "Z{j}|y={y}"),
            Member::PairX { p, q } => write!(f, "XX{{{p},{q}}}"),
            Member::PairZ { p, q } => write!(f, "ZZ{{{p},{q}}}"),
        }
    }
}

/// Members tested by the question `(c, x, y)`, in `sub` order.
pub fn members_of(n: usize, c: RoundType, x: usize, y: usize) -> Result<Vec<Member>, ProtocolError> {
    Ok(match (c, x) {
        (RoundType::Game, _) => vec![Member::Game { x, y }],
        (RoundType::LocalCheck, 1) => vec![Member::LocalX { i: y }],
        (RoundType::LocalCheck, 3) => (1..=n).filter(|&j| j != y).map(|j| Member::LocalZ { j, y }).collect(),
        (RoundType::PairCheck, 1 | 3) => coloring::edges_of_color(y, n)
            .map_err(|e| ProtocolError::Input(e.to_string()))?
            .into_iter()
            .map(|(a, b)| {
                let (p, q) = (a.min(b), a.max(b));
                if x == 1 {
                    Member::PairX { p, q }
                } else {
                    Member::PairZ { p, q }
                }
            })
            .collect(),
        _ => return Err(ProtocolError::Input(format!("x = {x} for {c:?}"))),
    })
}

/// Hoeffding half-width for a mean of `trials` variables in `[0, 1]`.
pub fn hoeffding_half_width(trials: u64, alpha: f64) -> f64 {
    if trials == 0 {
        return f64::INFINITY;
    }
    ((2.0 / alpha).ln() / (2.0 * trials as f64)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberEstimate {
    pub member: Member,
    pub label: String,
    pub trials: u64,
    pub accepts: u64,
    pub rate: f64,
    pub correlation: f64,
    pub eps: f64,
    /// Half-width on the accept rate.
    pub rate_half_width: f64,
    /// Half-width on ε and on the correlation (twice the rate half-width).
    pub eps_half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyEstimate {
    pub family: RoundType,
    pub rounds: u64,
    pub estimated: bool,
    pub eps_hat: Option<f64>,
    /// Worst member by point estimate.
    pub worst: Option<String>,
    /// Largest upper confidence end over members, capped at 2.
    pub eps_upper: Option<f64>,
    pub members: Vec<MemberEstimate>,
}

impl FamilyEstimate {
    pub fn worst_member(&self) -> Option<&MemberEstimate> {
        self.members.iter().max_by(|a, b| a.eps.total_cmp(&b.eps))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonReport {
    pub n: usize,
    pub alpha: f64,
    pub eps0_hat: Option<f64>,
    pub eps1_hat: Option<f64>,
    pub eps2_hat: Option<f64>,
    pub round_counts: [u64; 3],
    pub malformed_rounds: u64,
    pub families: Vec<FamilyEstimate>,
}

impl EpsilonReport {
    pub fn family(&self, c: RoundType) -> &FamilyEstimate {
        &self.families[c.code() as usize]
    }

    /// Upper confidence ends `(ε₀, ε₁, ε₂)`; missing families give 0.
    pub fn upper_ends(&self) -> [f64; 3] {
        let mut out = [0.0; 3];
        for f in &self.families {
            out[f.family.code() as usize] = f.eps_upper.unwrap_or(0.0);
        }
        out
    }
}

/// Builds the report from a transcript.
pub fn estimate_epsilons(t: &Transcript, alpha: f64) -> Result<EpsilonReport, ProtocolError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ProtocolError::Input(format!("alpha = {alpha}")));
    }
    let n = t.n();
    let mut counts: BTreeMap<Member, (u64, u64)> = BTreeMap::new();
    let mut round_counts = [0u64; 3];
    let mut malformed_rounds = 0;
    for r in &t.records {
        let inputs = r.inputs()?;
        round_counts[r.c as usize] += 1;
        let members = members_of(n, inputs.c, inputs.x, inputs.y)?;
        if r.malformed {
            malformed_rounds += 1;
            for m in members {
                counts.entry(m).or_default().0 += 1;
            }
            continue;
        }
        if r.sub.len() != members.len() {
            return Err(ProtocolError::Format(format!(
                "round {}: {} sub-results for {} members",
                r.round,
                r.sub.len(),
                members.len()
            )));
        }
        for (m, &ok) in members.into_iter().zip(&r.sub) {
            let e = counts.entry(m).or_default();
            e.0 += 1;
            e.1 += ok as u64;
        }
    }

    let mut families: Vec<FamilyEstimate> = RoundType::ALL
        .iter()
        .map(|&c| FamilyEstimate {
            family: c,
            rounds: round_counts[c.code() as usize],
            estimated: false,
            eps_hat: None,
            worst: None,
            eps_upper: None,
            members: Vec::new(),
        })
        .collect();
    for (member, (trials, accepts)) in counts {
        let rate = accepts as f64 / trials as f64;
        let hw = hoeffding_half_width(trials, alpha);
        families[member.family().code() as usize].members.push(MemberEstimate {
            member,
            label: member.to_string(),
            trials,
            accepts,
            rate,
            correlation: 2.0 * rate - 1.0,
            eps: (2.0 * (1.0 - rate)).clamp(0.0, 2.0),
            rate_half_width: hw,
            eps_half_width: 2.0 * hw,
        });
    }
    for f in &mut families {
        if f.members.is_empty() {
            continue;
        }
        f.estimated = true;
        let worst = f.worst_member().cloned().expect("non-empty");
        f.eps_hat = Some(worst.eps);
        f.worst = Some(worst.label);
        f.eps_upper = f
            .members
            .iter()
            .map(|m| (m.eps + m.eps_half_width).min(2.0))
            .max_by(f64::total_cmp);
    }
    Ok(EpsilonReport {
        n,
        alpha,
        eps0_hat: families[0].eps_hat,
        eps1_hat: families[1].eps_hat,
        eps2_hat: families[2].eps_hat,
        round_counts,
        malformed_rounds,
        families,
    })
}
