//! Devices: which reflections each player measures for each question.
//!
//! All observables are stored on the full `2n`-qubit register (Alice on
//! positions `1..=n`, Bob on `n+1..=2n`). Question sets are indexed as
//! follows:
//! - Alice, input `x ∈ {1,2,3}`: `n` reflections, answer bit `a_k` is slot `k`.
//! - Bob game (`c=0`), input `y`: 3 reflections `(b₁, b₂, b₃)`.
//! - Bob local check (`c=1`), input `y`: `n` reflections, slot `j` is qubit `j`.
//! - Bob pair check (`c=2`), input `y`: the `(n-1)/2` X-pairs of colour
//!   class `y` followed by the matching Z-pairs.
//!
//! The honest one-side-local assignment has Alice measure `X`, `Y` or `Z` on
//! every qubit, and Bob measure `∏_{j≠y}` of the same letter in game rounds.
//! That assignment reproduces each perfect correlation listed for the
//! protocol (game products, single-qubit checks, pair checks), which is how
//! it is pinned down; the unit tests below check each of them.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coloring::{self, ColoringError};
use crate::engine::{DenseOp, EngineError, NoiseModel, Observable, SharedState};
use crate::pauli::{Pauli, PauliError, PauliString, Phase};

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error(transparent)]
    Pauli(#[from] PauliError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Coloring(#[from] ColoringError),
    #[error("n = {0} is not supported here (need n = 3 or n ≡ 3 mod 4)")]
    UnsupportedN(usize),
    #[error("{what}: expected {expected} observables, got {got}")]
    Arity { what: String, expected: usize, got: usize },
    #[error("{what}: observables {i} and {j} do not commute")]
    NonCommuting { what: String, i: usize, j: usize },
    #[error("{what}: observable {i} is not Hermitian")]
    NotHermitian { what: String, i: usize },
    #[error("{what}: observable {i} acts outside the player's register")]
    WrongSide { what: String, i: usize },
    #[error("{what}: observable {i} is not single-qubit")]
    NotLocal { what: String, i: usize },
    #[error("descriptor: {0}")]
    Descriptor(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviceKind {
    Honest,
    NoisyHonest,
    StandardSquareBaseline,
    PaddedAdversary,
    Custom,
}

impl DeviceKind {
    /// Kinds that must use single-qubit Alice observables.
    pub fn one_side_local(self) -> bool {
        matches!(self, DeviceKind::Honest | DeviceKind::NoisyHonest)
    }
}

/// Round type `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoundType {
    Game,
    LocalCheck,
    PairCheck,
}

impl RoundType {
    pub const ALL: [RoundType; 3] = [RoundType::Game, RoundType::LocalCheck, RoundType::PairCheck];

    pub fn code(self) -> u8 {
        match self {
            RoundType::Game => 0,
            RoundType::LocalCheck => 1,
            RoundType::PairCheck => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(RoundType::Game),
            1 => Some(RoundType::LocalCheck),
            2 => Some(RoundType::PairCheck),
            _ => None,
        }
    }

    /// Bob's answer length for this round type.
    pub fn bob_arity(self, n: usize) -> usize {
        match self {
            RoundType::Game => 3,
            RoundType::LocalCheck => n,
            RoundType::PairCheck => n - 1,
        }
    }
}

/// How the shared state is prepared.
#[derive(Debug, Clone, PartialEq)]
pub enum StatePrep {
    Bell(NoiseModel),
    Explicit(SharedState),
}

/// Immutable assignment of measured reflections to every question.
#[derive(Debug, Clone)]
pub struct DeviceModel {
    n: usize,
    kind: DeviceKind,
    state: StatePrep,
    alice: Vec<Vec<Observable>>,
    bob_game: Vec<Vec<Observable>>,
    bob_local: Vec<Vec<Observable>>,
    bob_pair: Vec<Vec<Observable>>,
}

fn check_self_test_n(n: usize) -> Result<(), DeviceError> {
    if n == 3 || (n > 3 && n % 4 == 3) {
        Ok(())
    } else {
        Err(DeviceError::UnsupportedN(n))
    }
}

/// `letter` on Alice's qubits `qs` (full register).
fn alice_on(letter: Pauli, qs: &[usize], n: usize) -> PauliString {
    PauliString::uniform_on(letter, qs, 2 * n).expect("positions in range")
}

/// `letter` on Bob's qubits `qs` (full register).
fn bob_on(letter: Pauli, qs: &[usize], n: usize) -> PauliString {
    let pos: Vec<usize> = qs.iter().map(|q| q + n).collect();
    PauliString::uniform_on(letter, &pos, 2 * n).expect("positions in range")
}

fn letter_for_row(x: usize) -> Pauli {
    [Pauli::X, Pauli::Y, Pauli::Z][x - 1]
}

fn pauli_set(v: Vec<PauliString>) -> Vec<Observable> {
    v.into_iter().map(Observable::Pauli).collect()
}

/// `(Ŝ_A^1, …, Ŝ_A^n)` with `Ŝ = X, Y, Z` for `x = 1, 2, 3`.
pub fn honest_alice(x: usize, n: usize) -> Vec<PauliString> {
    assert!((1..=3).contains(&x), "x must be 1, 2 or 3");
    (1..=n).map(|j| alice_on(letter_for_row(x), &[j], n)).collect()
}

/// `(∏_{j≠y} X_B^j, ∏_{j≠y} Y_B^j, ∏_{j≠y} Z_B^j)`.
pub fn honest_bob_game(y: usize, n: usize) -> Vec<PauliString> {
    let others: Vec<usize> = (1..=n).filter(|&j| j != y).collect();
    [Pauli::X, Pauli::Y, Pauli::Z].iter().map(|&l| bob_on(l, &others, n)).collect()
}

/// `X` on Bob's qubit `y`, `Z` on every other qubit.
pub fn honest_bob_local_check(y: usize, n: usize) -> Vec<PauliString> {
    (1..=n).map(|j| bob_on(if j == y { Pauli::X } else { Pauli::Z }, &[j], n)).collect()
}

/// X-pairs then Z-pairs on `{y-j, y+j}`, with the pair labels.
pub fn honest_bob_pair_check(
    y: usize,
    n: usize,
) -> Result<(Vec<PauliString>, Vec<(usize, usize)>), DeviceError> {
    let pairs = coloring::edges_of_color(y, n)?;
    let mut ops: Vec<PauliString> = pairs.iter().map(|&(a, b)| bob_on(Pauli::X, &[a, b], n)).collect();
    ops.extend(pairs.iter().map(|&(a, b)| bob_on(Pauli::Z, &[a, b], n)));
    Ok((ops, pairs))
}

/// Bob-side copy of an Alice observable that is perfectly correlated with
/// it on `|Φ+⟩^{⊗n}` (the complex conjugate, i.e. a sign per `Y`).
pub fn mirror_to_bob(p: &PauliString, n: usize) -> PauliString {
    let letters = p.letters();
    let mut out = vec![Pauli::I; 2 * n];
    let mut ys = 0;
    for j in 0..n {
        out[n + j] = letters[j];
        if letters[j] == Pauli::Y {
            ys += 1;
        }
    }
    let phase = if ys % 2 == 1 { p.phase().negate() } else { p.phase() };
    PauliString::new(phase, out).expect("non-empty")
}

/// Keeps each candidate that commutes with those already kept, replacing
/// the rest by the identity.
fn greedy_commuting(candidates: Vec<PauliString>, width: usize) -> Vec<PauliString> {
    let mut kept: Vec<PauliString> = Vec::with_capacity(candidates.len());
    for c in candidates {
        let ok = kept.iter().all(|k| k.commutes(&c).expect("same width"));
        kept.push(if ok { c } else { PauliString::identity(width) });
    }
    kept
}

impl DeviceModel {
    /// Generic constructor with full validation.
    pub fn new(
        n: usize,
        kind: DeviceKind,
        state: StatePrep,
        alice: Vec<Vec<Observable>>,
        bob_game: Vec<Vec<Observable>>,
        bob_local: Vec<Vec<Observable>>,
        bob_pair: Vec<Vec<Observable>>,
    ) -> Result<Self, DeviceError> {
        let dev = DeviceModel { n, kind, state, alice, bob_game, bob_local, bob_pair };
        dev.validate()?;
        Ok(dev)
    }

    pub fn honest(n: usize) -> Result<Self, DeviceError> {
        Self::honest_with(n, NoiseModel::None, DeviceKind::Honest)
    }

    pub fn noisy_honest(n: usize, noise: NoiseModel) -> Result<Self, DeviceError> {
        Self::honest_with(n, noise, DeviceKind::NoisyHonest)
    }

    fn honest_with(n: usize, noise: NoiseModel, kind: DeviceKind) -> Result<Self, DeviceError> {
        check_self_test_n(n)?;
        noise.validate(n)?;
        let alice = (1..=3).map(|x| pauli_set(honest_alice(x, n))).collect();
        let game = (1..=n).map(|y| pauli_set(honest_bob_game(y, n))).collect();
        let local = (1..=n).map(|y| pauli_set(honest_bob_local_check(y, n))).collect();
        let pair = if n > 3 {
            (1..=n)
                .map(|y| honest_bob_pair_check(y, n).map(|(ops, _)| pauli_set(ops)))
                .collect::<Result<_, _>>()?
        } else {
            Vec::new()
        };
        Self::new(n, kind, StatePrep::Bell(noise), alice, game, local, pair)
    }

    /// Two-pair square strategy embedded in the `n = 3` register (pair 3
    /// idle). Check rounds are answered by the mirror rule of
    /// [`Self::mirror_greedy_checks`].
    pub fn standard_square() -> Result<Self, DeviceError> {
        let n = 3;
        // cells[row][col] on a two-qubit register
        let cells: [[&str; 3]; 3] =
            [["+ XI", "+ XX", "+ IX"], ["- XZ", "+ YY", "- ZX"], ["+ IZ", "+ ZZ", "+ ZI"]];
        let cell = |r: usize, c: usize| -> PauliString { cells[r][c].parse().expect("static") };
        let alice: Vec<Vec<Observable>> = (0..3)
            .map(|r| (0..3).map(|c| Observable::Pauli(cell(r, c).embed(&[1, 2], 2 * n).unwrap())).collect())
            .collect();
        let bob_game: Vec<Vec<Observable>> = (0..3)
            .map(|c| {
                (0..3)
                    .map(|r| Observable::Pauli(mirror_to_bob(&cell(r, c).embed(&[1, 2], 2 * n).unwrap(), n)))
                    .collect()
            })
            .collect();
        let (local, pair) = Self::mirror_greedy_checks(n, &alice)?;
        Self::new(
            n,
            DeviceKind::StandardSquareBaseline,
            StatePrep::Bell(NoiseModel::None),
            alice,
            bob_game,
            local,
            pair,
        )
    }

    /// Adversary that runs the one-side-local 3×3 strategy on pairs 1–3 and
    /// pads the remaining columns deterministically.
    ///
    /// Alice answers `a_k = ∏_{m≤3, m≠k} s_m` from her three single-qubit
    /// outcomes for `k ≤ 3`, and constants for `k > 3` (`+1` for rows 1 and 3,
    /// `-1` for row 2). Bob plays the honest 3×3 column for `y ≤ 3` and
    /// `(+1, -1, +1)` otherwise, so every game round is won.
    pub fn padded_adversary(n: usize) -> Result<Self, DeviceError> {
        if n <= 3 || n % 4 != 3 {
            return Err(DeviceError::UnsupportedN(n));
        }
        let alice: Vec<Vec<Observable>> = (1..=3)
            .map(|x| {
                (1..=n)
                    .map(|k| {
                        let p = if k <= 3 {
                            let others: Vec<usize> = (1..=3).filter(|&m| m != k).collect();
                            alice_on(letter_for_row(x), &others, n)
                        } else if x == 2 {
                            PauliString::identity(2 * n).negated()
                        } else {
                            PauliString::identity(2 * n)
                        };
                        Observable::Pauli(p)
                    })
                    .collect()
            })
            .collect();
        let bob_game: Vec<Vec<Observable>> = (1..=n)
            .map(|y| {
                if y <= 3 {
                    let others: Vec<usize> = (1..=3).filter(|&j| j != y).collect();
                    [Pauli::X, Pauli::Y, Pauli::Z]
                        .iter()
                        .map(|&l| Observable::Pauli(bob_on(l, &others, n)))
                        .collect()
                } else {
                    let id = PauliString::identity(2 * n);
                    pauli_set(vec![id.clone(), id.clone().negated(), id])
                }
            })
            .collect();
        let (local, pair) = Self::mirror_greedy_checks(n, &alice)?;
        Self::new(
            n,
            DeviceKind::PaddedAdversary,
            StatePrep::Bell(NoiseModel::None),
            alice,
            bob_game,
            local,
            pair,
        )
    }

    /// Check-round sets for a Bob who copies Alice's checked operators onto
    /// his register. Bob does not know `x`, so local rounds list the copy of
    /// Alice's `x = 1` slot `y` first and then her `x = 3` slots `j ≠ y`;
    /// pair rounds list the copies of her `x = 1` pair products and then her
    /// `x = 3` ones. A copy that fails to commute with an earlier kept one
    /// is replaced by the identity.
    pub fn mirror_greedy_checks(
        n: usize,
        alice: &[Vec<Observable>],
    ) -> Result<(Vec<Vec<Observable>>, Vec<Vec<Observable>>), DeviceError> {
        let w = 2 * n;
        let pa = |x: usize, k: usize| -> Result<PauliString, DeviceError> {
            alice[x - 1][k - 1]
                .as_pauli()
                .cloned()
                .ok_or_else(|| DeviceError::Descriptor("mirror rule needs Pauli observables".into()))
        };
        let mut local = Vec::with_capacity(n);
        for y in 1..=n {
            let mut cands = vec![mirror_to_bob(&pa(1, y)?, n)];
            let mut slots = vec![y];
            for j in (1..=n).filter(|&j| j != y) {
                cands.push(mirror_to_bob(&pa(3, j)?, n));
                slots.push(j);
            }
            let kept = greedy_commuting(cands, w);
            let mut ordered = vec![PauliString::identity(w); n];
            for (slot, p) in slots.into_iter().zip(kept) {
                ordered[slot - 1] = p;
            }
            local.push(pauli_set(ordered));
        }
        let mut pair = Vec::new();
        if n > 3 {
            for y in 1..=n {
                let edges = coloring::edges_of_color(y, n)?;
                let mut cands = Vec::with_capacity(n - 1);
                for x in [1, 3] {
                    for &(a, b) in &edges {
                        cands.push(mirror_to_bob(&pa(x, a)?.mul(&pa(x, b)?)?, n));
                    }
                }
                pair.push(pauli_set(greedy_commuting(cands, w)));
            }
        }
        Ok((local, pair))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> DeviceKind {
        self.kind
    }

    pub fn state(&self) -> &StatePrep {
        &self.state
    }

    /// The noise model when the state is a (rotated) Bell product.
    pub fn noise(&self) -> Option<&NoiseModel> {
        match &self.state {
            StatePrep::Bell(noise) => Some(noise),
            StatePrep::Explicit(_) => None,
        }
    }

    /// Dense copy of the shared state.
    pub fn prepare_state(&self) -> Result<SharedState, DeviceError> {
        Ok(match &self.state {
            StatePrep::Bell(noise) => SharedState::prepare(self.n, noise)?,
            StatePrep::Explicit(s) => s.clone(),
        })
    }

    pub fn supports_pair_checks(&self) -> bool {
        !self.bob_pair.is_empty()
    }

    /// True when every observable is a Pauli string and the state is a
    /// rotated Bell product, so the analytic engine applies.
    pub fn is_pauli_bell(&self) -> bool {
        matches!(self.state, StatePrep::Bell(_))
            && self
                .alice
                .iter()
                .chain(&self.bob_game)
                .chain(&self.bob_local)
                .chain(&self.bob_pair)
                .flatten()
                .all(|o| o.as_pauli().is_some())
    }

    /// Alice's reflections for input `x`.
    pub fn alice_set(&self, x: usize) -> &[Observable] {
        &self.alice[x - 1]
    }

    /// Bob's reflections for `(c, y)`; `None` for pair checks at `n = 3`.
    pub fn bob_set(&self, c: RoundType, y: usize) -> Option<&[Observable]> {
        let sets = match c {
            RoundType::Game => &self.bob_game,
            RoundType::LocalCheck => &self.bob_local,
            RoundType::PairCheck => &self.bob_pair,
        };
        sets.get(y.wrapping_sub(1)).map(|v| v.as_slice())
    }

    // Named unknown observables, 1-based.

    pub fn x_a(&self, j: usize) -> &Observable {
        &self.alice[0][j - 1]
    }

    pub fn y_a(&self, j: usize) -> &Observable {
        &self.alice[1][j - 1]
    }

    pub fn z_a(&self, j: usize) -> &Observable {
        &self.alice[2][j - 1]
    }

    /// Bob's game observable for column `y`: slot 0, 1, 2 for X, Y, Z.
    pub fn bob_bar(&self, y: usize, slot: usize) -> &Observable {
        &self.bob_game[y - 1][slot]
    }

    /// `X_{B,y}^y`.
    pub fn x_check(&self, y: usize) -> &Observable {
        &self.bob_local[y - 1][y - 1]
    }

    /// `Z_{B,y}^j` for `j ≠ y`.
    pub fn z_check(&self, y: usize, j: usize) -> &Observable {
        &self.bob_local[y - 1][j - 1]
    }

    fn pair_slot(&self, a: usize, b: usize) -> (usize, usize) {
        let color = coloring::color_of(a, b, self.n).expect("valid pair");
        let edges = coloring::edges_of_color(color, self.n).expect("valid colour");
        let idx = edges
            .iter()
            .position(|&(p, q)| (p == a && q == b) || (p == b && q == a))
            .expect("edge in its colour class");
        (color, idx)
    }

    /// `X_B^{a,b}`: the X-pair observable measured for input `color(a,b)`.
    pub fn x_pair(&self, a: usize, b: usize) -> &Observable {
        let (c, idx) = self.pair_slot(a, b);
        &self.bob_pair[c - 1][idx]
    }

    /// `Z_B^{a,b}`.
    pub fn z_pair(&self, a: usize, b: usize) -> &Observable {
        let (c, idx) = self.pair_slot(a, b);
        &self.bob_pair[c - 1][(self.n - 1) / 2 + idx]
    }

    fn validate(&self) -> Result<(), DeviceError> {
        let n = self.n;
        if n < 3 || n % 2 == 0 {
            return Err(DeviceError::UnsupportedN(n));
        }
        if let StatePrep::Bell(noise) = &self.state {
            noise.validate(n)?;
        }
        if let StatePrep::Explicit(s) = &self.state {
            if s.n() != n {
                return Err(DeviceError::Descriptor(format!("state has {} pairs", s.n())));
            }
        }
        let expect = |what: String, sets: &[Vec<Observable>], count: usize, arity: usize| {
            if sets.len() != count {
                return Err(DeviceError::Arity { what, expected: count, got: sets.len() });
            }
            for (k, s) in sets.iter().enumerate() {
                if s.len() != arity {
                    return Err(DeviceError::Arity {
                        what: format!("{what} input {}", k + 1),
                        expected: arity,
                        got: s.len(),
                    });
                }
            }
            Ok(())
        };
        expect("alice".into(), &self.alice, 3, n)?;
        expect("bob game".into(), &self.bob_game, n, 3)?;
        expect("bob local check".into(), &self.bob_local, n, n)?;
        if n > 3 && !self.bob_pair.is_empty() {
            expect("bob pair check".into(), &self.bob_pair, n, n - 1)?;
        } else if n == 3 && !self.bob_pair.is_empty() {
            return Err(DeviceError::Descriptor("pair checks need n > 3".into()));
        }
        let groups: [(&str, bool, &Vec<Vec<Observable>>); 4] = [
            ("alice", true, &self.alice),
            ("bob game", false, &self.bob_game),
            ("bob local check", false, &self.bob_local),
            ("bob pair check", false, &self.bob_pair),
        ];
        for (name, is_alice, sets) in groups {
            for (k, set) in sets.iter().enumerate() {
                let what = format!("{name} input {}", k + 1);
                self.validate_set(&what, set, is_alice)?;
            }
        }
        Ok(())
    }

    fn validate_set(&self, what: &str, set: &[Observable], is_alice: bool) -> Result<(), DeviceError> {
        let n = self.n;
        let w = 2 * n;
        for (i, o) in set.iter().enumerate() {
            if o.qubits() != w {
                return Err(DeviceError::Engine(EngineError::Dimension { expected: w, got: o.qubits() }));
            }
            match o {
                Observable::Pauli(p) => {
                    if !p.is_hermitian() {
                        return Err(DeviceError::NotHermitian { what: what.into(), i });
                    }
                    let support = p.support();
                    let on_side =
                        support.iter().all(|&q| if is_alice { q <= n } else { q > n });
                    if !on_side {
                        return Err(DeviceError::WrongSide { what: what.into(), i });
                    }
                    if is_alice && self.kind.one_side_local() && support.len() != 1 {
                        return Err(DeviceError::NotLocal { what: what.into(), i });
                    }
                }
                Observable::Dense(m) => {
                    m.check_reflection(1e-9)
                        .map_err(|_| DeviceError::NotHermitian { what: what.into(), i })?;
                    if !dense_on_side(m, n, is_alice) {
                        return Err(DeviceError::WrongSide { what: what.into(), i });
                    }
                    if self.kind.one_side_local() {
                        return Err(DeviceError::NotLocal { what: what.into(), i });
                    }
                }
            }
            for (j, q) in set.iter().enumerate().skip(i + 1) {
                if !o.commutes_with(q, 1e-9)? {
                    return Err(DeviceError::NonCommuting { what: what.into(), i, j });
                }
            }
        }
        Ok(())
    }

    /// Parses a descriptor file (see [`DeviceDescriptor`]).
    pub fn from_descriptor(desc: &DeviceDescriptor) -> Result<Self, DeviceError> {
        let n = desc.n;
        let parse_set = |list: &[PauliString], alice: bool| -> Result<Vec<Observable>, DeviceError> {
            list.iter()
                .map(|p| {
                    if p.n() != n {
                        return Err(DeviceError::Descriptor(format!(
                            "`{p}` has {} letters, expected {n}",
                            p.n()
                        )));
                    }
                    let positions: Vec<usize> =
                        (1..=n).map(|j| if alice { j } else { n + j }).collect();
                    Ok(Observable::Pauli(p.embed(&positions, 2 * n)?))
                })
                .collect()
        };
        let table = |map: &BTreeMap<usize, Vec<PauliString>>, count: usize, alice: bool, what: &str| {
            (1..=count)
                .map(|k| {
                    let list = map
                        .get(&k)
                        .ok_or_else(|| DeviceError::Descriptor(format!("{what}: input {k} missing")))?;
                    parse_set(list, alice)
                })
                .collect::<Result<Vec<_>, DeviceError>>()
        };
        let alice = table(&desc.alice, 3, true, "alice")?;
        let game = table(&desc.bob.game, n, false, "bob game")?;
        let local = table(&desc.bob.local, n, false, "bob local")?;
        let pair = if desc.bob.pair.is_empty() {
            Vec::new()
        } else {
            table(&desc.bob.pair, n, false, "bob pair")?
        };
        Self::new(n, desc.kind, StatePrep::Bell(desc.noise.clone()), alice, game, local, pair)
    }

    /// Descriptor for Pauli devices on a Bell-product state.
    pub fn to_descriptor(&self) -> Result<DeviceDescriptor, DeviceError> {
        let n = self.n;
        let noise = self
            .noise()
            .cloned()
            .ok_or_else(|| DeviceError::Descriptor("explicit states are not serialisable".into()))?;
        let local_part = |o: &Observable, alice: bool| -> Result<PauliString, DeviceError> {
            let p = o
                .as_pauli()
                .ok_or_else(|| DeviceError::Descriptor("dense observables are not serialisable".into()))?;
            let range = if alice { 0..n } else { n..2 * n };
            PauliString::new(p.phase(), p.letters()[range].to_vec()).map_err(Into::into)
        };
        let to_map = |sets: &[Vec<Observable>], alice: bool| {
            sets.iter()
                .enumerate()
                .map(|(k, s)| {
                    Ok((k + 1, s.iter().map(|o| local_part(o, alice)).collect::<Result<Vec<_>, DeviceError>>()?))
                })
                .collect::<Result<BTreeMap<_, _>, DeviceError>>()
        };
        Ok(DeviceDescriptor {
            n,
            kind: self.kind,
            noise,
            alice: to_map(&self.alice, true)?,
            bob: BobDescriptor {
                game: to_map(&self.bob_game, false)?,
                local: to_map(&self.bob_local, false)?,
                pair: to_map(&self.bob_pair, false)?,
            },
        })
    }

    pub fn load(path: &Path) -> Result<Self, DeviceError> {
        let text = std::fs::read_to_string(path)?;
        let desc: DeviceDescriptor =
            serde_json::from_str(&text).map_err(|e| DeviceError::Descriptor(e.to_string()))?;
        Self::from_descriptor(&desc)
    }

    /// Replaces one observable; used to build custom variants in tests.
    pub fn with_observable(
        &self,
        c: Option<RoundType>,
        input: usize,
        slot: usize,
        o: Observable,
    ) -> Result<Self, DeviceError> {
        let mut dev = self.clone();
        dev.kind = DeviceKind::Custom;
        let sets = match c {
            None => &mut dev.alice,
            Some(RoundType::Game) => &mut dev.bob_game,
            Some(RoundType::LocalCheck) => &mut dev.bob_local,
            Some(RoundType::PairCheck) => &mut dev.bob_pair,
        };
        sets[input - 1][slot] = o;
        dev.validate()?;
        Ok(dev)
    }

    /// Same observables, different state.
    pub fn with_state(&self, state: StatePrep) -> Result<Self, DeviceError> {
        let mut dev = self.clone();
        if dev.kind == DeviceKind::Honest || dev.kind == DeviceKind::NoisyHonest {
            dev.kind = match &state {
                StatePrep::Bell(noise) if noise.is_noiseless() => DeviceKind::Honest,
                StatePrep::Bell(_) => DeviceKind::NoisyHonest,
                StatePrep::Explicit(_) => DeviceKind::Custom,
            };
        }
        dev.state = state;
        dev.validate()?;
        Ok(dev)
    }
}

/// A dense reflection acts only on one side iff it commutes with every
/// single-qubit Pauli on the other side.
fn dense_on_side(m: &Arc<DenseOp>, n: usize, alice: bool) -> bool {
    let other = if alice { n + 1..=2 * n } else { 1..=n };
    let o = Observable::Dense(m.clone());
    for q in other {
        for l in [Pauli::X, Pauli::Z] {
            let p = Observable::Pauli(PauliString::single(l, q, 2 * n).unwrap());
            if !o.commutes_with(&p, 1e-9).unwrap_or(false) {
                return false;
            }
        }
    }
    true
}

/// On-disk device description. Observables are written on the player's own
/// `n`-qubit register in Pauli text syntax; map keys are 1-based inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceDescriptor {
    pub n: usize,
    pub kind: DeviceKind,
    #[serde(default)]
    pub noise: NoiseModel,
    pub alice: BTreeMap<usize, Vec<PauliString>>,
    pub bob: BobDescriptor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BobDescriptor {
    pub game: BTreeMap<usize, Vec<PauliString>>,
    pub local: BTreeMap<usize, Vec<PauliString>>,
    #[serde(default)]
    pub pair: BTreeMap<usize, Vec<PauliString>>,
}

/// Identity with a sign on the full register.
pub fn signed_identity(n: usize, negative: bool) -> PauliString {
    PauliString::identity(2 * n).with_phase(if negative { Phase::MINUS_ONE } else { Phase::PLUS_ONE })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{analytic::PairTables, expectation_full};
    use crate::games::game_round_accept;

    fn ev(p: &PauliString) -> f64 {
        expectation_full(p, &NoiseModel::None).unwrap().re
    }

    fn prod(obs: &[&Observable]) -> PauliString {
        let w = obs[0].qubits();
        obs.iter().fold(PauliString::identity(w), |acc, o| acc.mul(o.as_pauli().unwrap()).unwrap())
    }

    #[test]
    fn honest_sets_examples() {
        let a = honest_alice(1, 3);
        assert_eq!(a[1], "+ IXIIII".parse().unwrap());
        assert_eq!(honest_alice(3, 7).len(), 7);
        let g = honest_bob_game(1, 3);
        assert_eq!(g[0], "+ IIIIXX".parse().unwrap());
        assert_eq!(g[1], "+ IIIIYY".parse().unwrap());
        let l = honest_bob_local_check(2, 3);
        assert_eq!(l, vec!["IIIZII".parse().unwrap(), "IIIIXI".parse().unwrap(), "IIIIIZ".parse().unwrap()]);
        let (ops, pairs) = honest_bob_pair_check(1, 3).unwrap();
        assert_eq!(pairs, vec![(3, 2)]);
        assert_eq!(ops[0], "IIIIXX".parse().unwrap());
    }

    #[test]
    fn column_products_are_minus_identity() {
        for n in [3, 7, 11] {
            for y in 1..=n {
                let g = honest_bob_game(y, n);
                let p = g[0].mul(&g[1]).unwrap().mul(&g[2]).unwrap();
                assert_eq!(p, PauliString::identity(2 * n).negated());
                for i in 0..3 {
                    for j in 0..3 {
                        assert!(g[i].commutes(&g[j]).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn local_sets_cover_each_x_once() {
        let n = 7;
        let mut x_count = vec![0; n + 1];
        for y in 1..=n {
            for (j, p) in honest_bob_local_check(y, n).iter().enumerate() {
                if p.letter(n + j + 1) == Pauli::X {
                    x_count[j + 1] += 1;
                }
            }
        }
        assert!(x_count[1..].iter().all(|&c| c == 1));
    }

    #[test]
    fn honest_perfect_correlations() {
        for n in [3, 7] {
            let d = DeviceModel::honest(n).unwrap();
            for k in 1..=n {
                for (x, slot) in [(1usize, 0usize), (3, 2)] {
                    let a: Vec<&Observable> = (1..=n).filter(|&j| j != k).map(|j| d.alice_set(x).get(j - 1).unwrap()).collect();
                    let mut all = a.clone();
                    all.push(d.bob_bar(k, slot));
                    assert_eq!(ev(&prod(&all)), 1.0);
                }
                let ys: Vec<&Observable> = (1..=n).filter(|&j| j != k).map(|j| d.y_a(j)).collect();
                let mut all = ys.clone();
                all.push(d.bob_bar(k, 0));
                all.push(d.bob_bar(k, 2));
                assert_eq!(-ev(&prod(&all)), 1.0);
            }
            for i in 1..=n {
                assert_eq!(ev(&prod(&[d.x_a(i), d.x_check(i)])), 1.0);
                for j in (1..=n).filter(|&j| j != i) {
                    assert_eq!(ev(&prod(&[d.z_a(i), d.z_check(j, i)])), 1.0);
                    if n > 3 {
                        assert_eq!(ev(&prod(&[d.x_a(i), d.x_a(j), d.x_pair(i, j)])), 1.0);
                        assert_eq!(ev(&prod(&[d.z_a(i), d.z_a(j), d.z_pair(i, j)])), 1.0);
                    }
                }
            }
        }
    }

    #[test]
    fn honest_alice_is_one_side_local() {
        let d = DeviceModel::honest(7).unwrap();
        for x in 1..=3 {
            for o in d.alice_set(x) {
                assert_eq!(o.as_pauli().unwrap().weight(), 1);
            }
        }
    }

    #[test]
    fn rejects_bad_n() {
        assert!(matches!(DeviceModel::honest(5), Err(DeviceError::UnsupportedN(5))));
        assert!(matches!(DeviceModel::padded_adversary(3), Err(DeviceError::UnsupportedN(3))));
    }

    #[test]
    fn validation_catches_non_commuting_and_nonlocal() {
        let d = DeviceModel::honest(3).unwrap();
        let bad = Observable::Pauli("IIIXII".parse().unwrap());
        // replaces Z_B on qubit 1 in local set y=2 by X: still commutes, fine
        assert!(d.with_observable(Some(RoundType::LocalCheck), 2, 0, bad).is_ok());
        let clash = Observable::Pauli("IIIIZI".parse().unwrap());
        assert!(matches!(
            d.with_observable(Some(RoundType::LocalCheck), 2, 0, clash),
            Err(DeviceError::NonCommuting { .. })
        ));
        let wrong_side = Observable::Pauli("XIIIII".parse().unwrap());
        assert!(matches!(
            d.with_observable(Some(RoundType::Game), 1, 0, wrong_side),
            Err(DeviceError::WrongSide { .. })
        ));
        let mut honest = DeviceModel::honest(3).unwrap();
        honest.alice[0][0] = Observable::Pauli("XXIIII".parse().unwrap());
        assert!(matches!(honest.validate(), Err(DeviceError::NotLocal { .. })));
    }

    #[test]
    fn mirror_rule_reproduces_honest_checks() {
        let d = DeviceModel::honest(7).unwrap();
        let (local, pair) = DeviceModel::mirror_greedy_checks(7, &d.alice).unwrap();
        assert_eq!(local, d.bob_local);
        assert_eq!(pair, d.bob_pair);
    }

    #[test]
    fn standard_square_wins_every_game_round() {
        let d = DeviceModel::standard_square().unwrap();
        assert!(d.alice_set(2).iter().any(|o| o.as_pauli().unwrap().weight() == 2));
        let tables = PairTables::new(3, &NoiseModel::None).unwrap();
        for x in 1..=3 {
            for y in 1..=3 {
                // Alice's answers a_k are the row cells; the row product is +1
                // so ∏_{k≠y} a_k = a_y and the game needs a_y = b_x.
                let p = d.alice_set(x)[y - 1].as_pauli().unwrap().mul(d.bob_bar(y, x - 1).as_pauli().unwrap()).unwrap();
                assert_eq!(tables.eval(&p).unwrap().re, 1.0);
                let col = prod(&[d.bob_bar(y, 0), d.bob_bar(y, 1), d.bob_bar(y, 2)]);
                assert_eq!(col, PauliString::identity(6).negated());
                let row = prod(&d.alice_set(x).iter().collect::<Vec<_>>());
                assert_eq!(row, PauliString::identity(6));
            }
        }
    }

    #[test]
    fn padded_adversary_is_deterministically_consistent() {
        let n = 7;
        let d = DeviceModel::padded_adversary(n).unwrap();
        let tables = PairTables::new(n, &NoiseModel::None).unwrap();
        for x in 1..=3 {
            for y in 1..=n {
                let a: Vec<&Observable> =
                    (1..=n).filter(|&k| k != y).map(|k| &d.alice_set(x)[k - 1]).collect();
                let mut all = a;
                all.push(d.bob_bar(y, x - 1));
                assert_eq!(tables.eval(&prod(&all)).unwrap().re, 1.0, "x={x} y={y}");
            }
        }
        // column answers for padded columns
        let b: Vec<i8> = (0..3).map(|s| d.bob_bar(5, s).as_pauli().unwrap().phase().sign().unwrap()).collect();
        assert_eq!(b, vec![1, -1, 1]);
        assert!(game_round_accept(n, 2, 5, &[1, 1, 1, -1, -1, -1, -1], &b).is_ok());
    }

    #[test]
    fn descriptor_round_trip() {
        for d in [DeviceModel::honest(3).unwrap(), DeviceModel::padded_adversary(7).unwrap()] {
            let desc = d.to_descriptor().unwrap();
            let json = serde_json::to_string_pretty(&desc).unwrap();
            let back: DeviceDescriptor = serde_json::from_str(&json).unwrap();
            let d2 = DeviceModel::from_descriptor(&back).unwrap();
            assert_eq!(d2.alice, d.alice);
            assert_eq!(d2.bob_game, d.bob_game);
            assert_eq!(d2.bob_local, d.bob_local);
            assert_eq!(d2.bob_pair, d.bob_pair);
        }
    }

    #[test]
    fn dense_custom_observable_accepted() {
        let d = DeviceModel::honest(3).unwrap();
        let m = DenseOp::from_pauli(&"IIIZII".parse().unwrap());
        let custom = d
            .with_observable(Some(RoundType::LocalCheck), 2, 0, Observable::Dense(Arc::new(m)))
            .unwrap();
        assert_eq!(custom.kind(), DeviceKind::Custom);
        assert!(!custom.is_pauli_bell());
    }
}
