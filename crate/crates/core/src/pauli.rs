//! Exact algebra of n-qubit Pauli strings with phase tracking.
//!
//! Qubit positions are 1-based throughout the public API. The phase is kept
//! as an element of the four-element group {+1, +i, -1, -i}; no floating
//! point is involved anywhere in this module.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PauliError {
    #[error("dimension mismatch: {left} vs {right} qubits")]
    Dimension { left: usize, right: usize },
    #[error("a Pauli string needs at least one qubit")]
    Empty,
    #[error("position {position} is outside 1..={total}")]
    PositionOutOfRange { position: usize, total: usize },
    #[error("position {0} is used more than once")]
    DuplicatePosition(usize),
    #[error("{positions} positions given for a {letters}-letter string")]
    PositionCount { positions: usize, letters: usize },
    #[error("cannot parse Pauli string `{0}`")]
    Parse(String),
}

/// Power of `i`: the phase is `i^k` for `k` in `0..4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Phase(u8);

impl Phase {
    pub const PLUS_ONE: Phase = Phase(0);
    pub const PLUS_I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_power(k: u8) -> Self {
        Phase(k & 3)
    }

    pub fn power(self) -> u8 {
        self.0
    }

    pub fn is_real(self) -> bool {
        self.0 & 1 == 0
    }

    /// `+1` or `-1` for real phases.
    pub fn sign(self) -> Option<i8> {
        match self.0 {
            0 => Some(1),
            2 => Some(-1),
            _ => None,
        }
    }

    pub fn negate(self) -> Self {
        Phase((self.0 + 2) & 3)
    }

    pub fn conj(self) -> Self {
        Phase((4 - self.0) & 3)
    }

    fn token(self) -> &'static str {
        match self.0 {
            0 => "+",
            1 => "+i",
            2 => "-",
            _ => "-i",
        }
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) & 3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    /// Symplectic (x, z) bits: X = (1,0), Z = (0,1), Y = (1,1).
    pub fn xz(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    /// Single-site product `self * rhs` as (phase, letter).
    pub fn mul(self, rhs: Pauli) -> (Phase, Pauli) {
        use Pauli::*;
        match (self, rhs) {
            (I, p) | (p, I) => (Phase::PLUS_ONE, p),
            (a, b) if a == b => (Phase::PLUS_ONE, I),
            (X, Y) => (Phase::PLUS_I, Z),
            (Y, Z) => (Phase::PLUS_I, X),
            (Z, X) => (Phase::PLUS_I, Y),
            (Y, X) => (Phase::MINUS_I, Z),
            (Z, Y) => (Phase::MINUS_I, X),
            (X, Z) => (Phase::MINUS_I, Y),
            _ => unreachable!(),
        }
    }

    pub fn anticommutes(self, rhs: Pauli) -> bool {
        self != Pauli::I && rhs != Pauli::I && self != rhs
    }

    fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    fn from_letter(c: char) -> Option<Pauli> {
        match c {
            'I' | 'i' => Some(Pauli::I),
            'X' | 'x' => Some(Pauli::X),
            'Y' | 'y' => Some(Pauli::Y),
            'Z' | 'z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// `phase * P_1 ⊗ P_2 ⊗ ... ⊗ P_n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    phase: Phase,
    letters: Vec<Pauli>,
}

impl PauliString {
    pub fn new(phase: Phase, letters: Vec<Pauli>) -> Result<Self, PauliError> {
        if letters.is_empty() {
            return Err(PauliError::Empty);
        }
        Ok(PauliString { phase, letters })
    }

    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "identity on zero qubits");
        PauliString { phase: Phase::PLUS_ONE, letters: vec![Pauli::I; n] }
    }

    /// A single letter on 1-based `position` of an `n`-qubit register.
    pub fn single(letter: Pauli, position: usize, n: usize) -> Result<Self, PauliError> {
        let mut p = Self::identity(n.max(1));
        if position == 0 || position > n {
            return Err(PauliError::PositionOutOfRange { position, total: n });
        }
        p.letters[position - 1] = letter;
        Ok(p)
    }

    /// The same letter on every listed (1-based) position.
    pub fn uniform_on(letter: Pauli, positions: &[usize], n: usize) -> Result<Self, PauliError> {
        let mut p = Self::identity(n.max(1));
        for &pos in positions {
            if pos == 0 || pos > n {
                return Err(PauliError::PositionOutOfRange { position: pos, total: n });
            }
            p.letters[pos - 1] = letter;
        }
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.letters.len()
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    /// Letter at 1-based `position`.
    pub fn letter(&self, position: usize) -> Pauli {
        self.letters[position - 1]
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = phase;
        self
    }

    pub fn negated(mut self) -> Self {
        self.phase = self.phase.negate();
        self
    }

    /// Hermitian iff the phase is real.
    pub fn is_hermitian(&self) -> bool {
        self.phase.is_real()
    }

    pub fn is_identity_up_to_phase(&self) -> bool {
        self.letters.iter().all(|&l| l == Pauli::I)
    }

    /// 1-based positions carrying a non-identity letter.
    pub fn support(&self) -> Vec<usize> {
        self.letters
            .iter()
            .enumerate()
            .filter(|(_, &l)| l != Pauli::I)
            .map(|(k, _)| k + 1)
            .collect()
    }

    pub fn weight(&self) -> usize {
        self.letters.iter().filter(|&&l| l != Pauli::I).count()
    }

    fn check_dims(&self, other: &PauliString) -> Result<(), PauliError> {
        if self.n() != other.n() {
            return Err(PauliError::Dimension { left: self.n(), right: other.n() });
        }
        Ok(())
    }

    /// Operator product `self · rhs`.
    pub fn mul(&self, rhs: &PauliString) -> Result<PauliString, PauliError> {
        self.check_dims(rhs)?;
        let mut phase = self.phase * rhs.phase;
        let letters = self
            .letters
            .iter()
            .zip(&rhs.letters)
            .map(|(&a, &b)| {
                let (ph, l) = a.mul(b);
                phase = phase * ph;
                l
            })
            .collect();
        Ok(PauliString { phase, letters })
    }

    /// True iff the number of sites where both letters are non-identity and
    /// differ is even.
    pub fn commutes(&self, rhs: &PauliString) -> Result<bool, PauliError> {
        self.check_dims(rhs)?;
        let clashes =
            self.letters.iter().zip(&rhs.letters).filter(|(a, b)| a.anticommutes(**b)).count();
        Ok(clashes % 2 == 0)
    }

    /// Hermitian conjugate.
    pub fn adjoint(&self) -> PauliString {
        PauliString { phase: self.phase.conj(), letters: self.letters.clone() }
    }

    /// Places this string's letters on the given 1-based `positions` of a
    /// `total`-qubit register; `positions[k]` receives letter `k`.
    pub fn embed(&self, positions: &[usize], total: usize) -> Result<PauliString, PauliError> {
        if positions.len() != self.n() {
            return Err(PauliError::PositionCount { positions: positions.len(), letters: self.n() });
        }
        if total == 0 {
            return Err(PauliError::Empty);
        }
        let mut letters = vec![Pauli::I; total];
        let mut used = vec![false; total];
        for (&pos, &letter) in positions.iter().zip(&self.letters) {
            if pos == 0 || pos > total {
                return Err(PauliError::PositionOutOfRange { position: pos, total });
            }
            if used[pos - 1] {
                return Err(PauliError::DuplicatePosition(pos));
            }
            used[pos - 1] = true;
            letters[pos - 1] = letter;
        }
        Ok(PauliString { phase: self.phase, letters })
    }

    /// Tensor product `self ⊗ rhs` (self on the low positions).
    pub fn tensor(&self, rhs: &PauliString) -> PauliString {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&rhs.letters);
        PauliString { phase: self.phase * rhs.phase, letters }
    }

    /// Splits into the first `k` letters (carrying the phase) and the rest.
    pub fn split_at(&self, k: usize) -> (PauliString, PauliString) {
        assert!(k > 0 && k < self.n(), "split point {k} outside 1..{}", self.n());
        (
            PauliString { phase: self.phase, letters: self.letters[..k].to_vec() },
            PauliString { phase: Phase::PLUS_ONE, letters: self.letters[k..].to_vec() },
        )
    }

    /// Bit masks over 0-based positions: (x-mask, z-mask, number of Y letters).
    pub fn masks(&self) -> (u64, u64, u32) {
        assert!(self.n() <= 64, "mask form supports at most 64 qubits");
        let (mut xm, mut zm, mut ys) = (0u64, 0u64, 0u32);
        for (k, l) in self.letters.iter().enumerate() {
            let (x, z) = l.xz();
            if x {
                xm |= 1 << k;
            }
            if z {
                zm |= 1 << k;
            }
            if x && z {
                ys += 1;
            }
        }
        (xm, zm, ys)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ", self.phase.token())?;
        for l in &self.letters {
            write!(f, "{}", l.letter())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = PauliError;

    /// Accepts `XIZ`, `-XIZ`, `-i XIZ`, `+1 XX`, `i ZZ`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || PauliError::Parse(s.to_string());
        let trimmed = s.trim();
        let (token, body) = match trimmed.rsplit_once(char::is_whitespace) {
            Some((t, b)) => (t.trim(), b),
            None => {
                let split = trimmed.find(|c: char| "IXYZ".contains(c)).ok_or_else(err)?;
                (&trimmed[..split], &trimmed[split..])
            }
        };
        let phase = match token {
            "" | "+" | "+1" | "1" => Phase::PLUS_ONE,
            "-" | "-1" => Phase::MINUS_ONE,
            "i" | "+i" | "+1i" => Phase::PLUS_I,
            "-i" | "-1i" => Phase::MINUS_I,
            _ => return Err(err()),
        };
        let letters =
            body.chars().map(Pauli::from_letter).collect::<Option<Vec<_>>>().ok_or_else(err)?;
        PauliString::new(phase, letters).map_err(|_| err())
    }
}

impl Serialize for PauliString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
