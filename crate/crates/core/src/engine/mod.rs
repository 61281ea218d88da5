//! Quantum predictions for n shared Bell pairs.
//!
//! Two engines live here. The analytic engine ([`analytic`]) evaluates Pauli
//! expectations on (rotated) `|Φ+⟩^{⊗n}` as a product over pairs and has no
//! size limit. The dense engine ([`SharedState`]) keeps the full `2^{2n}`
//! amplitude vector and supports arbitrary operator expressions, sampling
//! and custom matrix observables.
//!
//! Register layout: bit `k` of a basis index (least significant first) is
//! Alice's qubit `k+1` for `k < n` and Bob's qubit `k-n+1` for `k >= n`.
//! A full-register [`PauliString`] therefore has `2n` letters and letter
//! `k` acts on bit `k`.

pub mod analytic;
pub mod expr;
pub mod measure;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pauli::{PauliError, PauliString};

pub use analytic::{bell_expectation, expectation_full};
pub use expr::{norm_of, norm_of_analytic, OpExpr};
pub use measure::{joint_distribution_dense, joint_distribution_pauli, measure_joint};

/// Largest pair count the dense engine accepts (2^24 amplitudes).
pub const MAX_DENSE_PAIRS: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Pauli(#[from] PauliError),
    #[error("dense engine supports at most {MAX_DENSE_PAIRS} pairs, got {0}")]
    TooLarge(usize),
    #[error("need at least one Bell pair")]
    NoPairs,
    #[error("operator acts on {got} qubits, register has {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("observable `{0}` is not Hermitian")]
    NotHermitian(String),
    #[error("observables {0} and {1} do not commute")]
    NonCommuting(usize, usize),
    #[error("matrix is not a reflection: {0}")]
    NotReflection(String),
    #[error("noise model has {got} angles for {expected} pairs")]
    NoiseArity { expected: usize, got: usize },
    #[error("expression contains a dense matrix; analytic route needs Pauli leaves")]
    NotPauli,
}

/// Pure-state noise families applied to Bob's half of each pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseModel {
    #[default]
    None,
    /// The same Y-axis rotation angle on every Bob qubit.
    YRotation { theta: f64 },
    /// Independent Y-axis rotation angles, one per pair.
    PerPair { angles: Vec<f64> },
}

impl NoiseModel {
    /// Rotation angle on pair `j` (1-based).
    pub fn angle(&self, j: usize) -> f64 {
        match self {
            NoiseModel::None => 0.0,
            NoiseModel::YRotation { theta } => *theta,
            NoiseModel::PerPair { angles } => angles[j - 1],
        }
    }

    pub fn validate(&self, n: usize) -> Result<(), EngineError> {
        if let NoiseModel::PerPair { angles } = self {
            if angles.len() != n {
                return Err(EngineError::NoiseArity { expected: n, got: angles.len() });
            }
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        match self {
            NoiseModel::None => true,
            NoiseModel::YRotation { theta } => *theta == 0.0,
            NoiseModel::PerPair { angles } => angles.iter().all(|&t| t == 0.0),
        }
    }
}

/// Dense operator on the full `2n`-qubit register, row-major.
#[derive(Clone, PartialEq)]
pub struct DenseOp {
    dim: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for DenseOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseOp({}x{})", self.dim, self.dim)
    }
}

impl DenseOp {
    pub fn new(dim: usize, data: Vec<Complex64>) -> Result<Self, EngineError> {
        if data.len() != dim * dim || !dim.is_power_of_two() {
            return Err(EngineError::NotReflection(format!(
                "{} entries do not form a power-of-two square matrix",
                data.len()
            )));
        }
        Ok(DenseOp { dim, data })
    }

    /// Matrix of a full-register Pauli string.
    pub fn from_pauli(p: &PauliString) -> Self {
        let dim = 1usize << p.n();
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for col in 0..dim {
            let (row, c) = pauli_column(p, col);
            data[row * dim + col] = c;
        }
        DenseOp { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let d = self.dim;
        (0..d)
            .map(|r| self.data[r * d..(r + 1) * d].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn mul(&self, rhs: &DenseOp) -> DenseOp {
        let d = self.dim;
        let mut data = vec![Complex64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for k in 0..d {
                let a = self.data[r * d + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..d {
                    data[r * d + c] += a * rhs.data[k * d + c];
                }
            }
        }
        DenseOp { dim: d, data }
    }

    /// Largest entry modulus of `self - rhs`.
    pub fn max_diff(&self, rhs: &DenseOp) -> f64 {
        self.data.iter().zip(&rhs.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn adjoint(&self) -> DenseOp {
        let d = self.dim;
        let mut data = vec![Complex64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for c in 0..d {
                data[c * d + r] = self.data[r * d + c].conj();
            }
        }
        DenseOp { dim: d, data }
    }

    pub fn identity(dim: usize) -> DenseOp {
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for k in 0..dim {
            data[k * dim + k] = Complex64::new(1.0, 0.0);
        }
        DenseOp { dim, data }
    }

    /// Checks `M = M†` and `M² = I` to `tol`.
    pub fn check_reflection(&self, tol: f64) -> Result<(), EngineError> {
        let herm = self.max_diff(&self.adjoint());
        if herm > tol {
            return Err(EngineError::NotReflection(format!("Hermiticity defect {herm:.3e}")));
        }
        let sq = self.mul(self).max_diff(&DenseOp::identity(self.dim));
        if sq > tol {
            return Err(EngineError::NotReflection(format!("M² - I defect {sq:.3e}")));
        }
        Ok(())
    }
}

/// A two-outcome observable on the full register.
#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    Pauli(PauliString),
    Dense(Arc<DenseOp>),
}

impl Observable {
    pub fn as_pauli(&self) -> Option<&PauliString> {
        match self {
            Observable::Pauli(p) => Some(p),
            Observable::Dense(_) => None,
        }
    }

    /// Number of qubits the observable acts on.
    pub fn qubits(&self) -> usize {
        match self {
            Observable::Pauli(p) => p.n(),
            Observable::Dense(m) => m.dim().trailing_zeros() as usize,
        }
    }

    pub fn to_dense(&self) -> DenseOp {
        match self {
            Observable::Pauli(p) => DenseOp::from_pauli(p),
            Observable::Dense(m) => (**m).clone(),
        }
    }

    /// True when the two observables commute (exactly for Pauli pairs,
    /// to `tol` entrywise otherwise).
    pub fn commutes_with(&self, other: &Observable, tol: f64) -> Result<bool, EngineError> {
        match (self, other) {
            (Observable::Pauli(p), Observable::Pauli(q)) => Ok(p.commutes(q)?),
            _ => {
                if self.qubits() != other.qubits() {
                    return Err(EngineError::Dimension {
                        expected: self.qubits(),
                        got: other.qubits(),
                    });
                }
                let a = self.to_dense();
                let b = other.to_dense();
                Ok(a.mul(&b).max_diff(&b.mul(&a)) <= tol)
            }
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::Pauli(p) => write!(f, "{p}"),
            Observable::Dense(m) => write!(f, "<dense {}x{}>", m.dim(), m.dim()),
        }
    }
}

impl From<PauliString> for Observable {
    fn from(p: PauliString) -> Self {
        Observable::Pauli(p)
    }
}

/// Image of basis vector `col` under `p`: `p|col⟩ = c |row⟩`.
fn pauli_column(p: &PauliString, col: usize) -> (usize, Complex64) {
    let (xm, zm, ys) = p.masks();
    let row = col ^ xm as usize;
    let sign = if (col as u64 & zm).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
    (row, i_power(p.phase().power() as u32 + ys) * sign)
}

pub(crate) fn i_power(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Dense pure state of `n` Bell-pair slots (`2n` qubits).
#[derive(Debug, Clone, PartialEq)]
pub struct SharedState {
    n: usize,
    amps: Vec<Complex64>,
}

impl SharedState {
    /// `⊗_j |Φ+⟩` with Bob's qubit `j` rotated by `R_y(θ_j)`.
    pub fn prepare(n: usize, noise: &NoiseModel) -> Result<Self, EngineError> {
        if n == 0 {
            return Err(EngineError::NoPairs);
        }
        if n > MAX_DENSE_PAIRS {
            return Err(EngineError::TooLarge(n));
        }
        noise.validate(n)?;
        let dim = 1usize << (2 * n);
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        let amp = (0.5f64).powf(n as f64 / 2.0);
        for a in 0..(1usize << n) {
            amps[a | (a << n)] = Complex64::new(amp, 0.0);
        }
        let mut state = SharedState { n, amps };
        for j in 1..=n {
            let theta = noise.angle(j);
            if theta != 0.0 {
                state.rotate_y(n + j - 1, theta);
            }
        }
        Ok(state)
    }

    /// Wraps an explicit amplitude vector, renormalising it.
    pub fn from_amplitudes(n: usize, amps: Vec<Complex64>) -> Result<Self, EngineError> {
        if n == 0 {
            return Err(EngineError::NoPairs);
        }
        if n > MAX_DENSE_PAIRS {
            return Err(EngineError::TooLarge(n));
        }
        if amps.len() != 1 << (2 * n) {
            return Err(EngineError::Dimension { expected: 1 << (2 * n), got: amps.len() });
        }
        let mut s = SharedState { n, amps };
        let norm = s.norm();
        s.amps.iter_mut().for_each(|a| *a /= norm);
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        vec_norm(&self.amps)
    }

    /// `[[c, -s], [s, c]]` with `c = cos(θ/2)`, `s = sin(θ/2)` on `bit`.
    fn rotate_y(&mut self, bit: usize, theta: f64) {
        let (s, c) = (theta / 2.0).sin_cos();
        let mask = 1usize << bit;
        for b in 0..self.amps.len() {
            if b & mask == 0 {
                let a0 = self.amps[b];
                let a1 = self.amps[b | mask];
                self.amps[b] = a0 * c - a1 * s;
                self.amps[b | mask] = a0 * s + a1 * c;
            }
        }
    }

    fn check_width(&self, qubits: usize) -> Result<(), EngineError> {
        if qubits != 2 * self.n {
            return Err(EngineError::Dimension { expected: 2 * self.n, got: qubits });
        }
        Ok(())
    }

    /// `op|Ψ⟩` for a full-register Pauli string.
    pub fn apply(&self, op: &PauliString) -> Result<SharedState, EngineError> {
        self.check_width(op.n())?;
        Ok(SharedState { n: self.n, amps: apply_pauli_vec(op, &self.amps) })
    }

    /// `M|Ψ⟩` for any observable.
    pub fn apply_observable(&self, op: &Observable) -> Result<SharedState, EngineError> {
        self.check_width(op.qubits())?;
        let amps = match op {
            Observable::Pauli(p) => apply_pauli_vec(p, &self.amps),
            Observable::Dense(m) => m.apply(&self.amps),
        };
        Ok(SharedState { n: self.n, amps })
    }

    /// `⟨Ψ|op|Ψ⟩`.
    pub fn expectation(&self, op: &Observable) -> Result<Complex64, EngineError> {
        let v = self.apply_observable(op)?;
        Ok(inner(&self.amps, &v.amps))
    }

    /// Debug dump of non-negligible amplitudes as (basis index, amplitude).
    pub fn dump(&self, tol: f64) -> Vec<(usize, Complex64)> {
        self.amps.iter().copied().enumerate().filter(|(_, a)| a.norm() > tol).collect()
    }
}

pub(crate) fn apply_pauli_vec(op: &PauliString, v: &[Complex64]) -> Vec<Complex64> {
    let (xm, zm, ys) = op.masks();
    let base = i_power(op.phase().power() as u32 + ys);
    let xm = xm as usize;
    let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
    for (b, &a) in v.iter().enumerate() {
        if a.re == 0.0 && a.im == 0.0 {
            continue;
        }
        let odd = (b as u64 & zm).count_ones() & 1 == 1;
        out[b ^ xm] = if odd { -(base * a) } else { base * a };
    }
    out
}

pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}
