//! Closed-form Pauli expectations on rotated Bell products.
//!
//! For `|Ψ⟩ = ⊗_j (I ⊗ R_j)|Φ+⟩` and a product operator the expectation
//! factorises over pairs. Each factor uses `⟨Φ+|S ⊗ T|Φ+⟩ = tr(S Tᵀ)/2`
//! with `T = R_jᵀ P R_j` the Heisenberg image of Bob's letter.

use num_complex::Complex64;

use super::{EngineError, NoiseModel};
use crate::pauli::{Pauli, PauliString};

type M2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

fn letter_matrix(p: Pauli) -> M2 {
    match p {
        Pauli::I => [[ONE, ZERO], [ZERO, ONE]],
        Pauli::X => [[ZERO, ONE], [ONE, ZERO]],
        Pauli::Y => [[ZERO, -I], [I, ZERO]],
        Pauli::Z => [[ONE, ZERO], [ZERO, -ONE]],
    }
}

fn mm(a: &M2, b: &M2) -> M2 {
    let mut out = [[ZERO; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

fn transpose(a: &M2) -> M2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

/// `⟨Φ+| S ⊗ R_yᵀ(θ) P R_y(θ) |Φ+⟩` for every letter pair `(S, P)`.
fn pair_table(theta: f64) -> [[Complex64; 4]; 4] {
    let (s, c) = (theta / 2.0).sin_cos();
    let r: M2 = [[c.into(), (-s).into()], [s.into(), c.into()]];
    let rt = transpose(&r);
    let mut table = [[ZERO; 4]; 4];
    for (ai, &a) in Pauli::ALL.iter().enumerate() {
        let sa = letter_matrix(a);
        for (bi, &b) in Pauli::ALL.iter().enumerate() {
            let heis = mm(&rt, &mm(&letter_matrix(b), &r));
            let prod = mm(&sa, &transpose(&heis));
            table[ai][bi] = (prod[0][0] + prod[1][1]) * 0.5;
        }
    }
    table
}

fn index(p: Pauli) -> usize {
    match p {
        Pauli::I => 0,
        Pauli::X => 1,
        Pauli::Y => 2,
        Pauli::Z => 3,
    }
}

/// Per-pair factor tables for a fixed noise model; cheap repeated evaluation.
#[derive(Debug, Clone)]
pub struct PairTables {
    tables: Vec<[[Complex64; 4]; 4]>,
}

impl PairTables {
    pub fn new(n: usize, noise: &NoiseModel) -> Result<Self, EngineError> {
        if n == 0 {
            return Err(EngineError::NoPairs);
        }
        noise.validate(n)?;
        Ok(PairTables { tables: (1..=n).map(|j| pair_table(noise.angle(j))).collect() })
    }

    pub fn n(&self) -> usize {
        self.tables.len()
    }

    /// `⟨Ψ|op|Ψ⟩` for a full-register string (any phase).
    pub fn eval(&self, op: &PauliString) -> Result<Complex64, EngineError> {
        let n = self.n();
        if op.n() != 2 * n {
            return Err(EngineError::Dimension { expected: 2 * n, got: op.n() });
        }
        let letters = op.letters();
        let mut acc = super::i_power(op.phase().power() as u32);
        for j in 0..n {
            let f = self.tables[j][index(letters[j])][index(letters[n + j])];
            if f == ZERO {
                return Ok(ZERO);
            }
            acc *= f;
        }
        Ok(acc)
    }

    /// Same as [`eval`](Self::eval) for `i^ph X^x Z^z` given as bit masks
    /// over the full register (bit `k` is letter `k`).
    pub(crate) fn eval_masks(&self, x: u64, z: u64, ph: u32) -> Complex64 {
        let n = self.n();
        let ys = (x & z).count_ones();
        let mut acc = super::i_power(ph + 3 * ys);
        let letter = |k: usize| index_from_bits(x >> k & 1 == 1, z >> k & 1 == 1);
        for j in 0..n {
            let f = self.tables[j][letter(j)][letter(n + j)];
            if f == ZERO {
                return ZERO;
            }
            acc *= f;
        }
        acc
    }
}

fn index_from_bits(x: bool, z: bool) -> usize {
    match (x, z) {
        (false, false) => 0,
        (true, false) => 1,
        (true, true) => 2,
        (false, true) => 3,
    }
}

/// `⟨Ψ|op|Ψ⟩` for a full-register Pauli string with arbitrary phase.
pub fn expectation_full(op: &PauliString, noise: &NoiseModel) -> Result<Complex64, EngineError> {
    if op.n() % 2 != 0 {
        return Err(EngineError::Dimension { expected: op.n() + 1, got: op.n() });
    }
    PairTables::new(op.n() / 2, noise)?.eval(op)
}

/// `⟨Ψ|P_A ⊗ Q_B|Ψ⟩` for Hermitian `P_A`, `Q_B` on `n` qubits each.
pub fn bell_expectation(
    n: usize,
    pa: &PauliString,
    qb: &PauliString,
    noise: &NoiseModel,
) -> Result<f64, EngineError> {
    for p in [pa, qb] {
        if p.n() != n {
            return Err(EngineError::Dimension { expected: n, got: p.n() });
        }
        if !p.is_hermitian() {
            return Err(EngineError::NotHermitian(p.to_string()));
        }
    }
    Ok(PairTables::new(n, noise)?.eval(&pa.tensor(qb))?.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SharedState;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn noiseless_single_pair() {
        let none = NoiseModel::None;
        assert_eq!(bell_expectation(1, &ps("X"), &ps("X"), &none).unwrap(), 1.0);
        assert_eq!(bell_expectation(1, &ps("Y"), &ps("Y"), &none).unwrap(), -1.0);
        assert_eq!(bell_expectation(1, &ps("Z"), &ps("Z"), &none).unwrap(), 1.0);
        assert_eq!(bell_expectation(1, &ps("X"), &ps("Z"), &none).unwrap(), 0.0);
    }

    #[test]
    fn products_over_all_but_one_qubit() {
        for l in [Pauli::X, Pauli::Y, Pauli::Z] {
            for y in 1..=7 {
                let others: Vec<usize> = (1..=7).filter(|&j| j != y).collect();
                let p = PauliString::uniform_on(l, &others, 7).unwrap();
                let e = bell_expectation(7, &p, &p, &NoiseModel::None).unwrap();
                assert!((e - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rotation_profile() {
        let theta = 0.3;
        let noise = NoiseModel::YRotation { theta };
        let xx = bell_expectation(1, &ps("X"), &ps("X"), &noise).unwrap();
        let yy = bell_expectation(1, &ps("Y"), &ps("Y"), &noise).unwrap();
        let zz = bell_expectation(1, &ps("Z"), &ps("Z"), &noise).unwrap();
        assert!((xx - theta.cos()).abs() < 1e-14);
        assert!((zz - theta.cos()).abs() < 1e-14);
        assert!((yy + 1.0).abs() < 1e-14);
        // the cross terms carry ±sin θ with opposite signs
        let xz = bell_expectation(1, &ps("X"), &ps("Z"), &noise).unwrap();
        let zx = bell_expectation(1, &ps("Z"), &ps("X"), &noise).unwrap();
        assert!((xz.abs() - theta.sin()).abs() < 1e-14);
        assert!((xz + zx).abs() < 1e-14);
    }

    #[test]
    fn agrees_with_dense_on_complex_phase() {
        let noise = NoiseModel::PerPair { angles: vec![0.2, -0.9] };
        let s = SharedState::prepare(2, &noise).unwrap();
        for p in ["i XZYX", "-i ZZXY", "- YIYI", "XYZZ"] {
            let p = ps(p);
            let dense = s.expectation(&p.clone().into()).unwrap();
            let exact = expectation_full(&p, &noise).unwrap();
            assert!((dense - exact).norm() < 1e-12, "{p}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        let none = NoiseModel::None;
        assert!(matches!(
            bell_expectation(1, &ps("i X"), &ps("X"), &none),
            Err(EngineError::NotHermitian(_))
        ));
        assert!(matches!(
            bell_expectation(2, &ps("X"), &ps("XX"), &none),
            Err(EngineError::Dimension { .. })
        ));
    }
}
