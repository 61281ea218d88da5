//! Joint measurement of commuting reflections.
//!
//! [`measure_joint`] samples by sequential projection on the dense state.
//! [`joint_distribution_pauli`] computes the exact joint outcome law of a
//! commuting Pauli set on a rotated Bell product without a state vector:
//! the expectations of all subset products are Walsh–Hadamard transformed
//! into outcome probabilities.
//!
//! Outcome vectors are indexed by a bit mask: bit `i` set means observable
//! `i` returned `-1`.

use num_complex::Complex64;
use rand::Rng;

use super::analytic::PairTables;
use super::{inner, vec_norm, EngineError, NoiseModel, Observable, SharedState};
use crate::pauli::PauliString;

const COMMUTE_TOL: f64 = 1e-9;

fn check_set(obs: &[Observable], width: usize) -> Result<(), EngineError> {
    for (i, o) in obs.iter().enumerate() {
        if o.qubits() != width {
            return Err(EngineError::Dimension { expected: width, got: o.qubits() });
        }
        match o {
            Observable::Pauli(p) if !p.is_hermitian() => {
                return Err(EngineError::NotHermitian(p.to_string()))
            }
            Observable::Dense(m) => m.check_reflection(COMMUTE_TOL)?,
            _ => {}
        }
        for (j, q) in obs.iter().enumerate().skip(i + 1) {
            if !o.commutes_with(q, COMMUTE_TOL)? {
                return Err(EngineError::NonCommuting(i, j));
            }
        }
    }
    Ok(())
}

/// Measures `observables` in order by projecting with `(I ± M)/2`.
pub fn measure_joint<R: Rng + ?Sized>(
    state: &SharedState,
    observables: &[Observable],
    rng: &mut R,
) -> Result<(Vec<i8>, SharedState), EngineError> {
    check_set(observables, 2 * state.n())?;
    let mut cur = state.clone();
    let mut outcomes = Vec::with_capacity(observables.len());
    for o in observables {
        let image = cur.apply_observable(o)?;
        let ev = inner(cur.amplitudes(), image.amplitudes()).re;
        let p_plus = ((1.0 + ev) / 2.0).clamp(0.0, 1.0);
        let sign = if rng.gen::<f64>() < p_plus { 1.0 } else { -1.0 };
        let projected: Vec<Complex64> = cur
            .amplitudes()
            .iter()
            .zip(image.amplitudes())
            .map(|(a, m)| (a + m * sign) * 0.5)
            .collect();
        let norm = vec_norm(&projected);
        cur = SharedState { n: cur.n, amps: projected.into_iter().map(|a| a / norm).collect() };
        outcomes.push(sign as i8);
    }
    Ok((outcomes, cur))
}

/// Exact joint distribution by projecting onto every outcome pattern.
/// Exponential in the set size; intended for small sets and tests.
pub fn joint_distribution_dense(
    state: &SharedState,
    observables: &[Observable],
) -> Result<Vec<f64>, EngineError> {
    check_set(observables, 2 * state.n())?;
    let k = observables.len();
    let mut probs = vec![0.0; 1 << k];
    // Branch the state vector through each projector in turn.
    let mut branches = vec![(0usize, state.amplitudes().to_vec())];
    for (i, o) in observables.iter().enumerate() {
        let mut next = Vec::with_capacity(branches.len() * 2);
        for (mask, v) in branches {
            let img = SharedState { n: state.n, amps: v.clone() }.apply_observable(o)?;
            for (bit, sign) in [(0usize, 1.0), (1usize, -1.0)] {
                let w: Vec<Complex64> =
                    v.iter().zip(img.amplitudes()).map(|(a, m)| (a + m * sign) * 0.5).collect();
                next.push((mask | bit << i, w));
            }
        }
        branches = next;
    }
    for (mask, v) in branches {
        probs[mask] = v.iter().map(|a| a.norm_sqr()).sum();
    }
    Ok(probs)
}

/// Compact `i^ph X^x Z^z` form used for fast subset products.
#[derive(Clone, Copy)]
struct Sym {
    x: u64,
    z: u64,
    ph: u32,
}

impl Sym {
    fn from_pauli(p: &PauliString) -> Self {
        let (x, z, ys) = p.masks();
        Sym { x, z, ph: (p.phase().power() as u32 + ys) % 4 }
    }

    fn mul(self, rhs: Sym) -> Sym {
        let flips = (self.z & rhs.x).count_ones();
        Sym { x: self.x ^ rhs.x, z: self.z ^ rhs.z, ph: (self.ph + rhs.ph + 2 * flips) % 4 }
    }
}

/// Exact joint law of a commuting Hermitian Pauli set on the state
/// prepared by `noise` over `n` pairs.
pub fn joint_distribution_pauli(
    observables: &[PauliString],
    n: usize,
    noise: &NoiseModel,
) -> Result<Vec<f64>, EngineError> {
    let tables = PairTables::new(n, noise)?;
    joint_distribution_tables(observables, &tables)
}

pub(crate) fn joint_distribution_tables(
    observables: &[PauliString],
    tables: &PairTables,
) -> Result<Vec<f64>, EngineError> {
    let width = 2 * tables.n();
    assert!(width <= 64, "mask form supports at most 32 pairs");
    let set: Vec<Observable> = observables.iter().cloned().map(Observable::Pauli).collect();
    check_set(&set, width)?;
    let k = observables.len();
    let syms: Vec<Sym> = observables.iter().map(Sym::from_pauli).collect();
    let size = 1usize << k;
    let mut prods = Vec::with_capacity(size);
    prods.push(Sym { x: 0, z: 0, ph: 0 });
    let mut ev = vec![0.0f64; size];
    ev[0] = 1.0;
    for s in 1..size {
        let top = usize::BITS - 1 - s.leading_zeros();
        let p = prods[s ^ (1 << top)].mul(syms[top as usize]);
        prods.push(p);
        ev[s] = tables.eval_masks(p.x, p.z, p.ph).re;
    }
    walsh_hadamard(&mut ev);
    let scale = 1.0 / size as f64;
    Ok(ev.into_iter().map(|v| (v * scale).max(0.0)).collect())
}

fn walsh_hadamard(v: &mut [f64]) {
    let mut h = 1;
    while h < v.len() {
        for block in v.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// Expands an outcome mask into `±1` values for `k` observables.
pub fn outcomes_from_mask(mask: usize, k: usize) -> Vec<i8> {
    (0..k).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect()
}
