//! Operator expressions and the state-dependent norm `‖E|Ψ⟩‖`.

use std::collections::HashMap;

use num_complex::Complex64;

use super::analytic::PairTables;
use super::{inner, vec_norm, EngineError, NoiseModel, Observable, SharedState};
use crate::pauli::{Pauli, PauliString, Phase};

/// Formal linear combination of operator products.
#[derive(Debug, Clone, PartialEq)]
pub enum OpExpr {
    Identity,
    Op(Observable),
    Scale(Complex64, Box<OpExpr>),
    Sum(Vec<OpExpr>),
    /// `Product([A, B, C]) = A·B·C`; `C` acts on the state first.
    Product(Vec<OpExpr>),
}

impl OpExpr {
    pub fn op(o: impl Into<Observable>) -> Self {
        OpExpr::Op(o.into())
    }

    pub fn product<I: IntoIterator<Item = OpExpr>>(items: I) -> Self {
        OpExpr::Product(items.into_iter().collect())
    }

    pub fn product_of(obs: &[Observable]) -> Self {
        OpExpr::Product(obs.iter().cloned().map(OpExpr::Op).collect())
    }

    pub fn sum<I: IntoIterator<Item = OpExpr>>(items: I) -> Self {
        OpExpr::Sum(items.into_iter().collect())
    }

    pub fn scale(c: f64, e: OpExpr) -> Self {
        OpExpr::Scale(Complex64::new(c, 0.0), Box::new(e))
    }

    /// `a - b`.
    pub fn difference(a: OpExpr, b: OpExpr) -> Self {
        OpExpr::Sum(vec![a, OpExpr::scale(-1.0, b)])
    }

    /// `a + b`.
    pub fn plus(a: OpExpr, b: OpExpr) -> Self {
        OpExpr::Sum(vec![a, b])
    }

    /// `[a, b] = ab - ba`.
    pub fn commutator(a: OpExpr, b: OpExpr) -> Self {
        OpExpr::difference(
            OpExpr::Product(vec![a.clone(), b.clone()]),
            OpExpr::Product(vec![b, a]),
        )
    }

    /// `{a, b} = ab + ba`.
    pub fn anticommutator(a: OpExpr, b: OpExpr) -> Self {
        OpExpr::plus(OpExpr::Product(vec![a.clone(), b.clone()]), OpExpr::Product(vec![b, a]))
    }

    fn apply_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        match self {
            OpExpr::Identity => v.to_vec(),
            OpExpr::Op(Observable::Pauli(p)) => super::apply_pauli_vec(p, v),
            OpExpr::Op(Observable::Dense(m)) => m.apply(v),
            OpExpr::Scale(c, e) => e.apply_vec(v).into_iter().map(|a| a * c).collect(),
            OpExpr::Sum(terms) => {
                let mut acc = vec![Complex64::new(0.0, 0.0); v.len()];
                for t in terms {
                    for (a, b) in acc.iter_mut().zip(t.apply_vec(v)) {
                        *a += b;
                    }
                }
                acc
            }
            OpExpr::Product(factors) => {
                let mut cur = v.to_vec();
                for f in factors.iter().rev() {
                    cur = f.apply_vec(&cur);
                }
                cur
            }
        }
    }

    fn check_width(&self, width: usize) -> Result<(), EngineError> {
        match self {
            OpExpr::Identity => Ok(()),
            OpExpr::Op(o) if o.qubits() != width => {
                Err(EngineError::Dimension { expected: width, got: o.qubits() })
            }
            OpExpr::Op(_) => Ok(()),
            OpExpr::Scale(_, e) => e.check_width(width),
            OpExpr::Sum(ts) | OpExpr::Product(ts) => {
                ts.iter().try_for_each(|t| t.check_width(width))
            }
        }
    }

    /// Expands into `Σ c_k P_k` over distinct letter strings (phases folded
    /// into the coefficients). Fails on dense leaves.
    pub fn expand(&self, width: usize) -> Result<Vec<(Complex64, PauliString)>, EngineError> {
        self.check_width(width)?;
        let terms = self.expand_raw(width)?;
        let mut merged: HashMap<Vec<Pauli>, Complex64> = HashMap::new();
        let mut order = Vec::new();
        for (c, p) in terms {
            let coef = c * super::i_power(p.phase().power() as u32);
            let key = p.letters().to_vec();
            merged
                .entry(key.clone())
                .and_modify(|v| *v += coef)
                .or_insert_with(|| {
                    order.push(key);
                    coef
                });
        }
        Ok(order
            .into_iter()
            .filter_map(|k| {
                let c = merged[&k];
                (c.norm() > 0.0).then(|| (c, PauliString::new(Phase::PLUS_ONE, k).unwrap()))
            })
            .collect())
    }

    fn expand_raw(&self, width: usize) -> Result<Vec<(Complex64, PauliString)>, EngineError> {
        let one = Complex64::new(1.0, 0.0);
        match self {
            OpExpr::Identity => Ok(vec![(one, PauliString::identity(width))]),
            OpExpr::Op(Observable::Pauli(p)) => Ok(vec![(one, p.clone())]),
            OpExpr::Op(Observable::Dense(_)) => Err(EngineError::NotPauli),
            OpExpr::Scale(c, e) => {
                Ok(e.expand_raw(width)?.into_iter().map(|(k, p)| (k * c, p)).collect())
            }
            OpExpr::Sum(ts) => {
                let mut out = Vec::new();
                for t in ts {
                    out.extend(t.expand_raw(width)?);
                }
                Ok(out)
            }
            OpExpr::Product(fs) => {
                let mut acc = vec![(one, PauliString::identity(width))];
                for f in fs {
                    let rhs = f.expand_raw(width)?;
                    let mut next = Vec::with_capacity(acc.len() * rhs.len());
                    for (ca, pa) in &acc {
                        for (cb, pb) in &rhs {
                            next.push((ca * cb, pa.mul(pb)?));
                        }
                    }
                    acc = next;
                }
                Ok(acc)
            }
        }
    }
}

/// `‖expr|Ψ⟩‖` on the dense state.
pub fn norm_of(expr: &OpExpr, state: &SharedState) -> Result<f64, EngineError> {
    expr.check_width(2 * state.n())?;
    Ok(vec_norm(&expr.apply_vec(state.amplitudes())))
}

/// `⟨Ψ|E†E|Ψ⟩` through the Gram matrix of the expanded Pauli terms,
/// evaluated with the analytic engine.
pub fn norm_sq_analytic(expr: &OpExpr, tables: &PairTables) -> Result<f64, EngineError> {
    let terms = expr.expand(2 * tables.n())?;
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, (ck, pk)) in terms.iter().enumerate() {
        acc += ck.norm_sqr();
        for (cl, pl) in &terms[k + 1..] {
            let g = tables.eval(&pk.mul(pl)?)?;
            acc += ck.conj() * cl * g * 2.0;
        }
    }
    Ok(acc.re)
}

/// `‖expr|Ψ⟩‖` without building the state vector; Pauli leaves only.
pub fn norm_of_analytic(expr: &OpExpr, n: usize, noise: &NoiseModel) -> Result<f64, EngineError> {
    let tables = PairTables::new(n, noise)?;
    Ok(norm_sq_analytic(expr, &tables)?.max(0.0).sqrt())
}

/// `⟨a|b⟩` of two expression images, used by tests comparing vectors.
pub fn overlap(a: &OpExpr, b: &OpExpr, state: &SharedState) -> Result<Complex64, EngineError> {
    a.check_width(2 * state.n())?;
    b.check_width(2 * state.n())?;
    Ok(inner(&a.apply_vec(state.amplitudes()), &b.apply_vec(state.amplitudes())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(s: &str) -> OpExpr {
        OpExpr::op(s.parse::<PauliString>().unwrap())
    }

    #[test]
    fn anticommuting_pair_has_zero_anticommutator() {
        let s = SharedState::prepare(1, &NoiseModel::YRotation { theta: 0.4 }).unwrap();
        let e = OpExpr::anticommutator(op("XI"), op("ZI"));
        assert!(norm_of(&e, &s).unwrap() < 1e-14);
        assert!(e.expand(2).unwrap().is_empty());
    }

    #[test]
    fn perfect_correlation_difference() {
        let s = SharedState::prepare(1, &NoiseModel::None).unwrap();
        let e = OpExpr::difference(op("XI"), op("IX"));
        assert!(norm_of(&e, &s).unwrap() < 1e-14);
    }

    #[test]
    fn noisy_difference_matches_closed_form() {
        let theta: f64 = 0.25;
        let noise = NoiseModel::YRotation { theta };
        let s = SharedState::prepare(1, &noise).unwrap();
        let e = OpExpr::difference(op("XI"), op("IX"));
        let want = (2.0 * (1.0 - theta.cos())).sqrt();
        assert!((norm_of(&e, &s).unwrap() - want).abs() < 1e-12);
        assert!((norm_of_analytic(&e, 1, &noise).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn analytic_and_dense_norms_agree() {
        let noise = NoiseModel::PerPair { angles: vec![0.3, 0.7] };
        let s = SharedState::prepare(2, &noise).unwrap();
        let exprs = [
            OpExpr::commutator(op("XIXZ"), op("IZZX")),
            OpExpr::anticommutator(op("XXII"), op("ZIZI")),
            OpExpr::plus(OpExpr::product([op("YIYI"), op("IZIZ")]), op("i XXZZ")),
            OpExpr::difference(OpExpr::Identity, OpExpr::scale(0.5, op("ZZZZ"))),
        ];
        for e in &exprs {
            let d = norm_of(e, &s).unwrap();
            let a = norm_of_analytic(e, 2, &noise).unwrap();
            assert!((d - a).abs() < 1e-12, "{d} vs {a}");
        }
    }

    #[test]
    fn product_order_is_left_to_right() {
        // X·Z = -iY, so (XZ - (-i)Y) vanishes identically
        let e = OpExpr::difference(
            OpExpr::product([op("X"), op("Z")]),
            OpExpr::Scale(Complex64::new(0.0, -1.0), Box::new(op("Y"))),
        );
        assert!(e.expand(1).unwrap().is_empty());
    }

    #[test]
    fn width_mismatch() {
        let s = SharedState::prepare(1, &NoiseModel::None).unwrap();
        assert!(matches!(norm_of(&op("XXX"), &s), Err(EngineError::Dimension { .. })));
    }
}
