//! Closed-form right-hand sides. Every bound has the shape
//! `c₀√(2ε₀) + c₁√(2ε₁) + c₂√(2ε₂)` with coefficients depending on `n`.

use serde::{Deserialize, Serialize};

use super::LedgerError;

/// Every relation tracked by the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    /// `‖(X_A^i − X_{B,i}^i)Ψ‖`.
    CorrX,
    /// `‖(Z_A^i − Z_{B,j}^i)Ψ‖`, `i ≠ j`.
    CorrZ,
    /// `‖[X_{B,i}^i, X_{B,j}^j]Ψ‖`.
    CommBobXx,
    /// `‖[Z_{B,k}^i, Z_{B,l}^j]Ψ‖`, `i ≠ k`, `j ≠ l`.
    CommBobZz,
    /// `‖[X_{B,i}^i, Z_{B,l}^j]Ψ‖`, `i ≠ j`, `j ≠ l`.
    CommBobXz,
    /// `‖[M_A^i, N_A^j]Ψ‖`, `i ≠ j`, `M, N ∈ {X, Z}`.
    CommAlice,
    /// `‖{X_A^i X_A^j, Z_A^i Z_A^k}Ψ‖`, distinct `i, j, k` (n = 3 only).
    AlicePairAnticomm,
    /// `‖{X_A^i, Z_A^i}Ψ‖`.
    AnticommAlice,
    /// `‖{X_{B,i}^i, Z_{B,j}^i}Ψ‖`, `j ≠ i`.
    AnticommBob,
    /// Alice's two four-fold products against four pair observables.
    PairProductEstimate,
    /// Alice's full `Z…X…` product against pair observables.
    AliceToPairs,
    ChainGameY,
    ChainGameProduct,
    ChainXSwap,
    ChainShift,
    ChainRegroup,
    ChainAliceSwap,
    ChainSwapEstimate,
    ChainPairEstimate,
    ChainPaired,
    ChainCancelled,
    /// `‖{X_A^{σ₁} X_A^{σₙ}, Z_A^{σ₁} Z_A^{σ₂}}Ψ‖`.
    PairAnticomm,
}

impl Relation {
    pub const SMALL: [Relation; 9] = [
        Relation::CorrX,
        Relation::CorrZ,
        Relation::CommBobXx,
        Relation::CommBobZz,
        Relation::CommBobXz,
        Relation::CommAlice,
        Relation::AlicePairAnticomm,
        Relation::AnticommAlice,
        Relation::AnticommBob,
    ];

    pub const LARGE: [Relation; 21] = [
        Relation::CorrX,
        Relation::CorrZ,
        Relation::CommBobXx,
        Relation::CommBobZz,
        Relation::CommBobXz,
        Relation::CommAlice,
        Relation::AnticommAlice,
        Relation::AnticommBob,
        Relation::PairProductEstimate,
        Relation::AliceToPairs,
        Relation::ChainGameY,
        Relation::ChainGameProduct,
        Relation::ChainXSwap,
        Relation::ChainShift,
        Relation::ChainRegroup,
        Relation::ChainAliceSwap,
        Relation::ChainSwapEstimate,
        Relation::ChainPairEstimate,
        Relation::ChainPaired,
        Relation::ChainCancelled,
        Relation::PairAnticomm,
    ];

    /// Relations in the catalog for `n`.
    pub fn for_n(n: usize) -> Result<&'static [Relation], LedgerError> {
        check_n(n)?;
        Ok(if n == 3 { &Self::SMALL } else { &Self::LARGE })
    }

    pub fn name(self) -> &'static str {
        match self {
            Relation::CorrX => "corr-x",
            Relation::CorrZ => "corr-z",
            Relation::CommBobXx => "comm-bob-xx",
            Relation::CommBobZz => "comm-bob-zz",
            Relation::CommBobXz => "comm-bob-xz",
            Relation::CommAlice => "comm-alice",
            Relation::AlicePairAnticomm => "alice-pair-anticomm",
            Relation::AnticommAlice => "anticomm-alice",
            Relation::AnticommBob => "anticomm-bob",
            Relation::PairProductEstimate => "pair-product-estimate",
            Relation::AliceToPairs => "alice-to-pairs",
            Relation::ChainGameY => "chain-game-y",
            Relation::ChainGameProduct => "chain-game-product",
            Relation::ChainXSwap => "chain-x-swap",
            Relation::ChainShift => "chain-shift",
            Relation::ChainRegroup => "chain-regroup",
            Relation::ChainAliceSwap => "chain-alice-swap",
            Relation::ChainSwapEstimate => "chain-swap-estimate",
            Relation::ChainPairEstimate => "chain-pair-estimate",
            Relation::ChainPaired => "chain-paired",
            Relation::ChainCancelled => "chain-cancelled",
            Relation::PairAnticomm => "pair-anticomm",
        }
    }

    /// Entries that are hypotheses of the isometry theorem and so feed δ.
    pub fn is_summary(self) -> bool {
        matches!(
            self,
            Relation::CorrX
                | Relation::CorrZ
                | Relation::CommBobXx
                | Relation::CommBobZz
                | Relation::CommBobXz
                | Relation::CommAlice
                | Relation::AnticommAlice
                | Relation::AnticommBob
        )
    }

    /// `(c₀, c₁, c₂)` for `n`.
    pub fn coefficients(self, n: usize) -> [f64; 3] {
        let nf = n as f64;
        let big = (13.0 * (nf - 1.0)) / 2.0;
        let small = n == 3;
        match self {
            Relation::CorrX | Relation::CorrZ => [0.0, 1.0, 0.0],
            Relation::CommBobXx | Relation::CommBobZz | Relation::CommAlice => [0.0, 4.0, 0.0],
            Relation::CommBobXz => [0.0, 8.0, 0.0],
            Relation::AlicePairAnticomm => [9.0, 0.0, 0.0],
            Relation::AnticommAlice if small => [9.0, 16.0, 0.0],
            Relation::AnticommBob if small => [9.0, 20.0, 0.0],
            Relation::AnticommAlice => [3.0 * nf, big + 17.0, 2.0 * (nf - 1.0)],
            Relation::AnticommBob => [3.0 * nf, big + 21.0, 2.0 * (nf - 1.0)],
            Relation::PairProductEstimate => [0.0, 18.0, 4.0],
            Relation::AliceToPairs => [0.0, 2.0 * nf, nf - 1.0],
            Relation::ChainGameY => [1.0, 0.0, 0.0],
            Relation::ChainGameProduct => [nf, 0.0, 0.0],
            Relation::ChainXSwap | Relation::ChainShift | Relation::ChainRegroup => [nf + 2.0, 0.0, 0.0],
            Relation::ChainAliceSwap => [3.0 * nf, 0.0, 0.0],
            Relation::ChainSwapEstimate => [0.0, 3.0, 2.0],
            Relation::ChainPairEstimate => [3.0 * nf, 7.0, 2.0],
            Relation::ChainPaired => [3.0 * nf, 9.0 * (nf - 3.0) / 2.0 + 7.0, nf - 1.0],
            Relation::ChainCancelled => [3.0 * nf, big, 2.0 * (nf - 1.0)],
            Relation::PairAnticomm => [3.0 * nf, big + 1.0, 2.0 * (nf - 1.0)],
        }
    }

    /// The bound at `(ε₀, ε₁, ε₂)`.
    pub fn rhs(self, n: usize, eps: [f64; 3]) -> Result<f64, LedgerError> {
        let s = [
            state_estimate_bound(eps[0])?,
            state_estimate_bound(eps[1])?,
            state_estimate_bound(eps[2])?,
        ];
        let c = self.coefficients(n);
        Ok(c[0] * s[0] + c[1] * s[1] + c[2] * s[2])
    }
}

impl std::fmt::Display for Relation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub(crate) fn check_n(n: usize) -> Result<(), LedgerError> {
    if n == 3 || (n > 3 && n % 4 == 3) {
        Ok(())
    } else {
        Err(LedgerError::UnsupportedN(n))
    }
}

/// `√(2ε)`: distance between `A|Ψ⟩` and `B|Ψ⟩` when `⟨AB⟩ ≥ 1 − ε`.
pub fn state_estimate_bound(eps: f64) -> Result<f64, LedgerError> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(LedgerError::Epsilon(eps));
    }
    Ok((2.0 * eps).sqrt())
}

/// One catalog row (no measured side).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub relation: Relation,
    pub name: String,
    pub summary: bool,
    pub coefficients: [f64; 3],
    pub rhs: f64,
}

/// Every right-hand side for `n` at the given deficits.
pub fn bound_catalog(n: usize, eps: [f64; 3]) -> Result<Vec<CatalogEntry>, LedgerError> {
    for &e in &eps {
        if !(0.0..=2.0).contains(&e) {
            return Err(LedgerError::Epsilon(e));
        }
    }
    Relation::for_n(n)?
        .iter()
        .map(|&r| {
            Ok(CatalogEntry {
                relation: r,
                name: r.name().to_string(),
                summary: r.is_summary(),
                coefficients: r.coefficients(n),
                rhs: r.rhs(n, eps)?,
            })
        })
        .collect()
}

/// Largest summary bound: the δ handed to the isometry theorem.
pub fn catalog_delta(entries: &[CatalogEntry]) -> f64 {
    entries.iter().filter(|e| e.summary).map(|e| e.rhs).fold(0.0, f64::max)
}

pub const ISOMETRY_CAVEAT: &str = "the isometry step turns delta into an O(n^{3/2} delta) error with an unspecified \
constant; only delta and its scaling in n and eps are computed here";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Robustness {
    pub n: usize,
    pub eps: f64,
    pub delta: f64,
    /// `δ / (n √(2ε))`; `None` at `ε = 0`.
    pub ratio: Option<f64>,
    pub note: String,
}

/// δ at `(ε, ε, ε)` with the scaling note.
pub fn final_robustness(n: usize, eps: f64) -> Result<Robustness, LedgerError> {
    let delta = catalog_delta(&bound_catalog(n, [eps; 3])?);
    let s = state_estimate_bound(eps)?;
    Ok(Robustness {
        n,
        eps,
        delta,
        ratio: (s > 0.0).then(|| delta / (n as f64 * s)),
        note: format!(
            "delta grows as n*sqrt(eps), so the final error is O(n^(5/2) sqrt(eps)); {ISOMETRY_CAVEAT}"
        ),
    })
}

/// Least-squares slope of `ln δ` against `ln ε` over `eps_grid`.
pub fn delta_log_slope(n: usize, eps_grid: &[f64]) -> Result<f64, LedgerError> {
    let pts: Vec<(f64, f64)> = eps_grid
        .iter()
        .map(|&e| Ok((e.ln(), final_robustness(n, e)?.delta.ln())))
        .collect::<Result<_, LedgerError>>()?;
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_estimate_examples() {
        assert_eq!(state_estimate_bound(0.0).unwrap(), 0.0);
        assert!((state_estimate_bound(0.02).unwrap() - 0.2).abs() < 1e-15);
        assert!((state_estimate_bound(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!(state_estimate_bound(-0.1).is_err());
    }

    #[test]
    fn zero_deficits_give_zero_catalog() {
        for n in [3, 7, 11] {
            assert!(bound_catalog(n, [0.0; 3]).unwrap().iter().all(|e| e.rhs == 0.0));
        }
    }

    #[test]
    fn small_alice_anticomm_value() {
        let cat = bound_catalog(3, [0.02, 0.01, 0.0]).unwrap();
        let e = cat.iter().find(|e| e.relation == Relation::AnticommAlice).unwrap();
        // 9·√0.04 + 16·√0.02
        assert!((e.rhs - (1.8 + 16.0 * 0.02f64.sqrt())).abs() < 1e-12);
        assert!((e.rhs - 4.0627).abs() < 1e-4);
    }

    #[test]
    fn large_alice_anticomm_hand_expanded() {
        let eps = 1e-3;
        let s = (2.0 * eps as f64).sqrt();
        let cat = bound_catalog(7, [eps; 3]).unwrap();
        let e = cat.iter().find(|e| e.relation == Relation::AnticommAlice).unwrap();
        // 3·7 + 2·6 + (13·6/2 + 17) = 21 + 12 + 56
        assert!((e.rhs - 89.0 * s).abs() < 1e-12);
        let b = cat.iter().find(|e| e.relation == Relation::AnticommBob).unwrap();
        assert!((b.rhs - 93.0 * s).abs() < 1e-12);
    }

    #[test]
    fn catalog_shape() {
        assert_eq!(bound_catalog(3, [0.0; 3]).unwrap().len(), 9);
        assert_eq!(bound_catalog(7, [0.0; 3]).unwrap().len(), 21);
        assert!(bound_catalog(5, [0.0; 3]).is_err());
        assert!(bound_catalog(3, [2.5, 0.0, 0.0]).is_err());
    }

    #[test]
    fn delta_ratio_limits() {
        let r3 = final_robustness(3, 1e-4).unwrap();
        assert!((r3.ratio.unwrap() - 29.0 / 3.0).abs() < 1e-9);
        let mut prev = f64::INFINITY;
        for n in (7..=43).step_by(4) {
            let r = final_robustness(n, 1e-4).unwrap().ratio.unwrap();
            assert!((r - (11.5 + 12.5 / n as f64)).abs() < 1e-9);
            assert!(r < prev);
            prev = r;
        }
        assert_eq!(final_robustness(7, 0.0).unwrap().delta, 0.0);
    }
}
