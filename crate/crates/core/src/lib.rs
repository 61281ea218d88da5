//! Simulation, verification and bound checking for the 3×n magic-rectangle
//! self-test of n Bell pairs.
//!
//! Layout:
//! - [`pauli`]: exact Pauli-string algebra.
//! - [`engine`]: analytic and dense quantum predictions.
//! - [`games`]: game specs, win predicates, classical value oracle.
//! - [`coloring`]: the K_n edge colouring that schedules pair checks.
//! - [`strategies`]: honest, noisy and adversarial devices.
//! - [`protocol`]: referee rounds, transcripts, ε estimation.
//! - [`ledger`]: robustness bound catalog and numerical verification.
//! - [`wire`]: referee/prover/state-service harness over framed transports.

pub mod coloring;
pub mod engine;
pub mod games;
pub mod ledger;
pub mod pauli;
pub mod protocol;
pub mod strategies;
pub mod wire;

pub use pauli::{Pauli, PauliError, PauliString, Phase};
