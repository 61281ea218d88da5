//! Joint outcome sampling for a device, shared by the in-process driver and
//! the wire state service.

use std::sync::OnceLock;

use rand::Rng;

use crate::engine::analytic::PairTables;
use crate::engine::measure::{joint_distribution_tables, outcomes_from_mask};
use crate::engine::{measure_joint, Observable, SharedState};
use crate::pauli::PauliString;
use crate::strategies::{DeviceModel, RoundType};

use super::ProtocolError;

/// Largest joint set (Alice + Bob observables) sampled from an exact table.
pub const MAX_EXACT_SET: usize = 18;

/// Cumulative distribution over outcome masks.
#[derive(Debug)]
struct Cdf {
    cumulative: Vec<f64>,
}

impl Cdf {
    fn new(probs: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Cdf { cumulative }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("non-empty");
        let u = rng.gen::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= u);
        // guard against round-off at the top end
        let mut idx = idx.min(self.cumulative.len() - 1);
        while idx > 0 && self.cumulative[idx] == self.cumulative[idx - 1] {
            idx -= 1;
        }
        idx
    }
}

enum Route {
    Exact { tables: PairTables, cache: Vec<OnceLock<Cdf>> },
    Dense { state: OnceLock<SharedState> },
}

/// Samples `(a, b)` for any question pair of one device.
pub struct JointSampler {
    device: DeviceModel,
    route: Route,
}

impl std::fmt::Debug for JointSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let route = match self.route {
            Route::Exact { .. } => "exact",
            Route::Dense { .. } => "dense",
        };
        f.debug_struct("JointSampler").field("n", &self.device.n()).field("route", &route).finish()
    }
}

fn slot(c: RoundType, x: usize, y: usize, n: usize) -> usize {
    (c.code() as usize * 3 + (x - 1)) * n + (y - 1)
}

impl JointSampler {
    pub fn new(device: DeviceModel) -> Result<Self, ProtocolError> {
        let n = device.n();
        let biggest = n + n.max(3);
        let route = match device.noise() {
            Some(noise) if device.is_pauli_bell() && biggest <= MAX_EXACT_SET => Route::Exact {
                tables: PairTables::new(n, noise)?,
                cache: (0..9 * n).map(|_| OnceLock::new()).collect(),
            },
            _ => {
                log::info!("dense sampling route for n = {n}");
                Route::Dense { state: OnceLock::new() }
            }
        };
        Ok(JointSampler { device, route })
    }

    pub fn device(&self) -> &DeviceModel {
        &self.device
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.route, Route::Exact { .. })
    }

    fn sets(&self, c: RoundType, x: usize, y: usize) -> Result<(&[Observable], &[Observable]), ProtocolError> {
        let n = self.device.n();
        if !(1..=3).contains(&x) || y == 0 || y > n {
            return Err(ProtocolError::Input(format!("x = {x}, y = {y} for n = {n}")));
        }
        let bob = self
            .device
            .bob_set(c, y)
            .ok_or_else(|| ProtocolError::Input(format!("device has no {c:?} sets")))?;
        Ok((self.device.alice_set(x), bob))
    }

    /// Exact joint outcome law for the question pair; bit `i` of the index
    /// set means observable `i` (Alice's first) returned `-1`.
    pub fn distribution(&self, c: RoundType, x: usize, y: usize) -> Result<Vec<f64>, ProtocolError> {
        let (a, b) = self.sets(c, x, y)?;
        let all: Vec<Observable> = a.iter().chain(b).cloned().collect();
        match &self.route {
            Route::Exact { tables, .. } => {
                let ps: Vec<PauliString> = all.iter().map(|o| o.as_pauli().unwrap().clone()).collect();
                Ok(joint_distribution_tables(&ps, tables)?)
            }
            Route::Dense { .. } => {
                let state = self.dense_state()?;
                Ok(crate::engine::joint_distribution_dense(state, &all)?)
            }
        }
    }

    fn dense_state(&self) -> Result<&SharedState, ProtocolError> {
        match &self.route {
            Route::Dense { state } => {
                if let Some(s) = state.get() {
                    return Ok(s);
                }
                let s = self.device.prepare_state()?;
                Ok(state.get_or_init(|| s))
            }
            Route::Exact { .. } => unreachable!("dense state requested on exact route"),
        }
    }

    /// Draws Alice's and Bob's answers for `(c, x, y)`.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        c: RoundType,
        x: usize,
        y: usize,
        rng: &mut R,
    ) -> Result<(Vec<i8>, Vec<i8>), ProtocolError> {
        let (a, b) = self.sets(c, x, y)?;
        let ka = a.len();
        let k = ka + b.len();
        let outcomes = match &self.route {
            Route::Exact { cache, .. } => {
                let idx = slot(c, x, y, self.device.n());
                let cdf = match cache[idx].get() {
                    Some(cdf) => cdf,
                    None => {
                        let probs = self.distribution(c, x, y)?;
                        cache[idx].get_or_init(|| Cdf::new(&probs))
                    }
                };
                outcomes_from_mask(cdf.draw(rng), k)
            }
            Route::Dense { .. } => {
                let all: Vec<Observable> = a.iter().chain(b).cloned().collect();
                measure_joint(self.dense_state()?, &all, rng)?.0
            }
        };
        let (oa, ob) = outcomes.split_at(ka);
        Ok((oa.to_vec(), ob.to_vec()))
    }
}
