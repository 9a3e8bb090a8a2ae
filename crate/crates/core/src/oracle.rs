//! Exact finite-horizon expectimax for the cook's best response.
//!
//! Chance nodes draw the branch from the committed distribution; the
//! adaptation price is discretized to `G` equally likely atoms at the cell
//! midpoints `q_n + (j - 1/2)/G`. Decision nodes maximize expected
//! undiscounted total surplus over the remaining rounds. The truthful naive
//! policy is evaluated on the same tree.
//!
//! The demotion rule depends on the whole price history, so states are
//! memoized by their canonical form: the multiset of past prices, the
//! accept count, the current estimate, and the remaining depth.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curves::{Branch, CurveError, RewardCurve};
use crate::mechanism::{MechanismError, MechanismState};

pub const DEFAULT_BUDGET: u64 = 50_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("invalid oracle configuration: {0}")]
    Config(String),
    #[error("game tree has about {estimate} leaves, over the budget of {budget}")]
    BudgetExceeded { estimate: u128, budget: u64 },
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub horizon: u32,
    /// Adaptation-price atoms per unit interval.
    pub grid: u32,
    pub cook_type: f64,
    /// Maximum number of leaves `(2 (G + 2))^H`.
    pub budget: u64,
}

impl OracleConfig {
    pub fn new(horizon: u32, grid: u32, cook_type: f64) -> Self {
        OracleConfig {
            horizon,
            grid,
            cook_type,
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn tree_size(&self) -> u128 {
        let fanout = 2 * (self.grid as u128 + 2);
        (0..self.horizon).fold(1u128, |acc, _| acc.saturating_mul(fanout))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Best achievable expected total surplus over the horizon.
    pub optimal: f64,
    /// Expected total surplus of the truthful naive policy.
    pub naive: f64,
    pub gap: f64,
    pub tree_size: u128,
    pub states_evaluated: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Mode {
    Optimal,
    Naive,
}

#[derive(PartialEq, Eq, Hash)]
struct StateKey {
    mode: Mode,
    depth: u32,
    estimate: u64,
    accepted: u64,
    prices: Vec<u64>,
}

struct Search<'a> {
    rc: &'a RewardCurve,
    q: f64,
    grid: u32,
    memo: HashMap<StateKey, f64>,
    evaluated: u64,
}

impl Search<'_> {
    fn key(state: &MechanismState, depth: u32, mode: Mode) -> StateKey {
        let mut prices: Vec<u64> = state.offers().iter().map(|e| e.offer.price.to_bits()).collect();
        prices.sort_unstable();
        StateKey {
            mode,
            depth,
            estimate: state.estimate().to_bits(),
            accepted: state.accepted(),
            prices,
        }
    }

    fn outcomes(&self, state: &mut MechanismState) -> Result<Vec<(f64, Branch, f64)>, OracleError> {
        let dist = state.distribution(self.rc)?;
        let qn = state.estimate();
        let g = self.grid as f64;
        let mut out = Vec::with_capacity(self.grid as usize + 2);
        if dist.adaptation > 0.0 {
            for j in 1..=self.grid {
                out.push((dist.adaptation / g, Branch::Adaptation, qn + (j as f64 - 0.5) / g));
            }
        }
        if dist.reward > 0.0 {
            out.push((dist.reward, Branch::Reward, 0.0));
        }
        if dist.confirmation > 0.0 {
            out.push((dist.confirmation, Branch::Confirmation, qn));
        }
        Ok(out)
    }

    fn child(state: &MechanismState, branch: Branch, price: f64, accept: bool) -> Result<MechanismState, OracleError> {
        let mut next = state.clone();
        next.push_offer(branch, price)?;
        next.apply_decision(accept)?;
        Ok(next)
    }

    fn value(&mut self, state: &MechanismState, depth: u32, mode: Mode) -> Result<f64, OracleError> {
        if depth == 0 {
            return Ok(0.0);
        }
        let key = Self::key(state, depth, mode);
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        self.evaluated += 1;
        let mut scratch = state.clone();
        let mut total = 0.0;
        for (prob, branch, price) in self.outcomes(&mut scratch)? {
            let v = match mode {
                Mode::Optimal => {
                    let accept = (self.q - price)
                        + self.value(&Self::child(state, branch, price, true)?, depth - 1, mode)?;
                    let reject = self.value(&Self::child(state, branch, price, false)?, depth - 1, mode)?;
                    accept.max(reject)
                }
                Mode::Naive => {
                    let accept = price <= self.q;
                    let gain = if accept { self.q - price } else { 0.0 };
                    gain + self.value(&Self::child(state, branch, price, accept)?, depth - 1, mode)?
                }
            };
            total += prob * v;
        }
        self.memo.insert(key, total);
        Ok(total)
    }
}

/// Optimal and naive expected total surplus from `q_0 = 0` over the
/// configured horizon.
pub fn expectimax_oracle(rc: &RewardCurve, oc: &OracleConfig) -> Result<OracleResult, OracleError> {
    if oc.horizon < 1 || oc.grid < 1 {
        return Err(OracleError::Config("horizon and grid must be >= 1".into()));
    }
    if !(oc.cook_type.is_finite() && oc.cook_type >= 0.0) {
        return Err(OracleError::Config(format!("cook type must be >= 0, got {}", oc.cook_type)));
    }
    let tree_size = oc.tree_size();
    if tree_size > oc.budget as u128 {
        return Err(OracleError::BudgetExceeded {
            estimate: tree_size,
            budget: oc.budget,
        });
    }
    let mut search = Search {
        rc,
        q: oc.cook_type,
        grid: oc.grid,
        memo: HashMap::new(),
        evaluated: 0,
    };
    let root = MechanismState::new();
    let optimal = search.value(&root, oc.horizon, Mode::Optimal)?;
    let naive = search.value(&root, oc.horizon, Mode::Naive)?;
    Ok(OracleResult {
        optimal,
        naive,
        gap: optimal - naive,
        tree_size,
        states_evaluated: search.evaluated,
    })
}
