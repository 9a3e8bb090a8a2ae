//! The fisher's committed mixed strategy.
//!
//! Each round the fisher holds an estimate `q_n` of the cook's type
//! (`q_0 = 0`) and draws one of three price types from
//! [`RewardCurve::branch_distribution`]:
//!
//! * adaptation: uniform on `[q_n, q_n + 1]`; if accepted, `q_{n+1}` is the price,
//! * reward: price 0; the estimate is unchanged,
//! * confirmation: price `q_n`; a refusal demotes the estimate via [`demote`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curves::{Branch, BranchDistribution, CurveError, RewardCurve};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MechanismError {
    #[error("an offer is already pending a decision")]
    OfferPending,
    #[error("no offer is pending a decision")]
    NoPendingOffer,
    #[error("demotion needs a nonempty price history")]
    EmptyHistory,
    #[error("demotion needs at least one refused price in the history")]
    NoRefusal,
    #[error(transparent)]
    Curve(#[from] CurveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceOffer {
    /// 1-based round index.
    pub round: u64,
    pub price: f64,
    pub branch: Branch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfferEntry {
    pub offer: PriceOffer,
    /// `q_n` at the time the offer was issued.
    pub estimate: f64,
    /// `None` while pending.
    pub decision: Option<bool>,
}

/// Round counter, current estimate, and the full offer/decision history.
#[derive(Debug, Clone, Default)]
pub struct MechanismState {
    round: u64,
    estimate: f64,
    offers: Vec<OfferEntry>,
    accepted: u64,
    cached: Option<(u64, BranchDistribution)>,
}

impl MechanismState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of settled rounds.
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn estimate(&self) -> f64 {
        self.estimate
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn offers(&self) -> &[OfferEntry] {
        &self.offers
    }

    pub fn pending(&self) -> Option<&PriceOffer> {
        self.offers
            .last()
            .filter(|e| e.decision.is_none())
            .map(|e| &e.offer)
    }

    /// Branch mix at the current estimate, recomputed only when it moves.
    pub fn distribution(&mut self, rc: &RewardCurve) -> Result<BranchDistribution, CurveError> {
        let key = self.estimate.to_bits();
        match self.cached {
            Some((bits, dist)) if bits == key => Ok(dist),
            _ => {
                let dist = rc.branch_distribution(self.estimate)?;
                self.cached = Some((key, dist));
                Ok(dist)
            }
        }
    }

    /// Draws the next offer. Consumes exactly two uniforms from `rng` for
    /// adaptation offers and one otherwise.
    pub fn propose<R: Rng + ?Sized>(
        &mut self,
        rc: &RewardCurve,
        rng: &mut R,
    ) -> Result<PriceOffer, MechanismError> {
        if self.pending().is_some() {
            return Err(MechanismError::OfferPending);
        }
        let dist = self.distribution(rc)?;
        let branch = dist.pick(rng.gen::<f64>());
        let price = match branch {
            Branch::Adaptation => self.estimate + rng.gen::<f64>(),
            Branch::Reward => 0.0,
            Branch::Confirmation => self.estimate,
        };
        self.push_offer(branch, price)
    }

    /// Issues a specific offer without sampling; used by exhaustive search.
    pub(crate) fn push_offer(
        &mut self,
        branch: Branch,
        price: f64,
    ) -> Result<PriceOffer, MechanismError> {
        if self.pending().is_some() {
            return Err(MechanismError::OfferPending);
        }
        let offer = PriceOffer {
            round: self.round + 1,
            price,
            branch,
        };
        self.offers.push(OfferEntry {
            offer,
            estimate: self.estimate,
            decision: None,
        });
        Ok(offer)
    }

    /// Settles the pending offer and updates the estimate. Returns the new
    /// estimate.
    pub fn apply_decision(&mut self, accept: bool) -> Result<f64, MechanismError> {
        let entry = match self.offers.last_mut() {
            Some(e) if e.decision.is_none() => e,
            _ => return Err(MechanismError::NoPendingOffer),
        };
        entry.decision = Some(accept);
        let offer = entry.offer;
        if accept {
            self.accepted += 1;
        }
        let next = match (offer.branch, accept) {
            (Branch::Adaptation, true) => offer.price,
            (Branch::Confirmation, false) => {
                let history: Vec<(f64, bool)> = self
                    .offers
                    .iter()
                    .map(|e| (e.offer.price, e.decision.unwrap_or(false)))
                    .collect();
                demote(&history, self.estimate)?
            }
            _ => self.estimate,
        };
        self.round += 1;
        self.estimate = next;
        Ok(next)
    }
}

/// Demoted estimate after a refused confirmation price.
///
/// With `n` prices, `k` of them accepted, sorted descending as
/// `Q'_1 >= ... >= Q'_n`, the candidate is `(Q'_{n-k} + Q'_{n-k-1}) / 2`
/// with `Q'_0 := Q'_1`. If the candidate is not strictly below `estimate`
/// the result is `estimate * n / (n + 1)`.
pub fn demote(history: &[(f64, bool)], estimate: f64) -> Result<f64, MechanismError> {
    if history.is_empty() {
        return Err(MechanismError::EmptyHistory);
    }
    let n = history.len();
    let k = history.iter().filter(|(_, a)| *a).count();
    if k == n {
        return Err(MechanismError::NoRefusal);
    }
    let mut sorted: Vec<f64> = history.iter().map(|(p, _)| *p).collect();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    // 1-based Q'_i with the Q'_0 := Q'_1 padding
    let at = |i: usize| sorted[i.max(1) - 1];
    let candidate = 0.5 * (at(n - k) + at(n - k - 1));
    if candidate < estimate {
        Ok(candidate)
    } else {
        Ok(estimate * n as f64 / (n as f64 + 1.0))
    }
}

/// A mechanism instance bound to its own seeded random stream.
///
/// The stream is ChaCha8 seeded from a `u64`, so the offer sequence is a
/// pure function of `(seed, curve, decisions)`.
#[derive(Debug, Clone)]
pub struct Fisher {
    state: MechanismState,
    rng: ChaCha8Rng,
}

impl Fisher {
    pub fn new(seed: u64) -> Self {
        Fisher {
            state: MechanismState::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn state(&self) -> &MechanismState {
        &self.state
    }

    pub fn into_state(self) -> MechanismState {
        self.state
    }

    pub fn offer(&mut self, rc: &RewardCurve) -> Result<PriceOffer, MechanismError> {
        self.state.propose(rc, &mut self.rng)
    }

    pub fn settle(&mut self, accept: bool) -> Result<f64, MechanismError> {
        self.state.apply_decision(accept)
    }

    /// Rebuilds the offer stream from a seed and a decision log. The result
    /// holds one more offer than there are decisions (the next pending one)
    /// unless `include_pending` is false.
    pub fn replay(
        rc: &RewardCurve,
        seed: u64,
        decisions: &[bool],
        include_pending: bool,
    ) -> Result<Fisher, MechanismError> {
        let mut fisher = Fisher::new(seed);
        for &accept in decisions {
            fisher.offer(rc)?;
            fisher.settle(accept)?;
        }
        if include_pending {
            fisher.offer(rc)?;
        }
        Ok(fisher)
    }
}
