//! A single live game: the committed mechanism, its event log, and the
//! views handed to the cook before and after the game ends.

use std::collections::HashMap;

use fishmonger::audit::{audit_branch_frequencies, AuditConfig, CredibilityAudit};
use fishmonger::{CurveSpec, Fisher, GameHistory, RewardCurve, RoundRecord};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::PlayError;

pub const DEFAULT_ROUND_CAP: u64 = 200;
/// Short game for a first human session.
pub const SHORT_ROUND_CAP: u64 = 20;

pub const MECHANISM_DESCRIPTION: &str = "Each round, with q_n the current estimate: \
with probability 1 - p(q_n) offer a price drawn uniformly from [q_n, q_n + 1] \
(adaptation; acceptance raises q_n to that price); with probability R(q_n)/q_n \
offer price 0 (reward); otherwise offer q_n (confirmation; refusal lowers q_n \
by the demotion rule). q_0 = 0 and R(q) is the integral of p from 0 to q.";

/// Hex SHA-256 of the seed's 8 little-endian bytes.
pub fn seed_commitment(seed: u64) -> String {
    hex::encode(Sha256::digest(seed.to_le_bytes()))
}

pub(crate) fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SessionStatus {
    AwaitingDecision,
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinishReason {
    RoundCap,
    Requested,
}

/// One line of the persisted session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum Event {
    Created {
        session_id: String,
        curve: CurveSpec,
        seed: u64,
        /// Hash published to the cook at creation.
        seed_sha256: String,
        round_cap: u64,
        at_ms: u64,
    },
    /// The offer that was decided on, and the decision.
    Decision {
        round: u64,
        price: f64,
        accept: bool,
        token: String,
        at_ms: u64,
    },
    Finished {
        reason: FinishReason,
        at_ms: u64,
    },
}

/// What the fisher publishes at creation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Commitment {
    pub curve: CurveSpec,
    pub mechanism: String,
    pub seed_sha256: String,
    pub round_cap: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfferView {
    pub round: u64,
    pub price: f64,
}

/// A settled round as the cook saw it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PublicRound {
    pub round: u64,
    pub price: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicStats {
    pub rounds_played: u64,
    pub accepted: u64,
    pub revenue_total: f64,
    pub round_cap: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreatedView {
    pub session_id: String,
    pub commitment: Commitment,
    pub offer: OfferView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfferResponse {
    pub session_id: String,
    pub status: SessionStatus,
    pub offer: OfferView,
    pub stats: PublicStats,
    pub price_history: Vec<PublicRound>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionOutcome {
    pub round: u64,
    pub price: f64,
    pub accepted: bool,
    /// What the fisher earned this round.
    pub revenue: f64,
    pub status: SessionStatus,
    pub next_offer: Option<OfferView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinishView {
    pub session_id: String,
    pub status: SessionStatus,
    pub reason: FinishReason,
    pub rounds_played: u64,
    /// Decimal string so that clients without 64-bit integers keep every bit.
    pub seed: String,
    pub seed_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryView {
    pub session_id: String,
    pub status: SessionStatus,
    pub stats: PublicStats,
    pub rounds: Vec<PublicRound>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub session_id: String,
    pub curve: CurveSpec,
    pub seed: String,
    pub seed_sha256: String,
    /// `sha256(seed)` equals the hash published at creation.
    pub commitment_verified: bool,
    /// Re-running the mechanism from the seed and the logged decisions
    /// produced the same records, byte for byte.
    pub replay_identical: bool,
    pub credibility: CredibilityAudit,
    /// Settled rounds with branch labels and the estimate trace.
    pub rounds: Vec<RoundRecord>,
}

#[derive(Debug, Clone)]
struct TokenEntry {
    accept: bool,
    outcome: DecisionOutcome,
}

/// Parameters for a new session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateRequest {
    pub curve: CurveSpec,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub round_cap: Option<u64>,
}

pub struct Session {
    id: String,
    spec: CurveSpec,
    curve: RewardCurve,
    seed: u64,
    published_sha256: String,
    round_cap: u64,
    fisher: Fisher,
    status: SessionStatus,
    finish_reason: Option<FinishReason>,
    tokens: HashMap<String, TokenEntry>,
    revenue_total: f64,
}

/// Curves a remote client may commit to. File-backed tables would make the
/// server read arbitrary paths, so they are refused here.
pub fn build_public_curve(spec: &CurveSpec) -> Result<RewardCurve, PlayError> {
    if let CurveSpec::Tabulated { .. } = spec {
        return Err(PlayError::InvalidCurve(
            "file-backed curves are not accepted; send the table inline as piecewise-linear knots"
                .into(),
        ));
    }
    let acceptance = spec.build().map_err(|e| PlayError::InvalidCurve(e.to_string()))?;
    RewardCurve::new(acceptance).map_err(|e| PlayError::InvalidCurve(e.to_string()))
}

impl Session {
    /// Builds the session and its `Created` event; the first offer is drawn.
    pub fn create(
        id: String,
        spec: CurveSpec,
        seed: u64,
        round_cap: u64,
    ) -> Result<(Session, Event), PlayError> {
        if round_cap == 0 {
            return Err(PlayError::InvalidRequest("round_cap must be at least 1".into()));
        }
        let curve = build_public_curve(&spec)?;
        let mut session = Session {
            id: id.clone(),
            spec: spec.clone(),
            curve,
            seed,
            published_sha256: seed_commitment(seed),
            round_cap,
            fisher: Fisher::new(seed),
            status: SessionStatus::AwaitingDecision,
            finish_reason: None,
            tokens: HashMap::new(),
            revenue_total: 0.0,
        };
        session.fisher.offer(&session.curve)?;
        let event = Event::Created {
            session_id: id,
            curve: spec,
            seed,
            seed_sha256: session.published_sha256.clone(),
            round_cap,
            at_ms: now_ms(),
        };
        Ok((session, event))
    }

    /// Rebuilds a session from its log. Logged prices must match the
    /// replayed offers.
    pub fn restore(events: &[Event]) -> Result<Session, PlayError> {
        let corrupt = |line: usize, reason: &str| PlayError::CorruptLog {
            line,
            reason: reason.to_string(),
        };
        let Some(Event::Created {
            session_id,
            curve,
            seed,
            seed_sha256,
            round_cap,
            ..
        }) = events.first()
        else {
            return Err(corrupt(1, "log does not start with a created event"));
        };
        let (mut session, _) =
            Session::create(session_id.clone(), curve.clone(), *seed, *round_cap)?;
        session.published_sha256 = seed_sha256.clone();
        for (i, event) in events.iter().enumerate().skip(1) {
            match event {
                Event::Created { .. } => return Err(corrupt(i + 1, "duplicate created event")),
                Event::Decision {
                    round,
                    price,
                    accept,
                    token,
                    ..
                } => {
                    let pending = session
                        .pending()
                        .ok_or_else(|| corrupt(i + 1, "decision after finish"))?;
                    if pending.round != *round || pending.price.to_bits() != price.to_bits() {
                        return Err(corrupt(i + 1, "logged offer differs from replayed offer"));
                    }
                    session.apply(*accept, token.clone())?;
                }
                Event::Finished { reason, .. } => {
                    if session.status == SessionStatus::Finished {
                        return Err(corrupt(i + 1, "duplicate finished event"));
                    }
                    session.close(*reason);
                }
            }
        }
        Ok(session)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rounds_played(&self) -> u64 {
        self.fisher.state().offers().iter().filter(|e| e.decision.is_some()).count() as u64
    }

    /// True when the cap was reached but no `Finished` event exists yet.
    pub fn cap_reached(&self) -> bool {
        self.status != SessionStatus::Finished && self.rounds_played() >= self.round_cap
    }

    pub fn commitment(&self) -> Commitment {
        Commitment {
            curve: self.spec.clone(),
            mechanism: MECHANISM_DESCRIPTION.to_string(),
            seed_sha256: self.published_sha256.clone(),
            round_cap: self.round_cap,
        }
    }

    fn pending(&self) -> Option<OfferView> {
        if self.status == SessionStatus::Finished {
            return None;
        }
        self.fisher.state().pending().map(|o| OfferView {
            round: o.round,
            price: o.price,
        })
    }

    fn stats(&self) -> PublicStats {
        PublicStats {
            rounds_played: self.rounds_played(),
            accepted: self.fisher.state().accepted(),
            revenue_total: self.revenue_total,
            round_cap: self.round_cap,
        }
    }

    fn public_rounds(&self) -> Vec<PublicRound> {
        self.fisher
            .state()
            .offers()
            .iter()
            .filter_map(|e| {
                e.decision.map(|accepted| PublicRound {
                    round: e.offer.round,
                    price: e.offer.price,
                    accepted,
                })
            })
            .collect()
    }

    pub fn created_view(&self) -> CreatedView {
        CreatedView {
            session_id: self.id.clone(),
            commitment: self.commitment(),
            offer: self.pending().expect("fresh session has an offer"),
        }
    }

    pub fn offer_view(&self) -> Result<OfferResponse, PlayError> {
        let offer = self.pending().ok_or(PlayError::SessionFinished)?;
        Ok(OfferResponse {
            session_id: self.id.clone(),
            status: self.status,
            offer,
            stats: self.stats(),
            price_history: self.public_rounds(),
        })
    }

    pub fn history_view(&self) -> HistoryView {
        HistoryView {
            session_id: self.id.clone(),
            status: self.status,
            stats: self.stats(),
            rounds: self.public_rounds(),
        }
    }

    /// Checks a decision against the token table. `Ok(Some(_))` is a repeat
    /// of an earlier submission; `Ok(None)` means the decision is new and
    /// `event` should be persisted before calling [`Session::commit_decision`].
    pub fn prepare_decision(
        &self,
        accept: bool,
        token: Option<&str>,
    ) -> Result<Result<DecisionOutcome, Event>, PlayError> {
        let token = match token {
            Some(t) if !t.trim().is_empty() => t,
            _ => return Err(PlayError::MissingToken),
        };
        if let Some(entry) = self.tokens.get(token) {
            return if entry.accept == accept {
                Ok(Ok(entry.outcome.clone()))
            } else {
                Err(PlayError::TokenReused)
            };
        }
        let offer = self.pending().ok_or(PlayError::SessionFinished)?;
        Ok(Err(Event::Decision {
            round: offer.round,
            price: offer.price,
            accept,
            token: token.to_string(),
            at_ms: now_ms(),
        }))
    }

    /// Applies a decision already written to the log.
    pub fn commit_decision(&mut self, event: &Event) -> Result<DecisionOutcome, PlayError> {
        match event {
            Event::Decision { accept, token, .. } => self.apply(*accept, token.clone()),
            _ => Err(PlayError::InvalidRequest("not a decision event".into())),
        }
    }

    fn apply(
        &mut self,
        accept: bool,
        token: String,
    ) -> Result<DecisionOutcome, PlayError> {
        let offer = self.pending().ok_or(PlayError::SessionFinished)?;
        self.fisher.settle(accept)?;
        let revenue = if accept { offer.price } else { 0.0 };
        self.revenue_total += revenue;
        let at_cap = self.rounds_played() >= self.round_cap;
        if !at_cap {
            self.fisher.offer(&self.curve)?;
        }
        let outcome = DecisionOutcome {
            round: offer.round,
            price: offer.price,
            accepted: accept,
            revenue,
            // the store writes the finished event right after
            status: if at_cap {
                SessionStatus::Finished
            } else {
                SessionStatus::AwaitingDecision
            },
            next_offer: self.pending(),
        };
        self.tokens.insert(
            token,
            TokenEntry {
                accept,
                outcome: outcome.clone(),
            },
        );
        Ok(outcome)
    }

    /// Marks the session finished; any pending offer is void.
    pub fn close(&mut self, reason: FinishReason) {
        self.status = SessionStatus::Finished;
        self.finish_reason = Some(reason);
    }

    pub fn finish_event(&self, reason: FinishReason) -> Option<Event> {
        (self.status != SessionStatus::Finished).then(|| Event::Finished {
            reason,
            at_ms: now_ms(),
        })
    }

    pub fn finish_view(&self) -> Result<FinishView, PlayError> {
        let reason = self.finish_reason.ok_or(PlayError::AuditForbidden)?;
        Ok(FinishView {
            session_id: self.id.clone(),
            status: self.status,
            reason,
            rounds_played: self.rounds_played(),
            seed: self.seed.to_string(),
            seed_sha256: seed_commitment(self.seed),
        })
    }

    /// Settled rounds with branch labels and estimates.
    pub fn records(&self) -> Vec<RoundRecord> {
        GameHistory::from_state(self.fisher.state()).records
    }

    pub fn decisions(&self) -> Vec<bool> {
        self.records().iter().map(RoundRecord::accepted).collect()
    }

    pub fn audit(&self, config: &AuditConfig) -> Result<AuditReport, PlayError> {
        if self.status != SessionStatus::Finished {
            return Err(PlayError::AuditForbidden);
        }
        self.audit_settled(config)
    }

    /// Audit of the rounds settled so far, whatever the status. For operators
    /// reading a log offline; the cook-facing API only audits finished games.
    pub fn audit_settled(&self, config: &AuditConfig) -> Result<AuditReport, PlayError> {
        let records = self.records();
        let replayed = Fisher::replay(&self.curve, self.seed, &self.decisions(), false)?;
        let replay_identical = jsonl(&records) == jsonl(&GameHistory::from_state(replayed.state()).records);
        let credibility = audit_branch_frequencies(&self.curve, &records, config)?;
        Ok(AuditReport {
            session_id: self.id.clone(),
            curve: self.spec.clone(),
            seed: self.seed.to_string(),
            seed_sha256: seed_commitment(self.seed),
            commitment_verified: seed_commitment(self.seed) == self.published_sha256,
            replay_identical,
            credibility,
            rounds: records,
        })
    }
}

fn jsonl(records: &[RoundRecord]) -> Vec<u8> {
    let mut buf = Vec::new();
    GameHistory {
        records: records.to_vec(),
    }
    .write_jsonl(&mut buf)
    .expect("writing to a Vec cannot fail");
    buf
}
