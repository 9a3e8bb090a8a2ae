//! Live play against the committed pricing mechanism.
//!
//! A remote cook (a person behind a browser, or a program) receives one
//! price per round and answers accept or refuse. The server never reveals
//! the branch that produced a price or the current estimate until the game
//! is over; it publishes the curve and a SHA-256 hash of the seed up front
//! and reveals the seed at the end, so the whole offer stream can be
//! replayed and audited.

pub mod api;
pub mod error;
pub mod session;
pub mod store;

pub use api::{router, DecisionRequest};
pub use error::PlayError;
pub use session::{
    seed_commitment, AuditReport, CreateRequest, Event, Session, SessionStatus, DEFAULT_ROUND_CAP,
    SHORT_ROUND_CAP,
};
pub use store::SessionStore;
