use fishmonger::curves::CurveError;
use fishmonger::mechanism::MechanismError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlayError {
    #[error("no session with id {0}")]
    SessionNotFound(String),
    #[error("session finished")]
    SessionFinished,
    #[error("the audit opens once the session is finished")]
    AuditForbidden,
    #[error("a non-empty idempotency token is required")]
    MissingToken,
    #[error("token already used for a different decision")]
    TokenReused,
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("session log line {line}: {reason}")]
    CorruptLog { line: usize, reason: String },
    #[error("storage: {0}")]
    Storage(#[from] std::io::Error),
}

impl PlayError {
    /// Machine-readable code carried in error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            PlayError::SessionNotFound(_) => "session_not_found",
            PlayError::SessionFinished => "session_finished",
            PlayError::AuditForbidden => "audit_forbidden",
            PlayError::MissingToken => "missing_token",
            PlayError::TokenReused => "token_reused",
            PlayError::InvalidCurve(_) => "invalid_curve",
            PlayError::InvalidRequest(_) => "invalid_request",
            PlayError::Mechanism(_) | PlayError::Curve(_) => "mechanism_error",
            PlayError::CorruptLog { .. } => "corrupt_log",
            PlayError::Storage(_) => "storage_error",
        }
    }

    pub fn http_status(&self) -> u16 {
        match self {
            PlayError::SessionNotFound(_) => 404,
            PlayError::SessionFinished | PlayError::MissingToken | PlayError::TokenReused => 409,
            PlayError::AuditForbidden => 403,
            PlayError::InvalidCurve(_) => 422,
            PlayError::InvalidRequest(_) => 400,
            _ => 500,
        }
    }
}
