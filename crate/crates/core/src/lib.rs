//! Incentive-compatible committed pricing for the repeated posted-price
//! auction.
//!
//! A seller (the fisher) repeatedly offers one unit to a single buyer (the
//! cook) whose valuation `q` is unknown. The fisher commits to a public
//! acceptance curve `p(q)` and a mixed pricing rule built from it; against
//! that rule, accepting exactly the prices `<= q` is the cook's best
//! long-run response, earning `R(q) = ∫₀^q p` per round.
//!
//! * [`curves`]: acceptance and reward curves, branch distribution
//! * [`mechanism`]: the fisher's state machine and demotion rule
//! * [`cook`]: buyer policies
//! * [`engine`]: seeded game runner and Monte Carlo
//! * [`verifier`]: grid and simulation checks of the guarantees
//! * [`oracle`]: finite-horizon expectimax best response
//! * [`audit`]: ex-post branch-frequency audit

pub mod audit;
pub mod cook;
pub mod curves;
pub mod engine;
pub mod mechanism;
pub mod oracle;
pub mod verifier;

pub use cook::{CookPolicy, PolicySpec};
pub use curves::{AcceptanceCurve, Branch, BranchDistribution, CurveSpec, RewardCurve};
pub use engine::{monte_carlo, run, GameConfig, GameHistory, RoundRecord, RunStatistics};
pub use mechanism::{demote, Fisher, MechanismState, PriceOffer};
