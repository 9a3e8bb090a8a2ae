//! Repeated-game runner: plays the committed mechanism against a cook
//! policy, accumulates the average-revenue/average-surplus functionals, and
//! runs seeded Monte Carlo replications.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cook::{CookPolicy, PolicyError, PolicySpec};
use crate::curves::{Branch, RewardCurve};
use crate::mechanism::{Fisher, MechanismError, MechanismState};

pub const DEFAULT_ROUNDS: u64 = 100_000;
pub const DEFAULT_BURN_IN: u64 = 10_000;
pub const DEFAULT_STRIDE: u64 = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid game configuration: {0}")]
    Config(String),
    #[error("policy failed at round {round}: {source}")]
    Policy {
        round: u64,
        #[source]
        source: PolicyError,
    },
    #[error("mechanism failed at round {round}: {source}")]
    Mechanism {
        round: u64,
        #[source]
        source: MechanismError,
    },
}

#[derive(Debug, Clone)]
pub struct GameConfig {
    pub curve: RewardCurve,
    /// The cook's true valuation `q`.
    pub cook_type: f64,
    pub policy: PolicySpec,
    pub rounds: u64,
    pub burn_in: u64,
    /// Stride between stored prefix-average points.
    pub stride: u64,
    pub seed: u64,
}

impl GameConfig {
    /// Defaults: 10⁵ rounds, 10⁴ burn-in, stride 100, truthful naive policy.
    pub fn new(curve: RewardCurve, cook_type: f64) -> Self {
        GameConfig {
            curve,
            cook_type,
            policy: PolicySpec::Naive {
                threshold: cook_type,
            },
            rounds: DEFAULT_ROUNDS,
            burn_in: DEFAULT_BURN_IN,
            stride: DEFAULT_STRIDE,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.rounds < 1 {
            return Err(EngineError::Config("rounds must be >= 1".into()));
        }
        if self.burn_in >= self.rounds {
            return Err(EngineError::Config(format!(
                "burn_in ({}) must be < rounds ({})",
                self.burn_in, self.rounds
            )));
        }
        if !(self.cook_type.is_finite() && self.cook_type >= 0.0) {
            return Err(EngineError::Config(format!(
                "cook type must be finite and >= 0, got {}",
                self.cook_type
            )));
        }
        if self.stride < 1 {
            return Err(EngineError::Config("stride must be >= 1".into()));
        }
        if let PolicySpec::Naive { threshold } = self.policy {
            if !(threshold.is_finite() && threshold >= 0.0) {
                return Err(EngineError::Config(format!(
                    "naive threshold must be finite and >= 0, got {threshold}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    pub price: f64,
    /// 1 if accepted.
    pub decision: u8,
    /// Estimate `q_n` when the offer was issued.
    pub estimate: f64,
    pub branch: Branch,
}

impl RoundRecord {
    pub fn accepted(&self) -> bool {
        self.decision == 1
    }

    pub fn revenue(&self) -> f64 {
        if self.accepted() {
            self.price
        } else {
            0.0
        }
    }

    pub fn surplus(&self, cook_type: f64) -> f64 {
        if self.accepted() {
            cook_type - self.price
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GameHistory {
    pub records: Vec<RoundRecord>,
}

impl GameHistory {
    /// Settled rounds of a mechanism state, in order.
    pub fn from_state(state: &MechanismState) -> Self {
        let records = state
            .offers()
            .iter()
            .filter_map(|e| {
                e.decision.map(|accept| RoundRecord {
                    round: e.offer.round,
                    price: e.offer.price,
                    decision: accept as u8,
                    estimate: e.estimate,
                    branch: e.offer.branch,
                })
            })
            .collect();
        GameHistory { records }
    }

    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrefixPoint {
    pub round: u64,
    pub revenue_avg: f64,
    pub surplus_avg: f64,
    pub accept_freq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub revenue_avg: f64,
    pub surplus_avg: f64,
    pub accept_freq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchCounts {
    pub adaptation: u64,
    pub reward: u64,
    pub confirmation: u64,
}

impl BranchCounts {
    pub fn get(&self, b: Branch) -> u64 {
        match b {
            Branch::Adaptation => self.adaptation,
            Branch::Reward => self.reward,
            Branch::Confirmation => self.confirmation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStatistics {
    pub rounds: u64,
    pub burn_in: u64,
    pub cook_type: f64,
    pub seed: u64,
    pub total_revenue: f64,
    pub total_surplus: f64,
    pub accepted: u64,
    /// Full-horizon averages.
    pub overall: Averages,
    /// Averages over rounds after the burn-in.
    pub tail: Averages,
    /// Minimum of each prefix-average series over rounds after the burn-in;
    /// the finite-sample stand-in for the liminf objective.
    pub liminf: Averages,
    pub branch_counts: BranchCounts,
    pub final_estimate: f64,
    /// Decimated prefix averages (every `stride` rounds plus the last).
    #[serde(skip)]
    pub prefix: Vec<PrefixPoint>,
}

impl RunStatistics {
    /// Largest relative residual of `revenue + surplus = q * accept_freq`
    /// over the stored prefix points and the final totals.
    pub fn welfare_residual(&self) -> f64 {
        let q = self.cook_type;
        let relative = |rev: f64, sur: f64, freq: f64| {
            let scale = rev.abs() + sur.abs() + (q * freq).abs();
            if scale == 0.0 {
                0.0
            } else {
                (rev + sur - q * freq).abs() / scale
            }
        };
        self.prefix
            .iter()
            .map(|p| relative(p.revenue_avg, p.surplus_avg, p.accept_freq))
            .chain(std::iter::once(relative(
                self.overall.revenue_avg,
                self.overall.surplus_avg,
                self.overall.accept_freq,
            )))
            .fold(0.0, f64::max)
    }

    /// `round,revenue_avg,surplus_avg,accept_freq` rows.
    pub fn write_prefix_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["round", "revenue_avg", "surplus_avg", "accept_freq"])?;
        for p in &self.prefix {
            w.write_record([
                p.round.to_string(),
                p.revenue_avg.to_string(),
                p.surplus_avg.to_string(),
                p.accept_freq.to_string(),
            ])?;
        }
        w.flush()
    }
}

struct Accumulator {
    cook_type: f64,
    rounds: u64,
    burn_in: u64,
    stride: u64,
    n: u64,
    revenue: CompensatedSum,
    surplus: CompensatedSum,
    accepted: u64,
    tail_revenue: CompensatedSum,
    tail_surplus: CompensatedSum,
    tail_accepted: u64,
    liminf: Averages,
    counts: [u64; 3],
    prefix: Vec<PrefixPoint>,
}

impl Accumulator {
    fn new(config: &GameConfig) -> Self {
        Accumulator {
            cook_type: config.cook_type,
            rounds: config.rounds,
            burn_in: config.burn_in,
            stride: config.stride,
            n: 0,
            revenue: CompensatedSum::default(),
            surplus: CompensatedSum::default(),
            accepted: 0,
            tail_revenue: CompensatedSum::default(),
            tail_surplus: CompensatedSum::default(),
            tail_accepted: 0,
            liminf: Averages {
                revenue_avg: f64::INFINITY,
                surplus_avg: f64::INFINITY,
                accept_freq: f64::INFINITY,
            },
            counts: [0; 3],
            prefix: Vec::with_capacity((config.rounds / config.stride + 1) as usize),
        }
    }

    fn record(&mut self, price: f64, accept: bool, branch: Branch) {
        self.n += 1;
        self.counts[branch.index()] += 1;
        let in_tail = self.n > self.burn_in;
        if accept {
            let surplus = self.cook_type - price;
            self.revenue.add(price);
            self.surplus.add(surplus);
            self.accepted += 1;
            if in_tail {
                self.tail_revenue.add(price);
                self.tail_surplus.add(surplus);
                self.tail_accepted += 1;
            }
        }
        let stored = self.n % self.stride == 0 || self.n == self.rounds;
        if !in_tail && !stored {
            return;
        }
        let avg = self.averages();
        if in_tail {
            self.liminf.revenue_avg = self.liminf.revenue_avg.min(avg.revenue_avg);
            self.liminf.surplus_avg = self.liminf.surplus_avg.min(avg.surplus_avg);
            self.liminf.accept_freq = self.liminf.accept_freq.min(avg.accept_freq);
        }
        if stored {
            self.prefix.push(PrefixPoint {
                round: self.n,
                revenue_avg: avg.revenue_avg,
                surplus_avg: avg.surplus_avg,
                accept_freq: avg.accept_freq,
            });
        }
    }

    fn averages(&self) -> Averages {
        let n = self.n as f64;
        Averages {
            revenue_avg: self.revenue.value() / n,
            surplus_avg: self.surplus.value() / n,
            accept_freq: self.accepted as f64 / n,
        }
    }

    fn finish(self, seed: u64, final_estimate: f64) -> RunStatistics {
        let tail_n = (self.n - self.burn_in) as f64;
        RunStatistics {
            rounds: self.n,
            burn_in: self.burn_in,
            cook_type: self.cook_type,
            seed,
            total_revenue: self.revenue.value(),
            total_surplus: self.surplus.value(),
            accepted: self.accepted,
            overall: self.averages(),
            tail: Averages {
                revenue_avg: self.tail_revenue.value() / tail_n,
                surplus_avg: self.tail_surplus.value() / tail_n,
                accept_freq: self.tail_accepted as f64 / tail_n,
            },
            liminf: self.liminf,
            branch_counts: BranchCounts {
                adaptation: self.counts[0],
                reward: self.counts[1],
                confirmation: self.counts[2],
            },
            final_estimate,
            prefix: self.prefix,
        }
    }
}

/// Plays `config.rounds` rounds of offer → decision → update with an
/// arbitrary policy instance (including external ones).
pub fn run_with_policy(
    config: &GameConfig,
    policy: &mut CookPolicy,
    seed: u64,
) -> Result<(MechanismState, RunStatistics), EngineError> {
    config.validate()?;
    let mut fisher = Fisher::new(seed);
    let mut acc = Accumulator::new(config);
    for round in 1..=config.rounds {
        let offer = fisher
            .offer(&config.curve)
            .map_err(|source| EngineError::Mechanism { round, source })?;
        let accept = policy
            .decide(offer.price, round)
            .map_err(|source| EngineError::Policy { round, source })?;
        fisher
            .settle(accept)
            .map_err(|source| EngineError::Mechanism { round, source })?;
        acc.record(offer.price, accept, offer.branch);
    }
    let state = fisher.into_state();
    let stats = acc.finish(seed, state.estimate());
    Ok((state, stats))
}

/// One seeded game with the configured policy.
pub fn run(config: &GameConfig) -> Result<(GameHistory, RunStatistics), EngineError> {
    let mut policy = CookPolicy::from(&config.policy);
    let (state, stats) = run_with_policy(config, &mut policy, config.seed)?;
    Ok((GameHistory::from_state(&state), stats))
}

/// Minimum of `series[burn_in..]`.
pub fn estimate_liminf(series: &[f64], burn_in: usize) -> Result<f64, EngineError> {
    if burn_in >= series.len() {
        return Err(EngineError::Config(format!(
            "burn-in index {burn_in} is past the end of a series of length {}",
            series.len()
        )));
    }
    Ok(series[burn_in..].iter().copied().fold(f64::INFINITY, f64::min))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of replication `r` under root seed `root`:
/// `splitmix64(root ^ splitmix64(r))`.
pub fn replication_seed(root: u64, replication: u64) -> u64 {
    splitmix64(root ^ splitmix64(replication))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Standard error of the mean; absent for a single replication.
    pub stderr: Option<f64>,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let stderr = (values.len() > 1).then(|| {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        });
        Summary {
            mean,
            stderr,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub replications: u64,
    pub seeds: Vec<u64>,
    pub surplus_avg: Summary,
    pub revenue_avg: Summary,
    pub accept_freq: Summary,
    pub tail_surplus_avg: Summary,
    pub tail_revenue_avg: Summary,
    pub liminf_surplus: Summary,
    pub liminf_revenue: Summary,
    pub max_welfare_residual: f64,
    #[serde(skip)]
    pub runs: Vec<RunStatistics>,
}

/// Runs replications in parallel; replication `r` uses
/// [`replication_seed`]`(config.seed, r)`. The summary is identical to a
/// sequential execution.
pub fn monte_carlo(config: &GameConfig, replications: u64) -> Result<MonteCarloSummary, EngineError> {
    if replications < 1 {
        return Err(EngineError::Config("replications must be >= 1".into()));
    }
    config.validate()?;
    let runs: Vec<RunStatistics> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut policy = CookPolicy::from(&config.policy);
            run_with_policy(config, &mut policy, replication_seed(config.seed, r))
                .map(|(_, stats)| stats)
        })
        .collect::<Result<_, _>>()?;
    let field = |f: fn(&RunStatistics) -> f64| Summary::of(&runs.iter().map(f).collect::<Vec<_>>());
    Ok(MonteCarloSummary {
        replications,
        seeds: runs.iter().map(|s| s.seed).collect(),
        surplus_avg: field(|s| s.overall.surplus_avg),
        revenue_avg: field(|s| s.overall.revenue_avg),
        accept_freq: field(|s| s.overall.accept_freq),
        tail_surplus_avg: field(|s| s.tail.surplus_avg),
        tail_revenue_avg: field(|s| s.tail.revenue_avg),
        liminf_surplus: field(|s| s.liminf.surplus_avg),
        liminf_revenue: field(|s| s.liminf.revenue_avg),
        max_welfare_residual: runs.iter().map(|s| s.welfare_residual()).fold(0.0, f64::max),
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::AcceptanceCurve;

    fn config(q: f64, rounds: u64) -> GameConfig {
        let mut c = GameConfig::new(RewardCurve::new(AcceptanceCurve::Rational).unwrap(), q);
        c.rounds = rounds;
        c.burn_in = rounds / 10;
        c
    }

    #[test]
    fn liminf_examples() {
        assert_eq!(estimate_liminf(&[0.3; 5], 0).unwrap(), 0.3);
        assert_eq!(estimate_liminf(&[0.5, 0.4, 0.45, 0.44], 1).unwrap(), 0.4);
        assert!(estimate_liminf(&[0.5, 0.4], 2).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = config(1.0, 100);
        c.burn_in = 100;
        assert!(matches!(run(&c), Err(EngineError::Config(_))));
        let mut c = config(1.0, 100);
        c.rounds = 0;
        c.burn_in = 0;
        assert!(run(&c).is_err());
        let c = config(-1.0, 100);
        assert!(run(&c).is_err());
    }

    #[test]
    fn zero_type_earns_nothing() {
        let (_, stats) = run(&config(0.0, 5_000)).unwrap();
        assert_eq!(stats.overall.surplus_avg, 0.0);
        assert_eq!(stats.overall.revenue_avg, 0.0);
    }

    #[test]
    fn policy_errors_carry_the_round() {
        let mut c = config(1.0, 100);
        c.policy = PolicySpec::Scripted {
            decisions: vec![true; 10],
        };
        assert!(matches!(run(&c), Err(EngineError::Policy { round: 11, .. })));
    }

    #[test]
    fn history_matches_statistics() {
        let c = config(1.3, 2_000);
        let (history, stats) = run(&c).unwrap();
        assert_eq!(history.records.len(), 2_000);
        let revenue: f64 = history.records.iter().map(|r| r.revenue()).sum();
        let accepted = history.records.iter().filter(|r| r.accepted()).count() as u64;
        assert!((revenue - stats.total_revenue).abs() < 1e-9);
        assert_eq!(accepted, stats.accepted);
        assert!(stats.liminf.surplus_avg <= stats.overall.surplus_avg);
        assert_eq!(stats.prefix.len(), 20);
    }

    #[test]
    fn monte_carlo_single_replication() {
        let c = config(1.0, 1_000);
        let mc = monte_carlo(&c, 1).unwrap();
        assert!(mc.surplus_avg.stderr.is_none());
        assert_eq!(mc.surplus_avg.mean, mc.runs[0].overall.surplus_avg);
        assert_eq!(mc.surplus_avg.min, mc.surplus_avg.max);
    }

    #[test]
    fn replication_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|r| replication_seed(7, r)).collect();
        assert_eq!(seeds.len(), 1000);
    }

    #[test]
    fn compensated_sum_is_accurate() {
        let mut s = CompensatedSum::default();
        for _ in 0..1_000_000 {
            s.add(0.1);
        }
        assert!((s.value() - 100_000.0).abs() < 1e-9);
    }
}
