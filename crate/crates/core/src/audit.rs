//! Ex-post credibility audit: compares observed branch frequencies with the
//! committed distribution.
//!
//! Rounds are grouped into bands of the estimate `q_n`. Within a band, the
//! count of each branch is a sum of independent Bernoulli draws with the
//! per-round committed probabilities, so the expected count and its
//! variance are exact (Poisson-binomial). A cell passes when the observed
//! count lies within `z` standard deviations of its expectation; the
//! overall verdict uses a Bonferroni-adjusted `z` over all judged cells so
//! that the family-wise false-alarm rate stays at the configured level.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::curves::{Branch, CurveError, RewardCurve};
use crate::engine::RoundRecord;

/// Two-sided 99% normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_901;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub band_width: f64,
    /// Bands with fewer rounds are reported but not judged.
    pub min_band_rounds: u64,
    /// Below this many rounds the whole audit is inconclusive.
    pub min_total_rounds: u64,
    /// Per-cell band width in standard deviations.
    pub z: f64,
    /// Family-wise significance level for the overall verdict.
    pub family_alpha: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            band_width: 0.25,
            min_band_rounds: 50,
            min_total_rounds: 100,
            z: Z_99,
            family_alpha: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditVerdict {
    Pass,
    Fail,
    InsufficientSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchCell {
    pub branch: Branch,
    pub observed: u64,
    pub expected: f64,
    /// `z * sqrt(variance)`.
    pub half_width: f64,
    /// `(observed - expected) / sqrt(variance)`; 0 when the variance is 0
    /// and the counts agree.
    pub z_score: f64,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub lower: f64,
    pub upper: f64,
    pub rounds: u64,
    pub judged: bool,
    pub cells: Vec<BranchCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibilityAudit {
    pub rounds: u64,
    pub verdict: AuditVerdict,
    /// Threshold on `|z_score|` applied to judged cells for the verdict.
    pub family_z: f64,
    pub bands: Vec<BandReport>,
}

/// Two-sided normal quantile for a Bonferroni family of `cells` tests.
pub fn bonferroni_z(alpha: f64, cells: usize) -> f64 {
    let normal = Normal::standard();
    normal.inverse_cdf(1.0 - alpha / (2.0 * cells.max(1) as f64))
}

#[derive(Default)]
struct BandTally {
    rounds: u64,
    observed: [u64; 3],
    expected: [f64; 3],
    variance: [f64; 3],
}

pub fn audit_branch_frequencies(
    rc: &RewardCurve,
    rounds: &[RoundRecord],
    config: &AuditConfig,
) -> Result<CredibilityAudit, CurveError> {
    let mut bands: std::collections::BTreeMap<u64, BandTally> = Default::default();
    for r in rounds {
        let dist = rc.branch_distribution(r.estimate)?;
        let band = (r.estimate / config.band_width).floor() as u64;
        let t = bands.entry(band).or_default();
        t.rounds += 1;
        t.observed[r.branch.index()] += 1;
        for b in Branch::ALL {
            let p = dist.probability(b);
            t.expected[b.index()] += p;
            t.variance[b.index()] += p * (1.0 - p);
        }
    }
    let reports: Vec<BandReport> = bands
        .into_iter()
        .map(|(band, t)| {
            let judged = t.rounds >= config.min_band_rounds;
            let cells: Vec<BranchCell> = Branch::ALL
                .iter()
                .map(|&b| {
                    let i = b.index();
                    let sd = t.variance[i].sqrt();
                    let deviation = t.observed[i] as f64 - t.expected[i];
                    let z_score = if sd > 0.0 {
                        deviation / sd
                    } else if deviation.abs() <= 1e-9 {
                        0.0
                    } else {
                        f64::INFINITY.copysign(deviation)
                    };
                    BranchCell {
                        branch: b,
                        observed: t.observed[i],
                        expected: t.expected[i],
                        half_width: config.z * sd,
                        z_score,
                        within: z_score.abs() <= config.z,
                    }
                })
                .collect();
            BandReport {
                lower: band as f64 * config.band_width,
                upper: (band + 1) as f64 * config.band_width,
                rounds: t.rounds,
                judged,
                cells,
            }
        })
        .collect();
    let judged: Vec<&BranchCell> = reports
        .iter()
        .filter(|b| b.judged)
        .flat_map(|b| b.cells.iter())
        .collect();
    let family_z = bonferroni_z(config.family_alpha, judged.len()).max(config.z);
    let verdict = if (rounds.len() as u64) < config.min_total_rounds || judged.is_empty() {
        AuditVerdict::InsufficientSample
    } else if judged.iter().all(|c| c.z_score.abs() <= family_z) {
        AuditVerdict::Pass
    } else {
        AuditVerdict::Fail
    };
    Ok(CredibilityAudit {
        rounds: rounds.len() as u64,
        verdict,
        family_z,
        bands: reports,
    })
}
