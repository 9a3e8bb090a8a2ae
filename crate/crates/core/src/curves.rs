//! Acceptance curves `p(q)`, the reward curve `R(q) = ∫₀^q p(t) dt`, and the
//! per-round branch mix the committed mechanism draws from.
//!
//! Built-in families (`rational`, `exponential`) have closed-form reward
//! curves. Knot-based curves (`piecewise-linear`, `tabulated`) are linearly
//! interpolated between knots, held constant past the last knot, and their
//! reward curve is computed by adaptive quadrature, cached at the knots.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default absolute tolerance for quadrature-backed reward curves.
pub const DEFAULT_QUADRATURE_TOLERANCE: f64 = 1e-10;

/// Slack allowed on the branch simplex before a curve is declared invalid.
pub const SIMPLEX_SLACK: f64 = 1e-12;

const MAX_QUADRATURE_DEPTH: u32 = 48;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurveError {
    #[error("invalid {family} curve parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        family: &'static str,
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("knots must be finite with nonnegative, strictly increasing q (offending knot index {index})")]
    BadKnots { index: usize },
    #[error("acceptance curve must satisfy p(0) = 0, got p(0) = {0}")]
    NotNormalized(f64),
    #[error("acceptance curve decreases at q = {q}: p falls from {before} to {after}")]
    NonMonotone { q: f64, before: f64, after: f64 },
    #[error("valuation must be finite and nonnegative, got {0}")]
    InvalidValuation(f64),
    #[error("closed-form reward curve is not available for the {0} family")]
    NoClosedForm(CurveFamily),
    #[error(
        "quadrature did not reach tolerance {tolerance:e} on [{a}, {b}] (error estimate {estimate:e})"
    )]
    Quadrature {
        a: f64,
        b: f64,
        estimate: f64,
        tolerance: f64,
    },
    #[error("negative confirmation probability {confirmation:e} at q = {q}; the acceptance curve is not monotone")]
    InvalidBranch { q: f64, confirmation: f64 },
    #[error("cannot load tabulated curve {path}: {reason}")]
    Load { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveFamily {
    Rational,
    Exponential,
    PiecewiseLinear,
    Tabulated,
}

impl fmt::Display for CurveFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CurveFamily::Rational => "rational",
            CurveFamily::Exponential => "exponential",
            CurveFamily::PiecewiseLinear => "piecewise-linear",
            CurveFamily::Tabulated => "tabulated",
        })
    }
}

/// Serializable description of an acceptance curve, as it appears in run
/// configuration files and in the public commitment of a play session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum CurveSpec {
    /// `p(q) = q / (1 + q)`
    Rational,
    /// `p(q) = 1 - exp(-rate * q)`
    Exponential { rate: f64 },
    /// Inline `(q, p)` knots.
    PiecewiseLinear { knots: Vec<[f64; 2]> },
    /// Two-column `(q, p)` CSV file.
    Tabulated { path: PathBuf },
}

impl CurveSpec {
    pub fn build(&self) -> Result<AcceptanceCurve, CurveError> {
        match self {
            CurveSpec::Rational => Ok(AcceptanceCurve::Rational),
            CurveSpec::Exponential { rate } => AcceptanceCurve::exponential(*rate),
            CurveSpec::PiecewiseLinear { knots } => {
                let points: Vec<(f64, f64)> = knots.iter().map(|k| (k[0], k[1])).collect();
                Ok(AcceptanceCurve::PiecewiseLinear(Knots::new(&points)?))
            }
            CurveSpec::Tabulated { path } => {
                Ok(AcceptanceCurve::Tabulated(Knots::new(&read_knots_csv(path)?)?))
            }
        }
    }

    /// Like [`CurveSpec::build`] but knot tables are not checked for
    /// monotonicity, so a verifier can report where a bad table breaks.
    pub fn build_unchecked(&self) -> Result<AcceptanceCurve, CurveError> {
        let points = match self {
            CurveSpec::PiecewiseLinear { knots } => knots.iter().map(|k| (k[0], k[1])).collect(),
            CurveSpec::Tabulated { path } => read_knots_csv(path)?,
            _ => return self.build(),
        };
        let knots = Knots::new_unchecked(&points)?;
        Ok(match self {
            CurveSpec::PiecewiseLinear { .. } => AcceptanceCurve::PiecewiseLinear(knots),
            _ => AcceptanceCurve::Tabulated(knots),
        })
    }

    pub fn family(&self) -> CurveFamily {
        match self {
            CurveSpec::Rational => CurveFamily::Rational,
            CurveSpec::Exponential { .. } => CurveFamily::Exponential,
            CurveSpec::PiecewiseLinear { .. } => CurveFamily::PiecewiseLinear,
            CurveSpec::Tabulated { .. } => CurveFamily::Tabulated,
        }
    }
}

/// Reads `(q, p)` rows from a two-column CSV file. A non-numeric first row
/// is treated as a header.
pub fn read_knots_csv(path: &Path) -> Result<Vec<(f64, f64)>, CurveError> {
    let load_err = |reason: String| CurveError::Load {
        path: path.display().to_string(),
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| load_err(e.to_string()))?;
    let mut points = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| load_err(e.to_string()))?;
        if record.len() != 2 {
            return Err(load_err(format!(
                "line {}: expected 2 columns, found {}",
                line + 1,
                record.len()
            )));
        }
        let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
        match parsed {
            (Ok(q), Ok(p)) => points.push((q, p)),
            _ if line == 0 => continue,
            _ => return Err(load_err(format!("line {}: non-numeric value", line + 1))),
        }
    }
    if points.is_empty() {
        return Err(load_err("no data rows".into()));
    }
    Ok(points)
}

/// Knot table for interpolated curves.
#[derive(Debug, Clone, PartialEq)]
pub struct Knots {
    q: Vec<f64>,
    p: Vec<f64>,
}

impl Knots {
    /// Validated knots: `q` strictly increasing from 0, `p(0) = 0`, values
    /// clamped to `[0, 1]` and nondecreasing after clamping. A missing knot
    /// at `q = 0` is supplied as `(0, 0)`.
    pub fn new(points: &[(f64, f64)]) -> Result<Self, CurveError> {
        let knots = Self::new_unchecked(points)?;
        for i in 1..knots.p.len() {
            if knots.p[i] < knots.p[i - 1] {
                return Err(CurveError::NonMonotone {
                    q: knots.q[i],
                    before: knots.p[i - 1],
                    after: knots.p[i],
                });
            }
        }
        Ok(knots)
    }

    /// Structural validation only: monotonicity is not enforced. Used to
    /// audit candidate curves, never to drive the mechanism.
    pub fn new_unchecked(points: &[(f64, f64)]) -> Result<Self, CurveError> {
        if points.is_empty() {
            return Err(CurveError::BadKnots { index: 0 });
        }
        let mut q = Vec::with_capacity(points.len() + 1);
        let mut p = Vec::with_capacity(points.len() + 1);
        for (index, &(qi, pi)) in points.iter().enumerate() {
            let ordered = q.last().map_or(qi >= 0.0, |&prev| qi > prev);
            if !qi.is_finite() || !pi.is_finite() || !ordered {
                return Err(CurveError::BadKnots { index });
            }
            if index == 0 && qi > 0.0 {
                q.push(0.0);
                p.push(0.0);
            }
            q.push(qi);
            p.push(pi.clamp(0.0, 1.0));
        }
        if p[0] != 0.0 {
            return Err(CurveError::NotNormalized(points[0].1));
        }
        Ok(Knots { q, p })
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.q.iter().copied().zip(self.p.iter().copied())
    }

    fn eval(&self, x: f64) -> f64 {
        let last = self.q.len() - 1;
        if x >= self.q[last] {
            return self.p[last];
        }
        // first knot strictly greater than x; x >= q[0] = 0 so i >= 1
        let i = self.q.partition_point(|&k| k <= x);
        let (q0, q1) = (self.q[i - 1], self.q[i]);
        let (p0, p1) = (self.p[i - 1], self.p[i]);
        p0 + (p1 - p0) * (x - q0) / (q1 - q0)
    }

    fn segment_start(&self, x: f64) -> usize {
        self.q.partition_point(|&k| k <= x).saturating_sub(1)
    }
}

/// The committed, public acceptance curve `p: [0, ∞) → [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum AcceptanceCurve {
    Rational,
    Exponential { rate: f64 },
    PiecewiseLinear(Knots),
    Tabulated(Knots),
}

impl AcceptanceCurve {
    pub fn exponential(rate: f64) -> Result<Self, CurveError> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(CurveError::InvalidParameter {
                family: "exponential",
                name: "rate",
                value: rate,
                reason: "must be finite and > 0",
            });
        }
        Ok(AcceptanceCurve::Exponential { rate })
    }

    pub fn family(&self) -> CurveFamily {
        match self {
            AcceptanceCurve::Rational => CurveFamily::Rational,
            AcceptanceCurve::Exponential { .. } => CurveFamily::Exponential,
            AcceptanceCurve::PiecewiseLinear(_) => CurveFamily::PiecewiseLinear,
            AcceptanceCurve::Tabulated(_) => CurveFamily::Tabulated,
        }
    }

    /// `p(q)`.
    pub fn eval_p(&self, q: f64) -> Result<f64, CurveError> {
        check_valuation(q)?;
        Ok(self.p_unchecked(q))
    }

    fn p_unchecked(&self, q: f64) -> f64 {
        match self {
            AcceptanceCurve::Rational => q / (1.0 + q),
            AcceptanceCurve::Exponential { rate } => -(-rate * q).exp_m1(),
            AcceptanceCurve::PiecewiseLinear(k) | AcceptanceCurve::Tabulated(k) => k.eval(q),
        }
    }

    /// Whether `p(q) → 1` as `q → ∞`.
    pub fn tends_to_one(&self) -> bool {
        match self {
            AcceptanceCurve::Rational | AcceptanceCurve::Exponential { .. } => true,
            AcceptanceCurve::PiecewiseLinear(k) | AcceptanceCurve::Tabulated(k) => {
                k.p.last().copied() == Some(1.0)
            }
        }
    }

    fn knots(&self) -> Option<&Knots> {
        match self {
            AcceptanceCurve::PiecewiseLinear(k) | AcceptanceCurve::Tabulated(k) => Some(k),
            _ => None,
        }
    }
}

fn check_valuation(q: f64) -> Result<(), CurveError> {
    if q.is_finite() && q >= 0.0 {
        Ok(())
    } else {
        Err(CurveError::InvalidValuation(q))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegrationMethod {
    ClosedForm,
    Quadrature,
}

/// `R(q) = ∫₀^q p(t) dt`: the cook's long-run average surplus under truthful
/// play, and the mechanism's reward schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardCurve {
    curve: AcceptanceCurve,
    method: IntegrationMethod,
    tolerance: f64,
    // R at each knot, for knot-based curves
    knot_integrals: Vec<f64>,
}

impl RewardCurve {
    /// Closed form where the family has one, quadrature otherwise.
    pub fn new(curve: AcceptanceCurve) -> Result<Self, CurveError> {
        let method = match curve {
            AcceptanceCurve::Rational | AcceptanceCurve::Exponential { .. } => {
                IntegrationMethod::ClosedForm
            }
            _ => IntegrationMethod::Quadrature,
        };
        Self::with_method(curve, method, DEFAULT_QUADRATURE_TOLERANCE)
    }

    pub fn with_method(
        curve: AcceptanceCurve,
        method: IntegrationMethod,
        tolerance: f64,
    ) -> Result<Self, CurveError> {
        if !(tolerance.is_finite() && tolerance > 0.0) {
            return Err(CurveError::InvalidParameter {
                family: "reward",
                name: "quadrature_tolerance",
                value: tolerance,
                reason: "must be finite and > 0",
            });
        }
        if method == IntegrationMethod::ClosedForm && curve.knots().is_some() {
            return Err(CurveError::NoClosedForm(curve.family()));
        }
        let knot_integrals = match curve.knots() {
            None => Vec::new(),
            Some(k) => {
                let per_segment = tolerance / k.q.len() as f64;
                let mut acc = vec![0.0];
                for w in k.q.windows(2) {
                    let seg = adaptive_simpson(|t| k.eval(t), w[0], w[1], per_segment)?;
                    acc.push(acc.last().unwrap() + seg);
                }
                acc
            }
        };
        Ok(RewardCurve {
            curve,
            method,
            tolerance,
            knot_integrals,
        })
    }

    pub fn acceptance(&self) -> &AcceptanceCurve {
        &self.curve
    }

    pub fn method(&self) -> IntegrationMethod {
        self.method
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn eval_p(&self, q: f64) -> Result<f64, CurveError> {
        self.curve.eval_p(q)
    }

    /// `R(q)`.
    pub fn eval_r(&self, q: f64) -> Result<f64, CurveError> {
        check_valuation(q)?;
        if q == 0.0 {
            return Ok(0.0);
        }
        match (&self.curve, self.method) {
            (AcceptanceCurve::Rational, IntegrationMethod::ClosedForm) => Ok(q - q.ln_1p()),
            (AcceptanceCurve::Exponential { rate }, IntegrationMethod::ClosedForm) => {
                Ok(q + (-rate * q).exp_m1() / rate)
            }
            (AcceptanceCurve::PiecewiseLinear(k), _) | (AcceptanceCurve::Tabulated(k), _) => {
                let i = k.segment_start(q);
                let base = self.knot_integrals[i];
                if i == k.q.len() - 1 {
                    return Ok(base + k.p[i] * (q - k.q[i]));
                }
                Ok(base + adaptive_simpson(|t| k.eval(t), k.q[i], q, self.tolerance)?)
            }
            (curve, IntegrationMethod::Quadrature) => {
                adaptive_simpson(|t| curve.p_unchecked(t), 0.0, q, self.tolerance)
            }
        }
    }

    /// The mixed strategy's branch probabilities at estimate `q_n`:
    /// `(1 - p, R/q_n, p - R/q_n)`, with `(1, 0, 0)` at `q_n = 0`.
    pub fn branch_distribution(&self, q_n: f64) -> Result<BranchDistribution, CurveError> {
        check_valuation(q_n)?;
        if q_n == 0.0 {
            return Ok(BranchDistribution {
                adaptation: 1.0,
                reward: 0.0,
                confirmation: 0.0,
            });
        }
        let p = self.eval_p(q_n)?;
        let reward = self.eval_r(q_n)? / q_n;
        let confirmation = p - reward;
        if confirmation < -SIMPLEX_SLACK {
            return Err(CurveError::InvalidBranch { q: q_n, confirmation });
        }
        Ok(BranchDistribution {
            adaptation: 1.0 - p,
            reward,
            confirmation: confirmation.max(0.0),
        })
    }

    /// Stationary per-round surplus of a cook of type `q` whose estimate is
    /// pinned at `x`: `(q - x) p(x) + R(x)`.
    pub fn naive_payoff(&self, q: f64, x: f64) -> Result<f64, CurveError> {
        check_valuation(q)?;
        Ok((q - x) * self.eval_p(x)? + self.eval_r(x)?)
    }
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64, CurveError> {
    if b <= a {
        return Ok(0.0);
    }
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, MAX_QUADRATURE_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64, CurveError> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(CurveError::Quadrature {
            a,
            b,
            estimate: delta.abs() / 15.0,
            tolerance: tol,
        });
    }
    let l = simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
    let r = simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    Ok(l + r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// Price drawn from `[q_n, q_n + 1]`; acceptance raises the estimate.
    Adaptation,
    /// Price zero.
    Reward,
    /// Price `q_n`; refusal demotes the estimate.
    Confirmation,
}

impl Branch {
    pub const ALL: [Branch; 3] = [Branch::Adaptation, Branch::Reward, Branch::Confirmation];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Adaptation => "adaptation",
            Branch::Reward => "reward",
            Branch::Confirmation => "confirmation",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchDistribution {
    pub adaptation: f64,
    pub reward: f64,
    pub confirmation: f64,
}

impl BranchDistribution {
    pub fn probability(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Adaptation => self.adaptation,
            Branch::Reward => self.reward,
            Branch::Confirmation => self.confirmation,
        }
    }

    /// Maps a uniform draw `u ∈ [0, 1)` to a branch by inverse CDF in the
    /// order adaptation, reward, confirmation.
    pub fn pick(&self, u: f64) -> Branch {
        if u < self.adaptation {
            Branch::Adaptation
        } else if u < self.adaptation + self.reward {
            Branch::Reward
        } else {
            Branch::Confirmation
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rational() -> RewardCurve {
        RewardCurve::new(AcceptanceCurve::Rational).unwrap()
    }

    #[test]
    fn eval_p_examples() {
        assert_eq!(AcceptanceCurve::Rational.eval_p(1.0).unwrap(), 0.5);
        let exp = AcceptanceCurve::exponential(1.0).unwrap();
        assert_abs_diff_eq!(exp.eval_p(2f64.ln()).unwrap(), 0.5, epsilon = 1e-15);
        for c in [AcceptanceCurve::Rational, exp] {
            assert_eq!(c.eval_p(0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn invalid_rate_is_a_configuration_error() {
        for rate in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                AcceptanceCurve::exponential(rate),
                Err(CurveError::InvalidParameter { name: "rate", .. })
            ));
        }
        assert!(AcceptanceCurve::Rational.eval_p(-0.5).is_err());
    }

    #[test]
    fn eval_r_examples() {
        let rc = rational();
        assert_abs_diff_eq!(rc.eval_r(1.0).unwrap(), 0.306853, epsilon = 1e-6);
        assert_abs_diff_eq!(rc.eval_r(1.0).unwrap(), 1.0 - 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(rc.eval_r(100.0).unwrap(), 95.38488, epsilon = 1e-5);
        assert_eq!(rc.eval_r(0.0).unwrap(), 0.0);
    }

    #[test]
    fn branch_distribution_examples() {
        let rc = rational();
        let d = rc.branch_distribution(1.0).unwrap();
        assert_abs_diff_eq!(d.adaptation, 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(d.reward, 0.306853, epsilon = 1e-6);
        assert_abs_diff_eq!(d.confirmation, 0.193147, epsilon = 1e-6);
        let d = rc.branch_distribution(100.0).unwrap();
        assert_abs_diff_eq!(d.adaptation, 0.009901, epsilon = 1e-6);
        assert_abs_diff_eq!(d.reward, 0.953849, epsilon = 1e-6);
        assert_abs_diff_eq!(d.confirmation, 0.036250, epsilon = 1e-6);
        let d = rc.branch_distribution(0.0).unwrap();
        assert_eq!((d.adaptation, d.reward, d.confirmation), (1.0, 0.0, 0.0));
    }

    #[test]
    fn naive_payoff_examples() {
        let rc = rational();
        assert_abs_diff_eq!(rc.naive_payoff(2.0, 1.0).unwrap(), 0.806853, epsilon = 1e-6);
        assert_abs_diff_eq!(rc.naive_payoff(2.0, 2.0).unwrap(), 0.901388, epsilon = 1e-6);
        assert_eq!(rc.naive_payoff(3.5, 3.5).unwrap(), rc.eval_r(3.5).unwrap());
    }

    #[test]
    fn quadrature_matches_closed_form() {
        for curve in [AcceptanceCurve::Rational, AcceptanceCurve::exponential(0.7).unwrap()] {
            let exact = RewardCurve::new(curve.clone()).unwrap();
            let quad = RewardCurve::with_method(
                curve,
                IntegrationMethod::Quadrature,
                DEFAULT_QUADRATURE_TOLERANCE,
            )
            .unwrap();
            for q in [1e-3, 0.1, 1.0, 7.5, 100.0, 1e4] {
                let (a, b) = (exact.eval_r(q).unwrap(), quad.eval_r(q).unwrap());
                assert!((a - b).abs() <= DEFAULT_QUADRATURE_TOLERANCE, "q={q}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn knots_interpolate_and_integrate() {
        let k = Knots::new(&[(0.0, 0.0), (1.0, 0.5), (3.0, 1.0)]).unwrap();
        let rc = RewardCurve::new(AcceptanceCurve::PiecewiseLinear(k)).unwrap();
        assert_eq!(rc.eval_p(0.5).unwrap(), 0.25);
        assert_eq!(rc.eval_p(10.0).unwrap(), 1.0);
        // trapezoids: 0.25 on [0,1], 1.5 on [1,3], then slope 1
        assert_abs_diff_eq!(rc.eval_r(1.0).unwrap(), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(rc.eval_r(2.0).unwrap(), 0.25 + 0.625, epsilon = 1e-12);
        assert_abs_diff_eq!(rc.eval_r(5.0).unwrap(), 0.25 + 1.5 + 2.0, epsilon = 1e-12);
        assert!(rc.acceptance().tends_to_one());
    }

    #[test]
    fn knots_validation() {
        assert!(matches!(
            Knots::new(&[(0.0, 0.0), (1.0, 0.6), (2.0, 0.4)]),
            Err(CurveError::NonMonotone { q, .. }) if q == 2.0
        ));
        assert!(matches!(
            Knots::new(&[(0.0, 0.1), (1.0, 0.6)]),
            Err(CurveError::NotNormalized(_))
        ));
        assert!(matches!(
            Knots::new(&[(0.0, 0.0), (1.0, 0.6), (1.0, 0.7)]),
            Err(CurveError::BadKnots { index: 2 })
        ));
        // clamped into [0, 1], implicit origin
        let k = Knots::new(&[(1.0, 0.5), (2.0, 1.3)]).unwrap();
        assert_eq!(k.points().collect::<Vec<_>>(), vec![(0.0, 0.0), (1.0, 0.5), (2.0, 1.0)]);
        assert!(Knots::new_unchecked(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]).is_ok());
    }

    #[test]
    fn truncated_curve_does_not_tend_to_one() {
        let k = Knots::new(&[(0.0, 0.0), (5.0, 0.8)]).unwrap();
        assert!(!AcceptanceCurve::Tabulated(k).tends_to_one());
    }

    #[test]
    fn non_monotone_curve_breaks_the_simplex() {
        let k = Knots::new_unchecked(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]).unwrap();
        let rc = RewardCurve::new(AcceptanceCurve::PiecewiseLinear(k)).unwrap();
        assert!(matches!(
            rc.branch_distribution(3.0),
            Err(CurveError::InvalidBranch { .. })
        ));
    }

    #[test]
    fn spec_deserializes_by_family_tag() {
        let spec: CurveSpec = serde_json::from_str(r#"{"family":"exponential","rate":2.0}"#).unwrap();
        assert_eq!(spec, CurveSpec::Exponential { rate: 2.0 });
        let err = serde_json::from_str::<CurveSpec>(r#"{"rate":2.0}"#).unwrap_err();
        assert!(err.to_string().contains("family"));
    }

    #[test]
    fn pick_inverts_the_cdf() {
        let d = BranchDistribution { adaptation: 0.5, reward: 0.3, confirmation: 0.2 };
        assert_eq!(d.pick(0.0), Branch::Adaptation);
        assert_eq!(d.pick(0.49), Branch::Adaptation);
        assert_eq!(d.pick(0.5), Branch::Reward);
        assert_eq!(d.pick(0.81), Branch::Confirmation);
    }
}
