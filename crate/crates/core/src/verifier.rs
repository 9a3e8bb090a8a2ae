//! Numerical checks of the mechanism's guarantees.
//!
//! Closed-form checks evaluate inequalities over grids and report the worst
//! violation together with witnesses. Simulation-backed checks
//! ([`revenue_share_bound`], [`threshold_sweep`]) consume engine output.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cook::PolicySpec;
use crate::curves::{CurveError, RewardCurve};
use crate::engine::{monte_carlo, EngineError, GameConfig, RunStatistics, Summary};

/// Tolerance on closed-form inequalities.
pub const CLOSED_FORM_TOLERANCE: f64 = 1e-9;
/// Tolerance between simulated and stationary per-round payoffs.
pub const STATIONARY_TOLERANCE: f64 = 0.02;

const MAX_WITNESSES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub point: BTreeMap<String, f64>,
    pub detail: String,
}

impl Witness {
    fn new(point: &[(&str, f64)], detail: impl Into<String>) -> Self {
        Witness {
            point: point.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub grid: String,
    /// Largest amount by which the checked inequality is violated; a
    /// nonpositive value is the smallest slack.
    pub worst_violation: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    /// Nonempty whenever the verdict is `Fail`.
    pub witnesses: Vec<Witness>,
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }

    fn skipped(name: &str, grid: String, note: String) -> Self {
        CheckReport {
            name: name.into(),
            grid,
            worst_violation: 0.0,
            tolerance: 0.0,
            verdict: Verdict::Skipped,
            witnesses: Vec::new(),
            notes: vec![note],
        }
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Skipped => "SKIP",
        };
        write!(
            f,
            "[{tag}] {} ({}): worst violation {:.3e}, tolerance {:.1e}",
            self.name, self.grid, self.worst_violation, self.tolerance
        )?;
        for w in &self.witnesses {
            let point: Vec<String> = w.point.iter().map(|(k, v)| format!("{k}={v}")).collect();
            write!(f, "\n    witness {}: {}", point.join(", "), w.detail)?;
        }
        for n in &self.notes {
            write!(f, "\n    note: {n}")?;
        }
        Ok(())
    }
}

/// Tracks the worst violation and collects witnesses for a grid check.
struct Tally {
    worst: f64,
    tolerance: f64,
    witnesses: Vec<(f64, Witness)>,
}

impl Tally {
    fn new(tolerance: f64) -> Self {
        Tally {
            worst: f64::NEG_INFINITY,
            tolerance,
            witnesses: Vec::new(),
        }
    }

    fn observe(&mut self, violation: f64, witness: impl FnOnce() -> Witness) {
        let violation = if violation.is_nan() { f64::INFINITY } else { violation };
        self.worst = self.worst.max(violation);
        if violation > self.tolerance {
            self.witnesses.push((violation, witness()));
        }
    }

    fn report(mut self, name: &str, grid: String, notes: Vec<String>) -> CheckReport {
        self.witnesses.sort_by(|a, b| b.0.total_cmp(&a.0));
        self.witnesses.truncate(MAX_WITNESSES);
        let verdict = if self.witnesses.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        CheckReport {
            name: name.into(),
            grid,
            worst_violation: if self.worst.is_finite() || self.worst > 0.0 {
                self.worst
            } else {
                0.0
            },
            tolerance: self.tolerance,
            verdict,
            witnesses: self.witnesses.into_iter().map(|(_, w)| w).collect(),
            notes,
        }
    }
}

fn describe(grid: &[f64]) -> String {
    match grid {
        [] => "empty".into(),
        [x] => format!("{{{x}}}"),
        [first, .., last] => format!("{} points in [{first}, {last}]", grid.len()),
    }
}

/// `[start, start + step, ..., end]` built by index to avoid drift.
pub fn linear_grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

/// `count` log-spaced points in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

fn curve_failure(tally: &mut Tally, point: &[(&str, f64)], err: CurveError) {
    tally.observe(f64::INFINITY, || Witness::new(point, err.to_string()));
}

/// Every branch probability is `>= -1e-12` and the three sum to one.
pub fn check_simplex(rc: &RewardCurve, q_grid: &[f64]) -> CheckReport {
    let mut tally = Tally::new(crate::curves::SIMPLEX_SLACK);
    for &q in q_grid {
        let (p, r) = match (rc.eval_p(q), rc.eval_r(q)) {
            (Ok(p), Ok(r)) => (p, r),
            (Err(e), _) | (_, Err(e)) => {
                curve_failure(&mut tally, &[("q", q)], e);
                continue;
            }
        };
        let (adaptation, reward, confirmation) = if q == 0.0 {
            (1.0, 0.0, 0.0)
        } else {
            (1.0 - p, r / q, p - r / q)
        };
        let sum_error = (adaptation + reward + confirmation - 1.0).abs();
        let violation = (-adaptation).max(-reward).max(-confirmation).max(sum_error);
        tally.observe(violation, || {
            Witness::new(
                &[("q", q)],
                format!(
                    "branch probabilities ({adaptation}, {reward}, {confirmation}); q·p(q) = {} < R(q) = {r}",
                    q * p
                ),
            )
        });
    }
    tally.report("branch-simplex", describe(q_grid), Vec::new())
}

/// Central difference of `R` against `p` with step `h`, tolerance
/// `1e-6 * (1 + p(q))`. Points closer than `h` to zero are skipped.
pub fn check_derivative(rc: &RewardCurve, q_grid: &[f64], h: f64) -> CheckReport {
    let mut tally = Tally::new(0.0);
    for &q in q_grid.iter().filter(|&&q| q >= h) {
        let result = (|| -> Result<(f64, f64), CurveError> {
            let d = (rc.eval_r(q + h)? - rc.eval_r(q - h)?) / (2.0 * h);
            Ok((d, rc.eval_p(q)?))
        })();
        match result {
            Ok((d, p)) => {
                let tol = 1e-6 * (1.0 + p);
                tally.observe((d - p).abs() - tol, || {
                    Witness::new(&[("q", q)], format!("(R(q+h)-R(q-h))/2h = {d}, p(q) = {p}"))
                });
            }
            Err(e) => curve_failure(&mut tally, &[("q", q)], e),
        }
    }
    let mut report = tally.report(
        "reward-derivative",
        format!("{}, h = {h}", describe(q_grid)),
        Vec::new(),
    );
    report.tolerance = 1e-6;
    report
}

/// Quadrature-backed `R` against the closed form of the same curve.
pub fn check_quadrature(closed: &RewardCurve, quadrature: &RewardCurve, q_grid: &[f64]) -> CheckReport {
    let mut tally = Tally::new(quadrature.tolerance());
    for &q in q_grid {
        match (closed.eval_r(q), quadrature.eval_r(q)) {
            (Ok(a), Ok(b)) => tally.observe((a - b).abs(), || {
                Witness::new(&[("q", q)], format!("closed form {a}, quadrature {b}"))
            }),
            (Err(e), _) | (_, Err(e)) => curve_failure(&mut tally, &[("q", q)], e),
        }
    }
    tally.report("quadrature-vs-closed-form", describe(q_grid), Vec::new())
}

/// `R(q + x) >= R(q) + x p(q)` on every grid pair.
pub fn check_spence_mirrlees(rc: &RewardCurve, q_grid: &[f64], x_grid: &[f64]) -> CheckReport {
    let mut tally = Tally::new(CLOSED_FORM_TOLERANCE);
    for &q in q_grid {
        for &x in x_grid {
            let result = (|| -> Result<(f64, f64), CurveError> {
                Ok((rc.eval_r(q + x)?, rc.eval_r(q)? + x * rc.eval_p(q)?))
            })();
            match result {
                Ok((lhs, rhs)) => tally.observe(rhs - lhs, || {
                    Witness::new(&[("q", q), ("x", x)], format!("R(q+x) = {lhs} < R(q) + x·p(q) = {rhs}"))
                }),
                Err(e) => curve_failure(&mut tally, &[("q", q), ("x", x)], e),
            }
        }
    }
    tally.report(
        "spence-mirrlees",
        format!("q: {}; x: {}", describe(q_grid), describe(x_grid)),
        Vec::new(),
    )
}

/// `(q - q_n) p(q_n) + R(q_n) <= R(q)` on every grid pair; also records
/// whether equality (within 1e-12) happens off the diagonal.
pub fn check_key_inequality(rc: &RewardCurve, q_grid: &[f64], qn_grid: &[f64]) -> CheckReport {
    let mut tally = Tally::new(CLOSED_FORM_TOLERANCE);
    let mut off_diagonal_ties = 0usize;
    for &q in q_grid {
        for &qn in qn_grid {
            let result = (|| -> Result<(f64, f64), CurveError> {
                Ok((rc.naive_payoff(q, qn)?, rc.eval_r(q)?))
            })();
            match result {
                Ok((payoff, r)) => {
                    if q != qn && (payoff - r).abs() <= 1e-12 {
                        off_diagonal_ties += 1;
                    }
                    tally.observe(payoff - r, || {
                        Witness::new(&[("q", q), ("q_n", qn)], format!("(q-q_n)p(q_n)+R(q_n) = {payoff} > R(q) = {r}"))
                    });
                }
                Err(e) => curve_failure(&mut tally, &[("q", q), ("q_n", qn)], e),
            }
        }
    }
    let note = if off_diagonal_ties == 0 {
        "equality only on the diagonal q = q_n".to_string()
    } else {
        format!("{off_diagonal_ties} off-diagonal pairs attain equality within 1e-12 (p flat there)")
    };
    tally.report(
        "key-inequality",
        format!("q: {}; q_n: {}", describe(q_grid), describe(qn_grid)),
        vec![note],
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionRow {
    pub q: f64,
    /// Stationary fisher revenue per round, `q p(q) - R(q)`.
    pub fisher_rate: f64,
    /// Stationary cook surplus per round, `R(q)`.
    pub cook_rate: f64,
    pub ratio: f64,
}

/// Fisher/cook split along `q_list`. Checks that the ratio is strictly
/// decreasing and, when `threshold` is given, below it at the last point.
/// Curves without `p → 1` are skipped.
pub fn distortion_curve(
    rc: &RewardCurve,
    q_list: &[f64],
    threshold: Option<f64>,
) -> Result<(Vec<DistortionRow>, CheckReport), CurveError> {
    let mut rows = Vec::with_capacity(q_list.len());
    for &q in q_list {
        let cook_rate = rc.eval_r(q)?;
        let fisher_rate = q * rc.eval_p(q)? - cook_rate;
        rows.push(DistortionRow {
            q,
            fisher_rate,
            cook_rate,
            ratio: fisher_rate / cook_rate,
        });
    }
    if !rc.acceptance().tends_to_one() {
        let report = CheckReport::skipped(
            "distortion-at-the-top",
            describe(q_list),
            "acceptance curve does not tend to 1; the distortion check does not apply".into(),
        );
        return Ok((rows, report));
    }
    let mut tally = Tally::new(0.0);
    for w in rows.windows(2) {
        if !(w[0].q < w[1].q) {
            tally.observe(f64::INFINITY, || {
                Witness::new(&[("q", w[1].q)], "q list must be strictly increasing")
            });
            continue;
        }
        // strict decrease: violation when ratio(next) >= ratio(prev)
        let delta = w[1].ratio - w[0].ratio;
        let violation = if delta >= 0.0 { delta.max(f64::MIN_POSITIVE) } else { delta };
        tally.observe(violation, || {
            Witness::new(
                &[("q", w[1].q)],
                format!("ratio {} at q={} is not below {} at q={}", w[1].ratio, w[1].q, w[0].ratio, w[0].q),
            )
        });
    }
    let mut notes = Vec::new();
    if rows.len() < 2 {
        notes.push("single point: no monotonicity assertion".into());
    }
    if let (Some(limit), Some(last)) = (threshold, rows.last()) {
        tally.observe(last.ratio - limit, || {
            Witness::new(&[("q", last.q)], format!("ratio {} is not below {limit}", last.ratio))
        });
        notes.push(format!("ratio at q={} must be below {limit}", last.q));
    }
    let report = tally.report("distortion-at-the-top", describe(q_list), notes);
    Ok((rows, report))
}

/// Revenue-share bound for a cook of type `q` imitating type `q_prime`:
/// the fisher's liminf proxy must not exceed `q (epsilon + 1 - p(q'))`, and
/// both the proxy and the final average must be within
/// [`STATIONARY_TOLERANCE`] of the stationary value `q' p(q') - R(q')`.
pub fn revenue_share_bound(
    rc: &RewardCurve,
    q_prime: f64,
    epsilon: f64,
    results: &[RunStatistics],
) -> Result<CheckReport, CurveError> {
    let p_prime = rc.eval_p(q_prime)?;
    let stationary = q_prime * p_prime - rc.eval_r(q_prime)?;
    let mut tally = Tally::new(0.0);
    let mut notes = vec![format!("stationary fisher rate {stationary}")];
    for stats in results {
        let q = stats.cook_type;
        let bound = q * (epsilon + 1.0 - p_prime);
        let proxy = stats.liminf.revenue_avg;
        tally.observe(proxy - bound, || {
            Witness::new(&[("q", q)], format!("fisher liminf proxy {proxy} exceeds bound {bound}"))
        });
        for (label, value) in [("liminf proxy", proxy), ("final average", stats.overall.revenue_avg)] {
            let miss = (value - stationary).abs() - STATIONARY_TOLERANCE;
            tally.observe(miss, || {
                Witness::new(&[("q", q)], format!("fisher {label} {value} is not within {STATIONARY_TOLERANCE} of {stationary}"))
            });
        }
        notes.push(format!("q={q}: bound {bound}, liminf proxy {proxy}"));
    }
    Ok(tally.report(
        "revenue-share-bound",
        format!("q' = {q_prime}, epsilon = {epsilon}, {} runs", results.len()),
        notes,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub payoff: Summary,
    /// `(q - x) p(x) + R(x)`.
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub cook_type: f64,
    pub argmax: f64,
    pub rows: Vec<SweepRow>,
    pub report: CheckReport,
}

impl SweepOutcome {
    /// `threshold,payoff_mean,payoff_stderr,predicted` rows.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["threshold", "payoff_mean", "payoff_stderr", "predicted"])?;
        for r in &self.rows {
            w.write_record([
                r.threshold.to_string(),
                r.payoff.mean.to_string(),
                r.payoff.stderr.map(|s| s.to_string()).unwrap_or_default(),
                r.predicted.to_string(),
            ])?;
        }
        w.flush()
    }
}

/// Long-run payoff of `naive(x)` for each `x`, by Monte Carlo with common
/// seeds across thresholds. Checks that the empirical argmax is within one
/// grid step of the true type and that each payoff is within
/// [`STATIONARY_TOLERANCE`] of `(q - x) p(x) + R(x)`.
pub fn threshold_sweep(
    base: &GameConfig,
    thresholds: &[f64],
    replications: u64,
) -> Result<SweepOutcome, EngineError> {
    if thresholds.is_empty() {
        return Err(EngineError::Config("threshold grid is empty".into()));
    }
    let q = base.cook_type;
    let mut rows = Vec::with_capacity(thresholds.len());
    for &x in thresholds {
        let mut config = base.clone();
        config.policy = PolicySpec::Naive { threshold: x };
        let mc = monte_carlo(&config, replications)?;
        let predicted = base
            .curve
            .naive_payoff(q, x)
            .map_err(|e| EngineError::Config(e.to_string()))?;
        rows.push(SweepRow {
            threshold: x,
            payoff: mc.surplus_avg,
            predicted,
        });
    }
    let best = rows
        .iter()
        .fold(&rows[0], |best, r| if r.payoff.mean > best.payoff.mean { r } else { best });
    let argmax = best.threshold;
    let step = thresholds
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0, f64::max);

    let mut tally = Tally::new(0.0);
    let mut notes = vec![format!("empirical argmax x = {argmax}")];
    if rows.len() > 1 {
        tally.observe((argmax - q).abs() - step, || {
            Witness::new(&[("argmax", argmax), ("q", q)], format!("argmax is more than one grid step ({step}) from q"))
        });
    } else {
        notes.push("single threshold: no argmax assertion".into());
    }
    for r in &rows {
        tally.observe((r.payoff.mean - r.predicted).abs() - STATIONARY_TOLERANCE, || {
            Witness::new(
                &[("x", r.threshold)],
                format!("payoff {} is not within {STATIONARY_TOLERANCE} of {}", r.payoff.mean, r.predicted),
            )
        });
    }
    let report = tally.report(
        "threshold-sweep",
        format!("q = {q}, x: {}, {replications} replications x {} rounds", describe(thresholds), base.rounds),
        notes,
    );
    Ok(SweepOutcome {
        cook_type: q,
        argmax,
        rows,
        report,
    })
}
