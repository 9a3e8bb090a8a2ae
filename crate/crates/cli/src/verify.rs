use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use fishmonger::curves::IntegrationMethod;
use fishmonger::engine::GameConfig;
use fishmonger::oracle::{expectimax_oracle, OracleConfig};
use fishmonger::verifier::{
    check_derivative, check_key_inequality, check_quadrature, check_simplex,
    check_spence_mirrlees, distortion_curve, linear_grid, threshold_sweep, CheckReport, Verdict,
    Witness,
};
use fishmonger::{AcceptanceCurve, RewardCurve};

use crate::config::{ConfigError, FileConfig, Overrides};
use crate::output::OutDir;

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Comma-separated: closed-form, sweep, oracle, all.
    #[arg(long, default_value = "all")]
    pub suite: String,
    /// Adds the configured curve to the closed-form checks. Knot tables are
    /// checked as given, so a non-monotone table fails instead of being
    /// rejected at load time.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Root seed of the sweep smoke test.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Writes `reports.json` here when given.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Suite {
    ClosedForm,
    Sweep,
    Oracle,
}

fn parse_suites(selector: &str) -> Result<Vec<Suite>, ConfigError> {
    let mut suites = Vec::new();
    for part in selector.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match part {
            "closed-form" => suites.push(Suite::ClosedForm),
            "sweep" => suites.push(Suite::Sweep),
            "oracle" => suites.push(Suite::Oracle),
            "all" => suites.extend([Suite::ClosedForm, Suite::Sweep, Suite::Oracle]),
            other => {
                return Err(ConfigError(format!(
                    "unknown suite `{other}` (expected closed-form, sweep, oracle, all)"
                )))
            }
        }
    }
    if suites.is_empty() {
        return Err(ConfigError("empty suite selector".into()));
    }
    suites.sort();
    suites.dedup();
    Ok(suites)
}

fn closed_form_suite(label: &str, rc: &RewardCurve) -> anyhow::Result<Vec<CheckReport>> {
    let fine = linear_grid(0.0, 10.0, 0.05);
    let coarse = linear_grid(0.0, 10.0, 0.1);
    let mut reports = vec![check_simplex(rc, &fine), check_derivative(rc, &fine, 1e-5)];
    if rc.method() == IntegrationMethod::ClosedForm {
        let quad = RewardCurve::with_method(
            rc.acceptance().clone(),
            IntegrationMethod::Quadrature,
            rc.tolerance(),
        )?;
        reports.push(check_quadrature(rc, &quad, &fine));
    }
    reports.push(check_spence_mirrlees(rc, &coarse, &coarse));
    reports.push(check_key_inequality(rc, &coarse, &coarse));
    reports.push(distortion_curve(rc, &[1.0, 10.0, 100.0, 1000.0], None)?.1);
    for r in &mut reports {
        r.name = format!("{label}/{}", r.name);
    }
    Ok(reports)
}

fn sweep_smoke(seed: u64) -> anyhow::Result<CheckReport> {
    let mut base = GameConfig::new(RewardCurve::new(AcceptanceCurve::Rational)?, 2.0);
    base.rounds = 20_000;
    base.burn_in = 2_000;
    base.seed = seed;
    let mut report = threshold_sweep(&base, &[1.0, 1.5, 2.0, 2.5, 3.0], 4)?.report;
    report.name = format!("rational/{}", report.name);
    Ok(report)
}

fn point(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Horizon-1 values against hand enumeration, and optimal >= naive on small
/// trees.
fn oracle_suite() -> anyhow::Result<Vec<CheckReport>> {
    let rc = RewardCurve::new(AcceptanceCurve::Rational)?;
    let mut hand = CheckReport {
        name: "oracle/horizon-1-enumeration".into(),
        grid: "G in {1,2,3}, q in {0.25,0.5,1,2}".into(),
        worst_violation: 0.0,
        tolerance: 0.0,
        verdict: Verdict::Pass,
        witnesses: Vec::new(),
        notes: Vec::new(),
    };
    for grid in [1u32, 2, 3] {
        for q in [0.25, 0.5, 1.0, 2.0] {
            let r = expectimax_oracle(&rc, &OracleConfig::new(1, grid, q))?;
            let g = grid as f64;
            let expect: f64 = (1..=grid).map(|j| (q - (j as f64 - 0.5) / g).max(0.0) / g).sum();
            let miss = (r.optimal - expect).abs().max((r.naive - expect).abs());
            hand.worst_violation = hand.worst_violation.max(miss);
            if miss > 0.0 {
                hand.witnesses.push(Witness {
                    point: point(&[("G", g), ("q", q)]),
                    detail: format!("optimal {} naive {} hand {expect}", r.optimal, r.naive),
                });
            }
        }
    }
    let mut dominance = CheckReport {
        name: "oracle/optimal-dominates-naive".into(),
        grid: "(H,G,q) in {(2,2,1),(3,2,1),(3,3,0.5),(4,1,2),(4,2,1)}".into(),
        worst_violation: f64::NEG_INFINITY,
        tolerance: 0.0,
        verdict: Verdict::Pass,
        witnesses: Vec::new(),
        notes: Vec::new(),
    };
    for (h, g, q) in [(2, 2, 1.0), (3, 2, 1.0), (3, 3, 0.5), (4, 1, 2.0), (4, 2, 1.0)] {
        let r = expectimax_oracle(&rc, &OracleConfig::new(h, g, q))?;
        dominance.worst_violation = dominance.worst_violation.max(r.naive - r.optimal);
        dominance.notes.push(format!("H={h} G={g} q={q}: gap {}", r.gap));
        if r.optimal < r.naive {
            dominance.witnesses.push(Witness {
                point: point(&[("H", h as f64), ("G", g as f64), ("q", q)]),
                detail: format!("optimal {} below naive {}", r.optimal, r.naive),
            });
        }
    }
    for r in [&mut hand, &mut dominance] {
        if !r.witnesses.is_empty() {
            r.verdict = Verdict::Fail;
        }
    }
    Ok(vec![hand, dominance])
}

pub fn run(args: &VerifyArgs) -> anyhow::Result<bool> {
    let suites = parse_suites(&args.suite)?;
    let configured = match &args.config {
        Some(path) => {
            let cfg = FileConfig::load(path)?.resolve(&Overrides::default())?;
            Some(("configured".to_string(), cfg.reward_curve_unchecked()?))
        }
        None => None,
    };
    let mut reports = Vec::new();
    for suite in suites {
        match suite {
            Suite::ClosedForm => {
                reports.extend(closed_form_suite("rational", &RewardCurve::new(AcceptanceCurve::Rational)?)?);
                reports.extend(closed_form_suite(
                    "exponential(1)",
                    &RewardCurve::new(AcceptanceCurve::exponential(1.0)?)?,
                )?);
                if let Some((label, rc)) = &configured {
                    reports.extend(closed_form_suite(label, rc)?);
                }
            }
            Suite::Sweep => reports.push(sweep_smoke(args.seed.unwrap_or(7))?),
            Suite::Oracle => reports.extend(oracle_suite()?),
        }
    }
    for r in &reports {
        println!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.passed()).count();
    println!("{} checks, {failed} failed", reports.len());
    if let Some(dir) = &args.out_dir {
        let mut out = OutDir::create(dir)?;
        out.write_json("reports.json", &reports)?;
    }
    Ok(failed == 0)
}
