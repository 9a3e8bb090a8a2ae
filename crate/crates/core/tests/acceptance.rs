//! Acceptance suite. Each test prints one `PASS`/`FAIL` line; run with
//! `cargo test -p fishmonger --test acceptance -- --nocapture --test-threads 1`
//! to see them in order.

use std::time::{Duration, Instant};

use fishmonger::audit::{audit_branch_frequencies, AuditConfig, AuditVerdict, Z_99};
use fishmonger::engine::{monte_carlo, GameConfig, GameHistory};
use fishmonger::mechanism::demote;
use fishmonger::oracle::{expectimax_oracle, OracleConfig};
use fishmonger::verifier::{
    check_key_inequality, check_spence_mirrlees, distortion_curve, revenue_share_bound, linear_grid,
    threshold_sweep,
};
use fishmonger::{AcceptanceCurve, CookPolicy, Fisher, PolicySpec, RewardCurve};

fn rational() -> RewardCurve {
    RewardCurve::new(AcceptanceCurve::Rational).unwrap()
}

fn exponential() -> RewardCurve {
    RewardCurve::new(AcceptanceCurve::exponential(1.0).unwrap()).unwrap()
}

fn verdict(name: &str, ok: bool, elapsed: Duration, limit: Duration, detail: String) {
    let within = elapsed <= limit;
    let tag = if ok && within { "PASS" } else { "FAIL" };
    println!("{tag} {name}: {detail} [{:.2?} / limit {:?}]", elapsed, limit);
    assert!(ok, "{name}: {detail}");
    assert!(within, "{name}: took {elapsed:?}, limit {limit:?}");
}

fn truthful_q1() -> GameConfig {
    let mut c = GameConfig::new(rational(), 1.0);
    c.rounds = 100_000;
    c.burn_in = 10_000;
    c.seed = 20_240_101;
    c
}

#[test]
fn stationary_surplus_and_revenue() {
    let start = Instant::now();
    let mc = monte_carlo(&truthful_q1(), 8).unwrap();
    let surplus = mc.surplus_avg.mean;
    let revenue = mc.revenue_avg.mean;
    let ok = (surplus - 0.306853).abs() <= 0.02 && (revenue - 0.193147).abs() <= 0.02;
    verdict(
        "stationary surplus/revenue",
        ok,
        start.elapsed(),
        Duration::from_secs(10),
        format!("surplus {surplus:.6} (target 0.306853 ± 0.02), revenue {revenue:.6} (target 0.193147 ± 0.02)"),
    );
}

#[test]
fn accept_frequency_and_welfare_identity() {
    let start = Instant::now();
    let mc = monte_carlo(&truthful_q1(), 8).unwrap();
    let freq = mc.accept_freq.mean;
    let residual = mc.max_welfare_residual;
    let points: usize = mc.runs.iter().map(|r| r.prefix.len()).sum();
    let ok = (freq - 0.5).abs() <= 0.02 && residual <= 1e-9 && points > 0;
    verdict(
        "accept frequency / welfare identity",
        ok,
        start.elapsed(),
        Duration::from_secs(10),
        format!("p̂ {freq:.6} (target 0.5 ± 0.02), max relative welfare residual {residual:.2e} over {points} prefixes (limit 1e-9)"),
    );
}

#[test]
fn incentive_compatibility_threshold_sweep() {
    let start = Instant::now();
    let mut base = GameConfig::new(rational(), 2.0);
    base.rounds = 100_000;
    base.burn_in = 10_000;
    base.seed = 7;
    let grid = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
    let sweep = threshold_sweep(&base, &grid, 8).unwrap();
    let rc = rational();
    let mut ok = sweep.argmax == 2.0;
    let mut rows = Vec::new();
    for row in &sweep.rows {
        let closed = rc.naive_payoff(2.0, row.threshold).unwrap();
        ok &= (row.payoff.mean - closed).abs() <= 0.02;
        rows.push(format!("x={}: {:.4} vs {:.4}", row.threshold, row.payoff.mean, closed));
    }
    ok &= sweep.report.passed();
    verdict(
        "incentive compatibility (threshold sweep)",
        ok,
        start.elapsed(),
        Duration::from_secs(60),
        format!("argmax x={} (target 2.0); {}", sweep.argmax, rows.join(", ")),
    );
}

#[test]
fn key_inequality_and_spence_mirrlees() {
    let start = Instant::now();
    let grid = linear_grid(0.0, 10.0, 0.1);
    let mut ok = true;
    let mut worst: f64 = f64::NEG_INFINITY;
    for rc in [rational(), exponential()] {
        let key = check_key_inequality(&rc, &grid, &grid);
        let sm = check_spence_mirrlees(&rc, &grid, &grid);
        ok &= key.passed() && sm.passed();
        ok &= key.worst_violation <= 1e-9 && sm.worst_violation <= 1e-9;
        worst = worst.max(key.worst_violation).max(sm.worst_violation);
    }
    verdict(
        "key inequality & Spence-Mirrlees",
        ok,
        start.elapsed(),
        Duration::from_secs(1),
        format!("rational + exponential(1) on [0,10] step 0.1; worst violation {worst:.3e} (limit 1e-9)"),
    );
}

#[test]
fn distortion_at_the_top() {
    let start = Instant::now();
    let rc = rational();
    let (rows, report) = distortion_curve(&rc, &[1.0, 10.0, 100.0, 1000.0], None).unwrap();
    let analytic = rows[2].ratio;
    let mut c = GameConfig::new(rc, 100.0);
    c.rounds = 100_000;
    c.burn_in = 10_000;
    c.seed = 100;
    let mc = monte_carlo(&c, 1).unwrap();
    let simulated = mc.revenue_avg.mean / mc.surplus_avg.mean;
    let rel = (simulated - analytic).abs() / analytic;
    let ok = report.passed() && (analytic - 0.038004).abs() <= 1e-6 && rel <= 0.15;
    let ratios: Vec<String> = rows.iter().map(|r| format!("{:.6}", r.ratio)).collect();
    verdict(
        "distortion at the top",
        ok,
        start.elapsed(),
        Duration::from_secs(20),
        format!(
            "ratios at q=1,10,100,1000: [{}] strictly decreasing; ratio(100) {analytic:.7} (target 0.038004 ± 1e-6); simulated {simulated:.6} ({:.1}% off, limit 15%)",
            ratios.join(", "),
            rel * 100.0
        ),
    );
}

#[test]
fn revenue_share_is_bounded() {
    let start = Instant::now();
    let rc = rational();
    let mut c = GameConfig::new(rc.clone(), 100.0);
    c.policy = PolicySpec::Naive { threshold: 1.0 };
    c.rounds = 100_000;
    c.burn_in = 10_000;
    c.seed = 1;
    let stats = fishmonger::engine::run(&c).unwrap().1;
    let proxy = stats.liminf.revenue_avg;
    let report = revenue_share_bound(&rc, 1.0, 0.01, std::slice::from_ref(&stats)).unwrap();
    let ok = report.passed() && proxy <= 100.0 * (0.01 + 0.5) && (proxy - 0.193147).abs() <= 0.02;
    verdict(
        "revenue share bound",
        ok,
        start.elapsed(),
        Duration::from_secs(10),
        format!("fisher liminf proxy {proxy:.6} <= 51 and within 0.02 of 0.193147"),
    );
}

#[test]
fn demotion_rule_worked_examples() {
    let start = Instant::now();
    let h = |prices: &[f64], decisions: &[u8]| -> Vec<(f64, bool)> {
        prices.iter().zip(decisions).map(|(&p, &a)| (p, a == 1)).collect()
    };
    let literal = demote(&h(&[0.5, 1.2, 0.9, 0.8], &[1, 0, 0, 1]), f64::INFINITY).unwrap();
    let with_fallback = demote(&h(&[0.5, 1.2, 0.9, 0.8], &[1, 0, 0, 1]), 0.9).unwrap();
    let padded = demote(&h(&[0.5, 0.5], &[1, 0]), 0.5).unwrap();
    let single = demote(&h(&[0.7], &[0]), 0.7).unwrap();
    let ok = literal == (0.9 + 1.2) / 2.0
        && with_fallback == 0.9 * 4.0 / 5.0
        && padded == 0.5 * 2.0 / 3.0
        && single == 0.35;
    verdict(
        "demotion rule",
        ok,
        start.elapsed(),
        Duration::from_secs(1),
        format!("literal {literal} (1.05), fallback {with_fallback} (0.72), padding {padded} (0.333…), single {single} (0.35)"),
    );
}

/// Pinned on first computation; an independent unmemoized brute force
/// produced the same values.
const ORACLE_H4_G2_OPTIMAL: f64 = 1.504969336934035;
const ORACLE_H4_G2_NAIVE: f64 = 1.4670344473698036;
const ORACLE_H4_G2_GAP_BITS: u64 = 0x3fa3_6c33_ac1c_8aa0;

#[test]
fn expectimax_oracle_fixtures() {
    let start = Instant::now();
    let rc = rational();
    let mut ok = true;
    let mut notes = Vec::new();
    for grid in [1u32, 2, 3] {
        for q in [0.25, 0.5, 1.0, 2.0] {
            let r = expectimax_oracle(&rc, &OracleConfig::new(1, grid, q)).unwrap();
            let g = grid as f64;
            let hand: f64 = (1..=grid).map(|j| (q - (j as f64 - 0.5) / g).max(0.0) / g).sum();
            ok &= r.optimal == hand && r.naive == hand;
        }
    }
    notes.push("H=1 matches hand enumeration exactly".to_string());
    for (h, g, q) in [(2, 2, 1.0), (3, 2, 1.0), (3, 3, 0.5), (4, 1, 2.0), (5, 3, 1.0)] {
        let r = expectimax_oracle(&rc, &OracleConfig::new(h, g, q)).unwrap();
        ok &= r.optimal >= r.naive;
    }
    let first = expectimax_oracle(&rc, &OracleConfig::new(4, 2, 1.0)).unwrap();
    let second = expectimax_oracle(&rc, &OracleConfig::new(4, 2, 1.0)).unwrap();
    ok &= first.gap.to_bits() == ORACLE_H4_G2_GAP_BITS
        && second.gap.to_bits() == ORACLE_H4_G2_GAP_BITS
        && first.optimal == ORACLE_H4_G2_OPTIMAL
        && first.naive == ORACLE_H4_G2_NAIVE;
    notes.push(format!(
        "H=4 G=2 q=1: optimal {} naive {} gap {} (bits {:#x})",
        first.optimal,
        first.naive,
        first.gap,
        first.gap.to_bits()
    ));
    verdict("expectimax oracle", ok, start.elapsed(), Duration::from_secs(30), notes.join("; "));
}

#[test]
fn credibility_audit_and_replay() {
    let start = Instant::now();
    let rc = rational();
    let seed = 4242;
    let mut fisher = Fisher::new(seed);
    // scripted client: a naive bot of type 1.2
    let mut bot = CookPolicy::naive(1.2);
    let mut decisions = Vec::with_capacity(10_000);
    let mut stream = Vec::new();
    for round in 1..=10_000u64 {
        let offer = fisher.offer(&rc).unwrap();
        stream.push((offer.round, offer.price));
        let accept = bot.decide(offer.price, round).unwrap();
        decisions.push(accept);
        fisher.settle(accept).unwrap();
    }
    let history = GameHistory::from_state(fisher.state());
    let audit = audit_branch_frequencies(&rc, &history.records, &AuditConfig::default()).unwrap();
    let judged: Vec<_> = audit.bands.iter().filter(|b| b.judged).collect();
    let cells_within = judged.iter().flat_map(|b| &b.cells).all(|c| c.z_score.abs() <= Z_99);

    let replayed = Fisher::replay(&rc, seed, &decisions, false).unwrap();
    let replay_stream: Vec<(u64, f64)> =
        replayed.state().offers().iter().map(|e| (e.offer.round, e.offer.price)).collect();
    let identical = serde_json::to_vec(&stream).unwrap() == serde_json::to_vec(&replay_stream).unwrap();

    let ok = audit.verdict == AuditVerdict::Pass && !judged.is_empty() && cells_within && identical;
    verdict(
        "credibility audit",
        ok,
        start.elapsed(),
        Duration::from_secs(10),
        format!(
            "{} judged bands, all cells inside 99% bands: {cells_within}; verdict {:?}; replay byte-identical: {identical}",
            judged.len(),
            audit.verdict
        ),
    );
}
