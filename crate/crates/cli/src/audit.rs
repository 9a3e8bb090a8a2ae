use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use fishmonger::audit::{audit_branch_frequencies, AuditConfig, AuditVerdict, CredibilityAudit};
use fishmonger::RoundRecord;
use fishmonger_play::store::parse_log;
use fishmonger_play::Session;

use crate::config::{FileConfig, Overrides};
use crate::output::OutDir;

#[derive(Args, Debug)]
pub struct AuditArgs {
    /// A play session log (`<id>.jsonl`) or a simulated `history.jsonl`.
    pub path: PathBuf,
    /// Curve for a simulated history; session logs carry their own.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Width of the estimate bands.
    #[arg(long)]
    pub band_width: Option<f64>,
    /// Writes `audit.json` here when given.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn summarize(audit: &CredibilityAudit) {
    for band in audit.bands.iter().filter(|b| b.judged) {
        let cells: Vec<String> = band
            .cells
            .iter()
            .map(|c| format!("{:?} {}/{:.1} (z {:+.2})", c.branch, c.observed, c.expected, c.z_score))
            .collect();
        println!("q_n in [{}, {}): {} rounds; {}", band.lower, band.upper, band.rounds, cells.join(", "));
    }
    let unjudged = audit.bands.iter().filter(|b| !b.judged).count();
    println!(
        "{} rounds, {} bands judged, {unjudged} too small; family z {:.3}; verdict {:?}",
        audit.rounds,
        audit.bands.len() - unjudged,
        audit.family_z,
        audit.verdict
    );
}

pub fn run(args: &AuditArgs) -> anyhow::Result<bool> {
    let text = std::fs::read_to_string(&args.path)
        .with_context(|| format!("reading {}", args.path.display()))?;
    let mut config = AuditConfig::default();
    if let Some(w) = args.band_width {
        config.band_width = w;
    }
    let is_session_log = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .and_then(|l| serde_json::from_str::<serde_json::Value>(l).ok())
        .is_some_and(|v| v.get("event").is_some());
    let (report, ok) = if is_session_log {
        let (events, _) = parse_log(&text)?;
        let session = Session::restore(&events)?;
        let report = session.audit_settled(&config)?;
        summarize(&report.credibility);
        println!(
            "seed {} matches published hash: {}; replay identical: {}",
            report.seed, report.commitment_verified, report.replay_identical
        );
        let ok = report.commitment_verified
            && report.replay_identical
            && report.credibility.verdict != AuditVerdict::Fail;
        (serde_json::to_value(&report)?, ok)
    } else {
        let cfg = FileConfig::load_or_default(args.config.as_deref())?.resolve(&Overrides::default())?;
        let rc = cfg.reward_curve()?;
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| serde_json::from_str::<RoundRecord>(l).with_context(|| format!("line {}", i + 1)))
            .collect::<anyhow::Result<Vec<_>>>()?;
        let audit = audit_branch_frequencies(&rc, &records, &config)?;
        summarize(&audit);
        let ok = audit.verdict != AuditVerdict::Fail;
        (serde_json::to_value(&audit)?, ok)
    };
    if let Some(dir) = &args.out_dir {
        OutDir::create(dir)?.write_json("audit.json", &report)?;
    }
    Ok(ok)
}
