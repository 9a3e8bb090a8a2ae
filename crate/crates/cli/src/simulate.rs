use fishmonger::engine::{monte_carlo, run as run_game, RunStatistics};
use fishmonger::{Branch, RewardCurve};

use crate::config::FileConfig;
use crate::output::OutDir;
use crate::RunArgs;

/// `q, p, R` and the branch distribution on an even grid up to `max(4, 2q)`.
fn write_curves(rc: &RewardCurve, q: f64, buf: &mut Vec<u8>) -> anyhow::Result<()> {
    let top = (2.0 * q).max(4.0);
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(["q", "p", "R", "adaptation", "reward", "confirmation"])?;
    for i in 0..=200 {
        let x = top * i as f64 / 200.0;
        let d = rc.branch_distribution(x)?;
        w.write_record([
            x.to_string(),
            rc.eval_p(x)?.to_string(),
            rc.eval_r(x)?.to_string(),
            d.probability(Branch::Adaptation).to_string(),
            d.probability(Branch::Reward).to_string(),
            d.probability(Branch::Confirmation).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_replications(runs: &[RunStatistics], buf: &mut Vec<u8>) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(buf);
    w.write_record([
        "seed",
        "surplus_avg",
        "revenue_avg",
        "accept_freq",
        "liminf_surplus",
        "liminf_revenue",
        "final_estimate",
    ])?;
    for s in runs {
        w.write_record([
            s.seed.to_string(),
            s.overall.surplus_avg.to_string(),
            s.overall.revenue_avg.to_string(),
            s.overall.accept_freq.to_string(),
            s.liminf.surplus_avg.to_string(),
            s.liminf.revenue_avg.to_string(),
            s.final_estimate.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(args: &RunArgs) -> anyhow::Result<bool> {
    let cfg = FileConfig::load_or_default(args.config.as_deref())?.resolve(&args.overrides())?;
    let game = cfg.game()?;
    let reps = cfg.replications();
    let mut out = OutDir::create(&args.out_dir)?;
    out.write("curves.csv", |buf| write_curves(&game.curve, game.cook_type, buf))?;
    let seeds;
    if reps == 1 {
        let (history, stats) = run_game(&game)?;
        out.write("history.jsonl", |buf| Ok(history.write_jsonl(buf)?))?;
        out.write("prefix.csv", |buf| Ok(stats.write_prefix_csv(buf)?))?;
        out.write_json("stats.json", &stats)?;
        seeds = vec![stats.seed];
        println!(
            "{} rounds, q = {}: cook surplus/round {:.6}, fisher revenue/round {:.6}, accept rate {:.6}",
            stats.rounds,
            stats.cook_type,
            stats.overall.surplus_avg,
            stats.overall.revenue_avg,
            stats.overall.accept_freq
        );
        println!(
            "liminf proxy (after {} burn-in): surplus {:.6}, revenue {:.6}; final q_n {:.6}; welfare residual {:.2e}",
            stats.burn_in,
            stats.liminf.surplus_avg,
            stats.liminf.revenue_avg,
            stats.final_estimate,
            stats.welfare_residual()
        );
    } else {
        let mc = monte_carlo(&game, reps)?;
        out.write("replications.csv", |buf| write_replications(&mc.runs, buf))?;
        out.write_json("stats.json", &mc)?;
        seeds = mc.seeds.clone();
        let se = |s: Option<f64>| s.map_or("n/a".to_string(), |v| format!("{v:.6}"));
        println!(
            "{reps} replications x {} rounds, q = {}: cook surplus/round {:.6} (se {}), fisher revenue/round {:.6} (se {})",
            game.rounds,
            game.cook_type,
            mc.surplus_avg.mean,
            se(mc.surplus_avg.stderr),
            mc.revenue_avg.mean,
            se(mc.revenue_avg.stderr)
        );
        println!("max welfare residual {:.2e}", mc.max_welfare_residual);
    }
    let manifest = out.finish("simulate", &cfg, seeds)?;
    println!("wrote {}", manifest.display());
    Ok(true)
}

