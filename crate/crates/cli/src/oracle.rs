use clap::Args;
use fishmonger::oracle::expectimax_oracle;

use crate::config::{FileConfig, Overrides};
use crate::output::OutDir;

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub horizon: Option<u32>,
    /// Adaptation-price atoms per unit interval.
    #[arg(long)]
    pub grid: Option<u32>,
    /// Leaf budget; larger trees are refused.
    #[arg(long)]
    pub budget: Option<u64>,
    /// Writes `oracle.json` here when given.
    #[arg(long)]
    pub out_dir: Option<std::path::PathBuf>,
}

pub fn run(args: &OracleArgs) -> anyhow::Result<bool> {
    let mut file = FileConfig::load_or_default(args.config.as_deref())?;
    file.oracle.horizon = args.horizon.or(file.oracle.horizon);
    file.oracle.grid = args.grid.or(file.oracle.grid);
    file.oracle.budget = args.budget.or(file.oracle.budget);
    let cfg = file.resolve(&Overrides {
        q: args.q,
        ..Default::default()
    })?;
    let rc = cfg.reward_curve()?;
    let oc = cfg.oracle();
    let result = expectimax_oracle(&rc, &oc)?;
    println!(
        "H={} G={} q={}: optimal {} naive {} gap {} (gap/H {}); {} leaves, {} states evaluated",
        oc.horizon,
        oc.grid,
        oc.cook_type,
        result.optimal,
        result.naive,
        result.gap,
        result.gap / oc.horizon.max(1) as f64,
        result.tree_size,
        result.states_evaluated
    );
    if let Some(dir) = &args.out_dir {
        let mut out = OutDir::create(dir)?;
        out.write_json("oracle.json", &serde_json::json!({"config": oc, "result": result}))?;
        out.finish("oracle", &cfg, Vec::new())?;
    }
    Ok(true)
}
