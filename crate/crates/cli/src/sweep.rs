use clap::{Args, ValueEnum};
use fishmonger::verifier::{distortion_curve, threshold_sweep, CheckReport};

use crate::config::{ConfigError, FileConfig, Overrides};
use crate::output::OutDir;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    /// Fisher/cook split `(q p(q) - R(q)) / R(q)` along a list of types.
    Distortion,
    /// Long-run payoff of naive(x) for one cook type along a list of x.
    Threshold,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    pub kind: SweepKind,
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    /// Types for a distortion sweep (comma-separated); the single cook type
    /// for a threshold sweep.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub q: Vec<f64>,
    /// Thresholds for a threshold sweep (comma-separated).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub threshold: Vec<f64>,
    /// Distortion only: the ratio at the last point must be below this.
    #[arg(long)]
    pub limit: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub rounds: Option<u64>,
    #[arg(long)]
    pub replications: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out_dir: std::path::PathBuf,
}

fn print_csv(bytes: &[u8]) {
    print!("{}", String::from_utf8_lossy(bytes));
}

fn report(r: &CheckReport) -> bool {
    println!("{r}");
    r.passed()
}

pub fn run(args: &SweepArgs) -> anyhow::Result<bool> {
    let file = FileConfig::load_or_default(args.config.as_deref())?;
    match args.kind {
        SweepKind::Distortion => {
            if args.q.is_empty() {
                return Err(ConfigError("distortion sweep needs --q with at least one value".into()).into());
            }
            let cfg = file.resolve(&Overrides::default())?;
            let rc = cfg.reward_curve()?;
            let (rows, check) = distortion_curve(&rc, &args.q, args.limit)?;
            let mut out = OutDir::create(&args.out_dir)?;
            let path = out.write("distortion.csv", |buf| {
                let mut w = csv::Writer::from_writer(buf);
                for row in &rows {
                    w.serialize(row)?;
                }
                w.flush()?;
                Ok(())
            })?;
            print_csv(&std::fs::read(&path)?);
            out.finish("sweep distortion", &cfg, Vec::new())?;
            Ok(report(&check))
        }
        SweepKind::Threshold => {
            let q = match args.q.as_slice() {
                [q] => Some(*q),
                [] => None,
                _ => return Err(ConfigError("threshold sweep takes a single --q".into()).into()),
            };
            if args.threshold.is_empty() {
                return Err(ConfigError("threshold sweep needs --threshold with at least one value".into()).into());
            }
            let o = Overrides {
                seed: args.seed,
                rounds: args.rounds,
                replications: args.replications,
                q,
                threshold: None,
            };
            let cfg = file.resolve(&o)?;
            let game = cfg.game()?;
            let outcome = threshold_sweep(&game, &args.threshold, cfg.replications())?;
            let mut out = OutDir::create(&args.out_dir)?;
            let path = out.write("threshold.csv", |buf| Ok(outcome.write_csv(buf)?))?;
            print_csv(&std::fs::read(&path)?);
            println!("empirical argmax x = {}", outcome.argmax);
            let seeds = (0..cfg.replications())
                .map(|r| fishmonger::engine::replication_seed(game.seed, r))
                .collect();
            out.finish("sweep threshold", &cfg, seeds)?;
            Ok(report(&outcome.report))
        }
    }
}
