//! TOML run configuration.
//!
//! Precedence, lowest first: built-in defaults, the `--config` file,
//! command-line flags. Relative paths in the file resolve against the
//! file's directory.
//!
//! ```toml
//! [curve]
//! family = "rational"        # rational | exponential | piecewise-linear | tabulated
//! # rate = 1.0               # exponential
//! # knots = [[0, 0], [1, 1]] # piecewise-linear
//! # path = "curve.csv"       # tabulated
//! method = "closed-form"     # optional: closed-form | quadrature
//! quadrature_tolerance = 1e-10
//!
//! [cook]
//! q = 1.0
//! policy = "naive"           # naive | scripted
//! threshold = 1.0            # naive; defaults to q
//! script = "decisions.txt"   # scripted; one 0/1 per line
//!
//! [engine]
//! rounds = 100000
//! burn_in = 10000
//! stride = 100
//! seed = 0
//! replications = 1
//!
//! [oracle]
//! horizon = 4
//! grid = 2
//! budget = 50000000
//! ```

use std::path::{Path, PathBuf};

use fishmonger::cook::load_script;
use fishmonger::curves::{IntegrationMethod, DEFAULT_QUADRATURE_TOLERANCE};
use fishmonger::engine::{DEFAULT_BURN_IN, DEFAULT_ROUNDS, DEFAULT_STRIDE};
use fishmonger::oracle::{OracleConfig, DEFAULT_BUDGET};
use fishmonger::{AcceptanceCurve, CurveSpec, GameConfig, PolicySpec, RewardCurve};
use serde::{Deserialize, Serialize};

/// Bad input from the user: exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSection {
    #[serde(flatten)]
    pub spec: CurveSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<IntegrationMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Naive,
    Scripted,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CookSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicyKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replications: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<CurveSection>,
    #[serde(default)]
    pub cook: CookSection,
    #[serde(default)]
    pub engine: EngineSection,
    #[serde(default)]
    pub oracle: OracleSection,
}

/// Values given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub rounds: Option<u64>,
    pub replications: Option<u64>,
    pub q: Option<f64>,
    pub threshold: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: FileConfig = toml::from_str(&text)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> anyhow::Result<Self> {
        path.map_or_else(|| Ok(FileConfig::default()), FileConfig::load)
    }

    fn resolve_paths(&mut self, base: &Path) {
        if let Some(CurveSection {
            spec: CurveSpec::Tabulated { path },
            ..
        }) = &mut self.curve
        {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        if let Some(script) = &mut self.cook.script {
            if script.is_relative() {
                *script = base.join(&*script);
            }
        }
    }

    /// Fills every field, applying flags over file values over defaults.
    pub fn resolve(&self, o: &Overrides) -> anyhow::Result<FileConfig> {
        let curve = self.curve.clone().unwrap_or(CurveSection {
            spec: CurveSpec::Rational,
            method: None,
            quadrature_tolerance: None,
        });
        let q = o.q.or(self.cook.q).unwrap_or(1.0);
        let policy = self.cook.policy.unwrap_or(if self.cook.script.is_some() {
            PolicyKind::Scripted
        } else {
            PolicyKind::Naive
        });
        if policy == PolicyKind::Scripted && self.cook.script.is_none() {
            return Err(config_err("cook.script is required when cook.policy = \"scripted\""));
        }
        let rounds = o.rounds.or(self.engine.rounds).unwrap_or(DEFAULT_ROUNDS);
        let burn_in = self
            .engine
            .burn_in
            .unwrap_or(DEFAULT_BURN_IN.min(rounds / 10));
        Ok(FileConfig {
            curve: Some(CurveSection {
                method: Some(curve.method.unwrap_or_else(|| default_method(&curve.spec))),
                quadrature_tolerance: Some(
                    curve.quadrature_tolerance.unwrap_or(DEFAULT_QUADRATURE_TOLERANCE),
                ),
                spec: curve.spec,
            }),
            cook: CookSection {
                q: Some(q),
                policy: Some(policy),
                threshold: match policy {
                    PolicyKind::Naive => Some(o.threshold.or(self.cook.threshold).unwrap_or(q)),
                    PolicyKind::Scripted => None,
                },
                script: self.cook.script.clone(),
            },
            engine: EngineSection {
                rounds: Some(rounds),
                burn_in: Some(burn_in),
                stride: Some(self.engine.stride.unwrap_or(DEFAULT_STRIDE)),
                seed: Some(o.seed.or(self.engine.seed).unwrap_or(0)),
                replications: Some(o.replications.or(self.engine.replications).unwrap_or(1)),
            },
            oracle: OracleSection {
                horizon: Some(self.oracle.horizon.unwrap_or(4)),
                grid: Some(self.oracle.grid.unwrap_or(2)),
                budget: Some(self.oracle.budget.unwrap_or(DEFAULT_BUDGET)),
            },
        })
    }
}

fn default_method(spec: &CurveSpec) -> IntegrationMethod {
    match spec {
        CurveSpec::Rational | CurveSpec::Exponential { .. } => IntegrationMethod::ClosedForm,
        _ => IntegrationMethod::Quadrature,
    }
}

/// Accessors for a config returned by [`FileConfig::resolve`].
impl FileConfig {
    fn curve_section(&self) -> &CurveSection {
        self.curve.as_ref().expect("resolved config has a curve")
    }

    pub fn reward_curve(&self) -> anyhow::Result<RewardCurve> {
        let c = self.curve_section();
        let acceptance = c.spec.build().map_err(|e| config_err(format!("[curve]: {e}")))?;
        self.wrap(acceptance)
    }

    /// Knot tables are taken as given, without the monotonicity check.
    pub fn reward_curve_unchecked(&self) -> anyhow::Result<RewardCurve> {
        let c = self.curve_section();
        let acceptance = c
            .spec
            .build_unchecked()
            .map_err(|e| config_err(format!("[curve]: {e}")))?;
        self.wrap(acceptance)
    }

    fn wrap(&self, acceptance: AcceptanceCurve) -> anyhow::Result<RewardCurve> {
        let c = self.curve_section();
        RewardCurve::with_method(
            acceptance,
            c.method.unwrap_or(IntegrationMethod::Quadrature),
            c.quadrature_tolerance.unwrap_or(DEFAULT_QUADRATURE_TOLERANCE),
        )
        .map_err(|e| config_err(format!("[curve]: {e}")))
    }

    pub fn cook_type(&self) -> f64 {
        self.cook.q.unwrap_or(1.0)
    }

    pub fn replications(&self) -> u64 {
        self.engine.replications.unwrap_or(1)
    }

    pub fn game(&self) -> anyhow::Result<GameConfig> {
        let mut g = GameConfig::new(self.reward_curve()?, self.cook_type());
        g.policy = match self.cook.policy {
            Some(PolicyKind::Scripted) => {
                let path = self.cook.script.as_ref().expect("checked in resolve");
                let decisions =
                    load_script(path).map_err(|e| config_err(format!("[cook] script: {e}")))?;
                PolicySpec::Scripted { decisions }
            }
            _ => PolicySpec::Naive {
                threshold: self.cook.threshold.unwrap_or(g.cook_type),
            },
        };
        g.rounds = self.engine.rounds.unwrap_or(DEFAULT_ROUNDS);
        g.burn_in = self.engine.burn_in.unwrap_or(DEFAULT_BURN_IN);
        g.stride = self.engine.stride.unwrap_or(DEFAULT_STRIDE);
        g.seed = self.engine.seed.unwrap_or(0);
        g.validate().map_err(|e| config_err(e.to_string()))?;
        if self.replications() < 1 {
            return Err(config_err("engine.replications must be >= 1"));
        }
        Ok(g)
    }

    pub fn oracle(&self) -> OracleConfig {
        let mut oc = OracleConfig::new(
            self.oracle.horizon.unwrap_or(4),
            self.oracle.grid.unwrap_or(2),
            self.cook_type(),
        );
        oc.budget = self.oracle.budget.unwrap_or(DEFAULT_BUDGET);
        oc
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }
}
