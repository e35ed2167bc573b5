//! TOML run configuration.
//!
//! ```toml
//! version = 1
//!
//! [campaign]
//! horizon = 100.0          # T, seconds
//! budget = 1.0             # S̄, EUR
//! penalty = "infinite"     # K in EUR⁻², or "infinite" for a hard budget
//! auction = "second_price" # or "first_price"
//!
//! [[sources]]
//! intensity = 500.0        # requests per second
//! impression_weight = 1.0  # α, optional
//! conversion_rate = 0.0    # ν, optional
//! conversion_weight = 0.0  # δ, optional
//! distribution = { kind = "exponential", mu = 2000.0 }
//! # { kind = "uniform", lo = 0.0, hi = 1e-3 }, { kind = "pareto", scale = 1e-4, shape = 4.0 },
//! # any of them with `floor = 2e-4` for a hard reserve price
//!
//! [grid]                   # optional
//! n_t = 10000
//! n_s = 2000
//! s_min = -0.01            # EUR; default: minus the 0.9999 price quantile
//! s_max = 1.0              # EUR; default: the budget
//! substeps = 50            # default: fewest satisfying the stability bound
//!
//! [simulation]             # optional
//! seed = 1
//! paths = 50
//! checkpoints = 1000
//! strategy = "fluid"       # fluid, table, constant, paced, zero, unbounded
//! constant_bids = [1.5e-4] # EUR per source, for "constant"
//! log_events = false
//!
//! [pacing]                 # optional
//! base_bid = 1.5e-4        # EUR per unit of source weight
//! gain = 2.0
//! interval = 1.0           # seconds
//! integral_gain = 0.0
//!
//! [mdp]                    # optional
//! auctions = 3
//! budget = 1.0
//! support = [[0.2, 0.5], [0.6, 0.5]]   # (price EUR, probability)
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::campaign::{AuctionType, CampaignConfig, Penalty, SourceSpec};
use crate::error::{Error, Result};
use crate::hjb::{GridSpec, GRID_FLOOR_QUANTILE};
use crate::mdp::MdpSpec;
use crate::pacing::PacingConfig;
use crate::price::PriceModel;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    version: u32,
    campaign: RawCampaign,
    sources: Vec<RawSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<RawGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    simulation: Option<RawSimulation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pacing: Option<RawPacing>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mdp: Option<RawMdp>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum RawPenalty {
    Finite(f64),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCampaign {
    horizon: f64,
    budget: f64,
    penalty: RawPenalty,
    #[serde(default = "default_auction")]
    auction: String,
}

fn default_auction() -> String {
    "second_price".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    intensity: f64,
    #[serde(default = "one")]
    impression_weight: f64,
    #[serde(default)]
    conversion_rate: f64,
    #[serde(default)]
    conversion_weight: f64,
    distribution: RawDistribution,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawDistribution {
    Exponential {
        mu: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        floor: Option<f64>,
    },
    Uniform {
        lo: f64,
        hi: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        floor: Option<f64>,
    },
    Pareto {
        scale: f64,
        shape: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        floor: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    n_t: usize,
    n_s: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    s_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    s_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    substeps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_paths")]
    paths: usize,
    #[serde(default = "default_checkpoints")]
    checkpoints: usize,
    #[serde(default = "default_strategy")]
    strategy: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    constant_bids: Option<Vec<f64>>,
    #[serde(default)]
    log_events: bool,
}

fn default_paths() -> usize {
    50
}

fn default_checkpoints() -> usize {
    crate::sim::DEFAULT_CHECKPOINTS
}

fn default_strategy() -> String {
    "fluid".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPacing {
    base_bid: f64,
    #[serde(default = "default_gain")]
    gain: f64,
    #[serde(default = "one")]
    interval: f64,
    #[serde(default)]
    integral_gain: f64,
}

fn default_gain() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMdp {
    auctions: usize,
    budget: f64,
    support: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    Fluid,
    Table,
    Constant,
    Paced,
    Zero,
    Unbounded,
}

impl StrategyKind {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "fluid" => StrategyKind::Fluid,
            "table" => StrategyKind::Table,
            "constant" => StrategyKind::Constant,
            "paced" => StrategyKind::Paced,
            "zero" => StrategyKind::Zero,
            "unbounded" => StrategyKind::Unbounded,
            other => {
                return Err(Error::Schema(format!(
                    "simulation.strategy: unknown strategy `{other}` \
                     (expected fluid, table, constant, paced, zero or unbounded)"
                )))
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Fluid => "fluid",
            StrategyKind::Table => "table",
            StrategyKind::Constant => "constant",
            StrategyKind::Paced => "paced",
            StrategyKind::Zero => "zero",
            StrategyKind::Unbounded => "unbounded",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSettings {
    pub seed: u64,
    pub paths: usize,
    pub checkpoints: usize,
    pub strategy: StrategyKind,
    pub constant_bids: Option<Vec<f64>>,
    pub log_events: bool,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        SimulationSettings {
            seed: 0,
            paths: default_paths(),
            checkpoints: default_checkpoints(),
            strategy: StrategyKind::Fluid,
            constant_bids: None,
            log_events: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdpSettings {
    pub auctions: usize,
    pub budget: f64,
    pub support: Vec<(f64, f64)>,
}

impl MdpSettings {
    pub fn spec(&self) -> Result<MdpSpec> {
        MdpSpec::new(self.auctions, self.support.clone(), self.budget)
    }
}

/// A validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub campaign: CampaignConfig,
    /// Grid with defaults filled in.
    pub grid: Option<GridSpec>,
    pub simulation: SimulationSettings,
    pub pacing: Option<PacingConfig>,
    pub mdp: Option<MdpSettings>,
}

fn in_source(index: usize, err: Error) -> Error {
    match err {
        Error::Unit { field, message } => Error::Unit { field: format!("sources[{index}].{field}"), message },
        other => other,
    }
}

fn build_model(raw: &RawDistribution) -> Result<PriceModel> {
    let (model, floor) = match *raw {
        RawDistribution::Exponential { mu, floor } => (PriceModel::exponential(mu)?, floor),
        RawDistribution::Uniform { lo, hi, floor } => (PriceModel::uniform(lo, hi)?, floor),
        RawDistribution::Pareto { scale, shape, floor } => (PriceModel::pareto(scale, shape)?, floor),
    };
    match floor {
        Some(f) => model.with_floor(f),
        None => Ok(model),
    }
}

fn raw_model(model: &PriceModel) -> RawDistribution {
    let (base, floor) = match model {
        PriceModel::HardFloored { base, floor } => (base.as_ref(), Some(*floor)),
        m => (m, None),
    };
    match *base {
        PriceModel::Exponential { rate } => RawDistribution::Exponential { mu: rate, floor },
        PriceModel::Uniform { lo, hi } => RawDistribution::Uniform { lo, hi, floor },
        PriceModel::Pareto { scale, shape } => RawDistribution::Pareto { scale, shape, floor },
        PriceModel::HardFloored { .. } => unreachable!("floors do not nest"),
    }
}

fn positive(x: f64, field: &str) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(Error::unit(field, "must be positive"))
    }
}

impl RawConfig {
    fn into_run(self) -> Result<RunConfig> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "version: unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.version
            )));
        }
        let penalty = match self.campaign.penalty {
            RawPenalty::Finite(k) => Penalty::Finite(k),
            RawPenalty::Named(ref s) if s == "infinite" => Penalty::Infinite,
            RawPenalty::Named(s) => {
                return Err(Error::Schema(format!("campaign.penalty: expected a number or \"infinite\", got \"{s}\"")))
            }
        };
        let auction = match self.campaign.auction.as_str() {
            "second_price" => AuctionType::SecondPrice,
            "first_price" => AuctionType::FirstPrice,
            other => {
                return Err(Error::Schema(format!(
                    "campaign.auction: expected \"second_price\" or \"first_price\", got \"{other}\""
                )))
            }
        };
        let mut sources = Vec::with_capacity(self.sources.len());
        for (i, s) in self.sources.iter().enumerate() {
            let model = build_model(&s.distribution).map_err(|e| in_source(i, e))?;
            let spec = SourceSpec {
                intensity: s.intensity,
                model,
                impression_weight: s.impression_weight,
                conversion_rate: s.conversion_rate,
                conversion_weight: s.conversion_weight,
            };
            spec.validate(i)?;
            sources.push(spec);
        }
        let campaign = CampaignConfig {
            horizon: self.campaign.horizon,
            budget: self.campaign.budget,
            penalty,
            sources,
            auction,
        };
        campaign.validate()?;

        let grid = match self.grid {
            None => None,
            Some(g) => {
                let reach = campaign
                    .sources
                    .iter()
                    .map(|s| s.model.quantile(GRID_FLOOR_QUANTILE))
                    .fold(0.0, f64::max);
                let s_min = g.s_min.unwrap_or(-reach);
                let s_max = g.s_max.unwrap_or(campaign.budget);
                let spec = GridSpec::new(g.n_t, g.n_s, s_min, s_max);
                let spec = match g.substeps {
                    Some(0) => return Err(Error::unit("grid.substeps", "must be at least 1")),
                    Some(k) => spec.with_substeps(k),
                    None => spec.stabilized(&campaign),
                };
                if g.n_t < 2 || g.n_s < 2 {
                    return Err(Error::unit("grid.n_t/n_s", "must be at least 2"));
                }
                Some(spec)
            }
        };

        let simulation = match self.simulation {
            None => SimulationSettings::default(),
            Some(s) => {
                if s.paths == 0 {
                    return Err(Error::unit("simulation.paths", "must be at least 1"));
                }
                if s.checkpoints == 0 {
                    return Err(Error::unit("simulation.checkpoints", "must be at least 1"));
                }
                let strategy = StrategyKind::parse(&s.strategy)?;
                if let Some(b) = &s.constant_bids {
                    if b.len() != campaign.sources.len() {
                        return Err(Error::unit("simulation.constant_bids", "need one bid per source"));
                    }
                    if b.iter().any(|x| !(*x >= 0.0)) {
                        return Err(Error::unit("simulation.constant_bids", "bids must be nonnegative"));
                    }
                }
                if strategy == StrategyKind::Constant && s.constant_bids.is_none() {
                    return Err(Error::Schema("simulation.constant_bids: required by strategy \"constant\"".into()));
                }
                SimulationSettings {
                    seed: s.seed,
                    paths: s.paths,
                    checkpoints: s.checkpoints,
                    strategy,
                    constant_bids: s.constant_bids,
                    log_events: s.log_events,
                }
            }
        };

        let pacing = match self.pacing {
            None => None,
            Some(p) => {
                positive(p.base_bid, "pacing.base_bid")?;
                positive(p.gain, "pacing.gain")?;
                positive(p.interval, "pacing.interval")?;
                if !(p.integral_gain.is_finite() && p.integral_gain >= 0.0) {
                    return Err(Error::unit("pacing.integral_gain", "must be nonnegative"));
                }
                Some(PacingConfig {
                    base_bid: p.base_bid,
                    gain: p.gain,
                    interval: p.interval,
                    integral_gain: p.integral_gain,
                })
            }
        };

        let mdp = match self.mdp {
            None => None,
            Some(m) => {
                let settings = MdpSettings { auctions: m.auctions, budget: m.budget, support: m.support };
                settings.spec()?;
                Some(settings)
            }
        };

        Ok(RunConfig { campaign, grid, simulation, pacing, mdp })
    }
}

impl RunConfig {
    /// A configuration for `campaign` with every optional section absent.
    pub fn new(campaign: CampaignConfig) -> Self {
        RunConfig { campaign, grid: None, simulation: SimulationSettings::default(), pacing: None, mdp: None }
    }

    fn to_raw(&self) -> RawConfig {
        let c = &self.campaign;
        RawConfig {
            version: SCHEMA_VERSION,
            campaign: RawCampaign {
                horizon: c.horizon,
                budget: c.budget,
                penalty: match c.penalty {
                    Penalty::Finite(k) => RawPenalty::Finite(k),
                    Penalty::Infinite => RawPenalty::Named("infinite".into()),
                },
                auction: match c.auction {
                    AuctionType::SecondPrice => "second_price".into(),
                    AuctionType::FirstPrice => "first_price".into(),
                },
            },
            sources: c
                .sources
                .iter()
                .map(|s| RawSource {
                    intensity: s.intensity,
                    impression_weight: s.impression_weight,
                    conversion_rate: s.conversion_rate,
                    conversion_weight: s.conversion_weight,
                    distribution: raw_model(&s.model),
                })
                .collect(),
            grid: self.grid.map(|g| RawGrid {
                n_t: g.n_t,
                n_s: g.n_s,
                s_min: Some(g.s_min),
                s_max: Some(g.s_max),
                substeps: Some(g.substeps),
            }),
            simulation: Some(RawSimulation {
                seed: self.simulation.seed,
                paths: self.simulation.paths,
                checkpoints: self.simulation.checkpoints,
                strategy: self.simulation.strategy.name().into(),
                constant_bids: self.simulation.constant_bids.clone(),
                log_events: self.simulation.log_events,
            }),
            pacing: self.pacing.map(|p| RawPacing {
                base_bid: p.base_bid,
                gain: p.gain,
                interval: p.interval,
                integral_gain: p.integral_gain,
            }),
            mdp: self.mdp.as_ref().map(|m| RawMdp { auctions: m.auctions, budget: m.budget, support: m.support.clone() }),
        }
    }

    /// Serializes with every default made explicit.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_raw()).expect("configuration is always representable")
    }
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    raw.into_run()
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}
