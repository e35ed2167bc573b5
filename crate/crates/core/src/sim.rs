//! Monte Carlo simulation of the auction stream.
//!
//! Each source emits auction requests at exponential gaps with its own
//! intensity; the streams are merged in time order. At every request the
//! strategy is queried with the cash held just before it, the bid wins when
//! it is strictly above the price to beat, and the winner pays the price
//! (second price) or its bid (first price).
//!
//! Randomness: path `p`, source `j` draws from a ChaCha8 generator seeded with
//! `seed` on stream `(p << 16) | j`, in the fixed order gap, price,
//! conversion. Paths are therefore identical whatever the thread count.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bid::Bid;
use crate::campaign::{AuctionType, CampaignConfig};
use crate::error::{Error, Result};
use crate::fluid::policy_bid;
use crate::pacing::{update, PacingConfig, PacingState};
use crate::table::{fmt_f64, BidTable};

pub const DEFAULT_CHECKPOINTS: usize = 1000;

#[derive(Debug, Clone)]
pub enum Strategy {
    /// Fluid-limit bids for the given campaign.
    Fluid(CampaignConfig),
    Table(BidTable),
    /// Fixed bid per source.
    ConstantBid(Vec<Bid>),
    /// Feedback pacing; each path starts from multiplier 1 and stops bidding
    /// once the budget is gone.
    Paced(PacingConfig),
    ZeroBid,
    UnboundedBid,
}

impl Strategy {
    fn name(&self) -> &'static str {
        match self {
            Strategy::Fluid(_) => "fluid",
            Strategy::Table(_) => "table",
            Strategy::ConstantBid(_) => "constant",
            Strategy::Paced(_) => "paced",
            Strategy::ZeroBid => "zero",
            Strategy::UnboundedBid => "unbounded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Number of intervals of the uniform checkpoint mesh on `[0, T]`.
    pub checkpoints: usize,
    pub log_events: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { checkpoints: DEFAULT_CHECKPOINTS, log_events: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuctionEvent {
    pub time: f64,
    pub source: usize,
    pub price: f64,
    pub bid: Bid,
    pub won: bool,
    pub paid: f64,
    pub converted: bool,
}

/// State sampled on the checkpoint mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub t: f64,
    pub cash: f64,
    pub impressions: Vec<u64>,
    pub conversions: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub checkpoints: Vec<Checkpoint>,
    pub events: Vec<AuctionEvent>,
    /// Requests received per source.
    pub requests: Vec<u64>,
    pub max_payment: f64,
    /// Sum of payments, accumulated in event order.
    pub total_paid: f64,
}

impl Trajectory {
    pub fn terminal(&self) -> &Checkpoint {
        self.checkpoints.last().expect("mesh has at least two points")
    }

    pub fn spend(&self, budget: f64) -> f64 {
        budget - self.terminal().cash
    }
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub campaign: CampaignConfig,
    pub strategy: &'static str,
    pub seed: u64,
    pub paths: Vec<Trajectory>,
}

impl SimulationResult {
    pub fn mesh(&self) -> Vec<f64> {
        self.paths[0].checkpoints.iter().map(|c| c.t).collect()
    }

    /// Mean and standard deviation of `S_t` across paths, per mesh point.
    pub fn cash_curve(&self) -> Vec<(f64, f64, f64)> {
        let n = self.paths.len() as f64;
        (0..self.paths[0].checkpoints.len())
            .map(|k| {
                let t = self.paths[0].checkpoints[k].t;
                let mean = self.paths.iter().map(|p| p.checkpoints[k].cash).sum::<f64>() / n;
                let var = self
                    .paths
                    .iter()
                    .map(|p| (p.checkpoints[k].cash - mean).powi(2))
                    .sum::<f64>()
                    / (n - 1.0).max(1.0);
                (t, mean, var.sqrt())
            })
            .collect()
    }
}

/// Per-path bidding state.
enum Bidder<'a> {
    Fixed(Vec<Bid>),
    Fluid(&'a CampaignConfig),
    Table(&'a BidTable),
    Paced { state: PacingState, next_update: f64 },
}

impl Bidder<'_> {
    fn new<'a>(strategy: &'a Strategy, campaign: &CampaignConfig) -> Bidder<'a> {
        let n = campaign.sources.len();
        match strategy {
            Strategy::Fluid(c) => Bidder::Fluid(c),
            Strategy::Table(t) => Bidder::Table(t),
            Strategy::ConstantBid(b) => Bidder::Fixed(b.clone()),
            Strategy::Paced(cfg) => {
                Bidder::Paced { state: PacingState::new(*cfg), next_update: cfg.interval }
            }
            Strategy::ZeroBid => Bidder::Fixed(vec![Bid::ZERO; n]),
            Strategy::UnboundedBid => Bidder::Fixed(vec![Bid::Unbounded; n]),
        }
    }

    /// Bid for `source` at time `t` with cash `s` held just before the request.
    fn bid(&mut self, campaign: &CampaignConfig, t: f64, s: f64, source: usize) -> Result<Bid> {
        Ok(match self {
            Bidder::Fixed(b) => b[source],
            Bidder::Fluid(c) => policy_bid(c, t, s)?[source],
            Bidder::Table(table) => table.lookup(t, s)[source],
            Bidder::Paced { state, next_update } => {
                // Cash is constant between requests, so the scheduled updates
                // since the last request all observe `s`.
                while *next_update <= t {
                    *state = update(*state, *next_update, s, campaign);
                    *next_update += state.config.interval;
                }
                if s <= 0.0 {
                    Bid::ZERO
                } else {
                    state.bids(campaign)[source]
                }
            }
        })
    }
}

/// Random stream of one source on one path.
struct SourceStream {
    rng: ChaCha8Rng,
    next_time: f64,
}

impl SourceStream {
    fn new(seed: u64, path: usize, source: usize, intensity: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((path as u64) << 16) | source as u64);
        let mut s = SourceStream { rng, next_time: 0.0 };
        s.next_time = s.gap(intensity);
        s
    }

    fn gap(&mut self, intensity: f64) -> f64 {
        let u: f64 = self.rng.gen();
        -(1.0 - u).ln() / intensity
    }
}

fn simulate_path(
    campaign: &CampaignConfig,
    strategy: &Strategy,
    seed: u64,
    path: usize,
    options: SimOptions,
) -> Result<Trajectory> {
    let n_src = campaign.sources.len();
    let horizon = campaign.horizon;
    let mut streams: Vec<SourceStream> = campaign
        .sources
        .iter()
        .enumerate()
        .map(|(j, s)| SourceStream::new(seed, path, j, s.intensity))
        .collect();
    let mut bidder = Bidder::new(strategy, campaign);

    let mesh = options.checkpoints.max(1);
    let mesh_time = |k: usize| if k == mesh { horizon } else { horizon * k as f64 / mesh as f64 };
    let mut cash = campaign.budget;
    let mut impressions = vec![0u64; n_src];
    let mut conversions = vec![0u64; n_src];
    let mut traj = Trajectory {
        checkpoints: Vec::with_capacity(mesh + 1),
        events: Vec::new(),
        requests: vec![0; n_src],
        max_payment: 0.0,
        total_paid: 0.0,
    };
    let mut next_mesh = 0usize;

    loop {
        // Earliest pending request; ties go to the lower source index.
        let (j, t) = streams
            .iter()
            .enumerate()
            .map(|(j, s)| (j, s.next_time))
            .fold((usize::MAX, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        let t_event = if t < horizon { t } else { f64::INFINITY };
        while next_mesh <= mesh && mesh_time(next_mesh) < t_event {
            traj.checkpoints.push(Checkpoint {
                t: mesh_time(next_mesh),
                cash,
                impressions: impressions.clone(),
                conversions: conversions.clone(),
            });
            next_mesh += 1;
        }
        if t_event.is_infinite() {
            break;
        }
        let source = &campaign.sources[j];
        let stream = &mut streams[j];
        let price = source.model.sample(&mut stream.rng);
        let converts = stream.rng.gen::<f64>() < source.conversion_rate;
        stream.next_time = t + stream.gap(source.intensity);
        traj.requests[j] += 1;

        let bid = bidder.bid(campaign, t, cash, j)?;
        let won = bid.wins_against(price);
        let paid = if !won {
            0.0
        } else {
            match campaign.auction {
                AuctionType::SecondPrice => price,
                AuctionType::FirstPrice => bid.finite().ok_or_else(|| {
                    Error::Domain("an unbounded bid cannot pay its own price in a first-price auction".into())
                })?,
            }
        };
        let converted = won && converts;
        if won {
            cash -= paid;
            impressions[j] += 1;
            traj.max_payment = traj.max_payment.max(paid);
            traj.total_paid += paid;
        }
        if converted {
            conversions[j] += 1;
        }
        if options.log_events {
            traj.events.push(AuctionEvent { time: t, source: j, price, bid, won, paid, converted });
        }
    }
    Ok(traj)
}

pub fn simulate(campaign: &CampaignConfig, strategy: &Strategy, seed: u64, n_paths: usize) -> Result<SimulationResult> {
    simulate_with(campaign, strategy, seed, n_paths, SimOptions::default())
}

/// Runs `n_paths` independent paths, in parallel on the current rayon pool.
pub fn simulate_with(
    campaign: &CampaignConfig,
    strategy: &Strategy,
    seed: u64,
    n_paths: usize,
    options: SimOptions,
) -> Result<SimulationResult> {
    campaign.validate()?;
    if n_paths == 0 {
        return Err(Error::unit("simulation.paths", "must be at least 1"));
    }
    if campaign.sources.len() > 1 << 16 {
        return Err(Error::unit("sources", "at most 65536 sources"));
    }
    let n_src = campaign.sources.len();
    match strategy {
        Strategy::ConstantBid(b) if b.len() != n_src => {
            return Err(Error::unit("strategy", format!("{} constant bids for {n_src} sources", b.len())))
        }
        Strategy::Table(t) if t.n_sources != n_src => {
            return Err(Error::unit("strategy", format!("table has {} sources, campaign {n_src}", t.n_sources)))
        }
        Strategy::Fluid(c) if c.sources.len() != n_src => {
            return Err(Error::unit("strategy", "fluid campaign has a different number of sources"))
        }
        _ => {}
    }
    let paths = (0..n_paths)
        .into_par_iter()
        .map(|p| simulate_path(campaign, strategy, seed, p, options))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationResult { campaign: campaign.clone(), strategy: strategy.name(), seed, paths })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathKpi {
    pub spend: f64,
    pub impressions: u64,
    pub conversions: u64,
    /// Cost per impression, EUR; `None` without impressions.
    pub cpm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KpiReport {
    pub paths: Vec<PathKpi>,
    pub mean_spend: f64,
    pub sd_spend: f64,
    pub mean_impressions: f64,
    pub sd_impressions: f64,
    pub mean_conversions: f64,
    /// Total spend over total impressions.
    pub cpm: Option<f64>,
}

impl KpiReport {
    pub fn impressions_standard_error(&self) -> f64 {
        self.sd_impressions / (self.paths.len() as f64).sqrt()
    }
}

fn mean_sd(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

pub fn kpi_report(result: &SimulationResult) -> KpiReport {
    let budget = result.campaign.budget;
    let paths: Vec<PathKpi> = result
        .paths
        .iter()
        .map(|p| {
            let last = p.terminal();
            let spend = budget - last.cash;
            let impressions: u64 = last.impressions.iter().sum();
            PathKpi {
                spend,
                impressions,
                conversions: last.conversions.iter().sum(),
                cpm: (impressions > 0).then(|| spend / impressions as f64),
            }
        })
        .collect();
    let (mean_spend, sd_spend) = mean_sd(paths.iter().map(|k| k.spend));
    let (mean_impressions, sd_impressions) = mean_sd(paths.iter().map(|k| k.impressions as f64));
    let (mean_conversions, _) = mean_sd(paths.iter().map(|k| k.conversions as f64));
    let total_imp: u64 = paths.iter().map(|k| k.impressions).sum();
    let total_spend: f64 = paths.iter().map(|k| k.spend).sum();
    KpiReport {
        cpm: (total_imp > 0).then(|| total_spend / total_imp as f64),
        paths,
        mean_spend,
        sd_spend,
        mean_impressions,
        sd_impressions,
        mean_conversions,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearityReport {
    /// `max_t |mean S_t - S̄(1 - t/T)| / S̄` over the measured mesh points.
    pub max_deviation: f64,
    /// Time of the largest deviation.
    pub at: f64,
    /// Largest cross-path standard deviation of `S_t`, relative to `S̄`.
    pub dispersion: f64,
}

pub fn spend_linearity(result: &SimulationResult) -> LinearityReport {
    spend_linearity_from(result, 0.0)
}

/// As `spend_linearity`, ignoring mesh points before `t_start`.
pub fn spend_linearity_from(result: &SimulationResult, t_start: f64) -> LinearityReport {
    let c = &result.campaign;
    let mut report = LinearityReport { max_deviation: 0.0, at: 0.0, dispersion: 0.0 };
    for (t, mean, sd) in result.cash_curve() {
        if t < t_start {
            continue;
        }
        let dev = (mean - c.budget * (1.0 - t / c.horizon)).abs() / c.budget;
        if dev > report.max_deviation {
            report.max_deviation = dev;
            report.at = t;
        }
        report.dispersion = report.dispersion.max(sd / c.budget);
    }
    report
}

/// Columns `path,t,S,I_1..I_J,C_1..C_J`.
pub fn trajectory_csv(result: &SimulationResult) -> String {
    let j = result.campaign.sources.len();
    let mut cols = vec!["path".to_string(), "t".into(), "S".into()];
    cols.extend((1..=j).map(|k| format!("I_{k}")));
    cols.extend((1..=j).map(|k| format!("C_{k}")));
    let header = cols.join(",");
    let mut out = format!("# columns: {header}\n{header}\n");
    for (p, path) in result.paths.iter().enumerate() {
        for c in &path.checkpoints {
            let _ = write!(out, "{p},{},{}", fmt_f64(c.t), fmt_f64(c.cash));
            for x in c.impressions.iter().chain(&c.conversions) {
                let _ = write!(out, ",{x}");
            }
            out.push('\n');
        }
    }
    out
}

/// Columns `path,t,source,price,bid,won,paid,converted`; empty unless events were logged.
pub fn events_csv(result: &SimulationResult) -> String {
    let header = "path,t,source,price,bid,won,paid,converted";
    let mut out = format!("# columns: {header}\n{header}\n");
    for (p, path) in result.paths.iter().enumerate() {
        for e in &path.events {
            let _ = writeln!(
                out,
                "{p},{},{},{},{},{},{},{}",
                fmt_f64(e.time),
                e.source,
                fmt_f64(e.price),
                fmt_f64(e.bid.to_f64()),
                e.won as u8,
                fmt_f64(e.paid),
                e.converted as u8
            );
        }
    }
    out
}

/// One `statistic,value` row per aggregate, then one row per path.
pub fn kpi_csv(result: &SimulationResult) -> String {
    let k = kpi_report(result);
    let opt = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), fmt_f64);
    let mut out = String::from("# columns: statistic,value (cpm in EUR per impression, NA without impressions)\n");
    out.push_str("statistic,value\n");
    let _ = writeln!(out, "strategy,{}", result.strategy);
    let _ = writeln!(out, "seed,{}", result.seed);
    let _ = writeln!(out, "paths,{}", k.paths.len());
    for (name, v) in [
        ("mean_spend", k.mean_spend),
        ("sd_spend", k.sd_spend),
        ("mean_impressions", k.mean_impressions),
        ("sd_impressions", k.sd_impressions),
        ("mean_conversions", k.mean_conversions),
    ] {
        let _ = writeln!(out, "{name},{}", fmt_f64(v));
    }
    let _ = writeln!(out, "cpm,{}", opt(k.cpm));
    for (p, path) in k.paths.iter().enumerate() {
        let _ = writeln!(out, "path_{p}_spend,{}", fmt_f64(path.spend));
        let _ = writeln!(out, "path_{p}_impressions,{}", path.impressions);
        let _ = writeln!(out, "path_{p}_cpm,{}", opt(path.cpm));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::campaign::{Penalty, SourceSpec};
    use crate::price::PriceModel;

    fn small() -> CampaignConfig {
        CampaignConfig::single(10.0, 0.05, SourceSpec::new(50.0, PriceModel::exponential(2000.0).unwrap()))
    }

    #[test]
    fn zero_bid_never_wins() {
        let c = small();
        let r = simulate(&c, &Strategy::ZeroBid, 1, 5).unwrap();
        for p in &r.paths {
            assert_eq!(p.terminal().cash, c.budget);
            assert_eq!(p.terminal().impressions, vec![0]);
        }
        let k = kpi_report(&r);
        assert_eq!(k.cpm, None);
        assert_eq!(k.mean_spend, 0.0);
        assert!((spend_linearity(&r).max_deviation - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_bid_matches_wald_identities() {
        let c = small();
        let n = 400;
        let r = simulate(&c, &Strategy::UnboundedBid, 7, n).unwrap();
        let k = kpi_report(&r);
        let lt = c.total_intensity() * c.horizon;
        let se_i = (lt / n as f64).sqrt();
        assert!((k.mean_impressions - lt).abs() < 3.0 * se_i);
        // Var of a compound Poisson sum: λT E[p²]
        let se_s = (lt * 2.0 / 2000f64.powi(2) / n as f64).sqrt();
        assert!((k.mean_spend - lt / 2000.0).abs() < 3.0 * se_s);
    }

    #[test]
    fn conservation_and_monotone_paths() {
        let c = small();
        let mut opts = SimOptions::default();
        opts.log_events = true;
        let r = simulate_with(&c, &Strategy::Fluid(c.clone()), 3, 4, opts).unwrap();
        for p in &r.paths {
            let paid: f64 = p.events.iter().map(|e| e.paid).sum();
            assert_eq!(paid, p.total_paid);
            assert!((p.spend(c.budget) - paid).abs() < 1e-12);
            assert!(p.terminal().cash >= -p.max_payment);
            for w in p.checkpoints.windows(2) {
                assert!(w[1].cash <= w[0].cash);
                assert!(w[1].impressions[0] >= w[0].impressions[0]);
                assert!(w[1].t > w[0].t);
            }
            for w in p.events.windows(2) {
                assert!(w[1].time > w[0].time);
            }
            assert!(p.events.iter().all(|e| !e.won || e.bid.wins_against(e.price)));
        }
    }

    #[test]
    fn conversions_never_exceed_impressions() {
        let src = SourceSpec::new(50.0, PriceModel::exponential(2000.0).unwrap()).with_conversions(0.3, 2.0);
        let c = CampaignConfig::single(10.0, 0.05, src);
        let r = simulate(&c, &Strategy::UnboundedBid, 9, 20).unwrap();
        let k = kpi_report(&r);
        assert!(k.mean_conversions > 0.0);
        for p in &r.paths {
            assert!(p.terminal().conversions[0] <= p.terminal().impressions[0]);
        }
        assert!((k.mean_conversions / k.mean_impressions - 0.3).abs() < 0.03);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let c = small();
        let mut opts = SimOptions::default();
        opts.log_events = true;
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| simulate_with(&c, &Strategy::Fluid(c.clone()), 42, 6, opts).unwrap())
        };
        let (a, b) = (run(1), run(4));
        assert_eq!(events_csv(&a), events_csv(&b));
        assert_eq!(trajectory_csv(&a), trajectory_csv(&b));
        assert_ne!(events_csv(&a), events_csv(&run_seed(&c, 43)));
    }

    fn run_seed(c: &CampaignConfig, seed: u64) -> SimulationResult {
        let mut opts = SimOptions::default();
        opts.log_events = true;
        simulate_with(c, &Strategy::Fluid(c.clone()), seed, 6, opts).unwrap()
    }

    #[test]
    fn first_price_pays_at_least_second_price() {
        let c = small();
        let fp = c.clone().with_auction(AuctionType::FirstPrice);
        let bids = Strategy::ConstantBid(vec![Bid::Finite(4e-4)]);
        let mut opts = SimOptions::default();
        opts.log_events = true;
        let a = simulate_with(&c, &bids, 5, 3, opts).unwrap();
        let b = simulate_with(&fp, &bids, 5, 3, opts).unwrap();
        for (pa, pb) in a.paths.iter().zip(&b.paths) {
            for (ea, eb) in pa.events.iter().zip(&pb.events) {
                assert_eq!((ea.time, ea.price, ea.won), (eb.time, eb.price, eb.won));
                assert!(ea.paid <= eb.paid);
            }
        }
        let unbounded = simulate(&fp, &Strategy::UnboundedBid, 1, 1);
        assert!(matches!(unbounded, Err(Error::Domain(_))));
    }

    #[test]
    fn arrival_counts_are_poisson() {
        // χ² goodness of fit over count classes, 99% level.
        let c = small();
        let n = 2000;
        let r = simulate_with(&c, &Strategy::ZeroBid, 11, n, SimOptions { checkpoints: 2, log_events: false }).unwrap();
        let lt = c.total_intensity() * c.horizon;
        let edges: Vec<u64> = vec![0, 480, 490, 500, 510, 520, u64::MAX];
        let poisson_cdf = |k: u64| -> f64 {
            // normal approximation with continuity correction is too coarse; sum the pmf in log space
            let mut acc = 0.0;
            let mut log_p = -lt;
            for i in 0..=k {
                if i > 0 {
                    log_p += lt.ln() - (i as f64).ln();
                }
                acc += log_p.exp();
            }
            acc
        };
        let mut chi2 = 0.0;
        for w in edges.windows(2) {
            let observed = r.paths.iter().filter(|p| (w[0]..w[1]).contains(&p.requests[0])).count() as f64;
            let lo = if w[0] == 0 { 0.0 } else { poisson_cdf(w[0] - 1) };
            let hi = if w[1] == u64::MAX { 1.0 } else { poisson_cdf(w[1] - 1) };
            let expected = n as f64 * (hi - lo);
            chi2 += (observed - expected).powi(2) / expected;
        }
        // 99% quantile of χ² with 5 degrees of freedom
        assert!(chi2 < 15.086, "chi2 = {chi2}");
    }

    #[test]
    fn paced_strategy_moves_multiplier() {
        let src = SourceSpec::new(50.0, PriceModel::exponential(2000.0).unwrap());
        let c = CampaignConfig::single(100.0, 0.5, src).with_penalty(Penalty::Infinite);
        let r = simulate(&c, &Strategy::Paced(PacingConfig::new(1e-4)), 2, 10).unwrap();
        let lin = spend_linearity_from(&r, 10.0);
        assert!(lin.max_deviation < 0.1, "{lin:?}");
    }

    #[test]
    fn single_win_cpm_is_the_price() {
        let c = CampaignConfig::single(1e-3, 1.0, SourceSpec::new(50.0, PriceModel::exponential(2000.0).unwrap()));
        let mut opts = SimOptions::default();
        opts.log_events = true;
        let r = simulate_with(&c, &Strategy::UnboundedBid, 0, 200, opts).unwrap();
        let k = kpi_report(&r);
        for (p, kp) in r.paths.iter().zip(&k.paths) {
            if p.events.len() == 1 {
                let price = p.events[0].price;
                assert!((kp.cpm.unwrap() - price).abs() <= 1e-15 * c.budget);
            }
        }
    }

    #[test]
    fn csv_headers() {
        let c = small();
        let r = simulate_with(&c, &Strategy::ZeroBid, 1, 1, SimOptions { checkpoints: 4, log_events: true }).unwrap();
        let t = trajectory_csv(&r);
        assert!(t.starts_with("# columns: path,t,S,I_1,C_1\n"));
        assert_eq!(t.lines().count(), 2 + 5);
        assert!(events_csv(&r).lines().nth(1).unwrap().starts_with("path,t,source"));
        assert!(kpi_csv(&r).contains("cpm,NA"));
    }
}
