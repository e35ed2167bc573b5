//! The `rtb` command line.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bid::Bid;
use crate::config::{parse_config, RunConfig, StrategyKind};
use crate::error::{Error, Result};
use crate::fluid::{fluid_value, policy_bid};
use crate::hjb::{solve_campaign, GridSpec, ValueSurface};
use crate::mdp::{enumerate_value, optimal_policy, reduced_residual, solve_backward, truthful_bid_check};
use crate::sim::{
    events_csv, kpi_csv, kpi_report, simulate_with, spend_linearity, trajectory_csv, SimOptions, SimulationResult,
    Strategy,
};
use crate::table::{fmt_f64, BidTable};

/// Largest number of time rows and budget nodes written to surface CSVs.
const SURFACE_ROWS: usize = 201;
const SURFACE_COLS: usize = 501;

#[derive(Debug, Parser)]
#[command(name = "rtb", version, about = "Optimal bidding for real-time ad auctions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Overrides `simulation.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `simulation.paths`.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the HJB equation; writes bid_table.rtbt, bid_table.csv and value_surface.csv.
    Solve(Common),
    /// Print fluid-limit values and bids at (t, S) pairs.
    Fluid {
        #[command(flatten)]
        common: Common,
        /// A `t,S` pair; repeatable. Defaults to a small grid of states.
        #[arg(long = "at", value_parser = parse_pair)]
        at: Vec<(f64, f64)>,
    },
    /// Monte Carlo simulation; writes trajectory.csv, events.csv and kpi.csv.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Overrides `simulation.strategy`.
        #[arg(long)]
        strategy: Option<String>,
        /// Bid table for the `table` strategy; solved from `[grid]` when absent.
        #[arg(long)]
        table: Option<PathBuf>,
        /// Also log every auction to events.csv.
        #[arg(long)]
        events: bool,
    },
    /// Solve the discrete `[mdp]` instance; writes mdp_value.csv.
    Mdp(Common),
    /// Closed-loop pacing simulation from `[pacing]`.
    Pace(Common),
    /// Write a bid table in binary and CSV form, re-reading it to check the CRC.
    ExportTable {
        #[command(flatten)]
        common: Common,
        /// Existing table to convert; solved from `[grid]` when absent.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// CSV data behind the value-surface, log-bid and trajectory figures.
    FigureData(Common),
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `t,S`, got `{s}`"))?;
    let t = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let x = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((t, x))
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Solve(c) | Command::Mdp(c) | Command::Pace(c) | Command::FigureData(c) => c,
            Command::Fluid { common, .. } | Command::Simulate { common, .. } | Command::ExportTable { common, .. } => {
                common
            }
        }
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit status: 0 on success, 1 for configuration errors, 2 for
/// numerical errors, 3 for I/O and format errors.
pub fn run_subcommand<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("rtb: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let common = cli.command.common();
    let mut cfg = parse_config(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.simulation.seed = seed;
    }
    if let Some(paths) = common.paths {
        if paths == 0 {
            return Err(Error::unit("--paths", "must be at least 1"));
        }
        cfg.simulation.paths = paths;
    }
    let threads = common.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Domain(format!("cannot start {threads} worker threads: {e}")))?;
    let out = common.out.clone();
    pool.install(|| dispatch(&cli.command, &cfg, &out))
}

fn dispatch(command: &Command, cfg: &RunConfig, out: &Path) -> Result<()> {
    match command {
        Command::Solve(_) => {
            fs::create_dir_all(out)?;
            let (surface, table) = solve(cfg)?;
            fs::write(out.join("bid_table.rtbt"), table.to_bytes())?;
            fs::write(out.join("bid_table.csv"), table.to_csv())?;
            fs::write(out.join("value_surface.csv"), surface_csv(&surface))?;
            let d = &surface.diagnostics;
            println!(
                "v(0, S̄) = {:.6}  steps = {}  penalty K = {}  floor crossings = {}  max FOC residual = {:.3e}",
                surface.value_at(0.0, cfg.campaign.budget),
                d.steps,
                d.penalty,
                d.floor_crossings,
                d.max_foc_residual
            );
            Ok(())
        }
        Command::Fluid { at, .. } => {
            let c = &cfg.campaign;
            let states: Vec<(f64, f64)> = if at.is_empty() {
                [0.0, 0.5, 0.9]
                    .iter()
                    .flat_map(|&ft| [0.1, 0.5, 1.0].map(|fs| (ft * c.horizon, fs * c.budget)))
                    .collect()
            } else {
                at.clone()
            };
            let mut text = String::from("t,S,value");
            for j in 1..=c.sources.len() {
                let _ = write!(text, ",bid_{j}");
            }
            text.push('\n');
            for (t, s) in states {
                let bids = policy_bid(c, t, s)?;
                let _ = write!(text, "{},{},{}", fmt_f64(t), fmt_f64(s), fmt_f64(fluid_value(c, t, s)));
                for b in bids {
                    let _ = write!(text, ",{}", fmt_f64(b.to_f64()));
                }
                text.push('\n');
            }
            print!("{text}");
            Ok(())
        }
        Command::Simulate { strategy, table, events, .. } => {
            let kind = match strategy {
                Some(name) => StrategyKind::parse(name)?,
                None => cfg.simulation.strategy,
            };
            let strategy = build_strategy(cfg, kind, table.as_deref())?;
            let options = SimOptions {
                checkpoints: cfg.simulation.checkpoints,
                log_events: cfg.simulation.log_events || *events,
            };
            let result = simulate_with(&cfg.campaign, &strategy, cfg.simulation.seed, cfg.simulation.paths, options)?;
            write_simulation(out, &result)?;
            report(&result);
            Ok(())
        }
        Command::Mdp(_) => {
            let settings = cfg.mdp.as_ref().ok_or_else(|| Error::Schema("missing [mdp] section".into()))?;
            let spec = settings.spec()?;
            let value = solve_backward(&spec)?;
            fs::create_dir_all(out)?;
            fs::write(out.join("mdp_value.csv"), value.to_csv())?;
            println!("u(0, 0, S̄) = {}", fmt_f64(value.initial(spec.budget)));
            match enumerate_value(&spec, &optimal_policy(&value)) {
                Ok(e) => println!("enumeration under the optimal policy = {}", fmt_f64(e)),
                Err(Error::Size(msg)) => println!("enumeration skipped: {msg}"),
                Err(e) => return Err(e),
            }
            println!("reduced recursion residual = {:.3e}", reduced_residual(&spec, &value));
            let t = truthful_bid_check(&spec)?;
            println!(
                "truthful bidding: {} states, {} binding, max value gap {:.3e}, max condition violation {:.3e}",
                t.states, t.binding, t.max_value_gap, t.max_condition_violation
            );
            Ok(())
        }
        Command::Pace(_) => {
            let strategy = build_strategy(cfg, StrategyKind::Paced, None)?;
            let options = SimOptions { checkpoints: cfg.simulation.checkpoints, log_events: cfg.simulation.log_events };
            let result = simulate_with(&cfg.campaign, &strategy, cfg.simulation.seed, cfg.simulation.paths, options)?;
            write_simulation(out, &result)?;
            report(&result);
            Ok(())
        }
        Command::ExportTable { table, .. } => {
            let table = match table {
                Some(path) => BidTable::from_bytes(&fs::read(path)?)?,
                None => solve(cfg)?.1,
            };
            fs::create_dir_all(out)?;
            let path = out.join("bid_table.rtbt");
            fs::write(&path, table.to_bytes())?;
            fs::write(out.join("bid_table.csv"), table.to_csv())?;
            let back = BidTable::from_bytes(&fs::read(&path)?)?;
            if back.to_bytes() != table.to_bytes() {
                return Err(Error::Format("re-read table differs from the written one".into()));
            }
            println!("crc32 = {:08x}", back.checksum());
            Ok(())
        }
        Command::FigureData(_) => {
            fs::create_dir_all(out)?;
            let (surface, table) = solve(cfg)?;
            fs::write(out.join("fig1_surface.csv"), surface_csv(&surface))?;
            fs::write(out.join("fig2_logbid.csv"), logbid_csv(&table))?;
            let options = SimOptions { checkpoints: cfg.simulation.checkpoints, log_events: true };
            let result = simulate_with(&cfg.campaign, &Strategy::Table(table), cfg.simulation.seed, 1, options)?;
            fs::write(out.join("fig3_traj.csv"), panel_csv(&result, None))?;
            let h = cfg.campaign.horizon;
            fs::write(out.join("fig4_traj_zoom.csv"), panel_csv(&result, Some(h / 10.0)))?;
            fs::write(out.join("fig5_traj_zoom.csv"), panel_csv(&result, Some(h / 100.0)))?;
            Ok(())
        }
    }
}

fn grid_of(cfg: &RunConfig) -> Result<GridSpec> {
    cfg.grid.ok_or_else(|| Error::Schema("missing [grid] section".into()))
}

fn solve(cfg: &RunConfig) -> Result<(ValueSurface, BidTable)> {
    solve_campaign(&cfg.campaign, grid_of(cfg)?)
}

fn build_strategy(cfg: &RunConfig, kind: StrategyKind, table: Option<&Path>) -> Result<Strategy> {
    Ok(match kind {
        StrategyKind::Fluid => Strategy::Fluid(cfg.campaign.clone()),
        StrategyKind::Table => match table {
            Some(path) => Strategy::Table(BidTable::from_bytes(&fs::read(path)?)?),
            None => Strategy::Table(solve(cfg)?.1),
        },
        StrategyKind::Constant => {
            let bids = cfg
                .simulation
                .constant_bids
                .as_ref()
                .ok_or_else(|| Error::Schema("simulation.constant_bids: required by strategy \"constant\"".into()))?;
            Strategy::ConstantBid(bids.iter().map(|&b| Bid::from_f64(b)).collect())
        }
        StrategyKind::Paced => {
            Strategy::Paced(cfg.pacing.ok_or_else(|| Error::Schema("missing [pacing] section".into()))?)
        }
        StrategyKind::Zero => Strategy::ZeroBid,
        StrategyKind::Unbounded => Strategy::UnboundedBid,
    })
}

fn write_simulation(out: &Path, result: &SimulationResult) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join("trajectory.csv"), trajectory_csv(result))?;
    fs::write(out.join("events.csv"), events_csv(result))?;
    fs::write(out.join("kpi.csv"), kpi_csv(result))?;
    Ok(())
}

fn report(result: &SimulationResult) {
    let k = kpi_report(result);
    let lin = spend_linearity(result);
    println!(
        "paths = {}  mean spend = {:.6} EUR  mean impressions = {:.1}  cpm = {}  max deviation from even spend = {:.4}",
        k.paths.len(),
        k.mean_spend,
        k.mean_impressions,
        k.cpm.map_or("NA".into(), |c| format!("{c:.3e} EUR")),
        lin.max_deviation
    );
}

/// Evenly spaced indices `0..=n`, at most `max` of them, always including `n`.
fn stride(n: usize, max: usize) -> Vec<usize> {
    let step = n.div_ceil(max - 1).max(1);
    let mut idx: Vec<usize> = (0..=n).step_by(step).collect();
    if *idx.last().unwrap() != n {
        idx.push(n);
    }
    idx
}

/// `t,S,v` on a subsampled grid.
pub fn surface_csv(surface: &ValueSurface) -> String {
    let g = surface.grid;
    let h = surface.campaign.horizon;
    let mut out = String::from("# columns: t,S,v (t seconds, S EUR, v = value function)\nt,S,v\n");
    for r in stride(g.n_t, SURFACE_ROWS) {
        for i in stride(g.n_s, SURFACE_COLS) {
            let _ = writeln!(out, "{},{},{}", fmt_f64(g.t_at(h, r)), fmt_f64(g.s_at(i)), fmt_f64(surface.at(r, i)));
        }
    }
    out
}

/// `source,t,S,log10_bid` with the bid in thousandths of a euro; `inf` for
/// unbounded bids, `-inf` for zero bids.
pub fn logbid_csv(table: &BidTable) -> String {
    let g = table.grid;
    let mut out =
        String::from("# columns: source,t,S,log10_bid (bid in thousandths of EUR; inf when unbounded)\nsource,t,S,log10_bid\n");
    for j in 0..table.n_sources {
        for r in stride(g.n_t, SURFACE_ROWS) {
            for i in stride(g.n_s, SURFACE_COLS) {
                let b = table.row(j, r)[i];
                let v = if b == f64::INFINITY { f64::INFINITY } else { (1e3 * b).log10() };
                let _ = writeln!(out, "{j},{},{},{}", fmt_f64(g.t_at(table.horizon, r)), fmt_f64(g.s_at(i)), fmt_f64(v));
            }
        }
    }
    out
}

/// Cash and total impressions of the first path: on the checkpoint mesh, or
/// after every auction up to `window` seconds.
fn panel_csv(result: &SimulationResult, window: Option<f64>) -> String {
    let mut out = String::from("# columns: t,S,I (t seconds, S EUR, I impressions)\nt,S,I\n");
    let path = &result.paths[0];
    match window {
        None => {
            for c in &path.checkpoints {
                let _ = writeln!(out, "{},{},{}", fmt_f64(c.t), fmt_f64(c.cash), c.impressions.iter().sum::<u64>());
            }
        }
        Some(w) => {
            let mut cash = result.campaign.budget;
            let mut imp = 0u64;
            let _ = writeln!(out, "{},{},{}", fmt_f64(0.0), fmt_f64(cash), imp);
            for e in path.events.iter().take_while(|e| e.time <= w) {
                if e.won {
                    cash -= e.paid;
                    imp += 1;
                    let _ = writeln!(out, "{},{},{}", fmt_f64(e.time), fmt_f64(cash), imp);
                }
            }
            let _ = writeln!(out, "{},{},{}", fmt_f64(w), fmt_f64(cash), imp);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stride_keeps_endpoints() {
        assert_eq!(stride(10, 20), (0..=10).collect::<Vec<_>>());
        let s = stride(10_000, 201);
        assert_eq!((s[0], *s.last().unwrap()), (0, 10_000));
        assert!(s.len() <= 201);
    }

    #[test]
    fn pairs_parse() {
        assert_eq!(parse_pair("1.5, 0.25").unwrap(), (1.5, 0.25));
        assert!(parse_pair("3").is_err());
    }
}
