//! Several exchanges with conversions. Every source is bid the same multiple
//! of its expected value per win `α + ν δ`.

use rtb_core::config::parse_config;
use rtb_core::fluid::fluid_bid;
use rtb_core::sim::{kpi_report, simulate, Strategy};

fn main() -> rtb_core::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/multi_source.toml");
    let c = parse_config(path)?.campaign;

    for (t, s) in [(0.0, 1.0), (50.0, 0.5), (80.0, 0.1)] {
        let bids = fluid_bid(&c, t, s)?;
        print!("t = {t:>4}, S = {s:>4}:");
        for (b, src) in bids.iter().zip(&c.sources) {
            print!("  {b:.4e} (per unit value {:.6e})", b.to_f64() / src.weight());
        }
        println!();
    }

    let result = simulate(&c, &Strategy::Fluid(c.clone()), 11, 10)?;
    let kpi = kpi_report(&result);
    println!(
        "spend {:.4}, impressions {:.1}, conversions {:.1}",
        kpi.mean_spend, kpi.mean_impressions, kpi.mean_conversions
    );

    let mut per_source = vec![(0usize, 0usize); c.sources.len()];
    let detailed = rtb_core::sim::simulate_with(
        &c,
        &Strategy::Fluid(c.clone()),
        11,
        1,
        rtb_core::sim::SimOptions { log_events: true, ..Default::default() },
    )?;
    for e in &detailed.paths[0].events {
        per_source[e.source].0 += 1;
        per_source[e.source].1 += e.won as usize;
    }
    for (j, (seen, won)) in per_source.iter().enumerate() {
        println!("source {j}: {won} of {seen} auctions won");
    }
    Ok(())
}
