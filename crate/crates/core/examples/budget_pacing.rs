//! Feedback pacing: no knowledge of the price law, only the observed cash
//! error against `S̄ (1 - t/T)`. Compared with the fluid policy, which knows
//! the law.

use rtb_core::pacing::PacingConfig;
use rtb_core::sim::{kpi_report, simulate, spend_linearity_from, Strategy};
use rtb_core::CampaignConfig;

fn main() -> rtb_core::Result<()> {
    let c = CampaignConfig::reference();
    let fluid_bid = 1.5679e-4;

    println!("{:>12} {:>6} {:>10} {:>12} {:>10}", "base bid", "gain", "spend", "impressions", "deviation");
    for factor in [0.5, 1.0, 2.0] {
        for gain in [2.0, 8.0] {
            let cfg = PacingConfig { gain, ..PacingConfig::new(factor * fluid_bid) };
            let result = simulate(&c, &Strategy::Paced(cfg), 7, 20)?;
            let kpi = kpi_report(&result);
            // The first 10% of the horizon is the controller's transient.
            let lin = spend_linearity_from(&result, 0.1 * c.horizon);
            println!(
                "{:>12.3e} {gain:>6} {:>10.4} {:>12.1} {:>10.4}",
                cfg.base_bid, kpi.mean_spend, kpi.mean_impressions, lin.max_deviation
            );
        }
    }

    let result = simulate(&c, &Strategy::Fluid(c.clone()), 7, 20)?;
    let kpi = kpi_report(&result);
    println!("fluid policy: spend {:.4}, impressions {:.1}", kpi.mean_spend, kpi.mean_impressions);
    Ok(())
}
