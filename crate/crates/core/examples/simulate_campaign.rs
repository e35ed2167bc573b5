//! Monte Carlo campaign under the fluid policy, with KPIs and the deviation
//! of the mean cash curve from even spending.

use rtb_core::fluid::fluid_value;
use rtb_core::sim::{kpi_report, simulate, spend_linearity, Strategy};
use rtb_core::CampaignConfig;

fn main() -> rtb_core::Result<()> {
    let c = CampaignConfig::reference();
    let result = simulate(&c, &Strategy::Fluid(c.clone()), 2024, 20)?;

    let kpi = kpi_report(&result);
    let lin = spend_linearity(&result);
    println!("spend {:.5} ± {:.5} EUR", kpi.mean_spend, kpi.sd_spend);
    println!(
        "impressions {:.1} ± {:.1} (fluid prediction {:.1})",
        kpi.mean_impressions,
        kpi.impressions_standard_error(),
        -fluid_value(&c, 0.0, c.budget)
    );
    if let Some(cpm) = kpi.cpm {
        println!("cost per impression {cpm:.4e} EUR");
    }
    println!("max deviation from S̄(1 - t/T): {:.4} at t = {}", lin.max_deviation, lin.at);

    for (t, mean, sd) in result.cash_curve().into_iter().step_by(100) {
        println!("  t = {t:>5.1}  S = {mean:.4} (sd {sd:.4})");
    }
    Ok(())
}
