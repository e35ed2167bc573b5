//! First-price auctions shade bids below the second-price bid at the same
//! state, both in the fluid limit and on the HJB grid.

use rtb_core::fluid::{first_price_fluid_bid, fluid_bid};
use rtb_core::hjb::{solve_first_price, solve_second_price};
use rtb_core::sim::{kpi_report, simulate, Strategy};
use rtb_core::{AuctionType, CampaignConfig, GridSpec, Penalty, PriceModel, SourceSpec};

fn main() -> rtb_core::Result<()> {
    let reference = CampaignConfig::reference();
    println!("{:>5} {:>5} {:>14} {:>14}", "t", "S", "second price", "first price");
    for (t, s) in [(0.0, 1.0), (50.0, 0.5), (50.0, 0.2), (90.0, 0.05)] {
        println!(
            "{t:>5} {s:>5} {:>14.5e} {:>14.5e}",
            fluid_bid(&reference, t, s)?[0],
            first_price_fluid_bid(&reference, t, s)?[0]
        );
    }

    let second = CampaignConfig::single(10.0, 0.05, SourceSpec::new(50.0, PriceModel::exponential(2000.0)?))
        .with_penalty(Penalty::Finite(1e6));
    let first = second.clone().with_auction(AuctionType::FirstPrice);
    let grid = GridSpec::new(100, 200, -0.006, 0.05).stabilized(&second);
    let (_, sp) = solve_second_price(&second, grid)?;
    let (_, fp) = solve_first_price(&first, grid)?;
    println!("\nHJB bids at t = 0:");
    for s in [0.05, 0.03, 0.01] {
        println!("  S = {s}: second {:.5e}  first {:.5e}", sp.lookup(0.0, s)[0], fp.lookup(0.0, s)[0]);
    }

    for (name, c, table) in [("second", &second, sp), ("first", &first, fp)] {
        let kpi = kpi_report(&simulate(c, &Strategy::Table(table), 5, 20)?);
        println!("{name}-price table: spend {:.4}, impressions {:.1}", kpi.mean_spend, kpi.mean_impressions);
    }
    Ok(())
}
