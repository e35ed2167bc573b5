//! Solves the jump HJB equation for a small campaign and compares the value
//! and the bids with the fluid limit.

use rtb_core::fluid::{fluid_bid, fluid_value};
use rtb_core::hjb::{pde_residual, solve_second_price};
use rtb_core::{CampaignConfig, GridSpec, Penalty, PriceModel, SourceSpec};

fn main() -> rtb_core::Result<()> {
    let c = CampaignConfig::single(10.0, 0.05, SourceSpec::new(50.0, PriceModel::exponential(2000.0)?))
        .with_penalty(Penalty::Finite(1e6));
    let grid = GridSpec::new(400, 500, -0.006, 0.05).stabilized(&c);
    println!("grid {} x {}, {} substeps per row", grid.rows(), grid.cols(), grid.substeps);

    let start = std::time::Instant::now();
    let (surface, table) = solve_second_price(&c, grid)?;
    println!("solved in {:.2?}: {:?}", start.elapsed(), surface.diagnostics);
    println!("jump-equation residual {:.3e}", pde_residual(&surface, false));

    println!("\n{:>5} {:>7} {:>12} {:>12} {:>12} {:>12}", "t", "S", "v (HJB)", "v (fluid)", "bid (HJB)", "bid (fluid)");
    for (t, s) in [(0.0, 0.05), (2.5, 0.04), (5.0, 0.025), (5.0, 0.01), (9.0, 0.005)] {
        println!(
            "{t:>5} {s:>7} {:>12.3} {:>12.3} {:>12.5e} {:>12.5e}",
            surface.value_at(t, s),
            fluid_value(&c, t, s),
            table.lookup(t, s)[0],
            fluid_bid(&c, t, s)?[0],
        );
    }
    Ok(())
}
