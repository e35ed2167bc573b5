//! The discrete-time bidding problem solved exactly: backward induction over
//! a budget grid, checked against enumeration of every price sequence.

use rtb_core::mdp::{ansatz_gap, enumerate_value, optimal_policy, solve_backward, truthful_bid_check, MdpSpec};
use rtb_core::PriceModel;

fn main() -> rtb_core::Result<()> {
    // Three auctions, prices 0.2 or 0.6 with equal odds, budget 1.
    let spec = MdpSpec::new(3, vec![(0.2, 0.5), (0.6, 0.5)], 1.0)?;
    let value = solve_backward(&spec)?;
    println!("budget grid {:?}", value.budgets);
    println!("u(0, 0, 1) = {}", value.initial(1.0));
    println!("replayed by enumeration = {}", enumerate_value(&spec, &optimal_policy(&value))?);
    println!("max |u(n,I,S) - I - u(n,0,S)| = {:e}", ansatz_gap(&value));

    for (k, s) in value.budgets.iter().enumerate() {
        let b = value.bid(0, 0, k);
        println!("  first auction, S = {s:.1}: any bid in ({}, {}] wins {} price(s)", b.floor, b.cap, b.won);
    }

    let report = truthful_bid_check(&spec)?;
    println!("truthful bidding of the continuation gap: {report:?}");

    // A discretized exponential law, for a feel of the grid size.
    let spec = MdpSpec::discretized(4, &PriceModel::exponential(10.0)?, 5, 0.5, 0.3)?;
    let value = solve_backward(&spec)?;
    println!("\n5-cell exponential, 4 auctions: {} budget nodes, u = {:.6}", value.budgets.len(), value.initial(0.3));
    Ok(())
}
