//! Fluid-limit policy at the reference parameters (λ = 500/s, T = 100 s,
//! S̄ = 1 EUR, exponential prices with rate 2000/EUR).
//!
//! The fluid bid is the one that spends the remaining budget at the constant
//! rate `S / (T - t)`, so along the optimal path it never changes.

use rtb_core::fluid::{fluid_bid, fluid_value, hamiltonian, hamiltonian_derivative};
use rtb_core::CampaignConfig;

fn main() -> rtb_core::Result<()> {
    let c = CampaignConfig::reference();
    let src = &c.sources[0];

    println!("{:>10} {:>14} {:>14}", "x", "H(x)", "H'(x)");
    for x in [-1e5, -1e4, -4000.0, -2000.0, -1000.0, 0.0] {
        println!("{x:>10} {:>14.6} {:>14.6e}", hamiltonian(src, x), hamiltonian_derivative(src, x));
    }

    println!("\nexpected impressions from S̄ at t = 0: {:.2}", -fluid_value(&c, 0.0, c.budget));

    println!("\n{:>6} {:>8} {:>14}", "t", "S", "bid");
    for (t, s) in [(0.0, 1.0), (50.0, 0.5), (90.0, 0.1), (50.0, 0.8), (99.0, 0.3)] {
        let b = fluid_bid(&c, t, s)?;
        println!("{t:>6} {s:>8} {:>14.6e}", b[0]);
    }
    Ok(())
}
