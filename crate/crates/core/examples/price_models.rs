//! Price-to-beat laws: CDF, partial expectation `G(b) = ∫₀ᵇ p dF`, its
//! inverse, and a sampling sanity check.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rtb_core::{Bid, PriceModel};

fn main() -> rtb_core::Result<()> {
    let models = [
        ("exponential mu=2000", PriceModel::exponential(2000.0)?),
        ("uniform [0, 1e-3]", PriceModel::uniform(0.0, 1e-3)?),
        ("pareto 1e-4, 4", PriceModel::pareto(1e-4, 4.0)?),
        ("exponential + floor 5e-4", PriceModel::exponential(2000.0)?.with_floor(5e-4)?),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    for (name, m) in &models {
        println!("{name}");
        println!("  mean {:.6e}   F(1e-3) {:.6}   G(5e-4) {:.6e}", m.mean(), m.cdf(1e-3), m.g(5e-4));
        if let Some((at, mass)) = m.atom() {
            println!("  point mass {mass:.4} at {at:e}");
        }
        // G⁻¹ is what turns a target spend rate into a bid.
        let half = 0.5 * m.mean();
        match m.inverse_partial_expectation(half)? {
            Bid::Finite(b) => println!("  G(b) = mean/2 at b = {b:.6e}"),
            Bid::Unbounded => println!("  G(b) = mean/2 needs an unbounded bid"),
        }

        let n = 200_000;
        let sum: f64 = (0..n).map(|_| m.sample(&mut rng)).sum();
        println!("  sample mean of {n} draws {:.6e}", sum / n as f64);
    }
    Ok(())
}
