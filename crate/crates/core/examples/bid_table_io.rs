//! Bid tables on disk: binary round trip with CRC, CSV export, and lookup
//! latency as seen by a bidder.

use std::hint::black_box;
use std::time::Instant;

use rtb_core::hjb::solve_campaign;
use rtb_core::{BidTable, CampaignConfig, GridSpec, Penalty, PriceModel, SourceSpec};

fn main() -> rtb_core::Result<()> {
    let c = CampaignConfig::single(10.0, 0.05, SourceSpec::new(50.0, PriceModel::exponential(2000.0)?))
        .with_penalty(Penalty::Finite(1e6));
    let (_, table) = solve_campaign(&c, GridSpec::new(200, 400, -0.006, 0.05).stabilized(&c))?;

    let bytes = table.to_bytes();
    println!("{} bytes, crc32 {:08x}", bytes.len(), table.checksum());
    // The file keeps the grid geometry and the bids; solver substeps are not stored.
    let back = BidTable::from_bytes(&bytes)?;
    assert_eq!(back.data(), table.data());

    let mut corrupt = bytes.clone();
    corrupt[100] ^= 1;
    println!("flipped bit: {}", BidTable::from_bytes(&corrupt).unwrap_err());

    let csv = table.to_csv();
    println!("csv: {} lines, first two:", csv.lines().count());
    csv.lines().take(2).for_each(|l| println!("  {l}"));

    let n = 1_000_000;
    let start = Instant::now();
    for k in 0..n {
        let t = (k % 1000) as f64 * 0.01;
        let s = (k % 977) as f64 * 5e-5;
        black_box(table.lookup(black_box(t), black_box(s)));
    }
    let elapsed = start.elapsed();
    println!("{n} lookups in {elapsed:.2?} ({:.0} ns each)", elapsed.as_nanos() as f64 / n as f64);
    Ok(())
}
