//! Bid lookup tables and their file formats.
//!
//! Binary layout, all numbers little-endian:
//!
//! ```text
//! "RTBT" | 0x01 | T S_min S_max n_t n_S n_sources (f64 each)
//! payload: f64 bids, row-major [source][t][S], +inf for Unbounded
//! CRC-32 of the payload bytes (u32)
//! ```

use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::bid::Bid;
use crate::error::{Error, Result};
use crate::hjb::{locate, GridSpec};

pub const MAGIC: &[u8; 4] = b"RTBT";
pub const VERSION: u8 = 0x01;

#[derive(Debug, Clone, PartialEq)]
pub struct BidTable {
    pub horizon: f64,
    pub grid: GridSpec,
    pub n_sources: usize,
    pub version: u8,
    bids: Vec<f64>,
}

impl BidTable {
    /// `bids` is laid out `[source][t][S]` over `(n_t + 1) × (n_S + 1)` nodes.
    pub fn new(horizon: f64, grid: GridSpec, n_sources: usize, bids: Vec<f64>) -> Self {
        assert_eq!(bids.len(), n_sources * grid.rows() * grid.cols());
        BidTable { horizon, grid, n_sources, version: VERSION, bids }
    }

    /// Tabulates a bid function of `(t, S)` for every source.
    pub fn from_fn(
        horizon: f64,
        grid: GridSpec,
        n_sources: usize,
        f: impl Fn(f64, f64) -> Vec<Bid>,
    ) -> Self {
        let (rows, cols) = (grid.rows(), grid.cols());
        let mut bids = vec![0.0; n_sources * rows * cols];
        for r in 0..rows {
            for i in 0..cols {
                let b = f(grid.t_at(horizon, r), grid.s_at(i));
                for j in 0..n_sources {
                    bids[(j * rows + r) * cols + i] = b[j].to_f64();
                }
            }
        }
        BidTable::new(horizon, grid, n_sources, bids)
    }

    pub fn data(&self) -> &[f64] {
        &self.bids
    }

    pub fn row(&self, source: usize, r: usize) -> &[f64] {
        let cols = self.grid.cols();
        let start = (source * self.grid.rows() + r) * cols;
        &self.bids[start..start + cols]
    }

    pub fn at(&self, source: usize, r: usize, i: usize) -> Bid {
        Bid::from_f64(self.row(source, r)[i])
    }

    /// Bilinear interpolation in `(t, S)`, one bid per source.
    ///
    /// `t` and `S` are clamped into the grid. A corner holding `Unbounded`
    /// makes the result `Unbounded` whenever it carries positive weight.
    pub fn lookup(&self, t: f64, s: f64) -> Vec<Bid> {
        let (r, fr) = locate(t, 0.0, self.grid.row_dt(self.horizon), self.grid.n_t);
        let (i, fi) = locate(s, self.grid.s_min, self.grid.ds(), self.grid.n_s);
        let corners = [
            (r, i, (1.0 - fr) * (1.0 - fi)),
            (r, i + 1, (1.0 - fr) * fi),
            (r + 1, i, fr * (1.0 - fi)),
            (r + 1, i + 1, fr * fi),
        ];
        (0..self.n_sources)
            .map(|j| {
                let mut acc = 0.0;
                for &(rr, ii, w) in &corners {
                    if w > 0.0 {
                        let b = self.row(j, rr)[ii];
                        if b == f64::INFINITY {
                            return Bid::Unbounded;
                        }
                        acc += w * b;
                    }
                }
                Bid::Finite(acc)
            })
            .collect()
    }

    fn payload_bytes(&self) -> Vec<u8> {
        self.bids.iter().flat_map(|b| b.to_le_bytes()).collect()
    }

    /// CRC-32 of the payload, as stored in the binary trailer.
    pub fn checksum(&self) -> u32 {
        crc32fast::hash(&self.payload_bytes())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload = self.payload_bytes();
        let mut out = Vec::with_capacity(5 + 48 + payload.len() + 4);
        out.extend_from_slice(MAGIC);
        out.push(self.version);
        let g = &self.grid;
        for h in [
            self.horizon,
            g.s_min,
            g.s_max,
            g.n_t as f64,
            g.n_s as f64,
            self.n_sources as f64,
        ] {
            out.extend_from_slice(&h.to_le_bytes());
        }
        out.extend_from_slice(&payload);
        out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 5 + 48 + 4 || &bytes[..4] != MAGIC {
            return Err(Error::Format("not a bid table (bad magic or truncated)".into()));
        }
        let version = bytes[4];
        if version != VERSION {
            return Err(Error::Format(format!("unsupported bid table version {version}")));
        }
        let f = |k: usize| {
            let at = 5 + 8 * k;
            f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap())
        };
        let count = |x: f64, name: &str| -> Result<usize> {
            if x.fract() == 0.0 && x >= 0.0 && x < 1e12 {
                Ok(x as usize)
            } else {
                Err(Error::Format(format!("header field {name} = {x} is not a count")))
            }
        };
        let (horizon, s_min, s_max) = (f(0), f(1), f(2));
        let n_t = count(f(3), "n_t")?;
        let n_s = count(f(4), "n_S")?;
        let n_sources = count(f(5), "n_sources")?;
        let n = n_sources * (n_t + 1) * (n_s + 1);
        let start = 5 + 48;
        if bytes.len() != start + 8 * n + 4 {
            return Err(Error::Format(format!(
                "payload length {} does not match header ({} values)",
                bytes.len().saturating_sub(start + 4),
                n
            )));
        }
        let payload = &bytes[start..start + 8 * n];
        let stored = u32::from_le_bytes(bytes[start + 8 * n..].try_into().unwrap());
        let actual = crc32fast::hash(payload);
        if stored != actual {
            return Err(Error::Format(format!(
                "checksum mismatch: stored {stored:08x}, computed {actual:08x}"
            )));
        }
        let bids = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(BidTable {
            horizon,
            grid: GridSpec::new(n_t, n_s, s_min, s_max),
            n_sources,
            version,
            bids,
        })
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    /// Human-readable mirror: one line per node and source.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("# columns: source,t,S,bid (bid = inf when unbounded)\n");
        out.push_str("source,t,S,bid\n");
        for j in 0..self.n_sources {
            for r in 0..self.grid.rows() {
                let t = self.grid.t_at(self.horizon, r);
                for (i, &b) in self.row(j, r).iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{},{},{},{}",
                        j,
                        fmt_f64(t),
                        fmt_f64(self.grid.s_at(i)),
                        fmt_f64(b)
                    );
                }
            }
        }
        out
    }
}

/// 17 significant digits, `inf` for infinities.
pub fn fmt_f64(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:.16e}")
    }
}
