use std::fmt;

/// A bid sent to an auction: a nonnegative price, or an unbounded bid that
/// wins every auction it enters.
///
/// The derived ordering places every finite bid below `Unbounded`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum Bid {
    Finite(f64),
    Unbounded,
}

impl Bid {
    pub const ZERO: Bid = Bid::Finite(0.0);

    /// Decodes the `+inf` convention used in tables and files.
    pub fn from_f64(value: f64) -> Bid {
        if value == f64::INFINITY {
            Bid::Unbounded
        } else {
            Bid::Finite(value)
        }
    }

    /// Encodes `Unbounded` as `+inf`.
    pub fn to_f64(self) -> f64 {
        match self {
            Bid::Finite(v) => v,
            Bid::Unbounded => f64::INFINITY,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, Bid::Unbounded)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Bid::Finite(v) => Some(v),
            Bid::Unbounded => None,
        }
    }

    /// Strict inequality: a bid equal to the price to beat loses.
    pub fn wins_against(self, price: f64) -> bool {
        match self {
            Bid::Finite(b) => b > price,
            Bid::Unbounded => true,
        }
    }

    /// Multiplies a finite bid; `Unbounded` stays unbounded.
    pub fn scaled(self, factor: f64) -> Bid {
        match self {
            Bid::Finite(b) => Bid::Finite(b * factor),
            Bid::Unbounded => Bid::Unbounded,
        }
    }
}

// Both impls forward width and precision, so `{:>12.4e}` works on bids.
impl fmt::Display for Bid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bid::Finite(v) => fmt::Display::fmt(v, f),
            Bid::Unbounded => f.pad("inf"),
        }
    }
}

impl fmt::LowerExp for Bid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bid::Finite(v) => fmt::LowerExp::fmt(v, f),
            Bid::Unbounded => f.pad("inf"),
        }
    }
}
