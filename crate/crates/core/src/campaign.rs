//! Campaign and auction-source parameters.

use crate::error::{Error, Result};
use crate::price::PriceModel;

/// One stream of auction requests.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    /// Arrival intensity, in requests per second.
    pub intensity: f64,
    /// Law of the price to beat.
    pub model: PriceModel,
    /// Value of one impression from this source.
    pub impression_weight: f64,
    /// Probability that an impression converts.
    pub conversion_rate: f64,
    /// Value of one conversion.
    pub conversion_weight: f64,
}

impl SourceSpec {
    /// A source valuing each impression at 1 and ignoring conversions.
    pub fn new(intensity: f64, model: PriceModel) -> Self {
        SourceSpec {
            intensity,
            model,
            impression_weight: 1.0,
            conversion_rate: 0.0,
            conversion_weight: 0.0,
        }
    }

    pub fn with_impression_weight(mut self, weight: f64) -> Self {
        self.impression_weight = weight;
        self
    }

    pub fn with_conversions(mut self, rate: f64, weight: f64) -> Self {
        self.conversion_rate = rate;
        self.conversion_weight = weight;
        self
    }

    /// Expected value of winning one auction: `α + ν δ`.
    pub fn weight(&self) -> f64 {
        self.impression_weight + self.conversion_rate * self.conversion_weight
    }

    /// Spend rate when winning every auction, `λ · mean`.
    pub fn max_spend_rate(&self) -> f64 {
        self.intensity * self.model.mean()
    }

    pub fn validate(&self, index: usize) -> Result<()> {
        let field = |name: &str| format!("sources[{index}].{name}");
        if !(self.intensity.is_finite() && self.intensity > 0.0) {
            return Err(Error::unit(field("intensity"), "must be positive"));
        }
        if !(self.impression_weight.is_finite() && self.impression_weight >= 0.0) {
            return Err(Error::unit(field("impression_weight"), "must be nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.conversion_rate) {
            return Err(Error::unit(field("conversion_rate"), "must lie in [0, 1]"));
        }
        if !(self.conversion_weight.is_finite() && self.conversion_weight >= 0.0) {
            return Err(Error::unit(field("conversion_weight"), "must be nonnegative"));
        }
        self.model.validate()
    }
}

/// Penalty coefficient `K` on overspending, `K · min(S_T, 0)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    Finite(f64),
    /// The hard-budget limit `K → ∞`.
    Infinite,
}

impl Penalty {
    pub fn terminal(self, s: f64) -> f64 {
        match self {
            Penalty::Finite(k) => k * s.min(0.0).powi(2),
            Penalty::Infinite if s < 0.0 => f64::INFINITY,
            Penalty::Infinite => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuctionType {
    /// Vickrey: the winner pays the price to beat.
    SecondPrice,
    /// The winner pays its own bid.
    FirstPrice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    /// Horizon `T`, seconds.
    pub horizon: f64,
    /// Budget `S̄`, EUR.
    pub budget: f64,
    pub penalty: Penalty,
    pub sources: Vec<SourceSpec>,
    pub auction: AuctionType,
}

impl CampaignConfig {
    /// Single-source second-price campaign with a hard budget.
    pub fn single(horizon: f64, budget: f64, source: SourceSpec) -> Self {
        CampaignConfig {
            horizon,
            budget,
            penalty: Penalty::Infinite,
            sources: vec![source],
            auction: AuctionType::SecondPrice,
        }
    }

    /// The numerical setting used throughout the examples: λ = 500/s,
    /// T = 100 s, S̄ = 1 EUR, exponential prices with rate 2000 per EUR.
    pub fn reference() -> Self {
        Self::single(100.0, 1.0, SourceSpec::new(500.0, PriceModel::Exponential { rate: 2000.0 }))
    }

    pub fn with_penalty(mut self, penalty: Penalty) -> Self {
        self.penalty = penalty;
        self
    }

    pub fn with_auction(mut self, auction: AuctionType) -> Self {
        self.auction = auction;
        self
    }

    pub fn total_intensity(&self) -> f64 {
        self.sources.iter().map(|s| s.intensity).sum()
    }

    /// `Σ λʲ meanʲ`, the spend rate of a bidder winning everything.
    pub fn max_spend_rate(&self) -> f64 {
        self.sources.iter().map(SourceSpec::max_spend_rate).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::unit("campaign.horizon", "must be positive"));
        }
        if !(self.budget.is_finite() && self.budget > 0.0) {
            return Err(Error::unit("campaign.budget", "must be positive"));
        }
        if let Penalty::Finite(k) = self.penalty {
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::unit("campaign.penalty", "must be positive or \"infinite\""));
            }
        }
        if self.sources.is_empty() {
            return Err(Error::Schema("at least one [[sources]] entry is required".into()));
        }
        for (i, s) in self.sources.iter().enumerate() {
            s.validate(i)?;
        }
        if self.sources.iter().all(|s| s.weight() <= 0.0) {
            return Err(Error::unit("sources", "at least one source needs a positive weight"));
        }
        Ok(())
    }
}
