//! Feedback pacing: track the even-spend curve `S̄ (1 - t/T)` by scaling a
//! base bid, without any knowledge of the price law.

use crate::bid::Bid;
use crate::campaign::CampaignConfig;

pub const MIN_MULTIPLIER: f64 = 1e-3;
pub const MAX_MULTIPLIER: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacingConfig {
    /// Bid per unit of source weight at multiplier 1, EUR.
    pub base_bid: f64,
    /// Proportional gain on the relative cash error.
    pub gain: f64,
    /// Seconds between updates.
    pub interval: f64,
    /// Gain on the time-integrated relative error, per second. Off by default.
    pub integral_gain: f64,
}

impl PacingConfig {
    pub fn new(base_bid: f64) -> Self {
        PacingConfig { base_bid, gain: 2.0, interval: 1.0, integral_gain: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacingState {
    pub config: PacingConfig,
    pub multiplier: f64,
    pub last_update: f64,
    /// Accumulated `∫ (S - target) / S̄ dt`.
    pub integral: f64,
}

impl PacingState {
    pub fn new(config: PacingConfig) -> Self {
        PacingState { config, multiplier: 1.0, last_update: 0.0, integral: 0.0 }
    }

    /// `m · b₀ · wʲ` for every source.
    pub fn bids(&self, campaign: &CampaignConfig) -> Vec<Bid> {
        campaign
            .sources
            .iter()
            .map(|s| Bid::Finite(self.multiplier * self.config.base_bid * s.weight()))
            .collect()
    }
}

/// The even-spend target `S̄ (1 - t/T)`.
pub fn target_schedule(campaign: &CampaignConfig, t: f64) -> f64 {
    campaign.budget * (1.0 - t / campaign.horizon)
}

/// `m ← m · exp(g_p e + g_i ∫e)` with `e = (S - target(t)) / S̄`, clamped to
/// `[MIN_MULTIPLIER, MAX_MULTIPLIER]`.
pub fn update(state: PacingState, t: f64, s_observed: f64, campaign: &CampaignConfig) -> PacingState {
    let error = (s_observed - target_schedule(campaign, t)) / campaign.budget;
    let integral = state.integral + error * (t - state.last_update).max(0.0);
    let exponent = state.config.gain * error + state.config.integral_gain * integral;
    let multiplier = (state.multiplier * exponent.exp()).clamp(MIN_MULTIPLIER, MAX_MULTIPLIER);
    PacingState { multiplier, last_update: t, integral, ..state }
}
