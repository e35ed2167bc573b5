//! Fluid-limit policies.
//!
//! Replacing the jump `v(t, S - p) - v(t, S)` by `-p ∂_S v` turns the
//! integro-differential HJB equation into a first-order Hamilton-Jacobi
//! equation `-∂_t ṽ + H(∂_S ṽ) = 0` whose Hamiltonian
//!
//! ```text
//! H(x) = Σ_j λʲ sup_b ∫_0^b fʲ(p) (wʲ + x p) dp
//! ```
//!
//! is the convex conjugate of the running cost. The value function has the
//! closed form `ṽ(t, S) = sup_{x ≤ 0} (S x - (T - t) H(x) - x² / 4K)` and the
//! optimal bids are `-wʲ / x*`, where the co-state `x*` makes the remaining
//! budget be spent at the constant rate `S / (T - t)`.
//!
//! Internally the co-state is handled through `y = -1/x`, the bid per unit of
//! source weight, which turns every root-finding problem into the inversion
//! of an increasing function on `(0, ∞)`.

use crate::bid::Bid;
use crate::campaign::{AuctionType, CampaignConfig, Penalty, SourceSpec};
use crate::error::{Error, Result};
use crate::price::bisect_increasing;

/// Shadow price of one EUR of budget, `∂_S ṽ`; always `<= 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct CoState(pub f64);

impl CoState {
    /// The second-price bid `-w / x` for a source of weight `w`.
    pub fn bid_for_weight(self, weight: f64) -> Bid {
        if self.0 >= 0.0 {
            Bid::Unbounded
        } else if weight <= 0.0 {
            Bid::ZERO
        } else {
            Bid::Finite(-weight / self.0)
        }
    }
}

/// `Hʲ(x)` for one source.
pub fn hamiltonian(source: &SourceSpec, x: f64) -> f64 {
    let w = source.weight();
    if x >= 0.0 {
        source.intensity * (w + x * source.model.mean())
    } else if w <= 0.0 {
        0.0
    } else {
        -source.intensity * x * source.model.integrated_cdf(-w / x)
    }
}

/// `Hʲ'(x) = λ G(-w/x)`: the spend rate induced by the co-state `x`.
pub fn hamiltonian_derivative(source: &SourceSpec, x: f64) -> f64 {
    let w = source.weight();
    if x >= 0.0 {
        source.max_spend_rate()
    } else if w <= 0.0 {
        0.0
    } else {
        source.intensity * source.model.g(-w / x)
    }
}

pub fn total_hamiltonian(sources: &[SourceSpec], x: f64) -> f64 {
    sources.iter().map(|s| hamiltonian(s, x)).sum()
}

pub fn total_hamiltonian_derivative(sources: &[SourceSpec], x: f64) -> f64 {
    sources.iter().map(|s| hamiltonian_derivative(s, x)).sum()
}

/// Spend rate as a function of the bid per unit weight `y = -1/x`.
fn spend_rate(sources: &[SourceSpec], y: f64) -> f64 {
    sources
        .iter()
        .map(|s| s.intensity * s.model.g(s.weight() * y))
        .sum()
}

fn initial_guess(sources: &[SourceSpec]) -> f64 {
    sources
        .iter()
        .filter(|s| s.weight() > 0.0)
        .map(|s| s.model.quantile(0.5) / s.weight())
        .fold(f64::INFINITY, f64::min)
        .max(f64::MIN_POSITIVE)
}

/// Smallest `y > 0` with `spend(y) - 1/(2K y) >= target`.
fn solve_bid_per_weight(
    spend: impl Fn(f64) -> f64,
    horizon_left: f64,
    penalty: Penalty,
    target: f64,
    guess: f64,
) -> f64 {
    let h = |y: f64| {
        let penalty_term = match penalty {
            Penalty::Finite(k) => 1.0 / (2.0 * k * y),
            Penalty::Infinite => 0.0,
        };
        horizon_left * spend(y) - penalty_term
    };
    bisect_increasing(h, target, 0.0, guess)
}

/// Solves `Σ_j Hʲ'(x*) = rate` for `x* < 0`.
pub fn inverse_hprime(sources: &[SourceSpec], rate: f64) -> Result<CoState> {
    let max_rate: f64 = sources.iter().map(SourceSpec::max_spend_rate).sum();
    if !(rate > 0.0 && rate < max_rate) {
        return Err(Error::Domain(format!(
            "target spend rate {rate} outside (0, {max_rate})"
        )));
    }
    let y = solve_bid_per_weight(
        |y| spend_rate(sources, y),
        1.0,
        Penalty::Infinite,
        rate,
        initial_guess(sources),
    );
    Ok(CoState(-1.0 / y))
}

fn check_time(campaign: &CampaignConfig, t: f64) -> Result<f64> {
    if !(t >= 0.0 && t < campaign.horizon) {
        return Err(Error::Domain(format!(
            "time {t} outside [0, {})",
            campaign.horizon
        )));
    }
    Ok(campaign.horizon - t)
}

/// Optimal co-state of the fluid problem at `(t, S)`; `None` when the budget
/// cannot be exhausted (then `x* = 0`). Requires `t < T`.
fn fluid_costate(campaign: &CampaignConfig, tau: f64, s: f64) -> Option<CoState> {
    if s >= tau * campaign.max_spend_rate() {
        return None;
    }
    let sources = &campaign.sources;
    let y = solve_bid_per_weight(
        |y| spend_rate(sources, y),
        tau,
        campaign.penalty,
        s,
        initial_guess(sources),
    );
    Some(CoState(-1.0 / y))
}

/// Second-price fluid bids, one per source.
///
/// All bids are `Unbounded` once `S >= (T - t) Σ λʲ meanʲ`. With a hard
/// budget and `S <= 0` the policy stops buying.
pub fn fluid_bid(campaign: &CampaignConfig, t: f64, s: f64) -> Result<Vec<Bid>> {
    let tau = check_time(campaign, t)?;
    if s <= 0.0 && campaign.penalty == Penalty::Infinite {
        return Ok(vec![Bid::ZERO; campaign.sources.len()]);
    }
    Ok(match fluid_costate(campaign, tau, s) {
        None => vec![Bid::Unbounded; campaign.sources.len()],
        Some(x) => campaign.sources.iter().map(|src| x.bid_for_weight(src.weight())).collect(),
    })
}

/// The fluid value function `ṽ(t, S)` (minus the expected weighted purchases,
/// plus the penalty). `+∞` for a negative budget under a hard constraint.
pub fn fluid_value(campaign: &CampaignConfig, t: f64, s: f64) -> f64 {
    let tau = (campaign.horizon - t).max(0.0);
    let k = campaign.penalty;
    if tau == 0.0 {
        return k.terminal(s);
    }
    if k == Penalty::Infinite && s <= 0.0 {
        return if s < 0.0 { f64::INFINITY } else { 0.0 };
    }
    let x = match fluid_costate(campaign, tau, s) {
        None => 0.0,
        Some(CoState(x)) => x,
    };
    let quad = match k {
        Penalty::Finite(k) => x * x / (4.0 * k),
        Penalty::Infinite => 0.0,
    };
    s * x - tau * total_hamiltonian(&campaign.sources, x) - quad
}

/// `F(b) (w + x b)`: first-price expected surplus of a bid.
fn first_price_objective(source: &SourceSpec, x: f64, b: f64) -> f64 {
    source.model.cdf(b) * (source.weight() + x * b)
}

/// Maximizer of `F(b)(w + x b)` over `b >= 0`, by golden-section search.
///
/// The search interval starts at the lower end of the support and ends at the
/// break-even bid `-w/x` or the 0.999999-quantile, extended while the
/// objective still increases.
pub fn first_price_argmax(source: &SourceSpec, x: f64) -> Bid {
    let w = source.weight();
    if x >= 0.0 {
        return Bid::Unbounded;
    }
    if w <= 0.0 {
        return Bid::ZERO;
    }
    let breakeven = -w / x;
    let lo = source.model.support_min();
    if lo >= breakeven {
        return Bid::ZERO;
    }
    let obj = |b: f64| first_price_objective(source, x, b);
    let mut hi = source.model.quantile(0.999_999).min(breakeven).max(lo);
    while hi < breakeven && obj(hi * 1.01) > obj(hi) {
        hi = (hi * 2.0).min(breakeven);
    }
    let b = golden_section_max(obj, lo, hi);
    if obj(b) > 0.0 {
        Bid::Finite(b)
    } else {
        Bid::ZERO
    }
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
pub(crate) fn golden_section_max(h: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (h(c), h(d));
    for _ in 0..200 {
        if b - a <= 1e-14 * b.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = h(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = h(d);
        }
    }
    let mid = 0.5 * (a + b);
    [lo, mid, hi]
        .into_iter()
        .fold((lo, f64::NEG_INFINITY), |best, z| {
            let v = h(z);
            if v > best.1 {
                (z, v)
            } else {
                best
            }
        })
        .0
}

/// First-price Hamiltonian `λ sup_b F(b)(w + x b)`.
pub fn first_price_hamiltonian(source: &SourceSpec, x: f64) -> f64 {
    match first_price_argmax(source, x) {
        Bid::Finite(b) => source.intensity * first_price_objective(source, x, b),
        Bid::Unbounded if x == 0.0 => source.intensity * source.weight(),
        Bid::Unbounded => f64::INFINITY,
    }
}

/// First-price spend rate `λ F(b*) b*` at co-state `x < 0`.
fn first_price_spend(sources: &[SourceSpec], y: f64) -> f64 {
    let x = -1.0 / y;
    sources
        .iter()
        .map(|s| match first_price_argmax(s, x) {
            Bid::Finite(b) => s.intensity * s.model.cdf(b) * b,
            Bid::Unbounded => f64::INFINITY,
        })
        .sum()
}

/// First-price fluid bids: the co-state is chosen so that the first-price
/// spend rate exhausts the budget evenly, then each source bids its own
/// argmax of `F(b)(wʲ + x* b)`.
pub fn first_price_fluid_bid(campaign: &CampaignConfig, t: f64, s: f64) -> Result<Vec<Bid>> {
    let tau = check_time(campaign, t)?;
    if s <= 0.0 && campaign.penalty == Penalty::Infinite {
        return Ok(vec![Bid::ZERO; campaign.sources.len()]);
    }
    let sources = &campaign.sources;
    let y = solve_bid_per_weight(
        |y| first_price_spend(sources, y),
        tau,
        campaign.penalty,
        s,
        initial_guess(sources),
    );
    let x = -1.0 / y;
    Ok(sources.iter().map(|src| first_price_argmax(src, x)).collect())
}

/// Dispatches on the campaign's auction type.
pub fn policy_bid(campaign: &CampaignConfig, t: f64, s: f64) -> Result<Vec<Bid>> {
    match campaign.auction {
        AuctionType::SecondPrice => fluid_bid(campaign, t, s),
        AuctionType::FirstPrice => first_price_fluid_bid(campaign, t, s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::price::PriceModel;

    fn exp_source(lambda: f64) -> SourceSpec {
        SourceSpec::new(lambda, PriceModel::exponential(2000.0).unwrap())
    }

    // Frozen oracle values, from mpmath quadrature and 200-step bisection.
    const EVEN_SPEND_BID: f64 = 1.567_862_901_763_418e-4;
    const FLUID_VALUE_T0: f64 = -13_458.433_345_866_288;
    const H_AT_MINUS_2000: f64 = 183.939_720_585_721_16;

    #[test]
    fn hamiltonian_at_zero_is_weighted_intensity() {
        let s = exp_source(500.0).with_impression_weight(2.5);
        assert_eq!(hamiltonian(&s, 0.0), 500.0 * 2.5);
    }

    #[test]
    fn hamiltonian_reference_value() {
        let s = exp_source(500.0);
        assert!((hamiltonian(&s, -2000.0) - H_AT_MINUS_2000).abs() < 1e-10);
    }

    #[test]
    fn hamiltonian_matches_direct_maximization() {
        let s = exp_source(500.0);
        let x = -2000.0;
        let direct = (0..=200_000)
            .map(|i| {
                let b = 2e-3 * i as f64 / 200_000.0;
                500.0 * (s.model.cdf(b) + x * s.model.g(b))
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((hamiltonian(&s, x) - direct).abs() < 1e-9);
    }

    #[test]
    fn hamiltonian_vanishes_far_left() {
        let s = exp_source(500.0);
        let mut prev = hamiltonian(&s, -1.0);
        for k in 1..12 {
            let h = hamiltonian(&s, -10f64.powi(k));
            assert!(h <= prev && h >= 0.0);
            prev = h;
        }
        assert!(prev < 1e-5);
    }

    #[test]
    fn derivative_at_nonnegative_costate() {
        let s = exp_source(500.0);
        assert_eq!(hamiltonian_derivative(&s, 0.0), 500.0 * 5e-4);
        assert_eq!(hamiltonian_derivative(&s, 3.0), 500.0 * 5e-4);
        assert!(hamiltonian_derivative(&s, -1e15) < 1e-20);
        assert!((hamiltonian_derivative(&s, -1e-9) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn derivative_at_even_spend_costate() {
        let s = exp_source(500.0);
        let rate = hamiltonian_derivative(&s, -1.0 / EVEN_SPEND_BID);
        assert!((rate - 0.01).abs() < 1e-14);
    }

    #[test]
    fn inverse_hprime_examples() {
        let s = exp_source(500.0);
        let b0 = 3e-4;
        let x = inverse_hprime(std::slice::from_ref(&s), 500.0 * s.model.g(b0)).unwrap();
        assert!((x.0 - (-1.0 / b0)).abs() <= 1e-12 * x.0.abs());

        let x = inverse_hprime(std::slice::from_ref(&s), 0.01).unwrap();
        assert!((x.0 + 1.0 / EVEN_SPEND_BID).abs() <= 1e-10 * x.0.abs());
        let residual = hamiltonian_derivative(&s, x.0) - 0.01;
        assert!(residual.abs() <= 1e-12 * 0.01);

        let halves = [exp_source(250.0), exp_source(250.0)];
        let y = inverse_hprime(&halves, 0.01).unwrap();
        assert!((y.0 - x.0).abs() <= 1e-12 * x.0.abs());

        assert!(inverse_hprime(&[s.clone()], 0.0).is_err());
        assert!(inverse_hprime(&[s], 0.25).is_err());
    }

    #[test]
    fn fluid_bid_reference() {
        let c = CampaignConfig::reference();
        let b = fluid_bid(&c, 0.0, 1.0).unwrap()[0].finite().unwrap();
        assert!((b - EVEN_SPEND_BID).abs() <= 1e-12 * EVEN_SPEND_BID);
    }

    #[test]
    fn fluid_bid_is_unbounded_with_surplus_budget() {
        let c = CampaignConfig::reference();
        let t = 40.0;
        let s = 2.0 * 500.0 * (100.0 - t) * 5e-4;
        assert_eq!(fluid_bid(&c, t, s).unwrap(), vec![Bid::Unbounded]);
        // boundary belongs to the unbounded side
        assert_eq!(fluid_bid(&c, t, 500.0 * 60.0 * 5e-4).unwrap(), vec![Bid::Unbounded]);
    }

    #[test]
    fn fluid_bid_edge_cases() {
        let c = CampaignConfig::reference();
        assert!(fluid_bid(&c, 100.0, 1.0).is_err());
        assert!(fluid_bid(&c, -1.0, 1.0).is_err());
        assert_eq!(fluid_bid(&c, 10.0, 0.0).unwrap(), vec![Bid::ZERO]);
        assert_eq!(fluid_bid(&c, 10.0, -0.1).unwrap(), vec![Bid::ZERO]);
    }

    #[test]
    fn ratio_law_for_weights() {
        let mut c = CampaignConfig::reference();
        c.sources = vec![exp_source(250.0), exp_source(250.0).with_impression_weight(2.0)];
        let bids = fluid_bid(&c, 0.0, 1.0).unwrap();
        let (b1, b2) = (bids[0].finite().unwrap(), bids[1].finite().unwrap());
        assert_eq!(b2, 2.0 * b1);
    }

    #[test]
    fn fluid_value_examples() {
        let c = CampaignConfig::reference();
        assert_eq!(fluid_value(&c, 100.0, 0.3), 0.0);
        let k = c.clone().with_penalty(Penalty::Finite(1e4));
        assert_eq!(fluid_value(&k, 100.0, 0.3), 0.0);
        assert!((fluid_value(&k, 100.0, -0.1) - 100.0).abs() < 1e-9);

        let v = fluid_value(&c, 0.0, 1.0);
        assert!((v - FLUID_VALUE_T0).abs() <= 1e-9 * FLUID_VALUE_T0.abs(), "{v}");

        // surplus budget: supremum attained at x* = 0
        let v = fluid_value(&c, 60.0, 50.0);
        assert!((v + 40.0 * 500.0).abs() < 1e-9);
    }

    #[test]
    fn fluid_value_matches_grid_search() {
        let c = CampaignConfig::reference();
        let best = (1..=400_000)
            .map(|i| {
                let x = -20_000.0 + i as f64 * (19_900.0 / 400_000.0);
                x - 100.0 * total_hamiltonian(&c.sources, x)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let v = fluid_value(&c, 0.0, 1.0);
        assert!((v - best).abs() <= 1e-6 * v.abs());
    }

    #[test]
    fn fluid_value_equals_minus_expected_impressions() {
        let c = CampaignConfig::reference();
        let b = fluid_bid(&c, 0.0, 1.0).unwrap()[0].finite().unwrap();
        let impressions = 500.0 * 100.0 * c.sources[0].model.cdf(b);
        assert!((fluid_value(&c, 0.0, 1.0) + impressions).abs() <= 1e-9 * impressions);
    }

    #[test]
    fn first_price_argmax_examples() {
        let s = exp_source(500.0);
        assert_eq!(first_price_argmax(&s, 0.0), Bid::Unbounded);
        let x = -5000.0;
        let b = first_price_argmax(&s, x).finite().unwrap();
        // fine-grid scan oracle
        let obj = |b: f64| s.model.cdf(b) * (1.0 + x * b);
        let (scan_b, scan_v) = (0..=100_000)
            .map(|i| {
                let b = 2e-4 * i as f64 / 100_000.0;
                (b, obj(b))
            })
            .fold((0.0, f64::NEG_INFINITY), |a, z| if z.1 > a.1 { z } else { a });
        assert!((obj(b) - scan_v).abs() <= 1e-8 * scan_v);
        assert!(obj(b) >= scan_v);
        assert!((b - scan_b).abs() <= 2e-9);
        // first-order condition for the exponential law: μ(w + x b) + x(e^{μb} - 1) = 0
        let foc = 2000.0 * (1.0 + x * b) + x * (2000.0 * b).exp_m1();
        assert!(foc.abs() < 1e-4);
    }

    #[test]
    fn first_price_bid_is_lower() {
        let c = CampaignConfig::reference();
        for (t, s) in [(0.0, 1.0), (50.0, 0.2), (90.0, 0.9), (99.0, 0.01)] {
            let sp = fluid_bid(&c, t, s).unwrap()[0];
            let fp = first_price_fluid_bid(&c, t, s).unwrap()[0];
            assert!(fp <= sp, "{t} {s}: {fp:?} > {sp:?}");
        }
    }

    #[test]
    fn first_price_even_spend() {
        let c = CampaignConfig::reference();
        let b = first_price_fluid_bid(&c, 0.0, 1.0).unwrap()[0].finite().unwrap();
        let rate = 500.0 * c.sources[0].model.cdf(b) * b;
        assert!((rate - 0.01).abs() < 1e-9);
    }

    #[test]
    fn finite_penalty_characterization() {
        let c = CampaignConfig::reference().with_penalty(Penalty::Finite(1e4));
        let b = fluid_bid(&c, 0.0, 1.0).unwrap()[0].finite().unwrap();
        let x = -1.0 / b;
        let lhs = 100.0 * hamiltonian_derivative(&c.sources[0], x) + x / (2.0 * 1e4);
        assert!((lhs - 1.0).abs() < 1e-12);
        // with a soft penalty the fluid plan still buys at S <= 0
        assert!(fluid_bid(&c, 10.0, -0.01).unwrap()[0].finite().unwrap() > 0.0);
    }
}
