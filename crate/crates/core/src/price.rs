//! Laws of the price to beat.
//!
//! Every quantity is expressed per impression in EUR. Besides the CDF and the
//! density, the solvers consume three integrals of the law, all available in
//! closed form for the supported families:
//!
//! * `G(b) = ∫_[0,b] p dF(p)`, the expected payment per auction when bidding `b`;
//! * `∫_0^b F(p) dp`, which gives the Hamiltonian;
//! * `∫_[0,b] p² dF(p)`, used when the value function is quadratic.
//!
//! Point masses (hard floors) are included in the closed interval `[0, b]`.

use rand::Rng;

use crate::bid::Bid;
use crate::error::{Error, Result};

/// Distribution of the highest competing bid.
#[derive(Debug, Clone, PartialEq)]
pub enum PriceModel {
    /// Density `rate * exp(-rate * p)`.
    Exponential { rate: f64 },
    /// Uniform on `[lo, hi]`; `lo == hi` is a point mass.
    Uniform { lo: f64, hi: f64 },
    /// Density `shape * scale^shape / p^(shape + 1)` on `[scale, ∞)`.
    Pareto { scale: f64, shape: f64 },
    /// A reserve price: the base law with all mass below `floor` moved onto `floor`.
    HardFloored { base: Box<PriceModel>, floor: f64 },
}

const SERIES_CUTOFF: f64 = 0.05;

/// Sums `Σ_{k ≥ k0} sign(k) * coef(k) * x^k / k!` for small `x`.
fn exp_series(x: f64, k0: u32, term: impl Fn(u32) -> f64) -> f64 {
    let mut sum = 0.0;
    let mut pow_over_fact = 1.0;
    for k in 1..k0 {
        pow_over_fact *= x / k as f64;
    }
    for k in k0..k0 + 24 {
        pow_over_fact *= x / k as f64;
        let t = term(k) * pow_over_fact;
        sum += t;
        if t.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

fn alternating(k: u32) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl PriceModel {
    pub fn exponential(rate: f64) -> Result<Self> {
        let m = PriceModel::Exponential { rate };
        m.validate()?;
        Ok(m)
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let m = PriceModel::Uniform { lo, hi };
        m.validate()?;
        Ok(m)
    }

    pub fn pareto(scale: f64, shape: f64) -> Result<Self> {
        let m = PriceModel::Pareto { scale, shape };
        m.validate()?;
        Ok(m)
    }

    pub fn with_floor(self, floor: f64) -> Result<Self> {
        let m = PriceModel::HardFloored { base: Box::new(self), floor };
        m.validate()?;
        Ok(m)
    }

    /// Checks parameter ranges. Pareto tails must satisfy `p³f(p) → 0`,
    /// i.e. `shape > 3`.
    pub fn validate(&self) -> Result<()> {
        match self {
            PriceModel::Exponential { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(Error::unit("distribution.mu", "rate must be positive and finite"));
                }
            }
            PriceModel::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && *lo >= 0.0 && hi >= lo && *hi > 0.0) {
                    return Err(Error::unit("distribution.lo/hi", "need 0 <= lo <= hi and hi > 0"));
                }
            }
            PriceModel::Pareto { scale, shape } => {
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(Error::unit("distribution.scale", "scale must be positive"));
                }
                if !(shape.is_finite() && *shape > 3.0) {
                    return Err(Error::unit("distribution.shape", "tail condition requires shape > 3"));
                }
            }
            PriceModel::HardFloored { base, floor } => {
                base.validate()?;
                if !(floor.is_finite() && *floor > 0.0) {
                    return Err(Error::unit("distribution.floor", "floor must be positive"));
                }
            }
        }
        Ok(())
    }

    /// `P(price <= p)`, including point masses.
    pub fn cdf(&self, p: f64) -> f64 {
        if p < 0.0 {
            return 0.0;
        }
        match self {
            PriceModel::Exponential { rate } => -(-rate * p).exp_m1(),
            PriceModel::Uniform { lo, hi } => {
                if p >= *hi {
                    1.0
                } else if p <= *lo {
                    0.0
                } else {
                    (p - lo) / (hi - lo)
                }
            }
            PriceModel::Pareto { scale, shape } => {
                if p <= *scale {
                    0.0
                } else {
                    -(shape * (scale / p).ln()).exp_m1()
                }
            }
            PriceModel::HardFloored { base, floor } => {
                if p < *floor {
                    0.0
                } else {
                    base.cdf(p)
                }
            }
        }
    }

    /// Density of the absolutely continuous part.
    pub fn density(&self, p: f64) -> f64 {
        if p < 0.0 {
            return 0.0;
        }
        match self {
            PriceModel::Exponential { rate } => rate * (-rate * p).exp(),
            PriceModel::Uniform { lo, hi } => {
                if hi > lo && p >= *lo && p <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            PriceModel::Pareto { scale, shape } => {
                if p < *scale {
                    0.0
                } else {
                    shape / p * (scale / p).powf(*shape)
                }
            }
            PriceModel::HardFloored { base, floor } => {
                if p <= *floor {
                    0.0
                } else {
                    base.density(p)
                }
            }
        }
    }

    /// Point mass of the law, as `(location, weight)`, if any.
    pub fn atom(&self) -> Option<(f64, f64)> {
        match self {
            PriceModel::Uniform { lo, hi } if lo == hi => Some((*lo, 1.0)),
            PriceModel::HardFloored { base, floor } => {
                let w = base.cdf(*floor);
                (w > 0.0).then_some((*floor, w))
            }
            _ => None,
        }
    }

    /// Lower end of the support.
    pub fn support_min(&self) -> f64 {
        match self {
            PriceModel::Exponential { .. } => 0.0,
            PriceModel::Uniform { lo, .. } => *lo,
            PriceModel::Pareto { scale, .. } => *scale,
            PriceModel::HardFloored { base, floor } => base.support_min().max(*floor),
        }
    }

    /// Upper end of the support, `None` when unbounded.
    pub fn support_max(&self) -> Option<f64> {
        match self {
            PriceModel::Uniform { hi, .. } => Some(*hi),
            PriceModel::HardFloored { base, floor } => base.support_max().map(|m| m.max(*floor)),
            _ => None,
        }
    }

    /// `G(b) = ∫_[0,b] p dF(p)` for a finite bid.
    pub fn g(&self, b: f64) -> f64 {
        if b <= 0.0 {
            return 0.0;
        }
        match self {
            PriceModel::Exponential { rate } => {
                let x = rate * b;
                let num = if x < SERIES_CUTOFF {
                    exp_series(x, 2, |k| alternating(k) * (k - 1) as f64)
                } else {
                    -(-x).exp_m1() - x * (-x).exp()
                };
                num / rate
            }
            PriceModel::Uniform { lo, hi } => {
                if lo == hi {
                    if b >= *lo {
                        *lo
                    } else {
                        0.0
                    }
                } else if b <= *lo {
                    0.0
                } else {
                    let m = b.min(*hi);
                    (m - lo) * (m + lo) / (2.0 * (hi - lo))
                }
            }
            PriceModel::Pareto { scale, shape } => {
                if b <= *scale {
                    0.0
                } else {
                    let ratio = ((shape - 1.0) * (scale / b).ln()).exp_m1();
                    -shape * scale / (shape - 1.0) * ratio
                }
            }
            PriceModel::HardFloored { base, floor } => {
                if b < *floor {
                    0.0
                } else {
                    floor * base.cdf(*floor) + (base.g(b) - base.g(*floor))
                }
            }
        }
    }

    /// `G` extended to unbounded bids.
    pub fn partial_expectation(&self, b: Bid) -> f64 {
        match b {
            Bid::Finite(v) => self.g(v),
            Bid::Unbounded => self.mean(),
        }
    }

    /// Mean price to beat, `G(+∞)`.
    pub fn mean(&self) -> f64 {
        match self {
            PriceModel::Exponential { rate } => 1.0 / rate,
            PriceModel::Uniform { lo, hi } => 0.5 * (lo + hi),
            PriceModel::Pareto { scale, shape } => shape * scale / (shape - 1.0),
            PriceModel::HardFloored { base, floor } => {
                floor * base.cdf(*floor) + (base.mean() - base.g(*floor))
            }
        }
    }

    /// `∫_0^b F(p) dp`.
    pub fn integrated_cdf(&self, b: f64) -> f64 {
        if b <= 0.0 {
            return 0.0;
        }
        match self {
            PriceModel::Exponential { rate } => {
                let x = rate * b;
                let num = if x < SERIES_CUTOFF {
                    exp_series(x, 2, alternating)
                } else {
                    x + (-x).exp_m1()
                };
                num / rate
            }
            PriceModel::Uniform { lo, hi } => {
                if b <= *lo {
                    0.0
                } else if b >= *hi {
                    0.5 * (hi - lo) + (b - hi)
                } else {
                    (b - lo) * (b - lo) / (2.0 * (hi - lo))
                }
            }
            PriceModel::Pareto { scale, shape } => {
                if b <= *scale {
                    0.0
                } else {
                    let ratio = ((shape - 1.0) * (scale / b).ln()).exp_m1();
                    (b - scale) + scale / (shape - 1.0) * ratio
                }
            }
            PriceModel::HardFloored { base, floor } => {
                if b <= *floor {
                    0.0
                } else {
                    base.integrated_cdf(b) - base.integrated_cdf(*floor)
                }
            }
        }
    }

    /// `∫_[0,b] p² dF(p)`.
    pub fn partial_second_moment(&self, b: f64) -> f64 {
        if b <= 0.0 {
            return 0.0;
        }
        match self {
            PriceModel::Exponential { rate } => {
                let x = rate * b;
                let num = if x < SERIES_CUTOFF {
                    exp_series(x, 3, |k| -alternating(k) * ((k - 1) * (k - 2)) as f64)
                } else {
                    2.0 - (-x).exp() * (x * x + 2.0 * x + 2.0)
                };
                num / (rate * rate)
            }
            PriceModel::Uniform { lo, hi } => {
                if lo == hi {
                    if b >= *lo {
                        lo * lo
                    } else {
                        0.0
                    }
                } else if b <= *lo {
                    0.0
                } else {
                    let m = b.min(*hi);
                    (m * m * m - lo * lo * lo) / (3.0 * (hi - lo))
                }
            }
            PriceModel::Pareto { scale, shape } => {
                if b <= *scale {
                    0.0
                } else {
                    let ratio = ((shape - 2.0) * (scale / b).ln()).exp_m1();
                    -shape * scale * scale / (shape - 2.0) * ratio
                }
            }
            PriceModel::HardFloored { base, floor } => {
                if b < *floor {
                    0.0
                } else {
                    floor * floor * base.cdf(*floor)
                        + (base.partial_second_moment(b) - base.partial_second_moment(*floor))
                }
            }
        }
    }

    /// Generalized inverse of the CDF on `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            PriceModel::Exponential { rate } => -(-u).ln_1p() / rate,
            PriceModel::Uniform { lo, hi } => lo + u * (hi - lo),
            PriceModel::Pareto { scale, shape } => scale * (-(-u).ln_1p() / shape).exp(),
            PriceModel::HardFloored { base, floor } => {
                if u < base.cdf(*floor) {
                    *floor
                } else {
                    base.quantile(u).max(*floor)
                }
            }
        }
    }

    /// Draws one price by inversion of the CDF.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.gen::<f64>())
    }

    /// Smallest bid `b` with `G(b) >= s`; `Unbounded` exactly when `s` is the mean.
    pub fn inverse_partial_expectation(&self, s: f64) -> Result<Bid> {
        let mean = self.mean();
        if !(s >= 0.0 && s <= mean) {
            return Err(Error::Domain(format!(
                "partial expectation target {s} outside [0, {mean}]"
            )));
        }
        if s == 0.0 {
            return Ok(Bid::ZERO);
        }
        if s == mean {
            return Ok(Bid::Unbounded);
        }
        match self {
            PriceModel::Uniform { lo, hi } if hi > lo => {
                return Ok(Bid::Finite((lo * lo + 2.0 * (hi - lo) * s).sqrt().min(*hi)));
            }
            PriceModel::Pareto { scale, shape } => {
                let frac = 1.0 - s * (shape - 1.0) / (shape * scale);
                return Ok(Bid::Finite(scale * frac.powf(-1.0 / (shape - 1.0))));
            }
            _ => {}
        }
        Ok(Bid::Finite(bisect_increasing(|b| self.g(b), s, self.support_min(), self.median())))
    }

    fn median(&self) -> f64 {
        self.quantile(0.5).max(f64::MIN_POSITIVE)
    }
}

/// Smallest `x >= lo` with `h(x) >= target` for a nondecreasing `h`, located by
/// doubling from `guess` and then bisecting to machine precision.
pub(crate) fn bisect_increasing(h: impl Fn(f64) -> f64, target: f64, lo: f64, guess: f64) -> f64 {
    let mut lo = lo;
    if h(lo) >= target {
        return lo;
    }
    let mut hi = guess.max(lo * 2.0).max(f64::MIN_POSITIVE);
    for _ in 0..2000 {
        if h(hi) >= target {
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn reference() -> PriceModel {
        PriceModel::exponential(2000.0).unwrap()
    }

    fn simpson(h: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let dx = (b - a) / n as f64;
        let mut s = h(a) + h(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * h(a + i as f64 * dx);
        }
        s * dx / 3.0
    }

    #[test]
    fn exponential_cdf_values() {
        let m = reference();
        assert_eq!(m.cdf(0.0), 0.0);
        // 1 - e^-2, high precision
        assert!((m.cdf(1e-3) - 0.864_664_716_763_387_3).abs() < 1e-15);
    }

    #[test]
    fn floored_cdf_is_zero_below_floor() {
        let m = reference().with_floor(5e-4).unwrap();
        assert_eq!(m.cdf(4e-4), 0.0);
        assert_eq!(m.cdf(5e-4), reference().cdf(5e-4));
        assert_eq!(m.atom(), Some((5e-4, reference().cdf(5e-4))));
    }

    #[test]
    fn partial_expectation_examples() {
        let m = reference();
        assert_eq!(m.partial_expectation(Bid::ZERO), 0.0);
        assert!((m.partial_expectation(Bid::Unbounded) - 5e-4).abs() < 1e-18);
        let u = PriceModel::uniform(0.0, 1e-3).unwrap();
        assert!((u.g(5e-4) - 1.25e-4).abs() < 1e-18);
        assert!((u.mean() - 5e-4).abs() < 1e-18);
    }

    #[test]
    fn floored_g_includes_the_atom() {
        let base = reference();
        let m = base.clone().with_floor(5e-4).unwrap();
        assert_eq!(m.g(4.99e-4), 0.0);
        let atom = 5e-4 * base.cdf(5e-4);
        assert!((m.g(5e-4) - atom).abs() < 1e-18);
        assert!(m.mean() >= atom);
        // mean = floor * F(floor) + tail part of the base mean
        let tail = base.mean() - base.g(5e-4);
        assert!((m.mean() - atom - tail).abs() < 1e-18);
    }

    #[test]
    fn inverse_partial_expectation_examples() {
        let m = reference();
        assert_eq!(m.inverse_partial_expectation(0.0).unwrap(), Bid::ZERO);
        assert_eq!(m.inverse_partial_expectation(m.mean()).unwrap(), Bid::Unbounded);
        // oracle: mpmath quadrature + bisection
        let b = m.inverse_partial_expectation(2e-5).unwrap().finite().unwrap();
        assert!((b - 1.567_862_901_763_418e-4).abs() < 1e-15);
        assert!(matches!(m.inverse_partial_expectation(-1e-9), Err(Error::Domain(_))));
        assert!(matches!(m.inverse_partial_expectation(6e-4), Err(Error::Domain(_))));
    }

    #[test]
    fn inverse_handles_floor_jump() {
        let m = reference().with_floor(5e-4).unwrap();
        let atom = m.g(5e-4);
        let b = m.inverse_partial_expectation(0.5 * atom).unwrap();
        assert_eq!(b, Bid::Finite(5e-4));
    }

    #[test]
    fn degenerate_uniform_samples_its_point() {
        let m = PriceModel::uniform(3e-4, 3e-4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            assert_eq!(m.sample(&mut rng), 3e-4);
        }
    }

    #[test]
    fn floored_samples_respect_the_floor() {
        let m = reference().with_floor(5e-4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!((0..10_000).all(|_| m.sample(&mut rng) >= 5e-4));
    }

    #[test]
    fn exponential_sample_mean() {
        let m = reference();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1_000_000;
        let mean = (0..n).map(|_| m.sample(&mut rng)).sum::<f64>() / n as f64;
        // sd of an exponential equals its mean
        let se = 5e-4 / (n as f64).sqrt();
        assert!((mean - 5e-4).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn rejects_heavy_pareto_tails() {
        assert!(PriceModel::pareto(1e-4, 3.0).is_err());
        assert!(PriceModel::pareto(1e-4, 3.5).is_ok());
        assert!(PriceModel::exponential(-1.0).is_err());
        assert!(PriceModel::uniform(2.0, 1.0).is_err());
    }

    fn continuous_models() -> Vec<PriceModel> {
        vec![
            reference(),
            PriceModel::uniform(1e-4, 1.2e-3).unwrap(),
            PriceModel::pareto(2e-4, 4.5).unwrap(),
        ]
    }

    #[test]
    fn closed_forms_match_simpson() {
        for m in continuous_models() {
            let mean = m.mean();
            let upper = m.quantile(0.999);
            for i in 1..=100 {
                let b = upper * i as f64 / 100.0;
                let lo = m.support_min();
                let g_quad = if b > lo { simpson(|p| p * m.density(p), lo, b, 20_000) } else { 0.0 };
                assert!((m.g(b) - g_quad).abs() <= 1e-10 * mean, "{m:?} G({b})");
                let if_quad = if b > lo { simpson(|p| m.cdf(p), lo, b, 20_000) } else { 0.0 };
                assert!((m.integrated_cdf(b) - if_quad).abs() <= 1e-10 * mean, "{m:?} IF({b})");
                let m2_quad =
                    if b > lo { simpson(|p| p * p * m.density(p), lo, b, 20_000) } else { 0.0 };
                assert!((m.partial_second_moment(b) - m2_quad).abs() <= 1e-10 * mean * mean);
            }
        }
    }

    #[test]
    fn series_branch_is_continuous() {
        let m = reference();
        let b = SERIES_CUTOFF / 2000.0;
        for f in [
            PriceModel::g as fn(&PriceModel, f64) -> f64,
            PriceModel::integrated_cdf,
            PriceModel::partial_second_moment,
        ] {
            let below = f(&m, b * (1.0 - 1e-12));
            let above = f(&m, b * (1.0 + 1e-12));
            assert!((above - below).abs() <= 1e-10 * above);
        }
    }

    /// Kolmogorov-Smirnov statistic against the model CDF.
    fn ks_statistic(m: &PriceModel, samples: &mut [f64]) -> f64 {
        samples.sort_by(f64::total_cmp);
        let n = samples.len() as f64;
        samples
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = m.cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn sampler_passes_ks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in continuous_models() {
            let mut xs: Vec<f64> = (0..100_000).map(|_| m.sample(&mut rng)).collect();
            let d = ks_statistic(&m, &mut xs);
            // 99% critical value 1.628 / sqrt(n)
            assert!(d < 1.628 / (1e5f64).sqrt(), "{m:?}: D = {d}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn any_model() -> impl Strategy<Value = PriceModel> {
            prop_oneof![
                (100.0..5000.0f64).prop_map(|r| PriceModel::exponential(r).unwrap()),
                (0.0..1e-3f64, 1e-5..1e-3f64)
                    .prop_map(|(lo, w)| PriceModel::uniform(lo, lo + w).unwrap()),
                (1e-5..1e-3f64, 3.1..8.0f64)
                    .prop_map(|(s, a)| PriceModel::pareto(s, a).unwrap()),
                (100.0..5000.0f64, 1e-5..1e-3f64).prop_map(|(r, phi)| {
                    PriceModel::exponential(r).unwrap().with_floor(phi).unwrap()
                }),
            ]
        }

        proptest! {
            #[test]
            fn cdf_and_g_are_monotone(m in any_model(), a in 0.0..5e-3f64, b in 0.0..5e-3f64) {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                prop_assert!(m.cdf(lo) <= m.cdf(hi));
                prop_assert!(m.g(lo) <= m.g(hi) * (1.0 + 1e-14));
                prop_assert!(m.g(hi) <= m.mean() * (1.0 + 1e-14));
            }

            #[test]
            fn inverse_round_trip(m in any_model(), u in 0.01..0.99f64) {
                let b = m.quantile(u);
                prop_assume!(b > m.support_min() * (1.0 + 1e-9));
                prop_assume!(m.atom().map_or(true, |(x, _)| (b - x).abs() > 1e-9 * x));
                let back = m.inverse_partial_expectation(m.g(b)).unwrap().finite().unwrap();
                prop_assert!((back - b).abs() <= 1e-8 * b, "{} vs {}", back, b);
            }
        }
    }
}
