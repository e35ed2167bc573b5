//! Discrete-time model: `N` sequential second-price auctions, prices drawn
//! from a finite support, bids constrained to `[0, S]`, ties lost.
//!
//! ```text
//! u(n-1, I, S) = max_{b ∈ [0, S]} E[u(n, I+1, S-p) 1{b > p} + u(n, I, S) 1{b <= p}]
//! u(N, I, S)   = g(I, S)
//! ```
//!
//! The budget grid is closed under subtraction of support prices, so the
//! recursion needs no interpolation.

use std::fmt;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::price::PriceModel;
use crate::table::fmt_f64;

/// Largest number of price sequences `enumerate_value` will visit.
pub const ENUMERATION_CAP: u64 = 1_000_000;
/// Largest budget grid built automatically.
pub const GRID_CAP: usize = 1_000_000;

/// Terminal reward `g(I_N, S_N)`.
#[derive(Clone, Default)]
pub enum Objective {
    /// `g = I`, the number of impressions.
    #[default]
    Impressions,
    Custom(Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>),
}

impl Objective {
    pub fn eval(&self, impressions: usize, budget: f64) -> f64 {
        match self {
            Objective::Impressions => impressions as f64,
            Objective::Custom(g) => g(impressions, budget),
        }
    }
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::Impressions => f.write_str("Impressions"),
            Objective::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MdpSpec {
    pub auctions: usize,
    /// `(price, probability)` pairs, sorted by price.
    pub support: Vec<(f64, f64)>,
    pub budget: f64,
    pub objective: Objective,
    /// Explicit budget grid; built by closure under subtraction when `None`.
    pub budget_grid: Option<Vec<f64>>,
}

impl MdpSpec {
    pub fn new(auctions: usize, support: Vec<(f64, f64)>, budget: f64) -> Result<Self> {
        let mut support = support;
        support.sort_by(|a, b| a.0.total_cmp(&b.0));
        let spec = MdpSpec { auctions, support, budget, objective: Objective::Impressions, budget_grid: None };
        spec.validate()?;
        Ok(spec)
    }

    /// Midpoint masses of `model` on `cells` equal cells over `[0, q]`, with `q`
    /// the `upper`-quantile; masses are renormalized to sum to one.
    pub fn discretized(auctions: usize, model: &PriceModel, cells: usize, upper: f64, budget: f64) -> Result<Self> {
        if cells == 0 || !(0.0 < upper && upper < 1.0) {
            return Err(Error::Domain("need cells >= 1 and upper in (0, 1)".into()));
        }
        let q = model.quantile(upper);
        let h = q / cells as f64;
        let mut support: Vec<(f64, f64)> = (0..cells)
            .map(|k| {
                let (a, b) = (k as f64 * h, (k + 1) as f64 * h);
                let lower = if k == 0 { 0.0 } else { model.cdf(a) };
                ((k as f64 + 0.5) * h, model.cdf(b) - lower)
            })
            .filter(|&(_, w)| w > 0.0)
            .collect();
        let total: f64 = support.iter().map(|s| s.1).sum();
        for s in &mut support {
            s.1 /= total;
        }
        Self::new(auctions, support, budget)
    }

    pub fn with_objective(mut self, objective: Objective) -> Self {
        self.objective = objective;
        self
    }

    pub fn with_budget_grid(mut self, grid: Vec<f64>) -> Self {
        self.budget_grid = Some(grid);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.auctions == 0 {
            return Err(Error::unit("mdp.auctions", "must be at least 1"));
        }
        if !(self.budget.is_finite() && self.budget >= 0.0) {
            return Err(Error::unit("mdp.budget", "must be nonnegative"));
        }
        if self.support.is_empty() {
            return Err(Error::unit("mdp.support", "must not be empty"));
        }
        if self.support.iter().any(|&(p, w)| !(p.is_finite() && p >= 0.0 && w >= 0.0)) {
            return Err(Error::unit("mdp.support", "prices and probabilities must be nonnegative"));
        }
        let total: f64 = self.support.iter().map(|s| s.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::unit("mdp.support", format!("probabilities sum to {total}, not 1")));
        }
        Ok(())
    }

    fn tolerance(&self) -> f64 {
        1e-10 * self.budget.max(1.0)
    }

    /// Sorted budget values: the explicit grid, or every `S̄ - Σ prices`
    /// that stays nonnegative, plus 0.
    pub fn build_budget_grid(&self) -> Result<Vec<f64>> {
        let tol = self.tolerance();
        let mut values = match &self.budget_grid {
            Some(g) => g.clone(),
            None => {
                let mut found = vec![self.budget];
                let mut frontier = vec![self.budget];
                let mut seen = std::collections::HashSet::new();
                seen.insert(key(self.budget, tol));
                while let Some(s) = frontier.pop() {
                    for &(p, _) in &self.support {
                        if p > 0.0 && p < s {
                            let next = s - p;
                            if seen.insert(key(next, tol)) {
                                found.push(next);
                                frontier.push(next);
                                if found.len() > GRID_CAP {
                                    return Err(Error::Size(format!(
                                        "budget grid exceeds {GRID_CAP} values"
                                    )));
                                }
                            }
                        }
                    }
                }
                found
            }
        };
        values.push(0.0);
        values.sort_by(f64::total_cmp);
        values.dedup_by(|a, b| (*a - *b).abs() <= tol);
        if !values.iter().any(|&s| (s - self.budget).abs() <= tol) {
            return Err(Error::Grid("budget grid must contain the initial budget".into()));
        }
        Ok(values)
    }
}

fn key(x: f64, tol: f64) -> i64 {
    (x / tol).round() as i64
}

/// Optimal bids at one state: any bid in `(floor, cap]` is optimal.
///
/// `floor` is the largest price won (0 when nothing is won), so the smallest
/// optimal bid is `floor⁺`; `cap` never exceeds the remaining budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BidInterval {
    pub floor: f64,
    pub cap: f64,
    /// Number of support prices won.
    pub won: usize,
}

#[derive(Debug, Clone)]
pub struct MdpValue {
    pub auctions: usize,
    pub budgets: Vec<f64>,
    /// `u[n][I][S]`, defined for `I <= n` (and all `I <= N` at `n = N`).
    values: Vec<f64>,
    bids: Vec<BidInterval>,
}

impl MdpValue {
    fn index(&self, n: usize, i: usize, s: usize) -> usize {
        (n * (self.auctions + 1) + i) * self.budgets.len() + s
    }

    pub fn u(&self, n: usize, impressions: usize, s: usize) -> f64 {
        self.values[self.index(n, impressions, s)]
    }

    /// Optimal bid for auction `n + 1` from state `(n, I, S)`.
    pub fn bid(&self, n: usize, impressions: usize, s: usize) -> BidInterval {
        self.bids[self.index(n, impressions, s)]
    }

    pub fn budget_index(&self, s: f64) -> Option<usize> {
        find(&self.budgets, s, 1e-10 * self.budgets.last().copied().unwrap_or(1.0).max(1.0))
    }

    /// `u(0, 0, S̄)`.
    pub fn initial(&self, budget: f64) -> f64 {
        self.u(0, 0, self.budget_index(budget).expect("initial budget on grid"))
    }

    /// Columns `n, I, S, u, bid_floor, bid_cap`; the bid is for auction `n + 1`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("# columns: n,I,S,u,bid_floor,bid_cap (optimal bids are (bid_floor, bid_cap])\n");
        out.push_str("n,I,S,u,bid_floor,bid_cap\n");
        for n in 0..=self.auctions {
            let top = if n == self.auctions { self.auctions } else { n };
            for i in 0..=top {
                for (k, &s) in self.budgets.iter().enumerate() {
                    let b = self.bid(n, i, k);
                    let _ = writeln!(
                        out,
                        "{n},{i},{},{},{},{}",
                        fmt_f64(s),
                        fmt_f64(self.u(n, i, k)),
                        fmt_f64(b.floor),
                        fmt_f64(b.cap)
                    );
                }
            }
        }
        out
    }
}

fn find(grid: &[f64], x: f64, tol: f64) -> Option<usize> {
    let k = grid.partition_point(|&g| g < x - tol);
    (k < grid.len() && (grid[k] - x).abs() <= tol).then_some(k)
}

/// Backward induction over the whole grid.
pub fn solve_backward(spec: &MdpSpec) -> Result<MdpValue> {
    spec.validate()?;
    let budgets = spec.build_budget_grid()?;
    let tol = spec.tolerance();
    let n_auctions = spec.auctions;
    let m = budgets.len();
    let size = (n_auctions + 1) * (n_auctions + 1) * m;
    let mut value = MdpValue {
        auctions: n_auctions,
        budgets,
        values: vec![f64::NAN; size],
        bids: vec![BidInterval { floor: 0.0, cap: 0.0, won: 0 }; size],
    };

    // Index of S - p for every eligible (S, p), shared by all stages.
    let mut shifted: Vec<Vec<usize>> = Vec::with_capacity(m);
    for &s in &value.budgets {
        let mut row = Vec::new();
        for &(p, _) in spec.support.iter().take_while(|&&(p, _)| p < s) {
            let k = find(&value.budgets, s - p, tol)
                .ok_or_else(|| Error::Grid(format!("budget {s} minus price {p} is not on the grid")))?;
            row.push(k);
        }
        shifted.push(row);
    }

    for i in 0..=n_auctions {
        for (k, &s) in value.budgets.iter().enumerate() {
            let at = value.index(n_auctions, i, k);
            value.values[at] = spec.objective.eval(i, s);
            value.bids[at] = BidInterval { floor: 0.0, cap: 0.0, won: 0 };
        }
    }
    for n in (1..=n_auctions).rev() {
        for i in 0..n {
            for (k, &s) in value.budgets.iter().enumerate() {
                let stay = value.u(n, i, k);
                let mut acc = 0.0;
                let mut mass = 0.0;
                let mut best = (stay, 0usize);
                for (l, &target) in shifted[k].iter().enumerate() {
                    acc += spec.support[l].1 * value.u(n, i + 1, target);
                    mass += spec.support[l].1;
                    let candidate = acc + (1.0 - mass) * stay;
                    if candidate > best.0 {
                        best = (candidate, l + 1);
                    }
                }
                let won = best.1;
                let floor = if won == 0 { 0.0 } else { spec.support[won - 1].0 };
                let cap = spec.support.get(won).map_or(s, |&(p, _)| p.min(s));
                let at = value.index(n - 1, i, k);
                value.values[at] = best.0;
                value.bids[at] = BidInterval { floor, cap, won };
            }
        }
    }
    Ok(value)
}

/// Exact expectation of `g` under `policy(n, I, S)` (the bid for auction
/// `n + 1`), summing over all `m^N` price sequences.
pub fn enumerate_value(spec: &MdpSpec, policy: &dyn Fn(usize, usize, f64) -> f64) -> Result<f64> {
    spec.validate()?;
    let m = spec.support.len() as u64;
    let count = m.checked_pow(spec.auctions as u32).unwrap_or(u64::MAX);
    if count > ENUMERATION_CAP {
        return Err(Error::Size(format!(
            "{m}^{} = {count} price sequences exceed the cap of {ENUMERATION_CAP}",
            spec.auctions
        )));
    }
    fn walk(spec: &MdpSpec, policy: &dyn Fn(usize, usize, f64) -> f64, n: usize, i: usize, s: f64) -> Result<f64> {
        if n == spec.auctions {
            return Ok(spec.objective.eval(i, s));
        }
        let b = policy(n, i, s);
        if !(b >= 0.0 && b <= s) {
            return Err(Error::Domain(format!("policy bid {b} outside [0, {s}]")));
        }
        let mut total = 0.0;
        for &(p, w) in &spec.support {
            let next = if b > p { walk(spec, policy, n + 1, i + 1, s - p)? } else { walk(spec, policy, n + 1, i, s)? };
            total += w * next;
        }
        Ok(total)
    }
    walk(spec, policy, 0, 0, spec.budget)
}

/// Policy bidding the upper end of the optimal interval at each state.
pub fn optimal_policy(value: &MdpValue) -> impl Fn(usize, usize, f64) -> f64 + '_ {
    move |n, i, s| {
        let k = value.budget_index(s).expect("state on the budget grid");
        value.bid(n, i, k).cap.min(s)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TruthfulReport {
    pub states: usize,
    /// States where the budget constraint binds (every price below `S` is won).
    pub binding: usize,
    /// Largest value shortfall of bidding the continuation gap instead of the optimum.
    pub max_value_gap: f64,
    /// Largest violation of "win exactly the prices with a positive gain".
    pub max_condition_violation: f64,
}

/// Compares optimal bids with truthful bidding of the marginal continuation
/// value `u(n, I+1, S-p) - u(n, I, S)`.
pub fn truthful_bid_check(spec: &MdpSpec) -> Result<TruthfulReport> {
    let value = solve_backward(spec)?;
    let tol = spec.tolerance();
    let mut report = TruthfulReport::default();
    for n in 1..=spec.auctions {
        for i in 0..n {
            for (k, &s) in value.budgets.iter().enumerate() {
                let stay = value.u(n, i, k);
                let opt = value.bid(n - 1, i, k);
                let eligible = spec.support.iter().take_while(|&&(p, _)| p < s).count();
                report.states += 1;
                if opt.won == eligible && eligible > 0 {
                    report.binding += 1;
                }
                let mut truthful = stay;
                for (l, &(p, w)) in spec.support[..eligible].iter().enumerate() {
                    let t = find(&value.budgets, s - p, tol).expect("grid closed under subtraction");
                    let gain = value.u(n, i + 1, t) - stay;
                    if gain > 0.0 {
                        truthful += w * gain;
                    }
                    let violation = if l < opt.won { (-gain).max(0.0) } else { gain.max(0.0) };
                    report.max_condition_violation = report.max_condition_violation.max(violation);
                }
                report.max_value_gap = report.max_value_gap.max((value.u(n - 1, i, k) - truthful).abs());
            }
        }
    }
    Ok(report)
}

/// Residual of the reduced recursion for `g = I`, writing `v(n, S) = u(n, 0, S)`:
/// `v(n,S) - v(n-1,S) + max_b Σ_{p<b} q_p (v(n,S-p) - v(n,S) + 1)`.
pub fn reduced_residual(spec: &MdpSpec, value: &MdpValue) -> f64 {
    let tol = spec.tolerance();
    let mut worst: f64 = 0.0;
    for n in 1..=spec.auctions {
        for (k, &s) in value.budgets.iter().enumerate() {
            let v = value.u(n, 0, k);
            let mut acc = 0.0;
            let mut best: f64 = 0.0;
            for &(p, w) in spec.support.iter().take_while(|&&(p, _)| p < s) {
                let t = find(&value.budgets, s - p, tol).expect("grid closed under subtraction");
                acc += w * (value.u(n, 0, t) - v + 1.0);
                best = best.max(acc);
            }
            worst = worst.max((v - value.u(n - 1, 0, k) + best).abs());
        }
    }
    worst
}

/// Largest `|u(n, I, S) - I - u(n, 0, S)|` over all defined states.
pub fn ansatz_gap(value: &MdpValue) -> f64 {
    let mut worst: f64 = 0.0;
    for n in 0..=value.auctions {
        let top = if n == value.auctions { value.auctions } else { n };
        for i in 0..=top {
            for k in 0..value.budgets.len() {
                worst = worst.max((value.u(n, i, k) - i as f64 - value.u(n, 0, k)).abs());
            }
        }
    }
    worst
}
