//! Explicit backward finite-difference solver for the reduced HJB equation
//!
//! ```text
//! -∂_t v - Σ_j λʲ inf_b ∫_0^b fʲ(p) (v(t, S - p) - v(t, S) - wʲ) dp = 0,
//! v(T, S) = K min(S, 0)²
//! ```
//!
//! and for its first-price counterpart, where the jump is `S - b` and the
//! integral becomes `F(b) (v(t, S - b) - v(t, S) - w)`.
//!
//! `v` is piecewise affine in `S` between grid nodes, so the jump integral over
//! each segment reduces to differences of `F` and `G = ∫ p dF`, which are
//! tabulated once at the grid offsets `k ΔS`. Below `S_min` the continuation
//! value is frozen to the terminal penalty.
//!
//! Output rows are stored every `T / n_t`; each row interval is split into
//! `substeps` explicit steps so that `λ_total Δt <= 0.1`.

use rayon::prelude::*;

use crate::bid::Bid;
use crate::campaign::{AuctionType, CampaignConfig, Penalty, SourceSpec};
use crate::error::{Error, Result};
use crate::fluid::{first_price_hamiltonian, golden_section_max, total_hamiltonian};
use crate::table::BidTable;

/// Upper bound on `λ_total Δt` for the explicit scheme.
pub const STABILITY_LIMIT: f64 = 0.1;

/// Penalty used by the solver when the campaign asks for a hard budget.
pub const HARD_BUDGET_K: f64 = 1e4;

/// Quantile of the price law that the negative part of the grid must cover.
pub const GRID_FLOOR_QUANTILE: f64 = 0.9999;

const CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Number of stored time intervals; rows are `t_r = r T / n_t`.
    pub n_t: usize,
    /// Number of budget intervals; nodes are `S_i = S_min + i ΔS`.
    pub n_s: usize,
    pub s_min: f64,
    pub s_max: f64,
    /// Explicit steps per stored time interval.
    pub substeps: usize,
}

impl GridSpec {
    pub fn new(n_t: usize, n_s: usize, s_min: f64, s_max: f64) -> Self {
        GridSpec { n_t, n_s, s_min, s_max, substeps: 1 }
    }

    pub fn with_substeps(mut self, substeps: usize) -> Self {
        self.substeps = substeps;
        self
    }

    /// Uses the fewest substeps that satisfy the stability bound.
    pub fn stabilized(mut self, campaign: &CampaignConfig) -> Self {
        let row_dt = campaign.horizon / self.n_t as f64;
        let lambda = campaign.total_intensity();
        let mut k = ((lambda * row_dt / STABILITY_LIMIT).ceil() as usize).max(1);
        while lambda * (row_dt / k as f64) > STABILITY_LIMIT {
            k += 1;
        }
        self.substeps = k;
        self
    }

    pub fn ds(&self) -> f64 {
        (self.s_max - self.s_min) / self.n_s as f64
    }

    pub fn row_dt(&self, horizon: f64) -> f64 {
        horizon / self.n_t as f64
    }

    pub fn step_dt(&self, horizon: f64) -> f64 {
        self.row_dt(horizon) / self.substeps as f64
    }

    pub fn s_at(&self, i: usize) -> f64 {
        if i == self.n_s {
            self.s_max
        } else {
            self.s_min + i as f64 * self.ds()
        }
    }

    pub fn t_at(&self, horizon: f64, r: usize) -> f64 {
        if r == self.n_t {
            horizon
        } else {
            r as f64 * self.row_dt(horizon)
        }
    }

    pub fn rows(&self) -> usize {
        self.n_t + 1
    }

    pub fn cols(&self) -> usize {
        self.n_s + 1
    }

    /// Checks shape, the stability bound and the negative-budget extension.
    pub fn validate(&self, campaign: &CampaignConfig) -> Result<()> {
        if self.n_t < 2 || self.n_s < 2 || self.substeps == 0 {
            return Err(Error::Grid("need n_t >= 2, n_s >= 2 and substeps >= 1".into()));
        }
        if !(self.s_min < 0.0 && self.s_max > 0.0) {
            return Err(Error::Grid(format!(
                "budget range [{}, {}] must straddle 0",
                self.s_min, self.s_max
            )));
        }
        let product = campaign.total_intensity() * self.step_dt(campaign.horizon);
        if product > STABILITY_LIMIT {
            return Err(Error::Stability { product, limit: STABILITY_LIMIT });
        }
        let reach = campaign
            .sources
            .iter()
            .map(|s| s.model.quantile(GRID_FLOOR_QUANTILE))
            .fold(0.0, f64::max);
        if -self.s_min < reach {
            return Err(Error::Grid(format!(
                "s_min = {} must be at most -{reach:.6e} (0.9999-quantile of the price law)",
                self.s_min
            )));
        }
        Ok(())
    }
}

/// Counters collected while solving.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveDiagnostics {
    /// Penalty coefficient actually used.
    pub penalty: f64,
    /// Explicit steps taken.
    pub steps: usize,
    /// Stored-row nodes whose crossing search ran past `S_min`.
    pub floor_crossings: usize,
    /// Largest first-order-condition residual on stored rows.
    pub max_foc_residual: f64,
}

/// Grid samples of `v(t, S)`, row-major in `[t][S]`.
#[derive(Debug, Clone)]
pub struct ValueSurface {
    pub grid: GridSpec,
    pub campaign: CampaignConfig,
    pub values: Vec<f64>,
    pub diagnostics: SolveDiagnostics,
}

impl ValueSurface {
    /// Samples an arbitrary function of `(t, S)` on the grid.
    pub fn from_fn(
        campaign: &CampaignConfig,
        grid: GridSpec,
        f: impl Fn(f64, f64) -> f64 + Sync,
    ) -> Self {
        let cols = grid.cols();
        let mut values = vec![0.0; grid.rows() * cols];
        values.par_chunks_mut(cols).enumerate().for_each(|(r, row)| {
            let t = grid.t_at(campaign.horizon, r);
            for (i, v) in row.iter_mut().enumerate() {
                *v = f(t, grid.s_at(i));
            }
        });
        ValueSurface {
            grid,
            campaign: campaign.clone(),
            values,
            diagnostics: SolveDiagnostics { penalty: solver_penalty(campaign), ..Default::default() },
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let cols = self.grid.cols();
        &self.values[r * cols..(r + 1) * cols]
    }

    pub fn at(&self, r: usize, i: usize) -> f64 {
        self.values[r * self.grid.cols() + i]
    }

    /// Bilinear interpolation, with `(t, S)` clamped into the grid.
    pub fn value_at(&self, t: f64, s: f64) -> f64 {
        let (r, fr) = locate(t, 0.0, self.grid.row_dt(self.campaign.horizon), self.grid.n_t);
        let (i, fi) = locate(s, self.grid.s_min, self.grid.ds(), self.grid.n_s);
        let v = |r: usize, i: usize| self.at(r, i);
        let lo = v(r, i) + fi * (v(r, i + 1) - v(r, i));
        let hi = v(r + 1, i) + fi * (v(r + 1, i + 1) - v(r + 1, i));
        lo + fr * (hi - lo)
    }
}

/// Cell index and fractional offset of `x` on a uniform axis of `n` cells.
pub(crate) fn locate(x: f64, origin: f64, step: f64, n: usize) -> (usize, f64) {
    let mut u = ((x - origin) / step).clamp(0.0, n as f64);
    if (u - u.round()).abs() < 1e-9 {
        u = u.round();
    }
    let i = (u.floor() as usize).min(n - 1);
    (i, u - i as f64)
}

pub(crate) fn solver_penalty(campaign: &CampaignConfig) -> f64 {
    match campaign.penalty {
        Penalty::Finite(k) => k,
        Penalty::Infinite => HARD_BUDGET_K,
    }
}

/// Per-source data for the jump integrals.
struct SourceKernel<'a> {
    source: &'a SourceSpec,
    weight: f64,
    /// `F(k ΔS)` and `G(k ΔS)`.
    cdf: Vec<f64>,
    pexp: Vec<f64>,
}

/// Result of one node evaluation for one source.
#[derive(Clone, Copy)]
struct NodeResult {
    /// Minimal value of the inner integral (always `<= 0`).
    integral: f64,
    bid: f64,
    hit_floor: bool,
    foc_residual: f64,
}

struct Scheme<'a> {
    grid: GridSpec,
    ds: f64,
    k: f64,
    auction: AuctionType,
    kernels: Vec<SourceKernel<'a>>,
}

impl<'a> Scheme<'a> {
    fn new(campaign: &'a CampaignConfig, grid: GridSpec) -> Self {
        let ds = grid.ds();
        let kernels = campaign
            .sources
            .iter()
            .map(|source| {
                let offsets = (0..=grid.n_s).map(|k| k as f64 * ds);
                SourceKernel {
                    source,
                    weight: source.weight(),
                    cdf: offsets.clone().map(|p| source.model.cdf(p)).collect(),
                    pexp: offsets.map(|p| source.model.g(p)).collect(),
                }
            })
            .collect();
        Scheme { grid, ds, k: solver_penalty(campaign), auction: campaign.auction, kernels }
    }

    /// `v(t, S_i - p)` on the current row, with the frozen penalty below `S_min`.
    fn shifted(&self, row: &[f64], i: usize, p: f64) -> f64 {
        let u = p / self.ds;
        if u >= i as f64 {
            let s = self.grid.s_at(i) - p;
            if s < self.grid.s_min {
                return self.k * s * s;
            }
            return row[0];
        }
        let k = (u.floor() as usize).min(i - 1);
        let frac = u - k as f64;
        row[i - k] + frac * (row[i - k - 1] - row[i - k])
    }

    /// Second-price node: crossing `v(S - b) = v(S) + w` and the jump integral up to it.
    fn second_price_node(&self, kern: &SourceKernel<'_>, row: &[f64], i: usize) -> NodeResult {
        let target = row[i] + kern.weight;
        let mut out = NodeResult { integral: 0.0, bid: 0.0, hit_floor: false, foc_residual: 0.0 };
        if kern.weight <= 0.0 {
            return out;
        }
        let model = &kern.source.model;
        let ds = self.ds;
        let mut acc = 0.0;
        for k in 1..=i {
            let va = row[i + 1 - k];
            let vb = row[i - k];
            let pa = (k - 1) as f64 * ds;
            let slope = (vb - va) / ds;
            let (fa, ga) = (kern.cdf[k - 1], kern.pexp[k - 1]);
            if vb >= target {
                let theta = (target - va) / (vb - va);
                let b = pa + theta * ds;
                let (fb, gb) = (model.cdf(b), model.g(b));
                acc += (va - target) * (fb - fa) + slope * ((gb - ga) - pa * (fb - fa));
                out.integral = acc.min(0.0);
                out.bid = b;
                return out;
            }
            let (fb, gb) = (kern.cdf[k], kern.pexp[k]);
            acc += (va - target) * (fb - fa) + slope * ((gb - ga) - pa * (fb - fa));
        }
        // Past S_min: v is frozen to K S², which jumps up at the grid edge.
        out.hit_floor = true;
        let p_end = i as f64 * ds;
        let s_i = self.grid.s_at(i);
        let k_pen = self.k;
        let edge = k_pen * self.grid.s_min * self.grid.s_min;
        let b = if edge >= target { p_end } else { s_i + (target / k_pen).sqrt() };
        if b > p_end {
            let (fa, ga, ma) = (model.cdf(p_end), model.g(p_end), model.partial_second_moment(p_end));
            let (fb, gb, mb) = (model.cdf(b), model.g(b), model.partial_second_moment(b));
            let (df, dg, dm) = (fb - fa, gb - ga, mb - ma);
            acc += k_pen * (s_i * s_i * df - 2.0 * s_i * dg + dm) - target * df;
        }
        out.integral = acc.min(0.0);
        out.bid = b;
        out
    }

    /// First-price node: minimizes `F(b) (v(S - b) - v(S) - w)` over `b` up to
    /// the second-price crossing, by golden-section search on each affine
    /// segment of `v`.
    fn first_price_node(&self, kern: &SourceKernel<'_>, row: &[f64], i: usize) -> NodeResult {
        let sp = self.second_price_node(kern, row, i);
        let mut out = NodeResult { integral: 0.0, bid: 0.0, hit_floor: sp.hit_floor, foc_residual: 0.0 };
        let crossing = sp.bid;
        if crossing <= 0.0 {
            return out;
        }
        let model = &kern.source.model;
        let target = row[i] + kern.weight;
        let objective = |b: f64| model.cdf(b) * (self.shifted(row, i, b) - target);
        let p_end = i as f64 * self.ds;
        let mut edges: Vec<f64> = (0..=i)
            .map(|k| k as f64 * self.ds)
            .take_while(|&p| p < crossing)
            .collect();
        if crossing > p_end && p_end > *edges.last().unwrap_or(&0.0) {
            edges.push(p_end);
        }
        edges.push(crossing);
        let mut best = (0.0, 0.0);
        for w in edges.windows(2) {
            let b = golden_section_max(|b| -objective(b), w[0], w[1]);
            let val = objective(b);
            if val < best.1 {
                best = (b, val);
            }
        }
        out.bid = best.0;
        out.integral = best.1.min(0.0);
        let b = best.0;
        let dens = model.density(b);
        let h = 1e-9 * self.ds;
        let interior = edges.iter().all(|&e| (b - e).abs() > 1e-6 * self.ds);
        if interior && dens > 0.0 && b > h {
            let slope = (self.shifted(row, i, b + h) - self.shifted(row, i, b - h)) / (2.0 * h);
            let gap = self.shifted(row, i, b) - target;
            out.foc_residual = (gap + model.cdf(b) / dens * slope).abs();
        }
        out
    }

    fn node(&self, kern: &SourceKernel<'_>, row: &[f64], i: usize) -> NodeResult {
        match self.auction {
            AuctionType::SecondPrice => self.second_price_node(kern, row, i),
            AuctionType::FirstPrice => self.first_price_node(kern, row, i),
        }
    }

    /// `Σ_j λʲ · inner infimum` at node `i`, writing bids into `bids`.
    fn generator(&self, row: &[f64], i: usize, bids: &mut [f64], diag: &mut (usize, f64)) -> f64 {
        let mut total = 0.0;
        for (j, kern) in self.kernels.iter().enumerate() {
            let res = self.node(kern, row, i);
            total += kern.source.intensity * res.integral;
            bids[j] = res.bid;
            diag.0 += res.hit_floor as usize;
            diag.1 = diag.1.max(res.foc_residual);
        }
        total
    }

    /// One explicit step `v(t - Δt) = v(t) + Δt · generator`, filling `bids`
    /// (laid out `[S][source]`) from the crossing at time `t`.
    fn step(&self, row: &[f64], next: &mut [f64], bids: &mut [f64], dt: f64) -> (usize, f64) {
        let j = self.kernels.len();
        next.par_chunks_mut(CHUNK)
            .zip(bids.par_chunks_mut(CHUNK * j))
            .enumerate()
            .map(|(c, (out, bid_chunk))| {
                let mut diag = (0usize, 0.0f64);
                for (o, v) in out.iter_mut().enumerate() {
                    let i = c * CHUNK + o;
                    let g = self.generator(row, i, &mut bid_chunk[o * j..(o + 1) * j], &mut diag);
                    *v = row[i] + dt * g;
                }
                diag
            })
            .reduce(|| (0, 0.0), |a, b| (a.0 + b.0, a.1.max(b.1)))
    }
}

fn terminal_row(grid: &GridSpec, k: f64) -> Vec<f64> {
    (0..grid.cols()).map(|i| k * grid.s_at(i).min(0.0).powi(2)).collect()
}

fn solve(campaign: &CampaignConfig, grid: GridSpec) -> Result<(ValueSurface, BidTable)> {
    campaign.validate()?;
    grid.validate(campaign)?;
    let scheme = Scheme::new(campaign, grid);
    let cols = grid.cols();
    let rows = grid.rows();
    let n_src = campaign.sources.len();
    let dt = grid.step_dt(campaign.horizon);

    let mut values = vec![0.0; rows * cols];
    let mut table = vec![0.0; n_src * rows * cols];
    let mut row = terminal_row(&grid, scheme.k);
    let mut next = vec![0.0; cols];
    let mut bids = vec![0.0; cols * n_src];
    let mut diagnostics = SolveDiagnostics { penalty: scheme.k, ..Default::default() };

    let store_bids = |r: usize, bids: &[f64], table: &mut [f64]| {
        for j in 0..n_src {
            let dst = &mut table[(j * rows + r) * cols..(j * rows + r + 1) * cols];
            for (i, d) in dst.iter_mut().enumerate() {
                *d = bids[i * n_src + j];
            }
        }
    };

    values[grid.n_t * cols..].copy_from_slice(&row);
    for r in (1..=grid.n_t).rev() {
        for sub in 0..grid.substeps {
            let (hits, foc) = scheme.step(&row, &mut next, &mut bids, dt);
            if sub == 0 {
                store_bids(r, &bids, &mut table);
                diagnostics.floor_crossings += hits;
                diagnostics.max_foc_residual = diagnostics.max_foc_residual.max(foc);
            }
            std::mem::swap(&mut row, &mut next);
            diagnostics.steps += 1;
        }
        values[(r - 1) * cols..r * cols].copy_from_slice(&row);
    }
    let (hits, foc) = scheme.step(&row, &mut next, &mut bids, dt);
    store_bids(0, &bids, &mut table);
    diagnostics.floor_crossings += hits;
    diagnostics.max_foc_residual = diagnostics.max_foc_residual.max(foc);

    let surface = ValueSurface { grid, campaign: campaign.clone(), values, diagnostics };
    let table = BidTable::new(campaign.horizon, grid, n_src, table);
    Ok((surface, table))
}

/// Solves the second-price equation (multi-source and conversion weights
/// included through `wʲ = αʲ + νʲ δʲ`).
pub fn solve_second_price(campaign: &CampaignConfig, grid: GridSpec) -> Result<(ValueSurface, BidTable)> {
    if campaign.auction != AuctionType::SecondPrice {
        return Err(Error::Domain("solve_second_price needs a second-price campaign".into()));
    }
    solve(campaign, grid)
}

/// Solves the first-price equation.
pub fn solve_first_price(campaign: &CampaignConfig, grid: GridSpec) -> Result<(ValueSurface, BidTable)> {
    if campaign.auction != AuctionType::FirstPrice {
        return Err(Error::Domain("solve_first_price needs a first-price campaign".into()));
    }
    solve(campaign, grid)
}

/// Solves according to the campaign's auction type.
pub fn solve_campaign(campaign: &CampaignConfig, grid: GridSpec) -> Result<(ValueSurface, BidTable)> {
    solve(campaign, grid)
}

/// One explicit step of the scheme applied to an arbitrary row.
pub fn explicit_step(campaign: &CampaignConfig, grid: GridSpec, row: &[f64]) -> Result<Vec<f64>> {
    grid.validate(campaign)?;
    if row.len() != grid.cols() {
        return Err(Error::Grid(format!("row has {} entries, grid has {}", row.len(), grid.cols())));
    }
    let scheme = Scheme::new(campaign, grid);
    let mut next = vec![0.0; row.len()];
    let mut bids = vec![0.0; row.len() * campaign.sources.len()];
    scheme.step(row, &mut next, &mut bids, grid.step_dt(campaign.horizon));
    Ok(next)
}

/// Maximum residual over interior nodes (`0 <= r < n_t`, `0 < i < n_s`).
///
/// With `fluid = true` this is the Hamilton-Jacobi residual
/// `|-∂_t v + H(∂_S v)|` using a forward difference in time and a centered
/// difference in budget. Otherwise it is the residual of the jump equation
/// between consecutive stored rows, the inner infimum being evaluated on the
/// later row exactly as the solver does.
pub fn pde_residual(surface: &ValueSurface, fluid: bool) -> f64 {
    let grid = surface.grid;
    let campaign = &surface.campaign;
    let dt = grid.row_dt(campaign.horizon);
    let ds = grid.ds();
    let scheme = Scheme::new(campaign, grid);
    let n_src = campaign.sources.len();
    (0..grid.n_t)
        .into_par_iter()
        .map(|r| {
            let now = surface.row(r);
            let later = surface.row(r + 1);
            let mut worst: f64 = 0.0;
            let mut bids = vec![0.0; n_src];
            let mut diag = (0, 0.0);
            for i in 1..grid.n_s {
                let dv_dt = (later[i] - now[i]) / dt;
                let res = if fluid {
                    let x = (now[i + 1] - now[i - 1]) / (2.0 * ds);
                    let h = match campaign.auction {
                        AuctionType::SecondPrice => total_hamiltonian(&campaign.sources, x),
                        AuctionType::FirstPrice => campaign
                            .sources
                            .iter()
                            .map(|s| first_price_hamiltonian(s, x))
                            .sum(),
                    };
                    -dv_dt + h
                } else {
                    dv_dt + scheme.generator(later, i, &mut bids, &mut diag)
                };
                worst = worst.max(res.abs());
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// Bids at every node of a stored row, as `Bid`s, for source `j`.
pub fn row_bids(table: &BidTable, j: usize, r: usize) -> Vec<Bid> {
    table.row(j, r).iter().map(|&b| Bid::from_f64(b)).collect()
}
