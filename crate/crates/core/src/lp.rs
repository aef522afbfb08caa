//! Dense bounded-variable primal simplex for packing LPs of the form
//!
//! ```text
//! maximize   c^T x
//! subject to A x <= d,   0 <= x <= 1
//! ```
//!
//! with `A` in `[0,1]`, `c >= 0` and `d >= 0`. The origin is always feasible
//! and the box keeps the problem bounded, so the solver never needs a phase one.
//! Row prices are read off the final reduced costs of the slack columns.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Column, Instance};

/// Default feasibility tolerance, scaled by `max(1, ‖d‖∞)`.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Default relative tolerance on the duality gap.
pub const DEFAULT_DUALITY_TOL: f64 = 1e-7;

const PIVOT_TOL: f64 = 1e-11;
const DUAL_TOL: f64 = 1e-12;
const RATIO_TIE: f64 = 1e-12;
/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxedLp {
    m: usize,
    s: usize,
    rewards: Vec<f64>,
    /// Row-major `m x s`.
    consumption: Vec<f64>,
    rhs: Vec<f64>,
}

impl BoxedLp {
    pub fn new(rewards: Vec<f64>, rows: Vec<Vec<f64>>, rhs: Vec<f64>) -> Result<Self> {
        let s = rewards.len();
        if rows.iter().any(|r| r.len() != s) {
            return Err(Error::DimensionMismatch(
                "every row needs one entry per column".into(),
            ));
        }
        let consumption = rows.into_iter().flatten().collect();
        Self::from_dense(rewards, consumption, rhs)
    }

    /// `consumption` is row-major with `rhs.len()` rows.
    pub fn from_dense(rewards: Vec<f64>, consumption: Vec<f64>, rhs: Vec<f64>) -> Result<Self> {
        let (m, s) = (rhs.len(), rewards.len());
        if m == 0 || s == 0 {
            return Err(Error::DimensionMismatch(
                "LP needs at least one row and one column".into(),
            ));
        }
        if consumption.len() != m * s {
            return Err(Error::DimensionMismatch(format!(
                "consumption has {} entries, expected {m} x {s}",
                consumption.len()
            )));
        }
        if rewards.iter().any(|&c| !(c >= 0.0 && c.is_finite())) {
            return Err(Error::InvalidInstance(
                "rewards must be finite and nonnegative".into(),
            ));
        }
        if consumption.iter().any(|&a| !(0.0..=1.0).contains(&a)) {
            return Err(Error::InvalidInstance(
                "consumption entries must lie in [0, 1]".into(),
            ));
        }
        if rhs.iter().any(|&d| !(d >= 0.0 && d.is_finite())) {
            return Err(Error::InvalidInstance(
                "rhs must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            m,
            s,
            rewards,
            consumption,
            rhs,
        })
    }

    /// LP over the given arrivals with the given right-hand side.
    pub fn from_columns(columns: &[Column], rhs: Vec<f64>) -> Result<Self> {
        let m = rhs.len();
        let s = columns.len();
        let mut consumption = vec![0.0; m * s];
        for (j, col) in columns.iter().enumerate() {
            if col.a.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "column {j} has {} rows, expected {m}",
                    col.a.len()
                )));
            }
            for (i, &a) in col.a.iter().enumerate() {
                consumption[i * s + j] = a;
            }
        }
        Self::from_dense(columns.iter().map(|c| c.pi).collect(), consumption, rhs)
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn num_cols(&self) -> usize {
        self.s
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn coef(&self, row: usize, col: usize) -> f64 {
        self.consumption[row * self.s + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.consumption[row * self.s..(row + 1) * self.s]
    }

    /// `A x` for a candidate primal point.
    pub fn activity(&self, x: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|i| self.row(i).iter().zip(x).map(|(a, x)| a * x).sum())
            .collect()
    }

    /// `c_j - p^T A_j` for every column.
    pub fn reduced_rewards(&self, p: &[f64]) -> Vec<f64> {
        let mut r = self.rewards.clone();
        for (i, &pi) in p.iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            for (rj, a) in r.iter_mut().zip(self.row(i)) {
                *rj -= pi * a;
            }
        }
        r
    }

    /// `d^T p + sum_j max(0, c_j - p^T A_j)`: the dual objective at `p`.
    pub fn dual_objective(&self, p: &[f64]) -> f64 {
        let rows: f64 = self.rhs.iter().zip(p).map(|(d, p)| d * p).sum();
        rows + self
            .reduced_rewards(p)
            .into_iter()
            .map(|r| r.max(0.0))
            .sum::<f64>()
    }
}

/// Where a structural column sits in the final basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnStatus {
    AtLower,
    Basic,
    AtUpper,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub status: Vec<ColumnStatus>,
    pub objective: f64,
    pub pivots: usize,
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub tol: f64,
    pub duality_tol: f64,
    /// Pivot cap; `None` means `50 * (m + s)`.
    pub max_pivots: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            duality_tol: DEFAULT_DUALITY_TOL,
            max_pivots: None,
        }
    }
}

pub fn solve_boxed_lp(lp: &BoxedLp, tol: f64) -> Result<LpSolution> {
    solve_boxed_lp_with(
        lp,
        &SolverOptions {
            tol,
            ..SolverOptions::default()
        },
    )
}

pub fn solve_boxed_lp_with(lp: &BoxedLp, opts: &SolverOptions) -> Result<LpSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    let cap = opts.max_pivots.unwrap_or(50 * (lp.m + lp.s));
    let mut tab = Tableau::new(lp);
    tab.optimize(cap)?;
    let sol = tab.extract(lp);
    certify(lp, &sol, opts)?;
    Ok(sol)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum VarState {
    Lower,
    Upper,
    Basic(usize),
}

/// Full tableau `B^{-1} [A | I]` with an explicit reduced-cost row.
struct Tableau {
    m: usize,
    s: usize,
    width: usize,
    t: Vec<f64>,
    /// Current value of the basic variable in each row.
    beta: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    reduced: Vec<f64>,
    dual_tol: f64,
    pivots: usize,
}

impl Tableau {
    fn new(lp: &BoxedLp) -> Self {
        let (m, s) = (lp.m, lp.s);
        let width = s + m;
        let mut t = vec![0.0; m * width];
        for i in 0..m {
            t[i * width..i * width + s].copy_from_slice(lp.row(i));
            t[i * width + s + i] = 1.0;
        }
        let mut reduced = lp.rewards.clone();
        reduced.resize(width, 0.0);
        let mut state = vec![VarState::Lower; width];
        for i in 0..m {
            state[s + i] = VarState::Basic(i);
        }
        let cmax = lp.rewards.iter().copied().fold(0.0, f64::max);
        Self {
            m,
            s,
            width,
            t,
            beta: lp.rhs.clone(),
            basis: (s..s + m).collect(),
            state,
            reduced,
            dual_tol: DUAL_TOL * cmax.max(1.0),
            pivots: 0,
        }
    }

    fn upper(&self, var: usize) -> f64 {
        if var < self.s {
            1.0
        } else {
            f64::INFINITY
        }
    }

    /// Improving direction of a nonbasic variable, if any.
    fn direction(&self, j: usize) -> Option<f64> {
        match self.state[j] {
            VarState::Lower if self.reduced[j] > self.dual_tol => Some(1.0),
            VarState::Upper if self.reduced[j] < -self.dual_tol => Some(-1.0),
            _ => None,
        }
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        if bland {
            return (0..self.width).find_map(|j| self.direction(j).map(|d| (j, d)));
        }
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.width {
            if let Some(d) = self.direction(j) {
                let score = self.reduced[j].abs();
                if score > best_score {
                    best_score = score;
                    best = Some((j, d));
                }
            }
        }
        best
    }

    fn optimize(&mut self, cap: usize) -> Result<()> {
        let mut bland = false;
        let mut streak = 0;
        while let Some((j, dir)) = self.choose_entering(bland) {
            if self.pivots >= cap {
                return Err(Error::CycleLimitExceeded(cap));
            }
            self.pivots += 1;

            // Ratio test. `None` means the entering variable moves to its other bound.
            let mut theta = self.upper(j);
            let mut leave: Option<usize> = None;
            let mut leave_alpha = 0.0;
            for i in 0..self.m {
                let alpha = dir * self.t[i * self.width + j];
                let limit = if alpha > PIVOT_TOL {
                    self.beta[i].max(0.0) / alpha
                } else if alpha < -PIVOT_TOL {
                    let ub = self.upper(self.basis[i]);
                    if ub.is_infinite() {
                        continue;
                    }
                    (ub - self.beta[i]).max(0.0) / -alpha
                } else {
                    continue;
                };
                let better = if limit < theta - RATIO_TIE {
                    true
                } else if limit <= theta + RATIO_TIE {
                    // Ties keep the bound flip; among rows, Bland takes the lowest
                    // variable index, otherwise the largest pivot.
                    match leave {
                        None => false,
                        Some(r) if bland => self.basis[i] < self.basis[r],
                        Some(_) => alpha.abs() > leave_alpha,
                    }
                } else {
                    false
                };
                if better {
                    theta = limit;
                    leave = Some(i);
                    leave_alpha = alpha.abs();
                }
            }
            if theta.is_infinite() {
                return Err(Error::Internal(format!("unbounded ray along column {j}")));
            }

            if theta <= RATIO_TIE {
                streak += 1;
                if streak >= DEGENERATE_STREAK {
                    bland = true;
                }
            } else {
                streak = 0;
            }

            for i in 0..self.m {
                let a = self.t[i * self.width + j];
                if a != 0.0 {
                    self.beta[i] -= theta * dir * a;
                }
            }

            match leave {
                None => {
                    self.state[j] = match self.state[j] {
                        VarState::Lower => VarState::Upper,
                        _ => VarState::Lower,
                    };
                }
                Some(r) => {
                    let start = if dir > 0.0 { 0.0 } else { 1.0 };
                    let leaving = self.basis[r];
                    let alpha = dir * self.t[r * self.width + j];
                    self.state[leaving] = if alpha > 0.0 {
                        VarState::Lower
                    } else {
                        VarState::Upper
                    };
                    self.beta[r] = start + dir * theta;
                    self.basis[r] = j;
                    self.state[j] = VarState::Basic(r);
                    self.pivot(r, j);
                }
            }
        }
        Ok(())
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let w = self.width;
        let piv = self.t[r * w + j];
        for v in &mut self.t[r * w..(r + 1) * w] {
            *v /= piv;
        }
        let pivot_row = self.t[r * w..(r + 1) * w].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * w + j];
            if f == 0.0 {
                continue;
            }
            for (v, p) in self.t[i * w..(i + 1) * w].iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
            self.t[i * w + j] = 0.0;
        }
        let f = self.reduced[j];
        for (v, p) in self.reduced.iter_mut().zip(&pivot_row) {
            *v -= f * p;
        }
        self.reduced[j] = 0.0;
    }

    fn extract(&self, lp: &BoxedLp) -> LpSolution {
        let mut x = vec![0.0; self.s];
        let mut status = vec![ColumnStatus::AtLower; self.s];
        for j in 0..self.s {
            match self.state[j] {
                VarState::Lower => {}
                VarState::Upper => {
                    x[j] = 1.0;
                    status[j] = ColumnStatus::AtUpper;
                }
                VarState::Basic(r) => {
                    x[j] = self.beta[r].clamp(0.0, 1.0);
                    status[j] = ColumnStatus::Basic;
                }
            }
        }
        let p = (0..self.m)
            .map(|i| (-self.reduced[self.s + i]).max(0.0))
            .collect();
        let objective = lp.rewards.iter().zip(&x).map(|(c, x)| c * x).sum();
        LpSolution {
            x,
            p,
            status,
            objective,
            pivots: self.pivots,
        }
    }
}

/// Re-derive feasibility and the duality gap from the original data.
fn certify(lp: &BoxedLp, sol: &LpSolution, opts: &SolverOptions) -> Result<()> {
    let dnorm = lp.rhs.iter().copied().fold(0.0, f64::max);
    let feas_tol = opts.tol * dnorm.max(1.0);
    for (i, (act, d)) in lp.activity(&sol.x).iter().zip(&lp.rhs).enumerate() {
        if *act > d + feas_tol {
            return Err(Error::Internal(format!(
                "row {i} activity {act} exceeds rhs {d} after solve"
            )));
        }
    }
    let dual = lp.dual_objective(&sol.p);
    let gap = (sol.objective - dual).abs();
    if gap > opts.duality_tol * sol.objective.abs().max(1.0) {
        return Err(Error::Internal(format!(
            "duality gap {gap:e} (primal {}, dual {dual})",
            sol.objective
        )));
    }
    Ok(())
}

/// One complementary-slackness failure found by [`verify_complementary_slackness`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    /// Positive price on a row with slack.
    SlackPricedRow { row: usize, price: f64, slack: f64 },
    /// Positive reduced reward but the column is below its upper bound.
    ProfitableBelowUpper { col: usize, reduced: f64, x: f64 },
    /// Negative reduced reward but the column is above its lower bound.
    UnprofitableAboveLower { col: usize, reduced: f64, x: f64 },
}

pub fn verify_complementary_slackness(
    lp: &BoxedLp,
    sol: &LpSolution,
    tol: f64,
) -> Result<Vec<Violation>> {
    if sol.x.len() != lp.s || sol.p.len() != lp.m {
        return Err(Error::DimensionMismatch(format!(
            "solution has {} columns and {} prices, LP is {} x {}",
            sol.x.len(),
            sol.p.len(),
            lp.m,
            lp.s
        )));
    }
    let mut out = Vec::new();
    for (i, act) in lp.activity(&sol.x).into_iter().enumerate() {
        let slack = lp.rhs[i] - act;
        let price = sol.p[i];
        if price > tol && slack > tol * lp.rhs[i].max(1.0) {
            out.push(Violation::SlackPricedRow {
                row: i,
                price,
                slack,
            });
        }
    }
    for (j, reduced) in lp.reduced_rewards(&sol.p).into_iter().enumerate() {
        let x = sol.x[j];
        if reduced > tol && x < 1.0 - tol {
            out.push(Violation::ProfitableBelowUpper { col: j, reduced, x });
        } else if reduced < -tol && x > tol {
            out.push(Violation::UnprofitableAboveLower { col: j, reduced, x });
        }
    }
    Ok(out)
}

/// Default perturbation width: `1e-9 * max_t pi_t`.
pub fn default_eta(inst: &Instance) -> f64 {
    1e-9 * inst.rewards().fold(0.0, f64::max)
}

/// Adds independent `Uniform[0, eta]` noise to every reward so that no price
/// vector ties with more than `m` columns.
pub fn perturb_rewards(inst: &Instance, eta: f64, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = inst.clone();
    if eta > 0.0 {
        for col in &mut out.columns {
            col.pi += eta * rng.random::<f64>();
        }
    }
    out
}
