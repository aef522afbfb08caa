//! Arrivals with `k` mutually exclusive options.
//!
//! Each arrival `t` offers rewards `f_t` and per-row consumption `G_t` (one
//! column per option); at most one option may be taken. The learned prices
//! come from the resource rows of the flattened partial LP, and the online
//! rule takes the option with the best priced score, if that score is positive.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_boxed_lp, BoxedLp, LpSolution, DEFAULT_TOL};
use crate::model::{Column, DualPrice, Instance};
use crate::online::{
    per_row_lhs, per_row_threshold, scaled_rhs, try_consume, ConditionReport, PricingPlan,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiColumn {
    pub f: Vec<f64>,
    /// `m x k`: `g[i][j]` is the use of row `i` by option `j`.
    #[serde(rename = "G")]
    pub g: Vec<Vec<f64>>,
}

impl MultiColumn {
    fn option_use(&self, j: usize) -> Vec<f64> {
        self.g.iter().map(|row| row[j]).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiInstance {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub b: Vec<f64>,
    pub columns: Vec<MultiColumn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

impl MultiInstance {
    pub fn new(b: Vec<f64>, k: usize, columns: Vec<MultiColumn>) -> Result<Self> {
        let inst = Self {
            m: b.len(),
            n: columns.len(),
            k,
            b,
            columns,
            meta: None,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.k == 0 {
            return Err(Error::InvalidInstance("m, n and k must be positive".into()));
        }
        if self.b.len() != self.m || self.columns.len() != self.n {
            return Err(Error::InvalidInstance(
                "b or columns disagree with m, n".into(),
            ));
        }
        if self.b.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidInstance("b must be positive".into()));
        }
        for (t, col) in self.columns.iter().enumerate() {
            if col.f.len() != self.k
                || col.g.len() != self.m
                || col.g.iter().any(|r| r.len() != self.k)
            {
                return Err(Error::InvalidInstance(format!(
                    "column {t} has wrong shape"
                )));
            }
            if col.f.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                return Err(Error::InvalidInstance(format!(
                    "column {t} has negative reward"
                )));
            }
            if col.g.iter().flatten().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::InvalidInstance(format!(
                    "column {t} has consumption outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// The same problem with a single option per arrival.
    pub fn from_scalar(inst: &Instance) -> Self {
        Self {
            m: inst.m,
            n: inst.n,
            k: 1,
            b: inst.b.clone(),
            columns: inst
                .columns
                .iter()
                .map(|c| MultiColumn {
                    f: vec![c.pi],
                    g: c.a.iter().map(|&a| vec![a]).collect(),
                })
                .collect(),
            meta: inst.meta.clone(),
        }
    }

    /// Back to a scalar instance; only defined for `k = 1`.
    pub fn to_scalar(&self) -> Result<Instance> {
        if self.k != 1 {
            return Err(Error::InvalidArgument(format!(
                "k = {} is not scalar",
                self.k
            )));
        }
        let mut inst = Instance::new(
            self.b.clone(),
            self.columns
                .iter()
                .map(|c| Column::new(c.f[0], c.g.iter().map(|r| r[0]).collect()))
                .collect(),
        )?;
        inst.meta = self.meta.clone();
        Ok(inst)
    }

    /// Largest consumption of each row over all arrivals and options.
    pub fn row_max_consumption(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for col in &self.columns {
            for (o, row) in out.iter_mut().zip(&col.g) {
                *o = row.iter().copied().fold(*o, f64::max);
            }
        }
        out
    }
}

/// Chosen option of one arrival, or none.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiDecision {
    pub choice: Option<usize>,
}

impl MultiDecision {
    pub const NONE: Self = Self { choice: None };

    pub fn option(r: usize) -> Self {
        Self { choice: Some(r) }
    }

    /// The decision as a 0/1 vector of length `k`.
    pub fn indicator(&self, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; k];
        if let Some(r) = self.choice {
            v[r] = 1.0;
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiRunResult {
    pub decisions: Vec<MultiDecision>,
    pub objective: f64,
    pub fill: Vec<f64>,
    pub prices_used: Vec<(usize, DualPrice)>,
    pub accepted_count: usize,
}

impl MultiRunResult {
    /// 0/1 decisions, meaningful when `k = 1`.
    pub fn scalar_decisions(&self) -> Vec<u8> {
        self.decisions
            .iter()
            .map(|d| u8::from(d.choice.is_some()))
            .collect()
    }
}

/// Option with the highest `f_j - sum_i p_i G[i][j]`, lowest index on ties;
/// none unless that score is positive.
pub fn multi_allocation_rule(p: &DualPrice, col: &MultiColumn) -> Result<MultiDecision> {
    if col.g.len() != p.len() {
        return Err(Error::DimensionMismatch(format!(
            "price has {} rows, column has {}",
            p.len(),
            col.g.len()
        )));
    }
    let mut best = MultiDecision::NONE;
    let mut best_score = 0.0;
    for (j, &f) in col.f.iter().enumerate() {
        let cost: f64 = p.p.iter().zip(&col.g).map(|(p, row)| p * row[j]).sum();
        let score = f - cost;
        if score > best_score {
            best_score = score;
            best = MultiDecision::option(j);
        }
    }
    Ok(best)
}

/// Partial LP over the first `ell` arrivals, one variable per (arrival, option).
/// Rows are the `m` resources followed by one "at most one option" row per
/// arrival; the latter are dropped for `k = 1`, where the box already says it.
pub fn flatten_partial_lp(inst: &MultiInstance, ell: usize, rhs: Vec<f64>) -> Result<BoxedLp> {
    let (m, k) = (inst.m, inst.k);
    let cols = &inst.columns[..ell];
    let s = ell * k;
    let extra = if k > 1 { ell } else { 0 };
    let rows = m + extra;
    let mut a = vec![0.0; rows * s];
    let mut rewards = Vec::with_capacity(s);
    for (t, col) in cols.iter().enumerate() {
        for j in 0..k {
            let v = t * k + j;
            rewards.push(col.f[j]);
            for i in 0..m {
                a[i * s + v] = col.g[i][j];
            }
            if k > 1 {
                a[(m + t) * s + v] = 1.0;
            }
        }
    }
    let mut d = rhs;
    d.resize(rows, 1.0);
    BoxedLp::from_dense(rewards, a, d)
}

fn learn_multi_price(inst: &MultiInstance, ell: usize, shrink: f64) -> Result<DualPrice> {
    let lp = flatten_partial_lp(inst, ell, scaled_rhs(&inst.b, inst.n, ell, shrink))?;
    let sol = solve_boxed_lp(&lp, DEFAULT_TOL)?;
    Ok(DualPrice::new(sol.p[..inst.m].to_vec()))
}

/// Solves the full flattened LP. Returns the solution and the resource prices.
pub fn solve_offline_multi(inst: &MultiInstance) -> Result<(LpSolution, DualPrice)> {
    let lp = flatten_partial_lp(inst, inst.n, inst.b.clone())?;
    let sol = solve_boxed_lp(&lp, DEFAULT_TOL)?;
    let p = DualPrice::new(sol.p[..inst.m].to_vec());
    Ok((sol, p))
}

/// Dynamic pricing over `k`-option arrivals.
pub fn run_dpa_multi(inst: &MultiInstance, eps: f64) -> Result<MultiRunResult> {
    inst.validate()?;
    let plan = PricingPlan::dynamic(inst.n, eps)?;
    let mut prices_used = Vec::with_capacity(plan.updates.len());
    for &(ell, shrink) in &plan.updates {
        prices_used.push((ell, learn_multi_price(inst, ell, shrink)?));
    }
    let mut decisions = vec![MultiDecision::NONE; inst.n];
    let mut fill = vec![0.0; inst.m];
    let mut objective = 0.0;
    let mut accepted_count = 0;
    let mut seg = 0;
    for t in plan.window()..inst.n {
        while seg + 1 < prices_used.len() && prices_used[seg + 1].0 <= t {
            seg += 1;
        }
        let col = &inst.columns[t];
        if let Some(r) = multi_allocation_rule(&prices_used[seg].1, col)?.choice {
            if try_consume(&mut fill, &inst.b, &col.option_use(r)) {
                decisions[t] = MultiDecision::option(r);
                objective += col.f[r];
                accepted_count += 1;
            }
        }
    }
    Ok(MultiRunResult {
        decisions,
        objective,
        fill,
        prices_used,
        accepted_count,
    })
}

/// Per-row capacity condition with `k` options per arrival.
pub fn check_multi_condition(inst: &MultiInstance, eps: f64) -> Result<ConditionReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps {eps} outside (0, 1)")));
    }
    let lhs = per_row_lhs(&inst.b, &inst.row_max_consumption());
    let rhs = per_row_threshold(inst.m, inst.n, inst.k, eps);
    Ok(ConditionReport {
        satisfied: lhs >= rhs,
        lhs,
        rhs,
    })
}

/// Adds `Uniform[0, eta]` noise to every option reward.
pub fn perturb_multi(inst: &MultiInstance, eta: f64, seed: u64) -> MultiInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = inst.clone();
    if eta > 0.0 {
        for f in out.columns.iter_mut().flat_map(|c| c.f.iter_mut()) {
            *f += eta * rng.random::<f64>();
        }
    }
    out
}

/// Adwords problem as a `k = m` instance, with each bidder's row rescaled so
/// its largest bid consumes one unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdwordsMapping {
    pub instance: MultiInstance,
    /// `ā_i = max_j bid[j][i]`; 1 for bidders that never bid.
    pub row_scale: Vec<f64>,
}

impl AdwordsMapping {
    /// Spend per bidder in the original currency.
    pub fn spend(&self, fill: &[f64]) -> Vec<f64> {
        fill.iter()
            .zip(&self.row_scale)
            .map(|(f, s)| f * s)
            .collect()
    }
}

/// `bids` is `n x m`: `bids[j][i]` is bidder `i`'s bid on query `j`.
pub fn adwords_to_multi(bids: &[Vec<f64>], budgets: &[f64]) -> Result<AdwordsMapping> {
    let m = budgets.len();
    if m == 0 || bids.is_empty() {
        return Err(Error::InvalidInstance(
            "need at least one bidder and one query".into(),
        ));
    }
    if bids.iter().any(|row| row.len() != m) {
        return Err(Error::DimensionMismatch(format!(
            "every bid row needs {m} entries"
        )));
    }
    if bids.iter().flatten().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidInstance(
            "bids must be finite and nonnegative".into(),
        ));
    }
    if budgets.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInstance("budgets must be positive".into()));
    }
    if bids.iter().flatten().all(|&v| v == 0.0) {
        return Err(Error::AllZeroBids);
    }
    let row_scale: Vec<f64> = (0..m)
        .map(|i| {
            let mx = bids.iter().map(|r| r[i]).fold(0.0, f64::max);
            if mx > 0.0 {
                mx
            } else {
                1.0
            }
        })
        .collect();
    let columns = bids
        .iter()
        .map(|row| MultiColumn {
            f: row.clone(),
            g: (0..m)
                .map(|i| {
                    let mut g = vec![0.0; m];
                    g[i] = (row[i] / row_scale[i]).min(1.0);
                    g
                })
                .collect(),
        })
        .collect();
    let b = budgets.iter().zip(&row_scale).map(|(b, s)| b / s).collect();
    Ok(AdwordsMapping {
        instance: MultiInstance::new(b, m, columns)?,
        row_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(f: &[f64], g: &[&[f64]]) -> MultiColumn {
        MultiColumn {
            f: f.to_vec(),
            g: g.iter().map(|r| r.to_vec()).collect(),
        }
    }

    #[test]
    fn zero_rewards_choose_nothing() {
        let c = col(&[0.0, 0.0], &[&[0.5, 0.5]]);
        assert_eq!(
            multi_allocation_rule(&DualPrice::zeros(1), &c).unwrap(),
            MultiDecision::NONE
        );
    }

    #[test]
    fn argmax_of_priced_score() {
        let c = col(&[3.0, 1.0], &[&[1.0, 0.2]]);
        let d = multi_allocation_rule(&DualPrice::new(vec![0.5]), &c).unwrap();
        assert_eq!(d, MultiDecision::option(0));
    }

    #[test]
    fn ties_take_lowest_index() {
        let c = col(&[1.0, 2.0, 2.0], &[&[0.0, 0.5, 0.5]]);
        let d = multi_allocation_rule(&DualPrice::new(vec![1.0]), &c).unwrap();
        // Scores 1.0, 1.5, 1.5.
        assert_eq!(d, MultiDecision::option(1));
    }

    #[test]
    fn rule_rejects_nonpositive_scores() {
        let c = col(&[1.0, 1.0], &[&[1.0, 1.0]]);
        let d = multi_allocation_rule(&DualPrice::new(vec![1.0]), &c).unwrap();
        assert_eq!(d, MultiDecision::NONE);
        assert!(multi_allocation_rule(&DualPrice::zeros(2), &c).is_err());
    }

    #[test]
    fn adwords_mapping_by_hand() {
        let bids = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let map = adwords_to_multi(&bids, &[4.0, 8.0]).unwrap();
        assert_eq!(map.row_scale, vec![3.0, 4.0]);
        assert!((map.instance.b[0] - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(map.instance.b[1], 2.0);
        assert_eq!(map.instance.k, 2);
        let c0 = &map.instance.columns[0];
        assert_eq!(c0.f, vec![1.0, 2.0]);
        assert_eq!(c0.g, vec![vec![1.0 / 3.0, 0.0], vec![0.0, 0.5]]);
        assert_eq!(map.spend(&map.instance.b), vec![4.0, 8.0]);
    }

    #[test]
    fn adwords_uniform_bids() {
        let bids = vec![vec![2.5; 3]; 4];
        let map = adwords_to_multi(&bids, &[5.0, 10.0, 2.5]).unwrap();
        assert_eq!(map.instance.b, vec![2.0, 4.0, 1.0]);
        for c in &map.instance.columns {
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(c.g[i][j], if i == j { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn adwords_single_bidder_is_scalar() {
        let bids = vec![vec![1.0], vec![4.0], vec![2.0]];
        let map = adwords_to_multi(&bids, &[4.0]).unwrap();
        let inst = map.instance.to_scalar().unwrap();
        let a: Vec<f64> = inst.columns.iter().map(|c| c.a[0]).collect();
        assert_eq!(a, vec![0.25, 1.0, 0.5]);
        assert_eq!(inst.b, vec![1.0]);
    }

    #[test]
    fn adwords_errors() {
        assert!(matches!(
            adwords_to_multi(&[vec![0.0, 0.0]], &[1.0, 1.0]),
            Err(Error::AllZeroBids)
        ));
        // A silent bidder is fine.
        let map = adwords_to_multi(&[vec![0.0, 1.0]], &[1.0, 1.0]).unwrap();
        assert_eq!(map.row_scale, vec![1.0, 1.0]);
        assert!(adwords_to_multi(&[vec![1.0]], &[1.0, 1.0]).is_err());
        assert!(adwords_to_multi(&[vec![1.0]], &[0.0]).is_err());
    }

    #[test]
    fn zero_rewards_run() {
        let cols = (0..12).map(|_| col(&[0.0, 0.0], &[&[0.5, 1.0]])).collect();
        let inst = MultiInstance::new(vec![3.0], 2, cols).unwrap();
        let res = run_dpa_multi(&inst, 0.25).unwrap();
        assert_eq!(res.objective, 0.0);
        assert!(res.decisions.iter().all(|d| d.choice.is_none()));
    }

    #[test]
    fn flattened_lp_shape() {
        let cols = (0..3).map(|_| col(&[1.0, 2.0], &[&[0.5, 1.0]])).collect();
        let inst = MultiInstance::new(vec![1.0], 2, cols).unwrap();
        let lp = flatten_partial_lp(&inst, 2, vec![0.5]).unwrap();
        assert_eq!(lp.num_rows(), 3);
        assert_eq!(lp.num_cols(), 4);
        assert_eq!(lp.rhs(), &[0.5, 1.0, 1.0]);
        assert_eq!(lp.row(1), &[1.0, 1.0, 0.0, 0.0]);
        let scalar = Instance::new(vec![1.0], vec![Column::new(1.0, vec![0.5])]).unwrap();
        let lp = flatten_partial_lp(&MultiInstance::from_scalar(&scalar), 1, vec![0.5]).unwrap();
        assert_eq!(lp.num_rows(), 1);
    }
}
