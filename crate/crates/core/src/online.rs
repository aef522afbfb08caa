//! Threshold-price online allocation.
//!
//! Both policies wait through a learning window of `⌈n·eps⌉` arrivals, then
//! accept an arrival iff its reward strictly beats the priced consumption and
//! it fits the remaining capacity of every row. The one-time policy learns a
//! single price at the end of the window; the dynamic policy relearns every
//! time the history doubles, with a slack that shrinks as `eps·sqrt(n/ℓ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_boxed_lp, BoxedLp, DEFAULT_TOL};
use crate::model::{Column, DualPrice, Instance, RunResult};

/// `⌈x⌉`, snapping values within floating noise of an integer onto it so that
/// e.g. `100 * 0.07` gives 7 rather than 8.
pub(crate) fn snapped_ceil(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Returns 1 iff `pi > p^T a`. Exact ties are rejected.
pub fn allocation_rule(p: &DualPrice, col: &Column) -> Result<u8> {
    if p.len() != col.a.len() {
        return Err(Error::DimensionMismatch(format!(
            "price has {} rows, column has {}",
            p.len(),
            col.a.len()
        )));
    }
    Ok(u8::from(col.pi > p.dot(&col.a)))
}

/// Dual price of the partial LP over the first `ell` arrivals with capacities
/// scaled to `(1 - shrink) * (ell / n) * b`.
pub fn learn_price(inst: &Instance, ell: usize, shrink: f64) -> Result<DualPrice> {
    learn_price_from(
        &inst.columns[..ell.min(inst.n)],
        &inst.b,
        inst.n,
        ell,
        shrink,
    )
}

pub(crate) fn learn_price_from(
    history: &[Column],
    b: &[f64],
    n: usize,
    ell: usize,
    shrink: f64,
) -> Result<DualPrice> {
    if ell == 0 || ell > n || history.len() < ell {
        return Err(Error::InvalidArgument(format!(
            "learning prefix {ell} outside 1..={n}"
        )));
    }
    if !(0.0..1.0).contains(&shrink) {
        return Err(Error::InvalidArgument(format!(
            "shrink {shrink} outside [0, 1)"
        )));
    }
    let lp = BoxedLp::from_columns(&history[..ell], scaled_rhs(b, n, ell, shrink))?;
    let sol = solve_boxed_lp(&lp, DEFAULT_TOL)?;
    Ok(DualPrice::new(sol.p))
}

pub(crate) fn scaled_rhs(b: &[f64], n: usize, ell: usize, shrink: f64) -> Vec<f64> {
    let frac = ell as f64 / n as f64;
    b.iter().map(|&bi| (1.0 - shrink) * frac * bi).collect()
}

/// Capacity slack used when learning at `ell`: `eps * sqrt(n / ell)`.
pub fn h_factor(ell: usize, n: usize, eps: f64) -> f64 {
    eps * (n as f64 / ell as f64).sqrt()
}

fn check_window(n: usize, eps: f64) -> Result<usize> {
    let degenerate = Error::DegenerateWindow { n, eps };
    if !(eps > 0.0 && eps < 1.0) || (n as f64) * eps < 1.0 - 1e-9 {
        return Err(degenerate);
    }
    let s = snapped_ceil(n as f64 * eps);
    if s == 0 || s >= n {
        return Err(degenerate);
    }
    Ok(s)
}

/// Price update points `⌈2^r n eps⌉` below `n`, strictly increasing.
pub fn geometric_schedule(n: usize, eps: f64) -> Result<Vec<usize>> {
    let first = check_window(n, eps)?;
    let mut out = vec![first];
    let base = n as f64 * eps;
    for r in 1.. {
        let ell = snapped_ceil(base * f64::powi(2.0, r));
        if ell >= n {
            break;
        }
        if out.last() != Some(&ell) {
            out.push(ell);
        }
    }
    Ok(out)
}

/// When prices are learned, and with what capacity shrink.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PricingPlan {
    pub n: usize,
    /// `(update point, shrink)` in increasing order of update point.
    pub updates: Vec<(usize, f64)>,
}

impl PricingPlan {
    pub fn one_time(n: usize, eps: f64) -> Result<Self> {
        let s = check_window(n, eps)?;
        Ok(Self {
            n,
            updates: vec![(s, eps)],
        })
    }

    pub fn dynamic(n: usize, eps: f64) -> Result<Self> {
        let updates = geometric_schedule(n, eps)?
            .into_iter()
            .map(|ell| (ell, h_factor(ell, n, eps)))
            .collect();
        Ok(Self { n, updates })
    }

    /// Length of the initial window during which nothing is accepted.
    pub fn window(&self) -> usize {
        self.updates[0].0
    }
}

/// Which policy an [`OnlineState`] follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Ola,
    Dpa,
}

impl Policy {
    pub fn plan(self, n: usize, eps: f64) -> Result<PricingPlan> {
        match self {
            Policy::Ola => PricingPlan::one_time(n, eps),
            Policy::Dpa => PricingPlan::dynamic(n, eps),
        }
    }
}

/// Accepts iff `need` fits in `b - fill` on every row, updating `fill` in place.
/// The comparison is on the same floating sum that is stored, so `fill <= b`
/// holds exactly.
pub(crate) fn try_consume(fill: &mut [f64], b: &[f64], need: &[f64]) -> bool {
    let fits = fill.iter().zip(need).zip(b).all(|((f, a), b)| f + a <= *b);
    if fits {
        for (f, a) in fill.iter_mut().zip(need) {
            *f += a;
        }
    }
    fits
}

fn run_plan(inst: &Instance, plan: &PricingPlan) -> Result<RunResult> {
    let mut prices_used = Vec::with_capacity(plan.updates.len());
    for &(ell, shrink) in &plan.updates {
        prices_used.push((ell, learn_price(inst, ell, shrink)?));
    }
    let mut decisions = vec![0u8; inst.n];
    let mut fill = vec![0.0; inst.m];
    let mut objective = 0.0;
    let mut accepted_count = 0;
    let mut seg = 0;
    // Arrival index `t` is 0-based; the price learned at `ell` covers
    // 1-based steps `ell+1..`, i.e. 0-based `t >= ell`.
    for t in plan.window()..inst.n {
        while seg + 1 < prices_used.len() && prices_used[seg + 1].0 <= t {
            seg += 1;
        }
        let col = &inst.columns[t];
        if allocation_rule(&prices_used[seg].1, col)? == 1
            && try_consume(&mut fill, &inst.b, &col.a)
        {
            decisions[t] = 1;
            objective += col.pi;
            accepted_count += 1;
        }
    }
    Ok(RunResult {
        decisions,
        objective,
        fill,
        prices_used,
        accepted_count,
    })
}

/// One-time learning: a single price from the first `⌈n·eps⌉` arrivals.
pub fn run_ola(inst: &Instance, eps: f64) -> Result<RunResult> {
    inst.validate()?;
    run_plan(inst, &PricingPlan::one_time(inst.n, eps)?)
}

/// Dynamic pricing: relearn at every point of [`geometric_schedule`].
pub fn run_dpa(inst: &Instance, eps: f64) -> Result<RunResult> {
    inst.validate()?;
    run_plan(inst, &PricingPlan::dynamic(inst.n, eps)?)
}

/// Streaming form of the policies: feed one arrival at a time.
#[derive(Clone, Debug)]
pub struct OnlineState {
    b: Vec<f64>,
    fill: Vec<f64>,
    t: usize,
    current_price: Option<DualPrice>,
    plan: PricingPlan,
    next_update: usize,
    history: Vec<Column>,
    decisions: Vec<u8>,
    prices_used: Vec<(usize, DualPrice)>,
    objective: f64,
}

impl OnlineState {
    pub fn new(b: Vec<f64>, n: usize, eps: f64, policy: Policy) -> Result<Self> {
        if b.is_empty() || b.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidInstance("capacities must be positive".into()));
        }
        let plan = policy.plan(n, eps)?;
        Ok(Self {
            fill: vec![0.0; b.len()],
            b,
            t: 0,
            current_price: None,
            plan,
            next_update: 0,
            history: Vec::with_capacity(n),
            decisions: Vec::with_capacity(n),
            prices_used: Vec::new(),
            objective: 0.0,
        })
    }

    /// Number of arrivals processed so far.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn remaining(&self) -> Vec<f64> {
        self.b.iter().zip(&self.fill).map(|(b, f)| b - f).collect()
    }

    pub fn current_price(&self) -> Option<&DualPrice> {
        self.current_price.as_ref()
    }

    pub fn schedule(&self) -> Vec<usize> {
        self.plan.updates.iter().map(|u| u.0).collect()
    }

    pub fn decisions(&self) -> &[u8] {
        &self.decisions
    }

    /// Irrevocable decision for the next arrival.
    pub fn step(&mut self, col: &Column) -> Result<u8> {
        let n = self.plan.n;
        if self.t >= n {
            return Err(Error::StreamExhausted(n));
        }
        if col.a.len() != self.b.len() {
            return Err(Error::DimensionMismatch(format!(
                "column has {} rows, state has {}",
                col.a.len(),
                self.b.len()
            )));
        }
        if let Some(&(ell, shrink)) = self.plan.updates.get(self.next_update) {
            if self.t == ell {
                let price = learn_price_from(&self.history, &self.b, n, ell, shrink)?;
                self.prices_used.push((ell, price.clone()));
                self.current_price = Some(price);
                self.next_update += 1;
            }
        }
        self.history.push(col.clone());
        self.t += 1;
        let decision = match &self.current_price {
            Some(p)
                if allocation_rule(p, col)? == 1
                    && try_consume(&mut self.fill, &self.b, &col.a) =>
            {
                1
            }
            _ => 0,
        };
        if decision == 1 {
            self.objective += col.pi;
        }
        self.decisions.push(decision);
        Ok(decision)
    }

    pub fn into_result(self) -> RunResult {
        let accepted_count = self.decisions.iter().filter(|&&d| d == 1).count();
        RunResult {
            decisions: self.decisions,
            objective: self.objective,
            fill: self.fill,
            prices_used: self.prices_used,
            accepted_count,
        }
    }
}

/// Which sufficient condition on the capacities to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionVariant {
    /// `B >= 6 m ln(n/eps) / eps^3`.
    Ola,
    /// `B >= 20 m ln(n) / eps^2`.
    Dpa,
    /// `B >= 20 (m λ + m² ln(1/eps)) / eps^2`, `λ = ln ln(pi_max / pi_min)`.
    Corollary,
    /// `b_i / ā_i >= 20 m ln(n k / eps) / eps^2` on every row.
    PerRow,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub satisfied: bool,
    pub lhs: f64,
    pub rhs: f64,
}

impl ConditionReport {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            satisfied: lhs >= rhs,
            lhs,
            rhs,
        }
    }
}

/// Threshold of the per-row condition for `k` options per arrival.
pub(crate) fn per_row_threshold(m: usize, n: usize, k: usize, eps: f64) -> f64 {
    20.0 * m as f64 * ((n * k) as f64 / eps).ln() / (eps * eps)
}

/// `min_i b_i / ā_i` over rows with nonzero consumption.
pub(crate) fn per_row_lhs(b: &[f64], row_max: &[f64]) -> f64 {
    b.iter()
        .zip(row_max)
        .filter(|(_, &a)| a > 0.0)
        .map(|(b, a)| b / a)
        .fold(f64::INFINITY, f64::min)
}

/// Evaluates one of the sufficient input conditions. Diagnostic only: the
/// algorithms run whether or not it holds.
pub fn check_input_condition(
    inst: &Instance,
    eps: f64,
    variant: ConditionVariant,
) -> Result<ConditionReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps {eps} outside (0, 1)")));
    }
    let m = inst.m as f64;
    let n = inst.n as f64;
    let big_b = inst.min_capacity();
    Ok(match variant {
        ConditionVariant::Ola => {
            ConditionReport::new(big_b, 6.0 * m * (n / eps).ln() / eps.powi(3))
        }
        ConditionVariant::Dpa => ConditionReport::new(big_b, 20.0 * m * n.ln() / (eps * eps)),
        ConditionVariant::Corollary => {
            if let Some(t) = inst.columns.iter().position(|c| !(c.pi > 0.0)) {
                return Err(Error::NonpositiveReward(t));
            }
            let pi_max = inst.rewards().fold(0.0, f64::max);
            let pi_min = inst.rewards().fold(f64::INFINITY, f64::min);
            ConditionReport::new(big_b, corollary_threshold(inst.m, eps, pi_max / pi_min))
        }
        ConditionVariant::PerRow => ConditionReport::new(
            per_row_lhs(&inst.b, &inst.row_max_consumption()),
            per_row_threshold(inst.m, inst.n, 1, eps),
        ),
    })
}

/// `ln ln` of the reward spread, clamped to zero when the spread is below `e`.
fn corollary_threshold(m: usize, eps: f64, spread: f64) -> f64 {
    let m = m as f64;
    let lambda = if spread > std::f64::consts::E {
        spread.ln().ln()
    } else {
        0.0
    };
    20.0 * (m * lambda + m * m * (1.0 / eps).ln()) / (eps * eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(rewards: &[f64], b: f64) -> Instance {
        Instance::new(
            vec![b],
            rewards
                .iter()
                .map(|&pi| Column::new(pi, vec![1.0]))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn rule_examples() {
        let col = Column::new(0.3, vec![0.4, 0.9]);
        assert_eq!(allocation_rule(&DualPrice::zeros(2), &col).unwrap(), 1);
        let zero = Column::new(0.0, vec![0.4, 0.9]);
        assert_eq!(
            allocation_rule(&DualPrice::new(vec![0.2, 5.0]), &zero).unwrap(),
            0
        );
        assert_eq!(allocation_rule(&DualPrice::zeros(2), &zero).unwrap(), 0);
        let col = Column::new(1.5, vec![0.5, 0.5]);
        assert_eq!(
            allocation_rule(&DualPrice::new(vec![1.0, 1.0]), &col).unwrap(),
            1
        );
    }

    #[test]
    fn rule_rejects_exact_tie() {
        let col = Column::new(1.0, vec![0.5, 0.5]);
        assert_eq!(
            allocation_rule(&DualPrice::new(vec![1.0, 1.0]), &col).unwrap(),
            0
        );
    }

    #[test]
    fn rule_dimension_mismatch() {
        let col = Column::new(1.0, vec![0.5]);
        assert!(matches!(
            allocation_rule(&DualPrice::zeros(2), &col),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn h_factor_examples() {
        assert_eq!(h_factor(100, 100, 0.3), 0.3);
        assert_eq!(h_factor(64, 64, 0.04), 0.04);
        assert!((h_factor(4, 100, 0.04) - 0.2).abs() < 1e-15);
        assert_eq!(h_factor(16, 64, 0.125), 0.25);
    }

    #[test]
    fn schedule_examples() {
        assert_eq!(geometric_schedule(64, 0.25).unwrap(), vec![16, 32]);
        assert_eq!(geometric_schedule(100, 0.1).unwrap(), vec![10, 20, 40, 80]);
        assert_eq!(
            geometric_schedule(1000, 1.0 / 128.0).unwrap(),
            vec![8, 16, 32, 63, 125, 250, 500]
        );
        // 100 * 0.07 is not exactly 7 in binary floating point.
        assert_eq!(geometric_schedule(100, 0.07).unwrap()[0], 7);
    }

    #[test]
    fn schedule_dedups_after_ceiling() {
        // n * eps = 1.2: ceilings of 1.2, 2.4, 4.8, 9.6.
        let s = geometric_schedule(12, 0.1).unwrap();
        assert_eq!(s, vec![2, 3, 5, 10]);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn schedule_degenerate_windows() {
        assert!(matches!(
            geometric_schedule(10, 0.05),
            Err(Error::DegenerateWindow { .. })
        ));
        assert!(matches!(
            geometric_schedule(10, 0.95),
            Err(Error::DegenerateWindow { .. })
        ));
        assert!(geometric_schedule(10, 0.9).is_ok());
        assert!(geometric_schedule(10, 0.0).is_err());
        assert!(geometric_schedule(10, 1.0).is_err());
    }

    #[test]
    fn learn_price_two_of_four() {
        let inst = scalar(&[4.0, 3.0, 2.0, 1.0], 2.0);
        let p = learn_price(&inst, 2, 0.0).unwrap();
        assert_eq!(p.p, vec![3.0]);
    }

    #[test]
    fn learn_price_uniform_columns_bind() {
        let n = 20;
        let inst = scalar(&vec![1.0; n], n as f64);
        for (ell, shrink) in [(5, 0.2), (10, 0.5), (7, 0.0)] {
            let rhs = scaled_rhs(&inst.b, n, ell, shrink);
            let lp = BoxedLp::from_columns(&inst.columns[..ell], rhs.clone()).unwrap();
            let sol = solve_boxed_lp(&lp, DEFAULT_TOL).unwrap();
            let expected = (1.0 - shrink) * ell as f64;
            assert!((sol.objective - expected.min(ell as f64)).abs() < 1e-12);
            let p = learn_price(&inst, ell, shrink).unwrap();
            assert!((0.0..=1.0).contains(&p.p[0]));
        }
    }

    #[test]
    fn learn_price_rejects_bad_args() {
        let inst = scalar(&[1.0, 2.0], 1.0);
        assert!(learn_price(&inst, 0, 0.1).is_err());
        assert!(learn_price(&inst, 3, 0.1).is_err());
        assert!(learn_price(&inst, 1, 1.0).is_err());
    }

    #[test]
    fn ola_hand_replay() {
        // Rewards are a permutation of 1..=10, one unit each, capacity 3.
        let rewards = [7.0, 2.0, 9.0, 4.0, 10.0, 1.0, 6.0, 8.0, 3.0, 5.0];
        let inst = scalar(&rewards, 3.0);
        // Sample LP: max 7x1 + 2x2, x1 + x2 <= 0.8 * 0.2 * 3 = 0.48 -> price 7.
        let res = run_ola(&inst, 0.2).unwrap();
        assert_eq!(res.prices_used.len(), 1);
        assert_eq!(res.prices_used[0].0, 2);
        assert_eq!(res.prices_used[0].1.p, vec![7.0]);
        // Remaining arrivals above 7: 9, 10, 8 -> all fit in capacity 3.
        assert_eq!(res.decisions, vec![0, 0, 1, 0, 1, 0, 0, 1, 0, 0]);
        assert_eq!(res.objective, 27.0);
        assert_eq!(res.fill, vec![3.0]);
    }

    #[test]
    fn ola_huge_capacity_accepts_every_profitable_arrival() {
        let rewards: Vec<f64> = (0..40).map(|i| ((i * 37) % 40) as f64 / 40.0).collect();
        let mut inst = scalar(&rewards, 40.0);
        inst.columns
            .iter_mut()
            .enumerate()
            .for_each(|(i, c)| c.a = vec![(i % 5) as f64 / 5.0]);
        let res = run_ola(&inst, 0.25).unwrap();
        let p = &res.prices_used[0].1;
        for (t, col) in inst.columns.iter().enumerate().skip(10) {
            assert_eq!(res.decisions[t], allocation_rule(p, col).unwrap());
        }
    }

    #[test]
    fn ola_last_step_only() {
        let inst = scalar(&[1.0, 2.0, 3.0, 4.0, 5.0], 5.0);
        let res = run_ola(&inst, 0.8).unwrap();
        assert!(res.decisions[..4].iter().all(|&d| d == 0));
        assert!(res.accepted_count <= 1);
    }

    #[test]
    fn dpa_learns_on_schedule() {
        let rewards: Vec<f64> = (0..64).map(|i| ((i * 29) % 64) as f64).collect();
        let res = run_dpa(&scalar(&rewards, 8.0), 0.25).unwrap();
        let points: Vec<usize> = res.prices_used.iter().map(|p| p.0).collect();
        assert_eq!(points, vec![16, 32]);
        assert!(res.decisions[..16].iter().all(|&d| d == 0));
    }

    #[test]
    fn dpa_zero_rewards() {
        let res = run_dpa(&scalar(&vec![0.0; 30], 5.0), 0.1).unwrap();
        assert_eq!(res.objective, 0.0);
        assert!(res.decisions.iter().all(|&d| d == 0));
    }

    #[test]
    fn guard_blocks_oversized_arrival() {
        let mut st = OnlineState::new(vec![0.2, 1.0], 4, 0.25, Policy::Ola).unwrap();
        st.step(&Column::new(0.0, vec![0.0, 0.0])).unwrap();
        assert_eq!(st.current_price(), None);
        // Window done; the learned price is zero because the sample has no reward.
        let d = st.step(&Column::new(1.0, vec![0.5, 0.1])).unwrap();
        assert_eq!(st.current_price().unwrap().p, vec![0.0, 0.0]);
        assert_eq!(d, 0);
        assert_eq!(st.remaining(), vec![0.2, 1.0]);
        assert_eq!(st.step(&Column::new(1.0, vec![0.1, 0.1])).unwrap(), 1);
        st.step(&Column::new(1.0, vec![0.0, 0.0])).unwrap();
        assert!(matches!(
            st.step(&Column::new(1.0, vec![0.0, 0.0])),
            Err(Error::StreamExhausted(4))
        ));
    }

    #[test]
    fn condition_formulas() {
        let inst = Instance::new(
            vec![5000.0, 5000.0],
            (0..10_000)
                .map(|_| Column::new(1.0, vec![0.5, 1.0]))
                .collect(),
        )
        .unwrap();
        let ola = check_input_condition(&inst, 0.1, ConditionVariant::Ola).unwrap();
        let expected = 6.0 * 2.0 * 1e5f64.ln() / 1e-3;
        assert!((ola.rhs - expected).abs() < 1e-6 * expected);
        assert!((ola.rhs - 1.3815e5).abs() < 100.0);
        assert!(!ola.satisfied);
        assert_eq!(ola.lhs, 5000.0);
        let dpa = check_input_condition(&inst, 0.1, ConditionVariant::Dpa).unwrap();
        assert!((dpa.rhs - 20.0 * 2.0 * 1e4f64.ln() / 0.01).abs() < 1e-6);
        assert!((dpa.rhs - 3.684e4).abs() < 10.0);
        assert!(!dpa.satisfied);
        let per_row = check_input_condition(&inst, 0.1, ConditionVariant::PerRow).unwrap();
        assert_eq!(per_row.lhs, 5000.0);
        let cor = check_input_condition(&inst, 0.1, ConditionVariant::Corollary).unwrap();
        assert!((cor.rhs - 20.0 * 4.0 * 10f64.ln() / 0.01).abs() < 1e-9);
    }

    #[test]
    fn dpa_threshold_is_twenty_when_log_n_is_one() {
        // n = e is hypothetical; evaluate the closed form directly.
        let rhs = 20.0 * 1.0 * std::f64::consts::E.ln() / 1.0;
        assert!((rhs - 20.0).abs() < 1e-12);
    }

    #[test]
    fn corollary_needs_positive_rewards() {
        let inst = scalar(&[1.0, 0.0, 2.0], 1.0);
        assert!(matches!(
            check_input_condition(&inst, 0.1, ConditionVariant::Corollary),
            Err(Error::NonpositiveReward(1))
        ));
    }

    #[test]
    fn corollary_uses_reward_spread() {
        let inst = scalar(&[1.0, 1000.0], 1.0);
        let r = check_input_condition(&inst, 0.5, ConditionVariant::Corollary).unwrap();
        let lambda = 1000f64.ln().ln();
        assert!((r.rhs - 20.0 * (lambda + 2f64.ln()) / 0.25).abs() < 1e-9);
    }
}
