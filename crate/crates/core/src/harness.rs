//! Experiment runner: offline optimum, repeated random-order trials, the
//! empirical checks on learned prices, and column-sampling LP approximation.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{shuffle, shuffle_workload};
use crate::lp::{perturb_rewards, solve_boxed_lp, BoxedLp, DEFAULT_DUALITY_TOL, DEFAULT_TOL};
use crate::model::{Column, DualPrice, Instance, Workload};
use crate::multi::{
    multi_allocation_rule, perturb_multi, run_dpa_multi, solve_offline_multi, MultiInstance,
};
use crate::online::{
    allocation_rule, learn_price_from, run_dpa, run_ola, scaled_rhs, snapped_ceil, try_consume,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Ola,
    Dpa,
    DpaMulti,
    /// Accept anything that fits; a reference point, not a contribution.
    Greedy,
}

impl Algo {
    pub const ALL: [Algo; 4] = [Algo::Ola, Algo::Dpa, Algo::DpaMulti, Algo::Greedy];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Ola => "ola",
            Algo::Dpa => "dpa",
            Algo::DpaMulti => "dpa_multi",
            Algo::Greedy => "greedy",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown algorithm {s:?}")))
    }

    /// Whether the algorithm can run on this workload.
    pub fn supports(self, w: &Workload) -> bool {
        match (self, w) {
            (Algo::Ola | Algo::Dpa, Workload::Multi(m)) => m.k == 1,
            _ => true,
        }
    }
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfflineSolution {
    pub opt: f64,
    pub x: Vec<f64>,
    pub p: DualPrice,
}

/// Optimum of the full LP relaxation.
pub fn offline_opt(inst: &Instance) -> Result<OfflineSolution> {
    let lp = BoxedLp::from_columns(&inst.columns, inst.b.clone())?;
    let sol = solve_boxed_lp(&lp, DEFAULT_TOL)?;
    Ok(OfflineSolution {
        opt: sol.objective,
        x: sol.x,
        p: DualPrice::new(sol.p),
    })
}

pub fn offline_opt_workload(w: &Workload) -> Result<f64> {
    match w {
        Workload::Scalar(i) => Ok(offline_opt(i)?.opt),
        Workload::Multi(i) => Ok(solve_offline_multi(i)?.0.objective),
    }
}

/// What a single run produced, in a form common to all algorithms.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub objective: f64,
    /// Chosen option per arrival (`None` = rejected).
    pub choices: Vec<Option<usize>>,
}

fn greedy_scalar(inst: &Instance) -> Outcome {
    let mut fill = vec![0.0; inst.m];
    let mut objective = 0.0;
    let choices = inst
        .columns
        .iter()
        .map(|c| {
            if c.pi > 0.0 && try_consume(&mut fill, &inst.b, &c.a) {
                objective += c.pi;
                Some(0)
            } else {
                None
            }
        })
        .collect();
    Outcome { objective, choices }
}

fn greedy_multi(inst: &MultiInstance) -> Outcome {
    let mut fill = vec![0.0; inst.m];
    let mut objective = 0.0;
    let choices = inst
        .columns
        .iter()
        .map(|c| {
            let mut order: Vec<usize> = (0..inst.k).filter(|&j| c.f[j] > 0.0).collect();
            order.sort_by(|&x, &y| c.f[y].total_cmp(&c.f[x]).then(x.cmp(&y)));
            order
                .into_iter()
                .find(|&j| {
                    let need: Vec<f64> = c.g.iter().map(|r| r[j]).collect();
                    try_consume(&mut fill, &inst.b, &need)
                })
                .inspect(|&j| objective += c.f[j])
        })
        .collect();
    Outcome { objective, choices }
}

fn from_scalar_decisions(objective: f64, d: &[u8]) -> Outcome {
    Outcome {
        objective,
        choices: d.iter().map(|&x| (x == 1).then_some(0)).collect(),
    }
}

pub fn run_algo(w: &Workload, algo: Algo, eps: f64) -> Result<Outcome> {
    match (algo, w) {
        (Algo::Greedy, Workload::Scalar(i)) => Ok(greedy_scalar(i)),
        (Algo::Greedy, Workload::Multi(i)) => Ok(greedy_multi(i)),
        (Algo::DpaMulti, Workload::Scalar(i)) => {
            let r = run_dpa_multi(&MultiInstance::from_scalar(i), eps)?;
            Ok(Outcome {
                objective: r.objective,
                choices: r.decisions.iter().map(|d| d.choice).collect(),
            })
        }
        (Algo::DpaMulti, Workload::Multi(i)) => {
            let r = run_dpa_multi(i, eps)?;
            Ok(Outcome {
                objective: r.objective,
                choices: r.decisions.iter().map(|d| d.choice).collect(),
            })
        }
        (Algo::Ola | Algo::Dpa, _) => {
            let owned;
            let inst = match w {
                Workload::Scalar(i) => i,
                Workload::Multi(m) if m.k == 1 => {
                    owned = m.to_scalar()?;
                    &owned
                }
                Workload::Multi(m) => {
                    return Err(Error::InvalidArgument(format!(
                        "{algo} needs single-option arrivals, instance has k = {}",
                        m.k
                    )))
                }
            };
            let r = if algo == Algo::Ola {
                run_ola(inst, eps)?
            } else {
                run_dpa(inst, eps)?
            };
            Ok(from_scalar_decisions(r.objective, &r.decisions))
        }
    }
}

/// Recomputes the fill of `choices` from the instance data and counts rows
/// over capacity, plus decisions that are not a valid single option.
pub fn audit(w: &Workload, choices: &[Option<usize>]) -> (Vec<f64>, usize, bool) {
    let mut fill = vec![0.0; w.m()];
    let mut integral = choices.len() == w.n();
    match w {
        Workload::Scalar(inst) => {
            for (c, ch) in inst.columns.iter().zip(choices) {
                match ch {
                    None => {}
                    Some(0) => fill.iter_mut().zip(&c.a).for_each(|(f, a)| *f += a),
                    Some(_) => integral = false,
                }
            }
        }
        Workload::Multi(inst) => {
            for (c, ch) in inst.columns.iter().zip(choices) {
                match *ch {
                    None => {}
                    Some(j) if j < inst.k => {
                        fill.iter_mut().zip(&c.g).for_each(|(f, r)| *f += r[j])
                    }
                    Some(_) => integral = false,
                }
            }
        }
    }
    let violations = fill.iter().zip(w.b()).filter(|(f, b)| f > b).count();
    (fill, violations, integral)
}

fn ratio(objective: f64, opt: f64) -> f64 {
    if opt > 0.0 {
        objective / opt
    } else if objective == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub objective: f64,
    pub ratio: f64,
    pub violations: usize,
    pub integral: bool,
    pub fill: Vec<f64>,
    pub runtime: Duration,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialStats {
    pub algo: Algo,
    pub eps: f64,
    pub num_trials: usize,
    pub opt: f64,
    pub ratios: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub violation_count: usize,
    pub all_integral: bool,
    pub mean_fill: Vec<f64>,
    pub wall_time: Duration,
    pub records: Vec<TrialRecord>,
}

/// Runs `algo` on `trials` random orders of `w`; trial `r` (1-based) uses
/// shuffle seed `base_seed + r`. Trials run in parallel on the current rayon
/// pool; results are ordered by trial index.
pub fn run_trials(
    w: &Workload,
    algo: Algo,
    eps: f64,
    trials: usize,
    base_seed: u64,
) -> Result<TrialStats> {
    let opt = offline_opt_workload(w)?;
    run_trials_with_opt(w, algo, eps, trials, base_seed, opt)
}

/// As [`run_trials`], with the offline optimum supplied (it does not depend
/// on arrival order).
pub fn run_trials_with_opt(
    w: &Workload,
    algo: Algo,
    eps: f64,
    trials: usize,
    base_seed: u64,
    opt: f64,
) -> Result<TrialStats> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    w.validate()?;
    let start = Instant::now();
    let records: Vec<TrialRecord> = (1..=trials)
        .into_par_iter()
        .map(|trial| {
            let seed = base_seed.wrapping_add(trial as u64);
            let shuffled = shuffle_workload(w, seed);
            let t0 = Instant::now();
            let out = run_algo(&shuffled, algo, eps)?;
            let runtime = t0.elapsed();
            let (fill, violations, integral) = audit(&shuffled, &out.choices);
            Ok(TrialRecord {
                trial,
                seed,
                objective: out.objective,
                ratio: ratio(out.objective, opt),
                violations,
                integral,
                fill,
                runtime,
            })
        })
        .collect::<Result<_>>()?;
    let wall_time = start.elapsed();

    let ratios: Vec<f64> = records.iter().map(|r| r.ratio).collect();
    let r = trials as f64;
    let mean = ratios.iter().sum::<f64>() / r;
    let std = if trials > 1 {
        (ratios.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut mean_fill = vec![0.0; w.m()];
    for rec in &records {
        for (m, f) in mean_fill.iter_mut().zip(&rec.fill) {
            *m += f / r;
        }
    }
    Ok(TrialStats {
        algo,
        eps,
        num_trials: trials,
        opt,
        min: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        max: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean,
        std,
        violation_count: records.iter().map(|r| r.violations).sum(),
        all_integral: records.iter().all(|r| r.integral),
        mean_fill,
        wall_time,
        ratios,
        records,
    })
}

impl TrialStats {
    /// Ratios may exceed 1 only by solver tolerance.
    pub fn ratios_bounded(&self) -> bool {
        self.ratios
            .iter()
            .all(|&x| (0.0..=1.0 + DEFAULT_DUALITY_TOL).contains(&x))
    }
}

/// Columns where the threshold rule at the offline optimal price disagrees
/// with the offline optimal primal, after perturbing rewards by `eta`.
pub fn lemma_kkt_oracle(inst: &Instance, eta: f64, seed: u64) -> Result<usize> {
    let perturbed = perturb_rewards(inst, eta, seed);
    let off = offline_opt(&perturbed)?;
    let mut count = 0;
    for (col, &x) in perturbed.columns.iter().zip(&off.x) {
        let rule = allocation_rule(&off.p, col)? as f64;
        if (rule - x).abs() > 1e-9 {
            count += 1;
        }
    }
    Ok(count)
}

/// As [`lemma_kkt_oracle`] for `k`-option arrivals: an arrival mismatches when
/// its optimal primal vector is not the indicator the rule picks.
pub fn lemma_kkt_oracle_multi(inst: &MultiInstance, eta: f64, seed: u64) -> Result<usize> {
    let perturbed = perturb_multi(inst, eta, seed);
    let (sol, p) = solve_offline_multi(&perturbed)?;
    let k = perturbed.k;
    let mut count = 0;
    for (t, col) in perturbed.columns.iter().enumerate() {
        let rule = multi_allocation_rule(&p, col)?.indicator(k);
        let x = &sol.x[t * k..(t + 1) * k];
        if rule.iter().zip(x).any(|(r, x)| (r - x).abs() > 1e-9) {
            count += 1;
        }
    }
    Ok(count)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleOptReport {
    /// Mean optimum of the learning-window LP over the shuffles.
    pub mean: f64,
    /// `eps * OPT`.
    pub bound: f64,
    pub trials: usize,
}

/// Averages the learning-window LP optimum over `trials` random orders.
pub fn lemma_sample_opt_oracle(
    inst: &Instance,
    eps: f64,
    trials: usize,
    base_seed: u64,
) -> Result<SampleOptReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    if !(eps > 0.0 && eps < 1.0) || (inst.n as f64) * eps < 1.0 - 1e-9 {
        return Err(Error::DegenerateWindow { n: inst.n, eps });
    }
    let opt = offline_opt(inst)?.opt;
    let s = snapped_ceil(inst.n as f64 * eps).min(inst.n);
    let objs: Vec<f64> = (1..=trials)
        .into_par_iter()
        .map(|r| {
            let sh = shuffle(inst, base_seed.wrapping_add(r as u64));
            let lp = BoxedLp::from_columns(&sh.columns[..s], scaled_rhs(&sh.b, sh.n, s, eps))?;
            Ok(solve_boxed_lp(&lp, DEFAULT_TOL)?.objective)
        })
        .collect::<Result<_>>()?;
    Ok(SampleOptReport {
        mean: objs.iter().sum::<f64>() / trials as f64,
        bound: eps * opt,
        trials,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSampleResult {
    pub x: Vec<u8>,
    pub objective: f64,
    pub fill: Vec<f64>,
    pub price: DualPrice,
    /// Sampled column indices, ascending.
    pub sample: Vec<usize>,
    /// Columns the rule accepted but the capacity guard turned down.
    pub guard_zeroed: usize,
    pub feasible: bool,
}

/// Approximates the full LP by pricing every column with the dual of an LP
/// over `⌈n·eps⌉` columns sampled without replacement.
pub fn column_sample_solve(inst: &Instance, eps: f64, seed: u64) -> Result<ColumnSampleResult> {
    inst.validate()?;
    if !(eps > 0.0 && eps < 1.0) || (inst.n as f64) * eps < 1.0 - 1e-9 {
        return Err(Error::DegenerateWindow { n: inst.n, eps });
    }
    let s = snapped_ceil(inst.n as f64 * eps).min(inst.n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = rand::seq::index::sample(&mut rng, inst.n, s).into_vec();
    sample.sort_unstable();
    let sampled: Vec<Column> = sample.iter().map(|&j| inst.columns[j].clone()).collect();
    let price = learn_price_from(&sampled, &inst.b, inst.n, s, eps)?;

    let mut fill = vec![0.0; inst.m];
    let mut objective = 0.0;
    let mut guard_zeroed = 0;
    let mut x = vec![0u8; inst.n];
    for (j, col) in inst.columns.iter().enumerate() {
        if allocation_rule(&price, col)? == 1 {
            if try_consume(&mut fill, &inst.b, &col.a) {
                x[j] = 1;
                objective += col.pi;
            } else {
                guard_zeroed += 1;
            }
        }
    }
    let feasible = fill.iter().zip(&inst.b).all(|(f, b)| f <= b);
    Ok(ColumnSampleResult {
        x,
        objective,
        fill,
        price,
        sample,
        guard_zeroed,
        feasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_secretary, RewardDist, SecretarySpec};

    fn secretary(n: usize, k: usize, seed: u64) -> Instance {
        gen_secretary(&SecretarySpec {
            n,
            k,
            rewards: RewardDist::Uniform { lo: 0.0, hi: 1.0 },
            seed,
        })
        .unwrap()
    }

    fn top_k_sum(inst: &Instance, k: usize) -> f64 {
        let mut r: Vec<f64> = inst.rewards().collect();
        r.sort_by(|a, b| b.total_cmp(a));
        r[..k].iter().sum()
    }

    #[test]
    fn secretary_opt_is_top_k() {
        for (n, k, seed) in [(30, 5, 1), (50, 50, 2), (200, 17, 3)] {
            let inst = secretary(n, k, seed);
            let opt = offline_opt(&inst).unwrap().opt;
            assert!((opt - top_k_sum(&inst, k)).abs() < 1e-9);
        }
    }

    #[test]
    fn single_column_opt() {
        let inst = Instance::new(vec![1.0], vec![Column::new(2.0, vec![0.5])]).unwrap();
        let off = offline_opt(&inst).unwrap();
        assert_eq!(off.opt, 2.0);
        assert_eq!(off.x, vec![1.0]);
    }

    #[test]
    fn single_trial_stats() {
        let w = Workload::Scalar(secretary(200, 20, 4));
        let st = run_trials(&w, Algo::Dpa, 0.1, 1, 9).unwrap();
        assert_eq!(st.mean, st.min);
        assert_eq!(st.max, st.min);
        assert_eq!(st.std, 0.0);
    }

    #[test]
    fn opt_is_order_independent() {
        let inst = secretary(150, 12, 5);
        let base = offline_opt(&inst).unwrap().opt;
        for seed in 0..5 {
            let o = offline_opt(&shuffle(&inst, seed)).unwrap().opt;
            assert!((o - base).abs() < 1e-9 * base);
        }
    }

    #[test]
    fn greedy_takes_first_fitting() {
        let inst = Instance::new(
            vec![2.0],
            [1.0, 0.0, 5.0, 3.0, 9.0]
                .iter()
                .map(|&p| Column::new(p, vec![1.0]))
                .collect(),
        )
        .unwrap();
        let out = run_algo(&Workload::Scalar(inst), Algo::Greedy, 0.1).unwrap();
        assert_eq!(out.objective, 6.0);
        assert_eq!(out.choices, vec![Some(0), None, Some(0), None, None]);
    }

    #[test]
    fn audit_flags_overfill() {
        let inst = Instance::new(vec![1.0], vec![Column::new(1.0, vec![1.0]); 2]).unwrap();
        let w = Workload::Scalar(inst);
        let (fill, v, integral) = audit(&w, &[Some(0), Some(0)]);
        assert_eq!(fill, vec![2.0]);
        assert_eq!(v, 1);
        assert!(integral);
        assert!(!audit(&w, &[Some(1), None]).2);
    }

    #[test]
    fn kkt_oracle_single_column() {
        let inst = Instance::new(vec![0.3], vec![Column::new(2.0, vec![0.5])]).unwrap();
        assert!(lemma_kkt_oracle(&inst, 1e-9, 1).unwrap() <= 1);
    }

    #[test]
    fn sample_opt_zero_rewards() {
        let inst = Instance::new(vec![3.0], vec![Column::new(0.0, vec![1.0]); 40]).unwrap();
        let r = lemma_sample_opt_oracle(&inst, 0.25, 30, 0).unwrap();
        assert_eq!(r.mean, 0.0);
        assert_eq!(r.bound, 0.0);
    }

    #[test]
    fn sample_opt_full_sample_below_opt() {
        let inst = secretary(40, 6, 8);
        let opt = offline_opt(&inst).unwrap().opt;
        // eps just below 1 samples every column.
        let r = lemma_sample_opt_oracle(&inst, 0.99, 3, 0).unwrap();
        assert!(r.mean <= opt + 1e-9);
    }

    #[test]
    fn column_sampling_zero_rewards() {
        let inst = Instance::new(vec![3.0], vec![Column::new(0.0, vec![1.0]); 40]).unwrap();
        let r = column_sample_solve(&inst, 0.2, 1).unwrap();
        assert_eq!(r.objective, 0.0);
        assert_eq!(r.sample.len(), 8);
        assert!(r.feasible);
    }

    #[test]
    fn column_sampling_all_columns_uses_full_dual() {
        let inst = secretary(50, 7, 12);
        // ⌈50 * 0.99⌉ = 50: the sample is the whole instance.
        let r = column_sample_solve(&inst, 0.99, 3).unwrap();
        assert_eq!(r.sample, (0..50).collect::<Vec<_>>());
        let lp = BoxedLp::from_columns(&inst.columns, scaled_rhs(&inst.b, 50, 50, 0.99)).unwrap();
        let p = DualPrice::new(solve_boxed_lp(&lp, DEFAULT_TOL).unwrap().p);
        assert_eq!(r.price, p);
        let mut fill = vec![0.0];
        let mut expected = 0.0;
        for c in &inst.columns {
            if allocation_rule(&p, c).unwrap() == 1 && try_consume(&mut fill, &inst.b, &c.a) {
                expected += c.pi;
            }
        }
        assert!((r.objective - expected).abs() < 1e-9);
    }

    #[test]
    fn algo_names_roundtrip() {
        for a in Algo::ALL {
            assert_eq!(Algo::parse(a.name()).unwrap(), a);
        }
        assert!(Algo::parse("simplex").is_err());
    }
}
