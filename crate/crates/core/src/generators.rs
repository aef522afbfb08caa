//! Seeded instance generators and the random-order shuffler.
//!
//! Every generator is a pure function of its spec; the spec is stored in the
//! instance's `meta` field so a file records how it was made.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Pareto, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Column, Instance, Workload};
use crate::multi::{adwords_to_multi, AdwordsMapping, MultiInstance};
use crate::online::per_row_threshold;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn bad(msg: impl Into<String>) -> Error {
    Error::BadSpec(msg.into())
}

fn check_range(lo: f64, hi: f64, what: &str) -> Result<()> {
    if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
        return Err(bad(format!(
            "{what} range [{lo}, {hi}] must satisfy 0 <= lo <= hi"
        )));
    }
    Ok(())
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GenSpec {
    Routing(RoutingSpec),
    Secretary(SecretarySpec),
    Adwords(AdwordsSpec),
    Yield(YieldSpec),
}

impl GenSpec {
    pub fn generate(&self) -> Result<Workload> {
        Ok(match self {
            GenSpec::Routing(s) => Workload::Scalar(gen_routing(s)?),
            GenSpec::Secretary(s) => Workload::Scalar(gen_secretary(s)?),
            GenSpec::Adwords(s) => Workload::Multi(gen_adwords(s)?.to_mapping()?.instance),
            GenSpec::Yield(s) => Workload::Scalar(gen_yield(s)?),
        })
    }

    fn meta(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("generator specs serialize")
    }
}

/// Requests for random paths through `m` edges of capacity `capacity`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoutingSpec {
    pub m: usize,
    pub n: usize,
    /// Probability that a request uses a given edge.
    pub q: f64,
    pub pi_lo: f64,
    pub pi_hi: f64,
    pub capacity: f64,
    pub seed: u64,
}

pub fn gen_routing(spec: &RoutingSpec) -> Result<Instance> {
    if spec.m == 0 || spec.n == 0 {
        return Err(bad("routing needs m, n >= 1"));
    }
    if !(spec.q > 0.0 && spec.q <= 1.0) {
        return Err(bad(format!("path density {} outside (0, 1]", spec.q)));
    }
    check_range(spec.pi_lo, spec.pi_hi, "reward")?;
    if !(spec.capacity > 0.0) {
        return Err(bad("capacity must be positive"));
    }
    let mut rng = rng(spec.seed);
    let columns = (0..spec.n)
        .map(|_| {
            let mut a: Vec<f64> = (0..spec.m)
                .map(|_| if rng.random_bool(spec.q) { 1.0 } else { 0.0 })
                .collect();
            // A request must use at least one edge: an empty draw gets one
            // uniformly chosen edge, so the edge marginal is q + (1-q)^m / m.
            if a.iter().all(|&v| v == 0.0) {
                a[rng.random_range(0..spec.m)] = 1.0;
            }
            Column::new(uniform(&mut rng, spec.pi_lo, spec.pi_hi), a)
        })
        .collect();
    Ok(Instance::new(vec![spec.capacity; spec.m], columns)?
        .with_meta(GenSpec::Routing(spec.clone()).meta()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "lowercase")]
pub enum RewardDist {
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Heavy tail: `P(X > x) = (scale / x)^shape` for `x >= scale`.
    Pareto {
        scale: f64,
        shape: f64,
    },
}

impl RewardDist {
    fn validate(&self) -> Result<()> {
        match *self {
            RewardDist::Uniform { lo, hi } => check_range(lo, hi, "reward"),
            RewardDist::Pareto { scale, shape } if scale > 0.0 && shape > 0.0 => Ok(()),
            RewardDist::Pareto { .. } => Err(bad("pareto needs scale > 0 and shape > 0")),
        }
    }

    fn sample_n(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        match *self {
            RewardDist::Uniform { lo, hi } => (0..n).map(|_| uniform(rng, lo, hi)).collect(),
            RewardDist::Pareto { scale, shape } => {
                let d = Pareto::new(scale, shape).expect("validated");
                (0..n).map(|_| d.sample(rng)).collect()
            }
        }
    }
}

/// `k`-choice secretary: one unit row of capacity `k`, every arrival uses one unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecretarySpec {
    pub n: usize,
    pub k: usize,
    pub rewards: RewardDist,
    pub seed: u64,
}

pub fn gen_secretary(spec: &SecretarySpec) -> Result<Instance> {
    if spec.k == 0 || spec.k > spec.n {
        return Err(bad(format!(
            "need 1 <= k <= n, got k = {}, n = {}",
            spec.k, spec.n
        )));
    }
    spec.rewards.validate()?;
    let mut rng = rng(spec.seed);
    let columns = spec
        .rewards
        .sample_n(&mut rng, spec.n)
        .into_iter()
        .map(|pi| Column::new(pi, vec![1.0]))
        .collect();
    Ok(Instance::new(vec![spec.k as f64], columns)?
        .with_meta(GenSpec::Secretary(spec.clone()).meta()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "lowercase")]
pub enum BidDist {
    Constant {
        value: f64,
    },
    /// Each bidder bids on a query with probability `density`, uniformly in `[lo, hi]`.
    Uniform {
        lo: f64,
        hi: f64,
        density: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum BudgetRule {
    /// The same budget for every bidder.
    Fixed { budget: f64 },
    /// Budgets sized relative to each bidder's largest bid so that the
    /// per-row capacity condition at `eps` holds (`satisfy`) or clearly fails.
    Condition { eps: f64, satisfy: bool },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdwordsSpec {
    pub n: usize,
    pub m: usize,
    pub bids: BidDist,
    pub budgets: BudgetRule,
    pub seed: u64,
}

/// Raw adwords input: `bids[j][i]` is bidder `i`'s bid on query `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdwordsTable {
    pub bids: Vec<Vec<f64>>,
    pub budgets: Vec<f64>,
    pub spec: AdwordsSpec,
}

impl AdwordsTable {
    pub fn to_mapping(&self) -> Result<AdwordsMapping> {
        let mut map = adwords_to_multi(&self.bids, &self.budgets)?;
        map.instance.meta = Some(GenSpec::Adwords(self.spec.clone()).meta());
        Ok(map)
    }
}

pub fn gen_adwords(spec: &AdwordsSpec) -> Result<AdwordsTable> {
    let (n, m) = (spec.n, spec.m);
    if n == 0 || m == 0 {
        return Err(bad("adwords needs n, m >= 1"));
    }
    let mut rng = rng(spec.seed);
    let bids: Vec<Vec<f64>> = match spec.bids {
        BidDist::Constant { value } => {
            if !(value > 0.0 && value.is_finite()) {
                return Err(bad("constant bid must be positive"));
            }
            vec![vec![value; m]; n]
        }
        BidDist::Uniform { lo, hi, density } => {
            check_range(lo, hi, "bid")?;
            if !(density > 0.0 && density <= 1.0) {
                return Err(bad(format!("bid density {density} outside (0, 1]")));
            }
            (0..n)
                .map(|_| {
                    (0..m)
                        .map(|_| {
                            if rng.random_bool(density) {
                                uniform(&mut rng, lo, hi)
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect()
        }
    };
    let max_bid: Vec<f64> = (0..m)
        .map(|i| bids.iter().map(|r| r[i]).fold(0.0, f64::max))
        .collect();
    let budgets = match spec.budgets {
        BudgetRule::Fixed { budget } => {
            if !(budget > 0.0) {
                return Err(bad("budget must be positive"));
            }
            vec![budget; m]
        }
        BudgetRule::Condition { eps, satisfy } => {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(bad(format!("eps {eps} outside (0, 1)")));
            }
            // The per-row threshold with k = m options dominates
            // m ln(mn/eps) / eps^2, so meeting it meets both.
            let loose = m as f64 * ((m * n) as f64 / eps).ln() / (eps * eps);
            let units = if satisfy {
                per_row_threshold(m, n, m, eps).ceil()
            } else {
                0.5 * loose
            };
            max_bid
                .iter()
                .map(|&mb| if mb > 0.0 { mb * units } else { units })
                .collect()
        }
    };
    Ok(AdwordsTable {
        bids,
        budgets,
        spec: spec.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductSpec {
    /// Resource use per unit sold, each entry in `[0, 1]`.
    pub consumption: Vec<f64>,
    pub price_lo: f64,
    pub price_hi: f64,
}

/// Bookings arriving as a Poisson process over `[0, horizon]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YieldSpec {
    pub horizon: f64,
    pub rate: f64,
    pub products: Vec<ProductSpec>,
    pub capacity: Vec<f64>,
    pub seed: u64,
}

impl YieldSpec {
    /// Random catalogue: each product uses a random nonempty subset of the
    /// resources, with a price range drawn from `[1, 10]`.
    pub fn random_catalog(
        products: usize,
        resources: usize,
        capacity: f64,
        horizon: f64,
        rate: f64,
        seed: u64,
    ) -> Self {
        let mut rng = rng(seed ^ 0x9e37_79b9_7f4a_7c15);
        let products = (0..products)
            .map(|_| {
                let consumption = loop {
                    let c: Vec<f64> = (0..resources)
                        .map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 })
                        .collect();
                    if c.iter().any(|&v| v > 0.0) {
                        break c;
                    }
                };
                let lo = uniform(&mut rng, 1.0, 10.0);
                let hi = lo * uniform(&mut rng, 1.0, 2.0);
                ProductSpec {
                    consumption,
                    price_lo: lo,
                    price_hi: hi,
                }
            })
            .collect();
        Self {
            horizon,
            rate,
            products,
            capacity: vec![capacity; resources],
            seed,
        }
    }
}

pub fn gen_yield(spec: &YieldSpec) -> Result<Instance> {
    let mean = spec.rate * spec.horizon;
    if !(mean >= 1.0 && mean.is_finite()) {
        return Err(bad(format!("rate * horizon = {mean} must be at least 1")));
    }
    let m = spec.capacity.len();
    if m == 0 || spec.products.is_empty() {
        return Err(bad("yield needs at least one resource and one product"));
    }
    for p in &spec.products {
        if p.consumption.len() != m || p.consumption.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(bad(
                "product consumption must have one entry in [0, 1] per resource",
            ));
        }
        check_range(p.price_lo, p.price_hi, "price")?;
    }
    let mut rng = rng(spec.seed);
    let n = Poisson::new(mean)
        .map_err(|e| bad(e.to_string()))?
        .sample(&mut rng) as usize;
    if n == 0 {
        return Err(bad("Poisson draw produced no arrivals"));
    }
    let columns = (0..n)
        .map(|_| {
            let p = &spec.products[rng.random_range(0..spec.products.len())];
            Column::new(
                uniform(&mut rng, p.price_lo, p.price_hi),
                p.consumption.clone(),
            )
        })
        .collect();
    Ok(Instance::new(spec.capacity.clone(), columns)
        .map_err(|e| bad(e.to_string()))?
        .with_meta(GenSpec::Yield(spec.clone()).meta()))
}

/// Uniform random arrival order (seeded Fisher–Yates).
pub fn shuffle(inst: &Instance, seed: u64) -> Instance {
    let mut out = inst.clone();
    out.columns.shuffle(&mut rng(seed));
    out
}

pub fn shuffle_multi(inst: &MultiInstance, seed: u64) -> MultiInstance {
    let mut out = inst.clone();
    out.columns.shuffle(&mut rng(seed));
    out
}

pub fn shuffle_workload(w: &Workload, seed: u64) -> Workload {
    match w {
        Workload::Scalar(i) => Workload::Scalar(shuffle(i, seed)),
        Workload::Multi(i) => Workload::Multi(shuffle_multi(i, seed)),
    }
}
