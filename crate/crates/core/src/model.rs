//! Core data model: arrivals, instances and dual prices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One arrival: a reward and its consumption of each resource row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub pi: f64,
    pub a: Vec<f64>,
}

impl Column {
    pub fn new(pi: f64, a: Vec<f64>) -> Self {
        Self { pi, a }
    }
}

/// A full online packing problem: capacities plus the ordered arrival sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub m: usize,
    pub n: usize,
    pub b: Vec<f64>,
    pub columns: Vec<Column>,
    /// Generator parameters, when the instance came from a generator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

impl Instance {
    pub fn new(b: Vec<f64>, columns: Vec<Column>) -> Result<Self> {
        let inst = Self {
            m: b.len(),
            n: columns.len(),
            b,
            columns,
            meta: None,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn with_meta(mut self, meta: serde_json::Value) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidInstance("m and n must be positive".into()));
        }
        if self.b.len() != self.m {
            return Err(Error::InvalidInstance(format!(
                "b has {} entries, expected m = {}",
                self.b.len(),
                self.m
            )));
        }
        if self.columns.len() != self.n {
            return Err(Error::InvalidInstance(format!(
                "{} columns, expected n = {}",
                self.columns.len(),
                self.n
            )));
        }
        if let Some(i) = self.b.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidInstance(format!("b[{i}] must be positive")));
        }
        for (t, col) in self.columns.iter().enumerate() {
            if col.a.len() != self.m {
                return Err(Error::InvalidInstance(format!(
                    "column {t} has {} consumption entries, expected {}",
                    col.a.len(),
                    self.m
                )));
            }
            if !(col.pi >= 0.0 && col.pi.is_finite()) {
                return Err(Error::InvalidInstance(format!(
                    "column {t} has negative reward"
                )));
            }
            if col.a.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::InvalidInstance(format!(
                    "column {t} has consumption outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn rewards(&self) -> impl Iterator<Item = f64> + '_ {
        self.columns.iter().map(|c| c.pi)
    }

    /// Smallest right-hand side, the `B` of the input conditions.
    pub fn min_capacity(&self) -> f64 {
        self.b.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest consumption of each row over all columns.
    pub fn row_max_consumption(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for col in &self.columns {
            for (o, &a) in out.iter_mut().zip(&col.a) {
                *o = f64::max(*o, a);
            }
        }
        out
    }
}

/// Threshold price vector on the resource rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DualPrice {
    pub p: Vec<f64>,
}

impl DualPrice {
    /// Negative entries are clamped to zero.
    pub fn new(p: Vec<f64>) -> Self {
        Self {
            p: p.into_iter().map(|v| v.max(0.0)).collect(),
        }
    }

    pub fn zeros(m: usize) -> Self {
        Self { p: vec![0.0; m] }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn dot(&self, a: &[f64]) -> f64 {
        self.p.iter().zip(a).map(|(p, a)| p * a).sum()
    }
}

/// Outcome of one online run over an instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub decisions: Vec<u8>,
    pub objective: f64,
    pub fill: Vec<f64>,
    pub prices_used: Vec<(usize, DualPrice)>,
    pub accepted_count: usize,
}

/// Either kind of instance; the on-disk format tells them apart by `"k"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Workload {
    Multi(crate::multi::MultiInstance),
    Scalar(Instance),
}

impl Workload {
    pub fn m(&self) -> usize {
        match self {
            Workload::Scalar(i) => i.m,
            Workload::Multi(i) => i.m,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Workload::Scalar(i) => i.n,
            Workload::Multi(i) => i.n,
        }
    }

    pub fn b(&self) -> &[f64] {
        match self {
            Workload::Scalar(i) => &i.b,
            Workload::Multi(i) => &i.b,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Workload::Scalar(i) => i.validate(),
            Workload::Multi(i) => i.validate(),
        }
    }

    pub fn row_max_consumption(&self) -> Vec<f64> {
        match self {
            Workload::Scalar(i) => i.row_max_consumption(),
            Workload::Multi(i) => i.row_max_consumption(),
        }
    }
}
