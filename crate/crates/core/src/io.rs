//! On-disk formats: instance JSON and the results CSV.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::TrialStats;
use crate::model::{Instance, Workload};
use crate::multi::MultiInstance;

pub const RESULTS_HEADER: [&str; 9] = [
    "algo",
    "eps",
    "trial",
    "seed",
    "objective",
    "opt",
    "ratio",
    "violations",
    "runtime_ms",
];

/// Parses an instance document; a `"k"` key marks the multi-option form.
pub fn parse_workload(text: &str) -> Result<Workload> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let w = if value.get("k").is_some() {
        Workload::Multi(serde_json::from_value::<MultiInstance>(value)?)
    } else {
        Workload::Scalar(serde_json::from_value::<Instance>(value)?)
    };
    w.validate()?;
    Ok(w)
}

pub fn read_workload(path: &Path) -> Result<Workload> {
    let text = fs::read_to_string(path)?;
    parse_workload(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Compact JSON. Floats use the shortest representation that reads back to
/// the same bits.
pub fn workload_to_string(w: &Workload) -> String {
    let mut s = serde_json::to_string(w).expect("instances serialize");
    s.push('\n');
    s
}

pub fn write_workload(path: &Path, w: &Workload) -> Result<()> {
    fs::write(path, workload_to_string(w))?;
    Ok(())
}

/// Appends one row per trial. `timing` controls whether `runtime_ms` carries
/// the measured time or 0, which keeps the file reproducible.
pub fn write_trial_rows<W: Write>(
    out: &mut csv::Writer<W>,
    stats: &TrialStats,
    timing: bool,
) -> Result<()> {
    for rec in &stats.records {
        let runtime = if timing {
            rec.runtime.as_secs_f64() * 1e3
        } else {
            0.0
        };
        out.write_record([
            stats.algo.name().to_string(),
            stats.eps.to_string(),
            rec.trial.to_string(),
            rec.seed.to_string(),
            rec.objective.to_string(),
            stats.opt.to_string(),
            rec.ratio.to_string(),
            rec.violations.to_string(),
            runtime.to_string(),
        ])?;
    }
    Ok(())
}

pub fn results_writer<W: Write>(w: W) -> Result<csv::Writer<W>> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RESULTS_HEADER)?;
    Ok(out)
}
