//! One run per parameter value, in parallel, joined into one table.

use std::path::Path;
use std::thread;

use serde::Serialize;

use crate::error::{Result, SimError};
use crate::report::write_report;
use crate::runner::{run, RunOutput};
use crate::scenario::{Scenario, SweepParam};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub mean_qoe: f64,
    pub mean_stall_s: f64,
    pub lower_clients: usize,
    pub lower_mean_qoe: f64,
    pub upper_mean_qoe: f64,
    pub aggregate_throughput_bps: f64,
    pub jain_index: f64,
    pub mean_utilization: f64,
}

impl SweepRow {
    fn new(value: f64, out: &RunOutput) -> Self {
        let a = &out.aggregates;
        Self {
            value,
            mean_qoe: a.overall.mean_qoe,
            mean_stall_s: a.overall.mean_stall_s,
            lower_clients: a.lower.clients,
            lower_mean_qoe: a.lower.mean_qoe,
            upper_mean_qoe: a.upper.mean_qoe,
            aggregate_throughput_bps: a.aggregate_throughput_bps,
            jain_index: a.jain_index,
            mean_utilization: a.mean_utilization,
        }
    }
}

/// Runs every value with the scenario's seed. Outputs come back in the
/// order of `values`.
pub fn sweep(sc: &Scenario, param: SweepParam, values: &[f64]) -> Result<Vec<(f64, RunOutput)>> {
    if values.is_empty() {
        return Err(SimError::field("values", "at least one value is required"));
    }
    let scenarios = values
        .iter()
        .map(|v| sc.with_param(param, *v))
        .collect::<Result<Vec<_>>>()?;
    thread::scope(|s| {
        let handles: Vec<_> = scenarios.iter().map(|sc| s.spawn(move || run(sc))).collect();
        handles
            .into_iter()
            .zip(values)
            .map(|(h, v)| Ok((*v, h.join().expect("sweep worker panicked")?)))
            .collect()
    })
}

/// Writes one report directory per value plus `sweep.csv`.
pub fn write_sweep(results: &[(f64, RunOutput)], param: SweepParam, dir: &Path) -> Result<Vec<SweepRow>> {
    std::fs::create_dir_all(dir).map_err(|source| SimError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut rows = Vec::new();
    for (v, out) in results {
        write_report(out, &dir.join(format!("{param}={v}")))?;
        rows.push(SweepRow::new(*v, out));
    }
    let mut w = csv::Writer::from_path(dir.join("sweep.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|source| SimError::Io {
        path: dir.join("sweep.csv").display().to_string(),
        source,
    })?;
    Ok(rows)
}
