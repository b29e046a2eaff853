//! Run outputs on disk: `epochs.csv`, `link.csv`, `clients.csv` and
//! `summary.json`.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Result, SimError};
use crate::runner::{Aggregates, EpochMeta, FlowReport, RunOutput};

#[derive(Serialize)]
struct ClientRow<'a> {
    flow_id: u64,
    class_id: &'a str,
    qoe: Option<f64>,
    t_stall_s: f64,
    t_startup_s: f64,
    mean_bitrate_bps: f64,
    switches: usize,
}

#[derive(Serialize)]
struct Summary<'a> {
    scenario: &'a str,
    ticks: u64,
    aggregates: &'a Aggregates,
    flows: &'a [FlowReport],
    epochs: &'a [EpochMeta],
    violations: &'a [String],
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn summary_json(out: &RunOutput) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Summary {
        scenario: &out.scenario,
        ticks: out.ticks,
        aggregates: &out.aggregates,
        flows: &out.flows,
        epochs: &out.epoch_meta,
        violations: &out.violations,
    })?)
}

pub fn write_report(out: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    // headers must exist even for empty runs
    let epochs = dir.join("epochs.csv");
    if out.epochs.is_empty() {
        fs::write(&epochs, "epoch,class_id,group_id,tier,n_flows,rate_bps\n").map_err(io_err(&epochs))?;
    } else {
        write_csv(&epochs, &out.epochs)?;
    }
    let link = dir.join("link.csv");
    if out.link.is_empty() {
        fs::write(&link, "t,queue_bytes,drops_bytes,utilization\n").map_err(io_err(&link))?;
    } else {
        write_csv(&link, &out.link)?;
    }
    let clients = dir.join("clients.csv");
    if out.flows.is_empty() {
        fs::write(
            &clients,
            "flow_id,class_id,qoe,t_stall_s,t_startup_s,mean_bitrate_bps,switches\n",
        )
        .map_err(io_err(&clients))?;
    } else {
        write_csv(
            &clients,
            out.clients().map(|c| ClientRow {
                flow_id: c.flow_id.0,
                class_id: c.class_id.as_str(),
                qoe: c.qoe,
                t_stall_s: c.t_stall_s,
                t_startup_s: c.t_startup_s,
                mean_bitrate_bps: c.mean_bitrate_bps,
                switches: c.switches,
            }),
        )?;
    }
    let summary = dir.join("summary.json");
    fs::write(&summary, summary_json(out)?).map_err(io_err(&summary))?;
    Ok(())
}
