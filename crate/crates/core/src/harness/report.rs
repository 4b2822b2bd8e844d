//! CSV output. Numbers are written with 17 significant digits so that every
//! value parses back to the identical double.

use std::path::Path;

use crate::dkf::FusedEstimate;
use crate::error::{Error, Result};
use crate::model::Trajectory;
use crate::selection::{SelectionReport, StabilityRecord};

use super::experiment::{MonteCarloSummary, RunRecord};

pub const NOT_RUN: &str = "not-run";

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `header` and `rows` as RFC-4180 CSV.
pub fn export_csv<I>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn strings(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// `k, x_true_1..m, x_hat_1..m, trace_info`
pub fn write_trace(path: &Path, truth: &Trajectory, fused: &[FusedEstimate]) -> Result<()> {
    let m = truth.dim();
    let mut header = vec!["k".to_string()];
    header.extend((1..=m).map(|i| format!("x_true_{i}")));
    header.extend((1..=m).map(|i| format!("x_hat_{i}")));
    header.push("trace_info".into());
    let rows = fused.iter().zip(&truth.states).map(|(f, x)| {
        let mut row = vec![f.step.to_string()];
        row.extend(x.iter().map(|&v| fmt_f64(v)));
        row.extend(f.x_hat.iter().map(|&v| fmt_f64(v)));
        row.push(fmt_f64(f.info.trace()));
        row
    });
    export_csv(path, &header, rows)
}

/// `iteration, r0, tau0, n_selected, mse, md, mse_sum`
pub fn write_greedy(path: &Path, reports: &[SelectionReport]) -> Result<()> {
    let header = strings(&["iteration", "r0", "tau0", "n_selected", "mse", "md", "mse_sum"]);
    let rows = reports.iter().map(|r| {
        let (r0, tau0) = r.thresholds.unwrap_or((f64::NAN, f64::NAN));
        let mut row = vec![
            r.iteration.map_or(String::new(), |i| i.to_string()),
            fmt_f64(r0),
            fmt_f64(tau0),
            r.nodes.len().to_string(),
        ];
        match r.metrics {
            Some(m) => row.extend([fmt_f64(m.mse), fmt_f64(m.md), fmt_f64(m.mse_sum)]),
            None => row.extend([NOT_RUN.to_string(), NOT_RUN.to_string(), NOT_RUN.to_string()]),
        }
        row
    });
    export_csv(path, &header, rows)
}

/// `node_id, selected, ct_exp, ct_act, delay_s, variance`
pub fn write_stability(path: &Path, records: &[StabilityRecord]) -> Result<()> {
    let header = strings(&["node_id", "selected", "ct_exp", "ct_act", "delay_s", "variance"]);
    let rows = records.iter().map(|r| {
        vec![
            r.node_id.to_string(),
            u8::from(r.selected).to_string(),
            r.ct_exp.to_string(),
            r.ct_act.to_string(),
            fmt_f64(r.delay_s),
            fmt_f64(r.variance),
        ]
    });
    export_csv(path, &header, rows)
}

/// One row describing the final subset of a run.
pub fn write_summary(path: &Path, mode: &str, report: &SelectionReport, settle_from: usize) -> Result<()> {
    let header = strings(&["mode", "n_selected", "mse", "mse_sum", "md", "settling_index", "nodes"]);
    let (mse, mse_sum, md) = match report.metrics {
        Some(m) => (fmt_f64(m.mse), fmt_f64(m.mse_sum), fmt_f64(m.md)),
        None => (NOT_RUN.into(), NOT_RUN.into(), NOT_RUN.into()),
    };
    let nodes = report.nodes.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" ");
    let row = vec![mode.to_string(), report.nodes.len().to_string(), mse, mse_sum, md, settle_from.to_string(), nodes];
    export_csv(path, &header, [row])
}

/// `run, seed, status, n_selected, mse, md`
pub fn write_runs(path: &Path, runs: &[RunRecord]) -> Result<()> {
    let header = strings(&["run", "seed", "status", "n_selected", "mse", "md"]);
    let rows = runs.iter().map(|r| match &r.outcome {
        Ok(o) => vec![
            r.run.to_string(),
            r.seed.to_string(),
            "ok".into(),
            o.n_selected.to_string(),
            fmt_f64(o.mse),
            fmt_f64(o.md),
        ],
        Err(e) => vec![
            r.run.to_string(),
            r.seed.to_string(),
            format!("failed: {e}"),
            String::new(),
            String::new(),
            String::new(),
        ],
    });
    export_csv(path, &header, rows)
}

/// The six ensemble statistics plus run counts, one row.
pub fn write_mc_summary(path: &Path, s: &MonteCarloSummary) -> Result<()> {
    let header = strings(&[
        "runs",
        "failed",
        "mse_mean",
        "mse_var",
        "md_mean",
        "md_var",
        "count_mean",
        "count_var",
    ]);
    let row = vec![
        s.runs.len().to_string(),
        s.failed().to_string(),
        fmt_f64(s.mse.mean),
        fmt_f64(s.mse.variance),
        fmt_f64(s.md.mean),
        fmt_f64(s.md.variance),
        fmt_f64(s.count.mean),
        fmt_f64(s.count.variance),
    ];
    export_csv(path, &header, [row])
}
