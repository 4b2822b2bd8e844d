//! End-to-end experiment pipelines and the Monte Carlo driver.

use std::path::Path;

use crate::dkf::{DkfEngine, FusedEstimate, Realization};
use crate::error::{Error, Result};
use crate::model::{LtvSystem, Trajectory};
use crate::noise::derive_run_seed;
use crate::selection::{
    best_report, greedy_select, reference_settling, stability_select, total_information, Metrics,
    SelectionReport, Settling, StabilityOutcome,
};
use crate::sensing::SensorNetwork;
use crate::stability::StabilityParams;

use super::config::{ExperimentConfig, Mode};
use super::report;

/// Everything one pipeline run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub mode: Mode,
    /// The final subset and its metrics.
    pub report: SelectionReport,
    pub settling: Settling,
    pub truth: Trajectory,
    /// Fused estimates of the final subset; `None` if it was empty.
    pub fused: Option<Vec<FusedEstimate>>,
    pub greedy: Option<Vec<SelectionReport>>,
    pub stability: Option<StabilityOutcome>,
    pub params: Option<StabilityParams>,
}

/// Runs the configured mode on one realization drawn from `seed`.
pub fn execute(cfg: &ExperimentConfig, sys: &LtvSystem, network: &SensorNetwork, seed: u64) -> Result<RunOutput> {
    if network.is_empty() {
        return Err(Error::EmptyNetwork);
    }
    let n_steps = cfg.horizon;
    let realization = Realization::draw(sys, network, n_steps, seed)?;
    let engine = DkfEngine::new(sys, network, &realization)?;
    let settling = reference_settling(sys, n_steps)?;
    let mut greedy = None;
    let mut stability = None;
    let mut params = None;
    let subset: Vec<usize> = match cfg.mode {
        Mode::All => network.ids().collect(),
        Mode::FixedSubset => cfg.subset.clone(),
        Mode::Greedy => {
            let r_max = cfg
                .r_max
                .unwrap_or_else(|| network.nodes().iter().map(|n| n.variance()).fold(0.0, f64::max));
            let tau_max = cfg
                .tau_max
                .unwrap_or_else(|| realization.delays_s.iter().copied().fold(0.0, f64::max));
            let reports = greedy_select(
                &engine,
                cfg.iter,
                r_max.max(f64::MIN_POSITIVE),
                tau_max.max(f64::MIN_POSITIVE),
                settling.index,
            )?;
            let nodes = best_report(&reports).map(|r| r.nodes.clone()).unwrap_or_default();
            greedy = Some(reports);
            nodes
        }
        Mode::Stability => {
            let p = StabilityParams::estimate(
                sys,
                &total_information(network, sys.state_dim()),
                n_steps,
                cfg.k_bar,
                cfg.alpha,
                cfg.beta_hat_override,
            )?;
            let outcome = stability_select(sys, network, &p, n_steps, &realization.delays_s)?;
            let nodes = outcome.selected.clone();
            stability = Some(outcome);
            params = Some(p);
            nodes
        }
    };
    let (fused, metrics) = if subset.is_empty() {
        (None, None)
    } else {
        let fused = engine.run(&subset)?;
        let x_hat = Trajectory::new(fused.iter().map(|f| f.x_hat.clone()).collect());
        let metrics = Metrics::of(&x_hat, &realization.truth, settling.index)?;
        (Some(fused), Some(metrics))
    };
    let (iteration, thresholds) = greedy
        .as_deref()
        .and_then(best_report)
        .map_or((None, None), |b| (b.iteration, b.thresholds));
    Ok(RunOutput {
        mode: cfg.mode,
        report: SelectionReport { nodes: subset, metrics, iteration, thresholds },
        settling,
        truth: realization.truth.clone(),
        fused,
        greedy,
        stability,
        params,
    })
}

/// Builds the system and network from `cfg`, runs the pipeline with
/// `cfg.seed`, and writes its CSV files into `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let sys = cfg.build_system()?;
    let network = cfg.build_network(cfg.seed)?;
    let out = execute(cfg, &sys, &network, cfg.seed)?;
    write_outputs(&cfg.out, &out)?;
    Ok(out)
}

pub fn write_outputs(dir: &Path, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    if let Some(fused) = &out.fused {
        report::write_trace(&dir.join("trace.csv"), &out.truth, fused)?;
    }
    if let Some(reports) = &out.greedy {
        report::write_greedy(&dir.join("greedy.csv"), reports)?;
    }
    if let Some(s) = &out.stability {
        report::write_stability(&dir.join("stability.csv"), &s.records)?;
    }
    report::write_summary(&dir.join("summary.csv"), out.mode.name(), &out.report, out.settling.index)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMetrics {
    pub n_selected: usize,
    pub mse: f64,
    pub md: f64,
}

#[derive(Debug)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub outcome: Result<RunMetrics>,
}

/// Mean and population variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub variance: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Stat { mean: f64::NAN, variance: f64::NAN };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Stat { mean, variance }
    }
}

#[derive(Debug)]
pub struct MonteCarloSummary {
    pub runs: Vec<RunRecord>,
    pub mse: Stat,
    pub md: Stat,
    pub count: Stat,
}

impl MonteCarloSummary {
    pub fn failed(&self) -> usize {
        self.runs.iter().filter(|r| r.outcome.is_err()).count()
    }

    /// First failure, if any run failed.
    pub fn first_error(&self) -> Option<&Error> {
        self.runs.iter().find_map(|r| r.outcome.as_ref().err())
    }

    pub fn ok_metrics(&self) -> Vec<RunMetrics> {
        self.runs.iter().filter_map(|r| r.outcome.as_ref().ok().copied()).collect()
    }
}

/// Repeats the pipeline `runs` times on one network (drawn from
/// `cfg.seed`), run `i` using the realization seed
/// [`derive_run_seed`]`(cfg.seed, i)`. A failing run, or one that selects
/// no nodes, is recorded as failed and the loop continues.
pub fn monte_carlo(cfg: &ExperimentConfig, runs: usize) -> Result<MonteCarloSummary> {
    if runs == 0 {
        return Err(Error::Config(vec!["runs: must be at least 1".into()]));
    }
    cfg.validate()?;
    let sys = cfg.build_system()?;
    let network = cfg.build_network(cfg.seed)?;
    let records: Vec<RunRecord> = (0..runs)
        .map(|run| {
            let seed = derive_run_seed(cfg.seed, run as u64);
            let outcome = execute(cfg, &sys, &network, seed).and_then(|o| match o.report.metrics {
                Some(m) => Ok(RunMetrics { n_selected: o.report.nodes.len(), mse: m.mse, md: m.md }),
                None => Err(Error::Selection(format!("run {run} selected no nodes"))),
            });
            RunRecord { run, seed, outcome }
        })
        .collect();
    let ok: Vec<RunMetrics> = records.iter().filter_map(|r| r.outcome.as_ref().ok().copied()).collect();
    let pick = |f: fn(&RunMetrics) -> f64| Stat::of(&ok.iter().map(f).collect::<Vec<_>>());
    Ok(MonteCarloSummary {
        mse: pick(|m| m.mse),
        md: pick(|m| m.md),
        count: pick(|m| m.n_selected as f64),
        runs: records,
    })
}

/// [`monte_carlo`] with `cfg.runs`, writing `montecarlo_runs.csv` and
/// `montecarlo_summary.csv` into `cfg.out`.
pub fn run_monte_carlo(cfg: &ExperimentConfig) -> Result<MonteCarloSummary> {
    let summary = monte_carlo(cfg, cfg.runs)?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    report::write_runs(&cfg.out.join("montecarlo_runs.csv"), &summary.runs)?;
    report::write_mc_summary(&cfg.out.join("montecarlo_summary.csv"), &summary)?;
    Ok(summary)
}
