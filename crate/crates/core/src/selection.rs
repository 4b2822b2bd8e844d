//! Estimation-quality metrics and the two filter-node selection schemes:
//! a greedy threshold sweep over noise variance and delay, and a per-node
//! stability test that needs no ground truth.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::dkf::{local_info_history, DkfEngine, Predictor, Realization};
use crate::error::{Error, Result};
use crate::model::{LtvSystem, Trajectory};
use crate::sensing::{seconds_to_steps, SensorNetwork};
use crate::stability::{BoundKernel, StabilityParams};

pub const SETTLING_BAND: f64 = 0.01;

/// Share of the trajectory averaged to get its final value.
const FINAL_WINDOW: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Settling {
    pub index: usize,
    /// The trajectory never settled and `index` is the `N/2` fallback.
    pub fallback: bool,
}

/// First step after which every component stays within
/// `max(band·|final|, band·max|x|)` of its final value, where the final
/// value is the mean of the last 5% of samples.
pub fn settling_index(traj: &Trajectory, band: f64) -> Result<Settling> {
    if traj.is_empty() {
        return Err(Error::Parameter("settling index of an empty trajectory".into()));
    }
    if !(band > 0.0 && band < 1.0) {
        return Err(Error::Parameter(format!("settling band must lie in (0, 1), got {band}")));
    }
    let n = traj.len();
    let window = ((n as f64 * FINAL_WINDOW).ceil() as usize).clamp(1, n);
    let peak = traj.states.iter().map(|x| x.amax()).fold(0.0, f64::max);
    let floor = band * peak;
    let mut last_outside: Option<usize> = None;
    for c in 0..traj.dim() {
        let final_value = traj.states[n - window..].iter().map(|x| x[c]).sum::<f64>() / window as f64;
        let tol = (band * final_value.abs()).max(floor);
        if let Some(k) = traj.states.iter().rposition(|x| (x[c] - final_value).abs() > tol) {
            last_outside = Some(last_outside.map_or(k, |p: usize| p.max(k)));
        }
    }
    Ok(match last_outside {
        None => Settling { index: 0, fallback: false },
        Some(k) if k + 1 < n => Settling { index: k + 1, fallback: false },
        Some(_) => Settling { index: (n - 1) / 2, fallback: true },
    })
}

fn check_pair(x_hat: &Trajectory, x: &Trajectory) -> Result<()> {
    if x_hat.len() != x.len() || x_hat.dim() != x.dim() {
        return Err(Error::Dimension(format!(
            "trajectories differ: {}x{} vs {}x{}",
            x_hat.len(),
            x_hat.dim(),
            x.len(),
            x.dim()
        )));
    }
    Ok(())
}

/// `½ Σ_{k ≥ from} ‖x̂(k) − x(k)‖²`.
pub fn mse_sum(x_hat: &Trajectory, x: &Trajectory, from: usize) -> Result<f64> {
    check_pair(x_hat, x)?;
    if from >= x.len() {
        return Err(Error::Dimension(format!("start {from} beyond trajectory of length {}", x.len())));
    }
    Ok(0.5
        * x_hat.states[from..]
            .iter()
            .zip(&x.states[from..])
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>())
}

/// [`mse_sum`] divided by the number of steps included.
pub fn mse(x_hat: &Trajectory, x: &Trajectory, from: usize) -> Result<f64> {
    Ok(mse_sum(x_hat, x, from)? / (x.len() - from) as f64)
}

/// `max |x̂ − x|` over all steps and components, relative to `max |x|`.
pub fn max_deviation(x_hat: &Trajectory, x: &Trajectory) -> Result<f64> {
    check_pair(x_hat, x)?;
    let scale = x.states.iter().map(|s| s.amax()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::UndefinedMetric("true trajectory is identically zero".into()));
    }
    let dev = x_hat
        .states
        .iter()
        .zip(&x.states)
        .map(|(a, b)| (a - b).amax())
        .fold(0.0, f64::max);
    Ok(dev / scale)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub mse: f64,
    pub mse_sum: f64,
    pub md: f64,
}

impl Metrics {
    pub fn of(x_hat: &Trajectory, x: &Trajectory, settle_from: usize) -> Result<Self> {
        Ok(Metrics {
            mse: mse(x_hat, x, settle_from)?,
            mse_sum: mse_sum(x_hat, x, settle_from)?,
            md: max_deviation(x_hat, x)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub nodes: Vec<usize>,
    /// `None` when the subset was empty and no filter was run.
    pub metrics: Option<Metrics>,
    pub iteration: Option<usize>,
    /// `(R₀, τ₀)` of a greedy iteration.
    pub thresholds: Option<(f64, f64)>,
}

/// Step from which MSE is accumulated: where the noise-free response of
/// the plant settles.
pub fn reference_settling(sys: &LtvSystem, n_steps: usize) -> Result<Settling> {
    settling_index(&sys.mean_response(n_steps)?, SETTLING_BAND)
}

/// Runs the fused filter on `subset` and scores it against the truth.
pub fn evaluate_subset(engine: &DkfEngine<'_>, subset: &[usize], settle_from: usize) -> Result<Metrics> {
    let fused = engine.run(subset)?;
    let x_hat = Trajectory::new(fused.into_iter().map(|f| f.x_hat).collect());
    Metrics::of(&x_hat, &engine.realization().truth, settle_from)
}

/// Greedy sweep: at iteration `k = 1..=iter` the thresholds are
/// `R₀ = r_max (1 − (k−1)/iter)` and `τ₀ = tau_max (1 − (k−1)/iter)`, and
/// every node with `R_i ≤ R₀` and `τ_i ≤ τ₀` is fused. All iterations share
/// the engine's realization.
pub fn greedy_select(
    engine: &DkfEngine<'_>,
    iter: usize,
    r_max: f64,
    tau_max: f64,
    settle_from: usize,
) -> Result<Vec<SelectionReport>> {
    if iter == 0 {
        return Err(Error::Parameter("greedy search needs at least one iteration".into()));
    }
    if !(r_max > 0.0 && tau_max > 0.0) {
        return Err(Error::Parameter("r_max and tau_max must be positive".into()));
    }
    let network = engine.network();
    let delays = &engine.realization().delays_s;
    (1..=iter)
        .into_par_iter()
        .map(|k| {
            let scale = 1.0 - (k - 1) as f64 / iter as f64;
            let (r0, tau0) = (r_max * scale, tau_max * scale);
            let nodes: Vec<usize> = network
                .nodes()
                .iter()
                .filter(|n| n.variance() <= r0 && delays[n.id() - 1] <= tau0)
                .map(|n| n.id())
                .collect();
            let metrics = if nodes.is_empty() {
                None
            } else {
                Some(evaluate_subset(engine, &nodes, settle_from)?)
            };
            Ok(SelectionReport { nodes, metrics, iteration: Some(k), thresholds: Some((r0, tau0)) })
        })
        .collect()
}

/// Greedy iteration with the smallest MSE (earliest on ties).
pub fn best_report(reports: &[SelectionReport]) -> Option<&SelectionReport> {
    reports
        .iter()
        .filter(|r| r.metrics.is_some())
        .fold(None, |best: Option<&SelectionReport>, r| match best {
            Some(b) if b.metrics.unwrap().mse <= r.metrics.unwrap().mse => Some(b),
            _ => Some(r),
        })
}

/// Outcome of the stability test for one node.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRecord {
    pub node_id: usize,
    pub selected: bool,
    /// Steps at which the bound was applicable.
    pub ct_exp: usize,
    /// Steps at which the bound held.
    pub ct_act: usize,
    pub delay_s: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityOutcome {
    pub selected: Vec<usize>,
    pub records: Vec<StabilityRecord>,
    pub warning: Option<String>,
    /// Some transition factor in the bound needed the pseudo-inverse.
    pub pinv_fallback: bool,
}

pub const HORIZON_WARNING: &str = "delays are larger than the estimation horizon";

/// Keeps node `i` iff at every `k ∈ (k̄, N]` with `k − d_i > 0` its own
/// information `I_i(k−d_i | k−d_i)` has larger trace than its bound
/// `Ĩ(k)`, and there is at least one such step. `delays_s` holds one delay
/// per node in seconds.
pub fn stability_select(
    sys: &LtvSystem,
    network: &SensorNetwork,
    params: &StabilityParams,
    n_steps: usize,
    delays_s: &[f64],
) -> Result<StabilityOutcome> {
    if n_steps <= params.k_bar {
        return Err(Error::Parameter(format!(
            "horizon {n_steps} must exceed k_bar = {}",
            params.k_bar
        )));
    }
    if delays_s.len() != network.len() {
        return Err(Error::Dimension("one delay per node required".into()));
    }
    let predictor = Predictor::new(sys, n_steps)?;
    let kernels: Vec<BoundKernel> = (params.k_bar + 1..=n_steps)
        .into_par_iter()
        .map(|k| BoundKernel::new(sys, k, params.k_bar))
        .collect::<Result<_>>()?;
    let pinv_fallback = kernels.iter().any(BoundKernel::pinv_fallback);
    let ts = sys.sample_time();
    let records: Vec<StabilityRecord> = network
        .nodes()
        .par_iter()
        .map(|node| {
            let delay_s = delays_s[node.id() - 1];
            let d = seconds_to_steps(delay_s, ts);
            let l = node.information();
            let history = local_info_history(&predictor, node)?;
            let (mut ct_exp, mut ct_act) = (0, 0);
            for (kernel, k) in kernels.iter().zip(params.k_bar + 1..) {
                if k <= d {
                    continue;
                }
                ct_exp += 1;
                if history[k - d].trace() > kernel.trace(params.beta_hat, &l) {
                    ct_act += 1;
                }
            }
            Ok(StabilityRecord {
                node_id: node.id(),
                selected: ct_exp > 0 && ct_act == ct_exp,
                ct_exp,
                ct_act,
                delay_s,
                variance: node.variance(),
            })
        })
        .collect::<Result<_>>()?;
    let warning = (!records.is_empty() && records.iter().all(|r| r.ct_exp == 0)).then(|| HORIZON_WARNING.to_string());
    let selected = records.iter().filter(|r| r.selected).map(|r| r.node_id).collect();
    Ok(StabilityOutcome { selected, records, warning, pinv_fallback })
}

/// Sum of `Hᵢᵀ Rᵢ⁻¹ Hᵢ` over the network.
pub fn total_information(network: &SensorNetwork, state_dim: usize) -> DMatrix<f64> {
    network
        .nodes()
        .iter()
        .fold(DMatrix::zeros(state_dim, state_dim), |acc, n| acc + n.information())
}

/// Draws one realization and sweeps the greedy thresholds over it. The
/// thresholds start at the largest variance and delay in the network.
pub fn greedy_on_seed(
    sys: &LtvSystem,
    network: &SensorNetwork,
    iter: usize,
    n_steps: usize,
    seed: u64,
) -> Result<Vec<SelectionReport>> {
    let realization = Realization::draw(sys, network, n_steps, seed)?;
    let engine = DkfEngine::new(sys, network, &realization)?;
    let r_max = network.nodes().iter().map(|n| n.variance()).fold(0.0, f64::max);
    let tau_max = realization.delays_s.iter().copied().fold(0.0, f64::max);
    let settle = reference_settling(sys, n_steps)?;
    greedy_select(&engine, iter, r_max.max(f64::MIN_POSITIVE), tau_max.max(f64::MIN_POSITIVE), settle.index)
}
