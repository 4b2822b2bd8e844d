//! Distributed Kalman filtering in information form.
//!
//! Each filter node runs its own information filter on its own measurements
//! with no delay. After every measurement update the node forwards the
//! differences `I_i(k|k) − I_i(k|k−1)` and `ŷ_i(k|k) − ŷ_i(k|k−1)` to the
//! estimator; the report of node `i` reaches the estimator `d_i` steps late.
//! The estimator adds whatever reports arrive at step `k` to its own
//! prediction and advances that prediction with the same information-form
//! time update the nodes use. Reports are not re-timed: a report computed at
//! step `k − d_i` is fused at step `k` as-is.
//!
//! A covariance-form Kalman filter is kept alongside as an independent
//! oracle for the information-form recursions.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, SINGULAR_TOL};
use crate::model::{LtvSystem, Trajectory};
use crate::noise::{Gaussian, Stream};
use crate::sensing::{SensorNetwork, SensorNode};

/// Information-form state of one filter node at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFilterState {
    /// `I_i(k|k−1)`
    pub info_prior: DMatrix<f64>,
    /// `ŷ_i(k|k−1)`
    pub iv_prior: DVector<f64>,
    /// `I_i(k|k)`
    pub info_post: DMatrix<f64>,
    /// `ŷ_i(k|k)`
    pub iv_post: DVector<f64>,
    pub x_prior: Option<DVector<f64>>,
    pub x_post: Option<DVector<f64>>,
    pub gain: Option<DMatrix<f64>>,
}

impl NodeFilterState {
    /// `I(0|−1) = 0`, `ŷ(0|−1) = 0`: no prior knowledge at all.
    pub fn uninformed(state_dim: usize) -> Self {
        NodeFilterState::from_prior(DMatrix::zeros(state_dim, state_dim), DVector::zeros(state_dim))
    }

    pub fn from_prior(info: DMatrix<f64>, iv: DVector<f64>) -> Self {
        let x_prior = recover_state(&info, &iv);
        NodeFilterState {
            info_post: info.clone(),
            iv_post: iv.clone(),
            x_post: x_prior.clone(),
            info_prior: info,
            iv_prior: iv,
            x_prior,
            gain: None,
        }
    }

    /// Prior from a state estimate and its error covariance.
    pub fn from_covariance(x: &DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        let info = linalg::symmetrize(
            &cov.clone()
                .try_inverse()
                .ok_or_else(|| Error::Parameter("prior covariance is singular".into()))?,
        );
        let iv = &info * x;
        Ok(NodeFilterState::from_prior(info, iv))
    }

    /// The differences forwarded to the estimator.
    pub fn deltas(&self) -> (DMatrix<f64>, DVector<f64>) {
        (&self.info_post - &self.info_prior, &self.iv_post - &self.iv_prior)
    }
}

/// `x = I⁻¹ ŷ` when `I` is invertible.
fn recover_state(info: &DMatrix<f64>, iv: &DVector<f64>) -> Option<DVector<f64>> {
    if linalg::is_effectively_singular(info, SINGULAR_TOL) {
        return None;
    }
    info.clone().try_inverse().map(|inv| inv * iv)
}

/// Measurement update: `I(k|k) = I(k|k−1) + Hᵀ R⁻¹ H`, `ŷ(k|k) = ŷ(k|k−1) + Hᵀ R⁻¹ z`.
pub fn node_measurement_update(
    state: &NodeFilterState,
    z: &DVector<f64>,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<NodeFilterState> {
    let m = state.info_prior.nrows();
    if h.ncols() != m || h.nrows() != z.len() || r.shape() != (z.len(), z.len()) {
        return Err(Error::Dimension(format!(
            "measurement update: H {}x{}, R {}x{}, z {}, state {m}",
            h.nrows(),
            h.ncols(),
            r.nrows(),
            r.ncols(),
            z.len()
        )));
    }
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Parameter("measurement noise covariance is singular".into()))?;
    Ok(measurement_update_with(state, z, h, &r_inv))
}

fn measurement_update_with(
    state: &NodeFilterState,
    z: &DVector<f64>,
    h: &DMatrix<f64>,
    r_inv: &DMatrix<f64>,
) -> NodeFilterState {
    let ht_rinv = h.transpose() * r_inv;
    let info_post = linalg::symmetrize(&(&state.info_prior + &ht_rinv * h));
    let iv_post = &state.iv_prior + &ht_rinv * z;
    NodeFilterState {
        x_post: recover_state(&info_post, &iv_post),
        info_post,
        iv_post,
        ..state.clone()
    }
}

/// Information-form time update through `A⁻¹` and `Q⁻¹`:
/// `M = A⁻ᵀ I A⁻¹`, `C = M (M + Q⁻¹)⁻¹`,
/// `I(k+1|k) = (I − C) M (I − C)ᵀ + C Q⁻¹ Cᵀ`, `ŷ(k+1|k) = (I − C) A⁻ᵀ ŷ(k|k)`.
pub(crate) fn info_predict(
    info: &DMatrix<f64>,
    iv: &DVector<f64>,
    a_inv: &DMatrix<f64>,
    q_inv: &DMatrix<f64>,
    step: usize,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let m = info.nrows();
    let a_inv_t = a_inv.transpose();
    let big_m = linalg::symmetrize(&(&a_inv_t * info * a_inv));
    let s = &big_m + q_inv;
    let s_inv = s.try_inverse().ok_or_else(|| Error::Numeric {
        step,
        what: "M + Q^-1 is singular".into(),
    })?;
    let c = &big_m * s_inv;
    let i_minus_c = DMatrix::identity(m, m) - &c;
    let info_next =
        linalg::symmetrize(&(&i_minus_c * &big_m * i_minus_c.transpose() + &c * q_inv * c.transpose()));
    let iv_next = &i_minus_c * (a_inv_t * iv);
    if !linalg::all_finite(&info_next) || !linalg::vec_finite(&iv_next) {
        return Err(Error::Numeric {
            step,
            what: "non-finite information after time update".into(),
        });
    }
    Ok((info_next, iv_next))
}

/// Time update of a node from step `k` to `k + 1`. A near-singular `A(k)` is
/// inverted with the pseudo-inverse.
pub fn node_time_update(
    state: &NodeFilterState,
    a_k: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> Result<NodeFilterState> {
    node_time_update_at(state, a_k, q, 0)
}

fn node_time_update_at(
    state: &NodeFilterState,
    a_k: &DMatrix<f64>,
    q: &DMatrix<f64>,
    step: usize,
) -> Result<NodeFilterState> {
    let (a_inv, _) = linalg::inverse_or_pinv(a_k, SINGULAR_TOL);
    let q_inv = q.clone().try_inverse().ok_or_else(|| Error::Numeric {
        step,
        what: "process noise covariance is singular".into(),
    })?;
    let (info_prior, iv_prior) = info_predict(&state.info_post, &state.iv_post, &a_inv, &q_inv, step)?;
    Ok(NodeFilterState::from_prior(info_prior, iv_prior))
}

/// Observer gain `L(k) = A(k) I(k|k)⁻¹ Hᵀ R⁻¹`, i.e. the covariance-form
/// gain `Σ(k|k) Hᵀ R⁻¹` premultiplied by `A(k)`.
pub fn observer_gain(
    state: &NodeFilterState,
    a_k: &DMatrix<f64>,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if linalg::is_effectively_singular(&state.info_post, SINGULAR_TOL) {
        return Err(Error::NotObservable);
    }
    let cov = state.info_post.clone().try_inverse().ok_or(Error::NotObservable)?;
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Parameter("measurement noise covariance is singular".into()))?;
    Ok(a_k * cov * h.transpose() * r_inv)
}

/// What node `node_id` computed at step `k − staleness`, as seen by the
/// estimator at step `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayedReport {
    pub node_id: usize,
    pub info_delta: DMatrix<f64>,
    pub iv_delta: DVector<f64>,
    pub staleness: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedEstimate {
    pub step: usize,
    /// `I(k|k)`
    pub info: DMatrix<f64>,
    /// `I(k|k) x̂(k|k)`
    pub iv: DVector<f64>,
    pub x_hat: DVector<f64>,
    /// Set when `I(k|k)` was singular and `x̂` came from the pseudo-inverse.
    pub pinv_fallback: bool,
}

/// The estimator's prediction `I(k|k−1)`, `ŷ(k|k−1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorPrior {
    pub info: DMatrix<f64>,
    pub iv: DVector<f64>,
}

impl EstimatorPrior {
    pub fn uninformed(state_dim: usize) -> Self {
        EstimatorPrior {
            info: DMatrix::zeros(state_dim, state_dim),
            iv: DVector::zeros(state_dim),
        }
    }

    pub fn from_covariance(x: &DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        let s = NodeFilterState::from_covariance(x, cov)?;
        Ok(EstimatorPrior { info: s.info_prior, iv: s.iv_prior })
    }
}

impl FusedEstimate {
    pub fn as_prior(&self) -> EstimatorPrior {
        EstimatorPrior { info: self.info.clone(), iv: self.iv.clone() }
    }
}

fn finish_fusion(step: usize, info: DMatrix<f64>, iv: DVector<f64>) -> FusedEstimate {
    let info = linalg::symmetrize(&info);
    let (cov, pinv_fallback) = linalg::inverse_or_pinv(&info, SINGULAR_TOL);
    let x_hat = cov * &iv;
    FusedEstimate { step, info, iv, x_hat, pinv_fallback }
}

/// Fusion: `I(k|k) = I(k|k−1) + Σ ΔI_j`,
/// `x̂(k|k) = I(k|k)⁻¹ [I(k|k−1) x̂(k|k−1) + Σ Δŷ_j]`.
pub fn fuse(step: usize, prior: &EstimatorPrior, reports: &[DelayedReport]) -> Result<FusedEstimate> {
    let m = prior.info.nrows();
    let mut info = prior.info.clone();
    let mut iv = prior.iv.clone();
    for r in reports {
        if r.info_delta.shape() != (m, m) || r.iv_delta.len() != m {
            return Err(Error::Dimension(format!("report from node {} has wrong size", r.node_id)));
        }
        info += &r.info_delta;
        iv += &r.iv_delta;
    }
    Ok(finish_fusion(step, info, iv))
}

/// Cached `A(k)`, `A(k)⁻¹` and `Q⁻¹` over a horizon.
#[derive(Debug, Clone)]
pub struct Predictor {
    a: Vec<DMatrix<f64>>,
    a_inv: Vec<DMatrix<f64>>,
    pinv_steps: Vec<usize>,
    q_inv: DMatrix<f64>,
}

impl Predictor {
    pub fn new(sys: &LtvSystem, n_steps: usize) -> Result<Self> {
        sys.check_horizon(n_steps)?;
        let mut a = Vec::with_capacity(n_steps);
        let mut a_inv = Vec::with_capacity(n_steps);
        let mut pinv_steps = Vec::new();
        for k in 0..n_steps {
            let ak = sys.transition_matrix(k)?;
            let (inv, flagged) = linalg::inverse_or_pinv(&ak, SINGULAR_TOL);
            if flagged {
                pinv_steps.push(k);
            }
            a.push(ak);
            a_inv.push(inv);
        }
        Ok(Predictor { a, a_inv, pinv_steps, q_inv: sys.process_noise_inv().clone() })
    }

    pub fn horizon(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self, k: usize) -> &DMatrix<f64> {
        &self.a[k]
    }

    pub fn a_inv(&self, k: usize) -> &DMatrix<f64> {
        &self.a_inv[k]
    }

    /// Steps whose `A(k)` needed the pseudo-inverse.
    pub fn pinv_steps(&self) -> &[usize] {
        &self.pinv_steps
    }

    pub fn q_inv(&self) -> &DMatrix<f64> {
        &self.q_inv
    }

    /// Information and information vector at `k + 1` given those at `k`.
    pub fn predict(
        &self,
        k: usize,
        info: &DMatrix<f64>,
        iv: &DVector<f64>,
    ) -> Result<(DMatrix<f64>, DVector<f64>)> {
        info_predict(info, iv, &self.a_inv[k], &self.q_inv, k)
    }
}

/// Runs one node's information filter over `measurements[0..]`, starting
/// from `initial` as the step-0 prior. Returns the state after each
/// measurement update (the gain is filled in wherever `I(k|k)` is invertible).
pub fn run_local_filter(
    predictor: &Predictor,
    node: &SensorNode,
    measurements: &[DVector<f64>],
    initial: NodeFilterState,
) -> Result<Vec<NodeFilterState>> {
    let mut out = Vec::with_capacity(measurements.len());
    let mut state = initial;
    let (h, r_inv) = (node.h(), node.r_inv());
    for (k, z) in measurements.iter().enumerate() {
        let mut post = measurement_update_with(&state, z, h, r_inv);
        if k < predictor.horizon() {
            if let Some(cov) = post.x_post.as_ref().and(post.info_post.clone().try_inverse()) {
                post.gain = Some(predictor.a(k) * cov * h.transpose() * r_inv);
            }
            let (info, iv) = predictor.predict(k, &post.info_post, &post.iv_post)?;
            state = NodeFilterState::from_prior(info, iv);
        }
        out.push(post);
    }
    Ok(out)
}

/// `I_i(k|k)` for `k = 0..=n_steps` from the uninformed start. Depends only
/// on the model, not on the measurements.
pub fn local_info_history(predictor: &Predictor, node: &SensorNode) -> Result<Vec<DMatrix<f64>>> {
    let l = node.information();
    let m = l.nrows();
    let zero = DVector::zeros(m);
    let mut info = DMatrix::zeros(m, m);
    let mut out = Vec::with_capacity(predictor.horizon() + 1);
    for k in 0..=predictor.horizon() {
        let post = linalg::symmetrize(&(&info + &l));
        if k < predictor.horizon() {
            info = predictor.predict(k, &post, &zero)?.0;
        }
        out.push(post);
    }
    Ok(out)
}

/// Covariance-form Kalman filter posterior at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub x_post: DVector<f64>,
    pub cov_post: DMatrix<f64>,
}

/// Covariance-form Kalman filter with stacked `H` and block-diagonal `R`,
/// started from `(x0, cov0)` as the step-0 prior; one posterior per entry of
/// `measurements`. Test oracle for the information-form code.
pub fn kf_covariance_form(
    sys: &LtvSystem,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
    measurements: &[DVector<f64>],
    x0: &DVector<f64>,
    cov0: &DMatrix<f64>,
) -> Result<Vec<CovarianceEstimate>> {
    let m = sys.state_dim();
    let p = h.nrows();
    if h.ncols() != m || r.shape() != (p, p) || x0.len() != m || cov0.shape() != (m, m) {
        return Err(Error::Dimension("covariance-form KF inputs disagree".into()));
    }
    if measurements.iter().any(|z| z.len() != p) {
        return Err(Error::Dimension("measurement length differs from H rows".into()));
    }
    let eye = DMatrix::<f64>::identity(m, m);
    let mut x = x0.clone();
    let mut cov = cov0.clone();
    let mut out = Vec::with_capacity(measurements.len());
    for (k, z) in measurements.iter().enumerate() {
        if k > 0 {
            let a = sys.transition_matrix(k - 1)?;
            x = &a * x;
            cov = linalg::symmetrize(&(&a * &cov * a.transpose() + sys.process_noise()));
        }
        let s = h * &cov * h.transpose() + r;
        let s_inv = s.try_inverse().ok_or_else(|| Error::Numeric {
            step: k,
            what: "innovation covariance is singular".into(),
        })?;
        let gain = &cov * h.transpose() * s_inv;
        x = &x + &gain * (z - h * &x);
        let ikh = &eye - &gain * h;
        cov = linalg::symmetrize(&(&ikh * &cov * ikh.transpose() + &gain * r * gain.transpose()));
        out.push(CovarianceEstimate { x_post: x.clone(), cov_post: cov.clone() });
    }
    Ok(out)
}

/// One shared draw of everything random in a run: the plant trajectory, the
/// effective delay of every node, and every node's measurement at every step.
#[derive(Debug, Clone)]
pub struct Realization {
    pub truth: Trajectory,
    /// `measurements[i][k]` is `z` of the node at position `i` at step `k`.
    pub measurements: Vec<Vec<DVector<f64>>>,
    /// Effective delay of each node in seconds (jitter applied, clamped at 0).
    pub delays_s: Vec<f64>,
    /// Effective delay of each node in steps.
    pub delay_steps: Vec<usize>,
}

impl Realization {
    /// Draws from three independent streams of `seed`: plant noise, delay
    /// jitter, and measurement noise (node by node, step by step).
    pub fn draw(sys: &LtvSystem, network: &SensorNetwork, n_steps: usize, seed: u64) -> Result<Self> {
        let truth = sys.simulate(n_steps, &mut Gaussian::seeded(seed, Stream::Plant))?;
        let mut jitter = Gaussian::seeded(seed, Stream::Jitter);
        let ts = sys.sample_time();
        let delays_s: Vec<f64> = network.nodes().iter().map(|n| n.effective_delay(&mut jitter)).collect();
        let delay_steps = delays_s.iter().map(|&d| crate::sensing::seconds_to_steps(d, ts)).collect();
        let mut meas = Gaussian::seeded(seed, Stream::Measurement);
        let measurements = network
            .nodes()
            .iter()
            .map(|node| truth.states.iter().map(|x| node.measure(x, &mut meas)).collect())
            .collect();
        Ok(Realization { truth, measurements, delays_s, delay_steps })
    }

    pub fn n_steps(&self) -> usize {
        self.truth.len() - 1
    }
}

/// Per-node report stream, flattened: step `k` occupies
/// `info_delta[k·m²..(k+1)·m²]` (column-major) and `iv_delta[k·m..(k+1)·m]`.
#[derive(Debug, Clone)]
struct ReportStream {
    info_delta: Vec<f64>,
    iv_delta: Vec<f64>,
}

/// All node filters of a network run once over a [`Realization`]; fused
/// estimates for any subset can then be produced without re-running them.
pub struct DkfEngine<'a> {
    sys: &'a LtvSystem,
    network: &'a SensorNetwork,
    realization: &'a Realization,
    predictor: Predictor,
    streams: Vec<ReportStream>,
}

impl<'a> DkfEngine<'a> {
    pub fn new(sys: &'a LtvSystem, network: &'a SensorNetwork, realization: &'a Realization) -> Result<Self> {
        let m = sys.state_dim();
        if network.state_dim().is_some_and(|d| d != m) {
            return Err(Error::Dimension("network and system state dimensions differ".into()));
        }
        if realization.measurements.len() != network.len() {
            return Err(Error::Dimension("realization does not match the network".into()));
        }
        let predictor = Predictor::new(sys, realization.n_steps())?;
        let streams = network
            .nodes()
            .par_iter()
            .zip(realization.measurements.par_iter())
            .map(|(node, zs)| {
                let states = run_local_filter(&predictor, node, zs, NodeFilterState::uninformed(m))?;
                let mut info_delta = Vec::with_capacity(states.len() * m * m);
                let mut iv_delta = Vec::with_capacity(states.len() * m);
                for s in &states {
                    let (di, dv) = s.deltas();
                    info_delta.extend_from_slice(di.as_slice());
                    iv_delta.extend_from_slice(dv.as_slice());
                }
                Ok(ReportStream { info_delta, iv_delta })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DkfEngine { sys, network, realization, predictor, streams })
    }

    pub fn system(&self) -> &LtvSystem {
        self.sys
    }

    pub fn network(&self) -> &SensorNetwork {
        self.network
    }

    pub fn realization(&self) -> &Realization {
        self.realization
    }

    pub fn predictor(&self) -> &Predictor {
        &self.predictor
    }

    /// The report node `id` forwards for its step `k`.
    pub fn report(&self, id: usize, k: usize, staleness: usize) -> DelayedReport {
        let m = self.sys.state_dim();
        let s = &self.streams[id - 1];
        DelayedReport {
            node_id: id,
            info_delta: DMatrix::from_column_slice(m, m, &s.info_delta[k * m * m..(k + 1) * m * m]),
            iv_delta: DVector::from_column_slice(&s.iv_delta[k * m..(k + 1) * m]),
            staleness,
        }
    }

    fn check_subset(&self, subset: &[usize]) -> Result<()> {
        if subset.is_empty() {
            return Err(Error::Selection("cannot run the filter on an empty node subset".into()));
        }
        if let Some(bad) = subset.iter().find(|&&id| self.network.node(id).is_none()) {
            return Err(Error::Selection(format!("node {bad} is not in the network")));
        }
        Ok(())
    }

    /// Fused estimates `k = 0..=N` for `subset` with the realized delays.
    pub fn run(&self, subset: &[usize]) -> Result<Vec<FusedEstimate>> {
        self.check_subset(subset)?;
        let delays: Vec<usize> = subset.iter().map(|&id| self.realization.delay_steps[id - 1]).collect();
        self.run_with_delays(subset, &delays, EstimatorPrior::uninformed(self.sys.state_dim()))
    }

    /// Fused estimates with explicit per-node delays (in steps) and prior.
    pub fn run_with_delays(
        &self,
        subset: &[usize],
        delays: &[usize],
        prior: EstimatorPrior,
    ) -> Result<Vec<FusedEstimate>> {
        self.check_subset(subset)?;
        if delays.len() != subset.len() {
            return Err(Error::Dimension("one delay per subset node required".into()));
        }
        let m = self.sys.state_dim();
        let n_steps = self.realization.n_steps();
        let mut out = Vec::with_capacity(n_steps + 1);
        let mut info = prior.info;
        let mut iv = prior.iv;
        for k in 0..=n_steps {
            for (&id, &d) in subset.iter().zip(delays) {
                if d > k {
                    continue;
                }
                let src = k - d;
                let s = &self.streams[id - 1];
                for (dst, v) in info.as_mut_slice().iter_mut().zip(&s.info_delta[src * m * m..(src + 1) * m * m]) {
                    *dst += v;
                }
                for (dst, v) in iv.as_mut_slice().iter_mut().zip(&s.iv_delta[src * m..(src + 1) * m]) {
                    *dst += v;
                }
            }
            let fused = finish_fusion(k, info, iv);
            if k < n_steps {
                let (ni, nv) = self.predictor.predict(k, &fused.info, &fused.iv)?;
                info = ni;
                iv = nv;
            } else {
                info = DMatrix::zeros(m, m);
                iv = DVector::zeros(m);
            }
            out.push(fused);
        }
        Ok(out)
    }
}

/// Output of [`run_dkf`].
#[derive(Debug, Clone)]
pub struct DkfRun {
    pub fused: Vec<FusedEstimate>,
    pub truth: Trajectory,
    /// `I_i(k|k)` histories of the subset nodes, keyed by node id.
    pub node_info: BTreeMap<usize, Vec<DMatrix<f64>>>,
}

impl DkfRun {
    pub fn estimates(&self) -> Trajectory {
        Trajectory::new(self.fused.iter().map(|f| f.x_hat.clone()).collect())
    }
}

/// Simulates the plant once, runs the subset's node filters, and fuses their
/// delayed reports at the estimator.
pub fn run_dkf(
    sys: &LtvSystem,
    network: &SensorNetwork,
    subset: &[usize],
    n_steps: usize,
    seed: u64,
) -> Result<DkfRun> {
    if subset.is_empty() {
        return Err(Error::Selection("cannot run the filter on an empty node subset".into()));
    }
    let realization = Realization::draw(sys, network, n_steps, seed)?;
    let engine = DkfEngine::new(sys, network, &realization)?;
    let fused = engine.run(subset)?;
    let mut node_info = BTreeMap::new();
    for &id in subset {
        let node = network.node(id).expect("subset validated by the engine");
        node_info.insert(id, local_info_history(engine.predictor(), node)?);
    }
    Ok(DkfRun { fused, truth: realization.truth.clone(), node_info })
}
