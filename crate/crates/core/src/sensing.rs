//! Sensor nodes, their measurement model `z_i = H_i x + v_i`, and the
//! per-node delay channel to the estimator.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::noise::NoiseSource;

/// Lower clamp on sampled measurement variances; `R = 0` has no inverse.
pub const R_MIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelaySpec {
    /// Constant delay in seconds.
    pub base: f64,
    /// Standard deviation of an additive Gaussian delay component, drawn once
    /// per node per run. Zero means a constant delay.
    pub jitter_std: f64,
}

impl DelaySpec {
    pub fn constant(base: f64) -> Self {
        DelaySpec { base, jitter_std: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub struct SensorNode {
    id: usize,
    h: DMatrix<f64>,
    r: DMatrix<f64>,
    r_inv: DMatrix<f64>,
    r_factor: DMatrix<f64>,
    delay: DelaySpec,
}

impl SensorNode {
    pub fn new(id: usize, h: DMatrix<f64>, r: DMatrix<f64>, delay: DelaySpec) -> Result<Self> {
        let p = h.nrows();
        if p == 0 || p > h.ncols() {
            return Err(Error::Dimension(format!(
                "node {id}: measurement matrix is {}x{}",
                h.nrows(),
                h.ncols()
            )));
        }
        if r.shape() != (p, p) {
            return Err(Error::Dimension(format!("node {id}: noise covariance must be {p}x{p}")));
        }
        if !linalg::is_symmetric(&r, 1e-12) || linalg::min_eigenvalue(&r) <= 0.0 {
            return Err(Error::Parameter(format!(
                "node {id}: noise covariance is not symmetric positive definite"
            )));
        }
        let rank = linalg::singular_values(&h)
            .iter()
            .filter(|&&s| s > 1e-12)
            .count();
        if rank < p {
            return Err(Error::Parameter(format!(
                "node {id}: measurement matrix is rank deficient"
            )));
        }
        if !(delay.base >= 0.0 && delay.jitter_std >= 0.0) {
            return Err(Error::Parameter(format!("node {id}: negative delay parameters")));
        }
        let r_inv = linalg::symmetrize(&r.clone().try_inverse().ok_or_else(|| {
            Error::Parameter(format!("node {id}: noise covariance is singular"))
        })?);
        let r_factor = r
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Parameter(format!("node {id}: noise covariance not PD")))?
            .l();
        Ok(SensorNode { id, h, r, r_inv, r_factor, delay })
    }

    /// Scalar node measuring state component `row` (0-based) with variance `variance`.
    pub fn selector(
        id: usize,
        state_dim: usize,
        row: usize,
        variance: f64,
        delay: DelaySpec,
    ) -> Result<Self> {
        if row >= state_dim {
            return Err(Error::Dimension(format!(
                "node {id}: row {row} outside state dimension {state_dim}"
            )));
        }
        let mut h = DMatrix::zeros(1, state_dim);
        h[(0, row)] = 1.0;
        SensorNode::new(id, h, DMatrix::from_element(1, 1, variance), delay)
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn r_inv(&self) -> &DMatrix<f64> {
        &self.r_inv
    }

    pub fn delay(&self) -> DelaySpec {
        self.delay
    }

    pub fn output_dim(&self) -> usize {
        self.h.nrows()
    }

    /// Scalar noise level used for thresholding: the largest eigenvalue of `R_i`.
    pub fn variance(&self) -> f64 {
        if self.r.nrows() == 1 {
            self.r[(0, 0)]
        } else {
            linalg::max_eigenvalue(&self.r)
        }
    }

    /// `l_i = H_iᵀ R_i⁻¹ H_i`.
    pub fn information(&self) -> DMatrix<f64> {
        linalg::symmetrize(&(self.h.transpose() * &self.r_inv * &self.h))
    }

    /// Index of the measured component when `H_i` is a standard-basis row.
    pub fn selected_row(&self) -> Option<usize> {
        if self.h.nrows() != 1 {
            return None;
        }
        let nz: Vec<usize> = (0..self.h.ncols()).filter(|&j| self.h[(0, j)] != 0.0).collect();
        match nz.as_slice() {
            [j] if self.h[(0, *j)] == 1.0 => Some(*j),
            _ => None,
        }
    }

    /// `z_i = H_i x + v_i`, `v_i ~ N(0, R_i)`.
    pub fn measure<N: NoiseSource + ?Sized>(&self, x: &DVector<f64>, noise: &mut N) -> DVector<f64> {
        let e = DVector::from_fn(self.output_dim(), |_, _| noise.standard_normal());
        &self.h * x + &self.r_factor * e
    }

    /// Effective delay in seconds: base plus one jitter draw (when enabled),
    /// clamped below at zero.
    pub fn effective_delay<N: NoiseSource + ?Sized>(&self, noise: &mut N) -> f64 {
        let jitter = if self.delay.jitter_std > 0.0 {
            self.delay.jitter_std * noise.standard_normal()
        } else {
            0.0
        };
        (self.delay.base + jitter).max(0.0)
    }

    /// Effective delay converted to filter steps.
    pub fn delay_steps<N: NoiseSource + ?Sized>(&self, ts: f64, noise: &mut N) -> usize {
        seconds_to_steps(self.effective_delay(noise), ts)
    }
}

/// Round-to-nearest (ties away from zero) of `delay / ts`. The quotient is
/// snapped to 1e-9 first so that e.g. 0.015 / 0.01 counts as the tie 1.5.
pub fn seconds_to_steps(delay: f64, ts: f64) -> usize {
    assert!(ts > 0.0, "sample time must be positive");
    let q = (delay.max(0.0) / ts * 1e9).round() / 1e9;
    q.round() as usize
}

#[derive(Debug, Clone)]
pub struct SensorNetwork {
    nodes: Vec<SensorNode>,
}

impl SensorNetwork {
    /// Ids must be exactly `1..=n` in order.
    pub fn new(nodes: Vec<SensorNode>) -> Result<Self> {
        if let Some((pos, node)) = nodes.iter().enumerate().find(|(i, n)| n.id != i + 1) {
            return Err(Error::Parameter(format!(
                "node ids must be contiguous from 1; position {} has id {}",
                pos + 1,
                node.id
            )));
        }
        if let Some(first) = nodes.first() {
            let m = first.h.ncols();
            if nodes.iter().any(|n| n.h.ncols() != m) {
                return Err(Error::Dimension("nodes disagree on state dimension".into()));
            }
        }
        Ok(SensorNetwork { nodes })
    }

    pub fn nodes(&self) -> &[SensorNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: usize) -> Option<&SensorNode> {
        id.checked_sub(1).and_then(|i| self.nodes.get(i))
    }

    pub fn ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().map(|n| n.id)
    }

    pub fn state_dim(&self) -> Option<usize> {
        self.nodes.first().map(|n| n.h.ncols())
    }

    /// Same nodes with every jitter standard deviation replaced.
    pub fn with_jitter(&self, jitter_std: f64) -> Self {
        let nodes = self
            .nodes
            .iter()
            .map(|n| SensorNode {
                delay: DelaySpec { jitter_std, ..n.delay },
                ..n.clone()
            })
            .collect();
        SensorNetwork { nodes }
    }
}

/// Draws a random network: each node measures one uniformly chosen state
/// component, `R_i ~ U[variance_range]` (clamped at [`R_MIN`]) and base delay
/// `~ U[delay_range]` seconds.
pub fn sample_network<N: NoiseSource + ?Sized>(
    n: usize,
    state_dim: usize,
    variance_range: (f64, f64),
    delay_range: (f64, f64),
    jitter_std: f64,
    noise: &mut N,
) -> Result<SensorNetwork> {
    if n == 0 {
        return Err(Error::EmptyNetwork);
    }
    for (name, (lo, hi)) in [("variance_range", variance_range), ("delay_range", delay_range)] {
        if !(0.0 <= lo && lo <= hi && hi.is_finite()) {
            return Err(Error::Parameter(format!("{name} must satisfy 0 <= lo <= hi")));
        }
    }
    if jitter_std < 0.0 {
        return Err(Error::Parameter("jitter_std must be non-negative".into()));
    }
    let mut nodes = Vec::with_capacity(n);
    for id in 1..=n {
        let row = noise.index(state_dim);
        let variance = noise.uniform(variance_range.0, variance_range.1).max(R_MIN);
        let base = noise.uniform(delay_range.0, delay_range.1);
        nodes.push(SensorNode::selector(
            id,
            state_dim,
            row,
            variance,
            DelaySpec { base, jitter_std },
        )?);
    }
    SensorNetwork::new(nodes)
}

/// Parses the network file format: one node per line,
/// `id h_row_index variance delay_s jitter_std`, with a 1-based row index.
pub fn parse_network(text: &str, state_dim: usize) -> Result<SensorNetwork> {
    let mut nodes = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |what: &str| Error::Parameter(format!("network line {}: {what}", lineno + 1));
        if fields.len() != 5 {
            return Err(bad("expected 5 fields"));
        }
        let id: usize = fields[0].parse().map_err(|_| bad("bad id"))?;
        let row: usize = fields[1].parse().map_err(|_| bad("bad row index"))?;
        let variance: f64 = fields[2].parse().map_err(|_| bad("bad variance"))?;
        let base: f64 = fields[3].parse().map_err(|_| bad("bad delay"))?;
        let jitter_std: f64 = fields[4].parse().map_err(|_| bad("bad jitter"))?;
        if row == 0 {
            return Err(bad("row index is 1-based"));
        }
        nodes.push(SensorNode::selector(
            id,
            state_dim,
            row - 1,
            variance,
            DelaySpec { base, jitter_std },
        )?);
    }
    SensorNetwork::new(nodes)
}

pub fn load_network(path: &Path, state_dim: usize) -> Result<SensorNetwork> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_network(&text, state_dim)
}

/// Serializes a network of selector nodes in the network file format.
pub fn format_network(network: &SensorNetwork) -> Result<String> {
    let mut out = String::new();
    for node in network.nodes() {
        let row = node.selected_row().ok_or_else(|| {
            Error::Parameter(format!("node {} is not a selector row", node.id()))
        })?;
        let d = node.delay();
        writeln!(
            out,
            "{} {} {:.16e} {:.16e} {:.16e}",
            node.id(),
            row + 1,
            node.variance(),
            d.base,
            d.jitter_std
        )
        .expect("writing to a String cannot fail");
    }
    Ok(out)
}
