//! The stochastic discrete-time LTV plant `x(k+1) = A(k) x(k) + w(k)`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::noise::NoiseSource;

pub use crate::linalg::{is_effectively_singular, SINGULAR_TOL};

/// The built-in scenario family: `A(k) = [[0.5, 0.25], [0.25, 2^{-t_k}]]` with
/// `t_k = min(k·Ts, t_max)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinFamily {
    pub t_max: f64,
}

impl Default for BuiltinFamily {
    fn default() -> Self {
        BuiltinFamily { t_max: 2.0 }
    }
}

impl BuiltinFamily {
    pub fn matrix(&self, k: usize, ts: f64) -> DMatrix<f64> {
        let t = (k as f64 * ts).min(self.t_max);
        DMatrix::from_row_slice(2, 2, &[0.5, 0.25, 0.25, (-t).exp2()])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Transition {
    Builtin(BuiltinFamily),
    /// Explicit per-step matrices; entry `k` is `A(k)`.
    Table(Vec<DMatrix<f64>>),
}

#[derive(Debug, Clone)]
pub struct LtvSystem {
    state_dim: usize,
    transition: Transition,
    process_noise: DMatrix<f64>,
    noise_factor: DMatrix<f64>,
    process_noise_inv: DMatrix<f64>,
    initial_state: DVector<f64>,
    sample_time: f64,
}

impl LtvSystem {
    pub fn new(
        transition: Transition,
        process_noise: DMatrix<f64>,
        initial_state: DVector<f64>,
        sample_time: f64,
    ) -> Result<Self> {
        let m = initial_state.len();
        if m == 0 {
            return Err(Error::Parameter("state dimension must be at least 1".into()));
        }
        if !(sample_time > 0.0 && sample_time.is_finite()) {
            return Err(Error::Parameter(format!(
                "sample time must be positive, got {sample_time}"
            )));
        }
        if process_noise.shape() != (m, m) {
            return Err(Error::Dimension(format!(
                "process noise is {}x{}, expected {m}x{m}",
                process_noise.nrows(),
                process_noise.ncols()
            )));
        }
        if !linalg::is_symmetric(&process_noise, 1e-12) {
            return Err(Error::Parameter("process noise covariance is not symmetric".into()));
        }
        if linalg::min_eigenvalue(&process_noise) <= 0.0 {
            return Err(Error::Parameter(
                "process noise covariance is not positive definite".into(),
            ));
        }
        match &transition {
            Transition::Builtin(_) if m != 2 => {
                return Err(Error::Dimension(format!(
                    "built-in transition family is 2x2, state dimension is {m}"
                )))
            }
            Transition::Table(table) => {
                if table.is_empty() {
                    return Err(Error::Parameter("transition table is empty".into()));
                }
                if let Some(bad) = table.iter().position(|a| a.shape() != (m, m)) {
                    return Err(Error::Dimension(format!(
                        "transition table entry {bad} is not {m}x{m}"
                    )));
                }
            }
            _ => {}
        }
        let noise_factor = process_noise
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Parameter("process noise covariance has no Cholesky factor".into()))?
            .l();
        let process_noise_inv = linalg::symmetrize(
            &process_noise
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::Parameter("process noise covariance is singular".into()))?,
        );
        Ok(LtvSystem {
            state_dim: m,
            transition,
            process_noise,
            noise_factor,
            process_noise_inv,
            initial_state,
            sample_time,
        })
    }

    /// Built-in family with `Q = q_scale·I₂`.
    pub fn builtin(q_scale: f64, initial_state: [f64; 2], sample_time: f64) -> Result<Self> {
        LtvSystem::new(
            Transition::Builtin(BuiltinFamily::default()),
            DMatrix::identity(2, 2) * q_scale,
            DVector::from_row_slice(&initial_state),
            sample_time,
        )
    }

    /// Reference scenario: `Q = 0.1·I`, `x0 = [1, 1]`, `Ts = 0.01 s`.
    pub fn reference() -> Self {
        LtvSystem::builtin(0.1, [1.0, 1.0], 0.01).expect("reference scenario is valid")
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn sample_time(&self) -> f64 {
        self.sample_time
    }

    pub fn process_noise(&self) -> &DMatrix<f64> {
        &self.process_noise
    }

    pub fn process_noise_inv(&self) -> &DMatrix<f64> {
        &self.process_noise_inv
    }

    pub fn initial_state(&self) -> &DVector<f64> {
        &self.initial_state
    }

    pub fn transition(&self) -> &Transition {
        &self.transition
    }

    /// `A(k)`.
    pub fn transition_matrix(&self, k: usize) -> Result<DMatrix<f64>> {
        match &self.transition {
            Transition::Builtin(family) => Ok(family.matrix(k, self.sample_time)),
            Transition::Table(table) => table.get(k).cloned().ok_or(Error::Horizon {
                step: k,
                len: table.len(),
            }),
        }
    }

    /// Checks that `A(0..n_steps)` is available.
    pub fn check_horizon(&self, n_steps: usize) -> Result<()> {
        match &self.transition {
            Transition::Table(table) if table.len() < n_steps => Err(Error::Horizon {
                step: n_steps - 1,
                len: table.len(),
            }),
            _ => Ok(()),
        }
    }

    /// One draw of `w ~ N(0, Q)` through the cached Cholesky factor.
    pub fn sample_process_noise<N: NoiseSource + ?Sized>(&self, noise: &mut N) -> DVector<f64> {
        let e = DVector::from_fn(self.state_dim, |_, _| noise.standard_normal());
        &self.noise_factor * e
    }

    /// Simulates `n_steps` transitions; the trajectory holds `n_steps + 1` states.
    pub fn simulate<N: NoiseSource + ?Sized>(
        &self,
        n_steps: usize,
        noise: &mut N,
    ) -> Result<Trajectory> {
        if n_steps == 0 {
            return Err(Error::Parameter("horizon must be at least one step".into()));
        }
        self.check_horizon(n_steps)?;
        let mut states = Vec::with_capacity(n_steps + 1);
        let mut x = self.initial_state.clone();
        states.push(x.clone());
        for k in 0..n_steps {
            let a = self.transition_matrix(k)?;
            let w = self.sample_process_noise(noise);
            x = a * x + w;
            if !linalg::vec_finite(&x) {
                return Err(Error::Divergence { step: k + 1 });
            }
            states.push(x.clone());
        }
        Ok(Trajectory { states })
    }

    /// Noise-free response `x̄(k+1) = A(k) x̄(k)` from the initial state.
    pub fn mean_response(&self, n_steps: usize) -> Result<Trajectory> {
        self.simulate(n_steps, &mut crate::noise::Silent)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn new(states: Vec<DVector<f64>>) -> Self {
        Trajectory { states }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |x| x.len())
    }

    pub fn component(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(move |x| x[i])
    }
}

/// Parses a matrix table: one matrix per block, rows whitespace-separated,
/// blocks separated by blank lines. All blocks must share the same square shape.
pub fn parse_matrix_table(text: &str) -> Result<Vec<DMatrix<f64>>> {
    let mut blocks: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut current: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            if !current.is_empty() {
                blocks.push(std::mem::take(&mut current));
            }
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| {
                    Error::Parameter(format!("matrix table line {}: bad number {tok:?}", lineno + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        current.push(row);
    }
    if !current.is_empty() {
        blocks.push(current);
    }
    let mut out = Vec::with_capacity(blocks.len());
    for (b, rows) in blocks.iter().enumerate() {
        let m = rows.len();
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension(format!("matrix table block {b} is not square")));
        }
        if let Some(first) = out.first() {
            let first: &DMatrix<f64> = first;
            if first.nrows() != m {
                return Err(Error::Dimension(format!(
                    "matrix table block {b} is {m}x{m}, expected {}x{}",
                    first.nrows(),
                    first.nrows()
                )));
            }
        }
        out.push(DMatrix::from_row_iterator(m, m, rows.iter().flatten().copied()));
    }
    Ok(out)
}

pub fn load_matrix_table(path: &Path) -> Result<Vec<DMatrix<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_table(&text)
}
