//! Flat `key = value` experiment configuration.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{load_matrix_table, BuiltinFamily, LtvSystem, Transition};
use crate::noise::{Gaussian, Stream};
use crate::sensing::{load_network, sample_network, SensorNetwork};
use crate::stability::{DEFAULT_ALPHA, DEFAULT_K_BAR};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Greedy,
    Stability,
    FixedSubset,
    All,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Greedy => "greedy",
            Mode::Stability => "stability",
            Mode::FixedSubset => "fixed-subset",
            Mode::All => "all",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "greedy" => Some(Mode::Greedy),
            "stability" => Some(Mode::Stability),
            "fixed-subset" => Some(Mode::FixedSubset),
            "all" => Some(Mode::All),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransitionSpec {
    Builtin,
    Table(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub state_dim: usize,
    pub q_scale: f64,
    pub x0: Vec<f64>,
    pub ts: f64,
    pub transition: TransitionSpec,
    pub n_sensors: usize,
    pub variance_range: (f64, f64),
    pub delay_range: (f64, f64),
    pub jitter_std: f64,
    /// Network file; overrides the random network when set.
    pub network: Option<PathBuf>,
    pub k_bar: usize,
    pub alpha: f64,
    pub beta_hat_override: Option<f64>,
    pub mode: Mode,
    /// Node ids for [`Mode::FixedSubset`].
    pub subset: Vec<usize>,
    pub horizon: usize,
    pub seed: u64,
    pub runs: usize,
    pub out: PathBuf,
    pub iter: usize,
    pub r_max: Option<f64>,
    pub tau_max: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            state_dim: 2,
            q_scale: 0.1,
            x0: vec![1.0, 1.0],
            ts: 0.01,
            transition: TransitionSpec::Builtin,
            n_sensors: 2000,
            variance_range: (0.0, 0.5),
            delay_range: (0.0, 2.0),
            jitter_std: 0.0,
            network: None,
            k_bar: DEFAULT_K_BAR,
            alpha: DEFAULT_ALPHA,
            beta_hat_override: None,
            mode: Mode::Stability,
            subset: Vec::new(),
            horizon: 500,
            seed: 1,
            runs: 25,
            out: PathBuf::from("out"),
            iter: 100,
            r_max: None,
            tau_max: None,
        }
    }
}

fn parse_list(value: &str) -> std::result::Result<Vec<f64>, String> {
    value
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("{s:?} is not a number")))
        .collect()
}

fn parse_pair(value: &str) -> std::result::Result<(f64, f64), String> {
    match parse_list(value)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err("expected two comma-separated numbers".into()),
    }
}

fn parse_num<T: std::str::FromStr>(value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("{value:?} is not a valid number"))
}

impl ExperimentConfig {
    /// Applies `key = value` lines on top of the defaults. Relative paths
    /// resolve against `base_dir`. Every bad key is reported, not just the
    /// first.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut problems = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                problems.push(format!("line {}: expected key = value", lineno + 1));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            if let Err(msg) = cfg.set(key, value, base_dir) {
                problems.push(format!("{key}: {msg}"));
            }
        }
        if problems.is_empty() {
            cfg.validate()?;
            Ok(cfg)
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        ExperimentConfig::parse(&text, base)
    }

    fn set(&mut self, key: &str, value: &str, base_dir: &Path) -> std::result::Result<(), String> {
        let optional = |v: &str| -> std::result::Result<Option<f64>, String> {
            if v.is_empty() || v == "none" {
                Ok(None)
            } else {
                parse_num(v).map(Some)
            }
        };
        match key {
            "state_dim" => self.state_dim = parse_num(value)?,
            "q_scale" => self.q_scale = parse_num(value)?,
            "x0" => self.x0 = parse_list(value)?,
            "ts" => self.ts = parse_num(value)?,
            "transition" => {
                self.transition = if value == "builtin" {
                    TransitionSpec::Builtin
                } else if let Some(p) = value.strip_prefix("table:") {
                    TransitionSpec::Table(base_dir.join(p.trim()))
                } else {
                    return Err("expected builtin or table:<path>".into());
                }
            }
            "n_sensors" => self.n_sensors = parse_num(value)?,
            "variance_range" => self.variance_range = parse_pair(value)?,
            "delay_range" => self.delay_range = parse_pair(value)?,
            "jitter_std" => self.jitter_std = parse_num(value)?,
            "network" => self.network = Some(base_dir.join(value)),
            "k_bar" => self.k_bar = parse_num(value)?,
            "alpha" => self.alpha = parse_num(value)?,
            "beta_hat_override" => self.beta_hat_override = optional(value)?,
            "mode" => self.mode = Mode::parse(value).ok_or("expected greedy, stability, fixed-subset or all")?,
            "subset" => {
                self.subset = value
                    .split(',')
                    .map(|s| parse_num::<usize>(s.trim()))
                    .collect::<std::result::Result<_, _>>()?
            }
            "horizon" => self.horizon = parse_num(value)?,
            "seed" => self.seed = parse_num(value)?,
            "runs" => self.runs = parse_num(value)?,
            "out" => self.out = PathBuf::from(value),
            "iter" => self.iter = parse_num(value)?,
            "r_max" => self.r_max = optional(value)?,
            "tau_max" => self.tau_max = optional(value)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Checks every invariant and lists all offending keys at once.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let mut check = |ok: bool, msg: &str| {
            if !ok {
                bad.push(msg.to_string());
            }
        };
        check(self.state_dim >= 1, "state_dim: must be at least 1");
        check(self.q_scale > 0.0 && self.q_scale.is_finite(), "q_scale: must be positive");
        check(self.x0.len() == self.state_dim, "x0: length must equal state_dim");
        check(self.ts > 0.0 && self.ts.is_finite(), "ts: must be positive");
        if self.transition == TransitionSpec::Builtin {
            check(self.state_dim == 2, "transition: builtin family is 2-state");
        }
        if self.network.is_none() {
            check(self.n_sensors >= 1, "n_sensors: must be at least 1");
        }
        let range_ok = |(lo, hi): (f64, f64)| 0.0 <= lo && lo <= hi && hi.is_finite();
        check(range_ok(self.variance_range), "variance_range: need 0 <= lo <= hi");
        check(range_ok(self.delay_range), "delay_range: need 0 <= lo <= hi");
        check(self.jitter_std >= 0.0 && self.jitter_std.is_finite(), "jitter_std: must be non-negative");
        check(self.k_bar >= 1, "k_bar: must be at least 1");
        check(self.alpha > 0.0 && self.alpha.is_finite(), "alpha: must be positive");
        if let Some(b) = self.beta_hat_override {
            check(b > 0.0 && b <= 1.0, "beta_hat_override: must lie in (0, 1]");
        }
        if self.mode == Mode::FixedSubset {
            check(!self.subset.is_empty(), "subset: fixed-subset mode needs node ids");
        }
        check(self.horizon >= 2, "horizon: must be at least 2");
        if self.mode == Mode::Stability {
            check(self.horizon > self.k_bar, "horizon: must exceed k_bar in stability mode");
        }
        check(self.runs >= 1, "runs: must be at least 1");
        check(self.iter >= 1, "iter: must be at least 1");
        for (name, v) in [("r_max", self.r_max), ("tau_max", self.tau_max)] {
            if let Some(v) = v {
                check(v > 0.0, &format!("{name}: must be positive"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }

    pub fn build_system(&self) -> Result<LtvSystem> {
        let transition = match &self.transition {
            TransitionSpec::Builtin => Transition::Builtin(BuiltinFamily::default()),
            TransitionSpec::Table(path) => Transition::Table(load_matrix_table(path)?),
        };
        LtvSystem::new(
            transition,
            DMatrix::identity(self.state_dim, self.state_dim) * self.q_scale,
            DVector::from_vec(self.x0.clone()),
            self.ts,
        )
    }

    /// The network file if one is configured, otherwise a random network
    /// drawn from the network stream of `seed`.
    pub fn build_network(&self, seed: u64) -> Result<SensorNetwork> {
        match &self.network {
            Some(path) => Ok(load_network(path, self.state_dim)?.with_jitter(self.jitter_std)),
            None => sample_network(
                self.n_sensors,
                self.state_dim,
                self.variance_range,
                self.delay_range,
                self.jitter_std,
                &mut Gaussian::seeded(seed, Stream::Network),
            ),
        }
    }
}
