use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use delay_dkf::harness::report::{export_csv, fmt_f64};
use delay_dkf::harness::{run_experiment, run_monte_carlo, ExperimentConfig, Mode, RunOutput};
use delay_dkf::model::Transition;
use delay_dkf::observability::{is_structurally_observable, structure_of, union_structure, STRUCTURE_TOL};
use delay_dkf::{Error, Result};

/// Delay-aware distributed Kalman filtering and filter-node selection.
#[derive(Parser)]
#[command(name = "delay-dkf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the fused filter on all nodes (or the configured fixed subset).
    Simulate(Common),
    /// Greedy threshold sweep over noise variance and delay.
    SelectGreedy(Common),
    /// Per-node stability test.
    SelectStability(Common),
    /// Repeat the configured mode over derived seeds.
    Montecarlo(Common),
    /// Structural observability of the system and network patterns.
    ObservabilityCheck(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        if let Some(r) = self.runs {
            cfg.runs = r;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_run(out: &RunOutput) {
    println!("mode: {}", out.mode.name());
    println!("selected nodes: {}", out.report.nodes.len());
    match out.report.metrics {
        Some(m) => println!("mse: {:.6}  mse_sum: {:.6}  md: {:.6}", m.mse, m.mse_sum, m.md),
        None => println!("no nodes selected; filter not run"),
    }
    if let Some(i) = out.report.iteration {
        println!("best greedy iteration: {i}");
    }
    if let Some(p) = &out.params {
        println!("beta_hat: {:.6e}", p.beta_hat);
    }
    if let Some(w) = out.stability.as_ref().and_then(|s| s.warning.as_deref()) {
        eprintln!("warning: {w}");
    }
}

fn with_mode(common: &Common, mode: Option<Mode>) -> Result<ExperimentConfig> {
    let mut cfg = common.load()?;
    match mode {
        Some(m) => cfg.mode = m,
        None if cfg.mode != Mode::FixedSubset => cfg.mode = Mode::All,
        None => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn observability(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let sys = cfg.build_system()?;
    let network = cfg.build_network(cfg.seed)?;
    let steps = match sys.transition() {
        Transition::Table(table) => table.len().min(cfg.horizon),
        Transition::Builtin(_) => cfg.horizon,
    };
    let a_patterns = (0..steps)
        .map(|k| sys.transition_matrix(k).map(|a| structure_of(&a, STRUCTURE_TOL)))
        .collect::<Result<Vec<_>>>()?;
    let a_bar = union_structure(&a_patterns)?;
    let h_bars: Vec<_> = network.nodes().iter().map(|n| structure_of(n.h(), STRUCTURE_TOL)).collect();
    let verdict = is_structurally_observable(&a_bar, &h_bars)?;
    println!("state pattern: {a_bar}");
    println!("outputs: {}", h_bars.len());
    println!("structurally observable: {}", verdict.observable);
    println!("certificate: {}", verdict.certificate);
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::Io { path: cfg.out.display().to_string(), source: e })?;
    let header = ["state_pattern", "n_outputs", "observable", "certificate"].map(String::from);
    let row = vec![
        a_bar.to_string(),
        h_bars.len().to_string(),
        verdict.observable.to_string(),
        verdict.certificate.to_string(),
    ];
    export_csv(&cfg.out.join("observability.csv"), &header, [row])?;
    if verdict.observable {
        Ok(())
    } else {
        Err(Error::NotObservable)
    }
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(c) => print_run(&run_experiment(&with_mode(c, None)?)?),
        Command::SelectGreedy(c) => print_run(&run_experiment(&with_mode(c, Some(Mode::Greedy))?)?),
        Command::SelectStability(c) => print_run(&run_experiment(&with_mode(c, Some(Mode::Stability))?)?),
        Command::Montecarlo(c) => {
            let cfg = c.load()?;
            let s = run_monte_carlo(&cfg)?;
            println!("runs: {}  failed: {}", s.runs.len(), s.failed());
            println!("mse   mean {}  var {}", fmt_f64(s.mse.mean), fmt_f64(s.mse.variance));
            println!("md    mean {}  var {}", fmt_f64(s.md.mean), fmt_f64(s.md.variance));
            println!("count mean {}  var {}", fmt_f64(s.count.mean), fmt_f64(s.count.variance));
            if let Some(e) = s.first_error() {
                return Err(Error::Selection(format!("{} run(s) failed; first: {e}", s.failed())));
            }
        }
        Command::ObservabilityCheck(c) => observability(c)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
