//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::experiments::{self, Workspace};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "surrosel", version, about = "Coarse-mesh surrogate model selection for PBDW state estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Artifact store directory (default: `<output_dir>/store`).
    #[arg(long, global = true)]
    pub store: Option<PathBuf>,
    /// Also write SVG figures.
    #[arg(long, global = true)]
    pub plots: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve snapshots, build the global space and the family, write the store.
    Offline,
    /// Coarse surrogate accuracy and wall time per level.
    Exp1,
    /// Selection agreement per level and selection histograms.
    Exp2,
    /// Reconstruct a state from a file of measurement values.
    Estimate {
        /// File with `m` numbers separated by whitespace or commas.
        #[arg(long = "w-file")]
        w_file: PathBuf,
        /// Mesh level for the surrogate (default: fine_level).
        #[arg(long)]
        level: Option<u32>,
    },
}

/// One flag per configuration key, taking precedence over the file.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long = "d", global = true, value_name = "INT")]
    d: Option<String>,
    #[arg(long = "c_rule", global = true, value_name = "0.9|0.99")]
    c_rule: Option<String>,
    #[arg(long = "fine_level", global = true, value_name = "INT")]
    fine_level: Option<String>,
    #[arg(long = "coarse_levels", global = true, value_name = "[INT,..]")]
    coarse_levels: Option<String>,
    #[arg(long = "m", global = true, value_name = "INT")]
    m: Option<String>,
    #[arg(long = "meas_width", global = true, value_name = "NUM")]
    meas_width: Option<String>,
    #[arg(long = "n_train", global = true, value_name = "INT")]
    n_train: Option<String>,
    #[arg(long = "n_test", global = true, value_name = "INT")]
    n_test: Option<String>,
    #[arg(long = "seed", global = true, value_name = "INT")]
    seed: Option<String>,
    #[arg(long = "n_splits", global = true, value_name = "INT")]
    n_splits: Option<String>,
    #[arg(long = "rb_max_dim", global = true, value_name = "INT")]
    rb_max_dim: Option<String>,
    #[arg(long = "rb_target_eps", global = true, value_name = "NUM")]
    rb_target_eps: Option<String>,
    #[arg(long = "solver_tol", global = true, value_name = "NUM")]
    solver_tol: Option<String>,
    #[arg(long = "output_dir", global = true, value_name = "PATH")]
    output_dir: Option<String>,
}

impl Overrides {
    pub fn pairs(&self) -> Vec<(String, String)> {
        [
            ("d", &self.d),
            ("c_rule", &self.c_rule),
            ("fine_level", &self.fine_level),
            ("coarse_levels", &self.coarse_levels),
            ("m", &self.m),
            ("meas_width", &self.meas_width),
            ("n_train", &self.n_train),
            ("n_test", &self.n_test),
            ("seed", &self.seed),
            ("n_splits", &self.n_splits),
            ("rb_max_dim", &self.rb_max_dim),
            ("rb_target_eps", &self.rb_target_eps),
            ("solver_tol", &self.solver_tol),
            ("output_dir", &self.output_dir),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
        .collect()
    }
}

/// Runs a parsed command on a dedicated thread pool.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(cli.config.as_deref(), &cli.overrides.pairs())?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    let store = cli.store.clone().unwrap_or_else(|| cfg.output_dir.join("store"));
    pool.install(|| dispatch(cli, &cfg, &store))
}

fn dispatch(cli: &Cli, cfg: &ExperimentConfig, store: &std::path::Path) -> Result<(), CliError> {
    match &cli.command {
        Command::Offline => {
            let m = experiments::offline(cfg, store)?;
            println!("store written to {}", store.display());
            for (k, v) in &m.summary {
                println!("  {k} = {v}");
            }
        }
        Command::Exp1 => {
            let ws = Workspace::load(cfg, store)?;
            let s = experiments::exp1(&ws, cli.plots)?;
            println!("level  mean|S_h - S_fine|  wall seconds");
            for ((l, e), (_, t)) in s.mean_errors.iter().zip(&s.timing) {
                println!("{l:>5}  {e:>18.6e}  {t:>12.4}");
            }
            println!("fitted slope {:.3}", s.slope);
            println!("mu = {:.4}, eps_est = {:.4e}, sigma_est = {:.4e}", s.mu, s.eps_est, s.sigma_est);
        }
        Command::Exp2 => {
            let ws = Workspace::load(cfg, store)?;
            let s = experiments::exp2(&ws, cli.plots)?;
            println!("c = {}, K = {}, n_test = {}", cfg.c_rule, s.cells, s.n_test);
            println!("level  agree_fine  agree_true");
            for (l, f, t) in &s.agreement {
                println!("{l:>5}  {f:>10}  {t:>10}");
            }
            println!("max error: family {:.4e}, global {:.4e}", s.max_err_family, s.max_err_global);
        }
        Command::Estimate { w_file, level } => {
            let ws = Workspace::load(cfg, store)?;
            let w = experiments::read_measurements(w_file)?;
            let out = experiments::estimate(&ws, &w, level.unwrap_or(cfg.fine_level))?;
            println!("k* = {} (level {})", out.k_star + 1, out.level);
            for (k, s) in &out.surrogates {
                match s {
                    Some(s) => println!("  cell {}: S = {s:.6e}", k + 1),
                    None => println!("  cell {}: skipped", k + 1),
                }
            }
        }
    }
    Ok(())
}
