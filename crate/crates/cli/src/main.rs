//! `drc`: theory curves, perturbation samples and seeded experiment runs.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use drc_core::harness::config::parse_seeds;
use drc_core::harness::{self, Config, ExperimentConfig};
use drc_core::rng::{RunRng, Stream};
use rand::Rng;

#[derive(Parser, Debug)]
#[command(
    name = "drc",
    version,
    about = "Reward-critic experiments under confusion-matrix reward noise"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment config file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Seed, or a seed list (`0..10`, `1,4,7`) for run, sweep and diagnostics.
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for run matrices.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact theory curves.
    #[command(subcommand)]
    Theory(Theory),
    /// Perturbation samples.
    #[command(subcommand)]
    Perturb(Perturb),
    /// Run the configured experiment and write per-epoch records.
    Run {
        /// Also write the aggregate summary; `.json` selects JSON, anything else CSV.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Run one experiment per value of a config key.
    Sweep {
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Critic cross-entropy trace and hidden-label histogram per seed.
    Diagnostics {
        /// Also write the GDRC vote log here.
        #[arg(long)]
        votes: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum Theory {
    /// Minimum cross-entropy per n_o for one true reward.
    CeCurve {
        #[arg(long, default_value_t = 10)]
        n_r: usize,
        #[arg(long, default_value_t = 0.4)]
        omega: f64,
        #[arg(long, default_value_t = 0.35)]
        reward: f64,
        #[arg(long, default_value = "1..31")]
        candidates: String,
    },
    /// Reconstruction error per n_o.
    ReconCurve {
        #[arg(long, default_value_t = 10)]
        n_r: usize,
        #[arg(long, default_value_t = 0.4)]
        omega: f64,
        #[arg(long, default_value = "2..51")]
        candidates: String,
    },
    /// Snapping error of Gaussian noise against the interval width.
    Prop1 {
        #[arg(long, default_value_t = 0.3)]
        sigma: f64,
        #[arg(long, default_value = "10,50,100")]
        n_r: String,
        #[arg(long, default_value_t = 100_000)]
        draws: usize,
    },
}

#[derive(Subcommand, Debug)]
enum Perturb {
    /// Draw perturbed rewards with the configured noise model.
    Sample {
        /// True reward; uniform over the environment's range when absent.
        #[arg(long)]
        reward: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        count: usize,
    },
}

fn load_config(common: &Common) -> Result<Config> {
    let mut c = match &common.config {
        Some(p) => Config::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => Config::default(),
    };
    for pair in &common.set {
        c.set_pair(pair)?;
    }
    if let Some(s) = &common.seed {
        c.set("seeds", s)?;
    }
    if let Some(w) = common.workers {
        c.set("workers", &w.to_string())?;
    }
    Ok(c)
}

fn single_seed(common: &Common) -> Result<u64> {
    match &common.seed {
        None => Ok(0),
        Some(s) => s
            .trim()
            .parse()
            .with_context(|| format!("--seed `{s}` must be a single integer here")),
    }
}

fn usize_list(s: &str) -> Result<Vec<usize>> {
    let v = parse_seeds(s).map_err(anyhow::Error::msg)?;
    if v.is_empty() {
        bail!("empty list `{s}`");
    }
    Ok(v.into_iter().map(|x| x as usize).collect())
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}

fn report_failures(reports: &[harness::RunReport]) {
    for (i, r) in reports.iter().enumerate() {
        for (seed, e) in r.failures() {
            eprintln!("config {i} seed {seed} failed: {e}");
        }
    }
}

fn main() -> std::process::ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let common = &cli.common;
    let config = load_config(common)?;
    let out_path = common.out.clone().or_else(|| config.get("output").map(PathBuf::from));
    let out = out_path.as_deref();
    match &cli.command {
        Command::Theory(t) => {
            let text = match t {
                Theory::CeCurve {
                    n_r,
                    omega,
                    reward,
                    candidates,
                } => harness::ce_curve_csv(*n_r, *omega, *reward, &usize_list(candidates)?)?,
                Theory::ReconCurve { n_r, omega, candidates } => {
                    harness::recon_curve_csv(*n_r, *omega, &usize_list(candidates)?, single_seed(common)?)?
                }
                Theory::Prop1 { sigma, n_r, draws } => {
                    harness::prop1_csv(*sigma, &usize_list(n_r)?, *draws, single_seed(common)?)?
                }
            };
            write_out(out, &text)?;
        }
        Command::Perturb(Perturb::Sample { reward, count }) => {
            let mut c = config.clone();
            c.set("seeds", "0")?;
            if c.get("method").is_none() {
                c.set("method", "raw")?;
            }
            let exp = ExperimentConfig::from_config(&c)?;
            let (lo, hi) = exp.env.reward_range();
            let rng = RunRng::new(single_seed(common)?);
            let (mut data, mut noise) = (rng.stream(Stream::Data), rng.stream(Stream::Noise));
            let mut text = String::from("index,r,r_tilde,y,y_tilde\n");
            for i in 0..*count {
                let r = reward.unwrap_or_else(|| lo + (hi - lo) * data.random::<f64>());
                let p = exp.noise.apply(r, &mut noise)?;
                let lab = |y: Option<usize>| y.map(|v| v.to_string()).unwrap_or_default();
                text.push_str(&format!(
                    "{i},{},{},{},{}\n",
                    harness::fmt_real(p.r_true),
                    harness::fmt_real(p.r_tilde),
                    lab(p.y),
                    lab(p.y_tilde)
                ));
            }
            write_out(out, &text)?;
        }
        Command::Run { summary } => {
            let exp = ExperimentConfig::from_config(&config)?;
            let reports = vec![harness::run(&exp)];
            write_out(out, &harness::records_csv(&reports))?;
            if let Some(p) = summary {
                let text = if p.extension().is_some_and(|e| e == "json") {
                    harness::summary_json(&reports)
                } else {
                    harness::summary_csv(&reports)
                };
                write_out(Some(p), &text)?;
            }
            report_failures(&reports);
        }
        Command::Sweep { axis, values } => {
            let sweep = harness::sweep(&config, axis, values, common.workers)?;
            write_out(out, &harness::sweep_csv(&sweep))?;
            report_failures(&sweep.reports);
        }
        Command::Diagnostics { votes } => {
            let exp = ExperimentConfig::from_config(&config)?;
            let reports = vec![harness::run(&exp)];
            write_out(out, &harness::diagnostics_csv(&reports))?;
            if let Some(p) = votes {
                write_out(Some(p), &harness::votes_csv(&reports))?;
            }
            report_failures(&reports);
        }
    }
    Ok(())
}
