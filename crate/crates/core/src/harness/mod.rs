//! Seeded experiment runner: builds environments and pipelines from an
//! [`ExperimentConfig`], runs every `(config, seed)` cell, and renders CSV.
//!
//! CSV dialect: comma-separated, header row, LF line endings, no quoting.
//! Reals use `{:.8e}` (nine significant digits), so output is identical
//! wherever the same seeds are run.

pub mod config;

use std::fmt::Write as _;

pub use config::{Config, CriticKind, DrcSpec, EnvSpec, ExperimentConfig, GdrcSpec, Method, KEYS};

use crate::agent::{bandit_pg_train, mean_se, q_learning_train, Corrector, RewardPipeline, RunOutput};
use crate::critic::{DistCritic, NetworkCritic, RegressionCritic, SurrogateTable, TabularCritic};
use crate::envs::{ContinuousBandit, GridWorld};
use crate::error::{Error, Result};
use crate::gdrc::{CriticEnsemble, EnsembleConfig, RangeSource};
use crate::perturb::{ConfusionMatrix, Discretization};
use crate::rng::{RunRng, Stream};
use crate::theory;

/// Worker count when neither the config nor the caller sets one.
pub const WORKERS_ENV: &str = "DRC_WORKERS";

pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

/// `{:.8e}`; negative zero prints as zero.
pub fn fmt_real(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.8e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_real).unwrap_or_default()
}

enum Env {
    Grid(GridWorld),
    Bandit(ContinuousBandit),
}

fn build_env(cfg: &ExperimentConfig) -> Result<Env> {
    Ok(match &cfg.env {
        EnvSpec::Grid(g) => Env::Grid(GridWorld::new(g.clone(), cfg.noise.clone())?),
        EnvSpec::Bandit(b) => Env::Bandit(ContinuousBandit::new(b.clone(), cfg.noise.clone())?),
    })
}

/// The configured correction pipeline; network weights come from the
/// seed's init stream.
pub fn build_pipeline(cfg: &ExperimentConfig, seed: u64) -> Result<Corrector> {
    let mut init = RunRng::new(seed).stream(Stream::Init);
    let encoder = match build_env(cfg)? {
        Env::Grid(g) => g.encoder(),
        Env::Bandit(b) => b.encoder(),
    };
    let pipeline = match cfg.method {
        Method::Raw => RewardPipeline::Raw,
        Method::Re => RewardPipeline::Re(Box::new(RegressionCritic::new(
            encoder,
            cfg.network.clone(),
            &mut init,
        )?)),
        Method::SrW => {
            let (disc, matrix) = cfg
                .noise
                .as_gcm()
                .ok_or_else(|| Error::schema("noise.kind", "sr_w needs gcm noise"))?;
            RewardPipeline::SrW {
                table: SurrogateTable::for_centers(matrix, disc)?,
                disc: *disc,
            }
        }
        Method::Drc => {
            let d = cfg.drc.as_ref().ok_or_else(|| Error::schema("drc.n_o", "missing"))?;
            let disc = Discretization::new(d.range.0, d.range.1, d.n_o)?;
            RewardPipeline::Drc(Box::new(match d.critic {
                CriticKind::Tabular => DistCritic::Tabular(TabularCritic::new(disc)),
                CriticKind::Network => {
                    DistCritic::Network(NetworkCritic::new(disc, encoder, cfg.network.clone(), &mut init)?)
                }
            }))
        }
        Method::Gdrc => {
            let g = cfg.gdrc.as_ref().ok_or_else(|| Error::schema("gdrc", "missing"))?;
            let ens = EnsembleConfig {
                candidates: g.candidates.clone(),
                discount: g.discount,
                vote_deadline: g.deadline,
                rule: g.rule,
                parallel: false,
            };
            let range = match g.range {
                Some((r_min, r_max)) => RangeSource::Known { r_min, r_max },
                None => RangeSource::streaming(g.alpha)?,
            };
            RewardPipeline::Gdrc(Box::new(match g.critic {
                CriticKind::Tabular => CriticEnsemble::tabular(ens, range)?,
                CriticKind::Network => CriticEnsemble::network(ens, range, encoder, cfg.network.clone(), &mut init)?,
            }))
        }
    };
    Ok(Corrector::new(pipeline).with_history(cfg.history))
}

pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutput> {
    let mut corrector = build_pipeline(cfg, seed)?;
    let rng = RunRng::new(seed);
    match build_env(cfg)? {
        Env::Grid(g) => Ok(q_learning_train(&g, &mut corrector, &cfg.q, &rng)?.0),
        Env::Bandit(b) => Ok(bandit_pg_train(&b, &mut corrector, &cfg.bandit, &rng)?.0),
    }
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub outcome: Result<RunOutput>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub method: Method,
    pub runs: Vec<SeedRun>,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Summary {
    pub n: usize,
    pub failed: usize,
    pub mean: f64,
    pub se: f64,
}

impl RunReport {
    pub fn failures(&self) -> impl Iterator<Item = (u64, &Error)> {
        self.runs
            .iter()
            .filter_map(|r| r.outcome.as_ref().err().map(|e| (r.seed, e)))
    }

    /// Mean ± se of a per-seed statistic of the final learning-curve point,
    /// over the seeds that completed.
    pub fn summarize(&self, stat: impl Fn(&crate::agent::LearningPoint) -> f64) -> Summary {
        let values: Vec<f64> = self
            .runs
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok())
            .filter_map(|o| o.final_point())
            .map(stat)
            .collect();
        let (mean, se) = mean_se(&values);
        Summary {
            n: values.len(),
            failed: self.runs.len() - values.len(),
            mean,
            se,
        }
    }

    pub fn final_returns(&self) -> Summary {
        self.summarize(|p| p.clean_return)
    }
}

/// Run every `(config, seed)` cell on up to `workers` threads; reports come
/// back in config order with seeds in config order.
pub fn run_matrix(configs: &[ExperimentConfig], workers: usize) -> Vec<RunReport> {
    let jobs: Vec<(usize, u64)> = configs
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let mut results: Vec<Option<Result<RunOutput>>> = vec![None; jobs.len()];
    let workers = workers.clamp(1, jobs.len().max(1));
    if workers == 1 {
        for (slot, &(i, s)) in results.iter_mut().zip(&jobs) {
            *slot = Some(run_seed(&configs[i], s));
        }
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let done = std::sync::Mutex::new(&mut results);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let j = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    let Some(&(i, s)) = jobs.get(j) else { break };
                    let out = run_seed(&configs[i], s);
                    done.lock().expect("worker panicked")[j] = Some(out);
                });
            }
        });
    }
    let mut results = results.into_iter().map(|r| r.expect("every job ran"));
    configs
        .iter()
        .map(|c| RunReport {
            method: c.method,
            runs: c
                .seeds
                .iter()
                .map(|&seed| SeedRun {
                    seed,
                    outcome: results.next().expect("one result per job"),
                })
                .collect(),
        })
        .collect()
}

pub fn run(cfg: &ExperimentConfig) -> RunReport {
    let workers = cfg.workers.unwrap_or_else(default_workers);
    run_matrix(std::slice::from_ref(cfg), workers).remove(0)
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub axis: String,
    pub values: Vec<String>,
    pub configs: Vec<ExperimentConfig>,
    pub reports: Vec<RunReport>,
}

/// One config per axis value, all sharing the base seed list.
pub fn sweep_configs(base: &Config, axis: &str, values: &[String]) -> Result<Vec<ExperimentConfig>> {
    if !KEYS.iter().any(|(k, _)| *k == axis) {
        return Err(Error::schema(axis, "unknown sweep axis"));
    }
    if values.is_empty() {
        return Err(Error::schema(axis, "sweep needs at least one value"));
    }
    values
        .iter()
        .map(|v| {
            let mut c = base.clone();
            c.set(axis, v)?;
            ExperimentConfig::from_config(&c)
        })
        .collect()
}

pub fn sweep(base: &Config, axis: &str, values: &[String], workers: Option<usize>) -> Result<Sweep> {
    let configs = sweep_configs(base, axis, values)?;
    let workers = workers.or(configs[0].workers).unwrap_or_else(default_workers);
    let reports = run_matrix(&configs, workers);
    Ok(Sweep {
        axis: axis.to_string(),
        values: values.to_vec(),
        configs,
        reports,
    })
}

const RECORD_HEADER: &str = "config,seed,epoch,step,episode,method,status,clean_return,\
corrected_reward_mse_vs_true,corrected_reward_mae_vs_true,critic_ce,winner_n_o,clamped";

fn write_records(out: &mut String, prefix: &str, config: usize, report: &RunReport) {
    for run in &report.runs {
        match &run.outcome {
            Ok(o) => {
                for (epoch, p) in o.curve.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{prefix}{config},{},{},{},{},{},ok,{},{},{},{},{},{}",
                        run.seed,
                        epoch + 1,
                        p.step,
                        p.episode,
                        report.method.name(),
                        fmt_real(p.clean_return),
                        fmt_real(p.corrected_mse),
                        fmt_real(p.corrected_mae),
                        fmt_opt(p.cross_entropy),
                        p.winner.map(|w| w.to_string()).unwrap_or_default(),
                        p.clamped,
                    );
                }
            }
            Err(_) => {
                let _ = writeln!(
                    out,
                    "{prefix}{config},{},,,,{},failed,,,,,,",
                    run.seed,
                    report.method.name()
                );
            }
        }
    }
}

/// One row per `(config, seed, epoch)`; failed seeds get a single
/// `failed` row.
pub fn records_csv(reports: &[RunReport]) -> String {
    let mut s = format!("{RECORD_HEADER}\n");
    for (i, r) in reports.iter().enumerate() {
        write_records(&mut s, "", i, r);
    }
    s
}

pub fn sweep_csv(sweep: &Sweep) -> String {
    let mut s = format!("{},{RECORD_HEADER}\n", sweep.axis);
    for (i, (r, v)) in sweep.reports.iter().zip(&sweep.values).enumerate() {
        write_records(&mut s, &format!("{v},"), i, r);
    }
    s
}

/// Final-point aggregates per config: mean ± standard error over completed
/// seeds, with the number of failed seeds.
pub fn summary_csv(reports: &[RunReport]) -> String {
    let mut s = String::from("config,method,metric,n,failed,mean,se\n");
    for (i, r) in reports.iter().enumerate() {
        let metrics: [(&str, Summary); 3] = [
            ("clean_return", r.final_returns()),
            ("corrected_reward_mse_vs_true", r.summarize(|p| p.corrected_mse)),
            ("corrected_reward_mae_vs_true", r.summarize(|p| p.corrected_mae)),
        ];
        for (name, m) in metrics {
            let _ = writeln!(
                s,
                "{i},{},{name},{},{},{},{}",
                r.method.name(),
                m.n,
                m.failed,
                fmt_real(m.mean),
                fmt_real(m.se)
            );
        }
    }
    s
}

/// Same aggregates as [`summary_csv`] plus the failure messages, as JSON.
pub fn summary_json(reports: &[RunReport]) -> String {
    let configs: Vec<serde_json::Value> = reports
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let failures: Vec<serde_json::Value> = r
                .failures()
                .map(|(seed, e)| serde_json::json!({ "seed": seed, "error": e.to_string() }))
                .collect();
            serde_json::json!({
                "config": i,
                "method": r.method.name(),
                "clean_return": r.final_returns(),
                "corrected_reward_mse_vs_true": r.summarize(|p| p.corrected_mse),
                "corrected_reward_mae_vs_true": r.summarize(|p| p.corrected_mae),
                "failures": failures,
            })
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&serde_json::json!({ "configs": configs })).expect("plain values");
    s.push('\n');
    s
}

/// GDRC vote log: one row per `(seed, epoch, candidate)`.
pub fn votes_csv(reports: &[RunReport]) -> String {
    let mut s = String::from("config,seed,epoch,candidate,H,dH,votes,winner\n");
    for (i, r) in reports.iter().enumerate() {
        for run in &r.runs {
            let Ok(o) = &run.outcome else { continue };
            for v in &o.diagnostics.votes {
                for &(n, h) in &v.h_values {
                    let tally = v.tally.iter().find(|t| t.0 == n).map(|t| t.1);
                    let _ = writeln!(
                        s,
                        "{i},{},{},{n},{},{},{},{}",
                        run.seed,
                        v.epoch,
                        fmt_real(h),
                        fmt_opt(v.dh(n)),
                        fmt_opt(tally),
                        v.winner
                    );
                }
            }
        }
    }
    s
}

/// Evaluation-only diagnostics: the critic cross-entropy trace and the
/// histogram of hidden true labels. The `lane` column marks rows built
/// from hidden rewards.
pub fn diagnostics_csv(reports: &[RunReport]) -> String {
    let mut s = String::from("config,seed,series,lane,index,value\n");
    for (i, r) in reports.iter().enumerate() {
        for run in &r.runs {
            let Ok(o) = &run.outcome else { continue };
            for &(epoch, ce) in &o.diagnostics.ce_trace {
                let _ = writeln!(s, "{i},{},critic_ce,observed,{},{}", run.seed, epoch + 1, fmt_real(ce));
            }
            for (k, &c) in o.diagnostics.hidden_labels.iter().enumerate() {
                let _ = writeln!(s, "{i},{},hidden_label_count,evaluation_only,{k},{c}", run.seed);
            }
        }
    }
    s
}

const THEORY_HEADER: &str = "n_r,n_o,omega,metric,value\n";

/// Minimum cross-entropy per `n_o` for one true reward on `[0, 1)`.
pub fn ce_curve_csv(n_r: usize, omega: f64, r: f64, candidates: &[usize]) -> Result<String> {
    let d = Discretization::new(0.0, 1.0, n_r)?;
    let c = ConfusionMatrix::uniform(n_r, omega)?;
    let curve = theory::min_cross_entropy_curve(&d, &c, r, candidates)?;
    let mut s = String::from(THEORY_HEADER);
    for p in curve {
        let _ = writeln!(
            s,
            "{n_r},{},{},min_cross_entropy,{}",
            p.n_o,
            fmt_real(omega),
            fmt_real(p.value)
        );
    }
    Ok(s)
}

/// Reconstruction error per `n_o` with the default true-reward set.
pub fn recon_curve_csv(n_r: usize, omega: f64, candidates: &[usize], seed: u64) -> Result<String> {
    let d = Discretization::new(0.0, 1.0, n_r)?;
    let c = ConfusionMatrix::uniform(n_r, omega)?;
    let rs = theory::default_true_rewards(&d, 100, &mut RunRng::new(seed).stream(Stream::Data));
    let curve = theory::reconstruction_error_curve(&d, &c, &rs, candidates)?;
    let mut s = String::from(THEORY_HEADER);
    for p in &curve.points {
        let _ = writeln!(
            s,
            "{n_r},{},{},reconstruction_error,{}",
            p.n_o,
            fmt_real(omega),
            fmt_real(p.value)
        );
    }
    Ok(s)
}

/// Largest GCM snapping error of Gaussian noise on `[0, 1)` per `n_r`,
/// next to the `1 / n_r` bound.
pub fn prop1_csv(sigma: f64, n_rs: &[usize], draws: usize, seed: u64) -> Result<String> {
    let mut s = String::from(THEORY_HEADER);
    let model = crate::perturb::NoiseModel::Gaussian { sigma };
    for &n in n_rs {
        let d = Discretization::new(0.0, 1.0, n)?;
        let mut rng = RunRng::new(seed).split(n as u64).stream(Stream::Noise);
        let e = theory::prop1_max_error(&model, &d, draws, &mut rng)?;
        let _ = writeln!(s, "{n},,{},max_error,{}", fmt_real(sigma), fmt_real(e));
        let _ = writeln!(s, "{n},,{},bound,{}", fmt_real(sigma), fmt_real(d.width()));
    }
    Ok(s)
}
