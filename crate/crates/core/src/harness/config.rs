//! Flat `key = value` experiment configuration.
//!
//! One entry per line, `#` starts a comment, keys use one level of dotted
//! sections (`noise.omega`). Lists are comma-separated; matrix rows are
//! separated by `;`. Seeds accept `a..b` (half-open) as well as a list.
//! Every key is listed in [`KEYS`]; anything else is a schema error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::agent::{BanditConfig, QConfig};
use crate::critic::NetworkConfig;
use crate::envs::{BanditReward, ContinuousBanditSpec, GridWorldSpec};
use crate::error::{Error, Result};
use crate::gdrc::{VotingRule, DEFAULT_CANDIDATES};
use crate::nn::AdamConfig;
use crate::perturb::{ConfusionMatrix, Discretization, NoiseModel};

/// Recognised keys with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("env.kind", "gridworld | bandit"),
    ("env.width", "grid width"),
    ("env.height", "grid height"),
    ("env.rewards", "row-major reward table"),
    ("env.terminals", "terminal cell indices"),
    ("env.start", "start cell"),
    ("env.step_limit", "steps per episode"),
    ("env.slip", "probability of a random move"),
    ("env.r_min", "declared lower reward bound"),
    ("env.r_max", "declared upper reward bound (exclusive)"),
    ("env.dim", "bandit context dimension"),
    ("env.arms", "bandit arm count"),
    ("env.weights", "cosine weights, one row per arm"),
    ("env.values", "constant arm rewards (context-free bandit)"),
    ("noise.kind", "clean | gcm | gaussian | uniform_replace | range_uniform"),
    ("noise.n_r", "GCM interval count"),
    ("noise.omega", "channel strength"),
    ("noise.matrix", "explicit GCM rows; overrides noise.omega"),
    ("noise.r_min", "GCM range lower bound (default: environment range)"),
    ("noise.r_max", "GCM range upper bound"),
    ("noise.sigma", "gaussian standard deviation"),
    ("noise.lo", "uniform_replace lower bound"),
    ("noise.hi", "uniform_replace upper bound"),
    ("method", "raw | re | sr_w | drc | gdrc"),
    ("drc.n_o", "critic interval count"),
    ("drc.known_range", "use the environment's reward range"),
    ("drc.r_min", "critic range lower bound"),
    ("drc.r_max", "critic range upper bound"),
    ("drc.critic", "tabular | network"),
    ("gdrc.candidates", "candidate interval counts"),
    ("gdrc.discount", "tally discount per epoch"),
    ("gdrc.rule", "literal | knee"),
    ("gdrc.tau", "knee threshold"),
    ("gdrc.deadline", "last epoch that votes"),
    ("gdrc.alpha", "percentile sketch accuracy"),
    ("gdrc.known_range", "use the environment's range instead of the sketch"),
    ("gdrc.critic", "tabular | network"),
    ("network.hidden", "hidden layer widths"),
    ("network.lr", "Adam learning rate"),
    ("network.iterations", "Adam steps per epoch"),
    ("network.batch_size", "minibatch size (0 = full batch)"),
    ("agent.steps", "environment steps (gridworld) or rounds (bandit)"),
    ("agent.lr", "learning rate"),
    ("agent.gamma", "discount"),
    ("agent.eps_start", "initial exploration rate"),
    ("agent.eps_end", "final exploration rate"),
    (
        "agent.decay_fraction",
        "fraction of training spent decaying exploration",
    ),
    ("agent.cadence", "steps per critic update"),
    ("agent.eval_episodes", "greedy rollouts per evaluation"),
    ("agent.eval_contexts", "contexts scoring a bandit policy"),
    ("agent.baseline_rate", "policy-gradient baseline step size"),
    ("agent.history", "train critics on all samples so far"),
    ("seeds", "seed list or a..b"),
    ("workers", "parallel runs (default: DRC_WORKERS or 1)"),
    ("output", "CSV path"),
];

/// Raw key/value pairs, validated against [`KEYS`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                reason: format!("expected `key = value`, got `{line}`"),
            })?;
            let k = k.trim();
            if k.split('.').count() > 2 {
                return Err(Error::Parse {
                    line: i + 1,
                    reason: format!("`{k}` nests more than one section"),
                });
            }
            c.set(k, v.trim())?;
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !known(key) {
            return Err(Error::schema(key, "unknown key"));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Apply a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("expected key=value, got `{pair}`")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::schema(key, format!("cannot parse `{v}`")))
            })
            .transpose()
    }

    fn or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    fn required<T: std::str::FromStr>(&self, key: &str, why: &str) -> Result<T> {
        self.parsed(key)?
            .ok_or_else(|| Error::schema(key, format!("required {why}")))
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.get(key)
            .map(|v| parse_list(v).map_err(|reason| Error::schema(key, reason)))
            .transpose()
    }

    fn flag(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            None | Some("false") | Some("0") | Some("no") => Ok(false),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some(v) => Err(Error::schema(key, format!("expected a boolean, got `{v}`"))),
        }
    }

    fn range(&self, lo: &str, hi: &str) -> Result<Option<(f64, f64)>> {
        match (self.parsed::<f64>(lo)?, self.parsed::<f64>(hi)?) {
            (Some(a), Some(b)) => Ok(Some((a, b))),
            (None, None) => Ok(None),
            (None, Some(_)) => Err(Error::schema(lo, format!("required together with {hi}"))),
            (Some(_), None) => Err(Error::schema(hi, format!("required together with {lo}"))),
        }
    }
}

fn parse_list<T: std::str::FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| format!("cannot parse list item `{s}`")))
        .collect()
}

fn parse_matrix(v: &str) -> std::result::Result<Vec<Vec<f64>>, String> {
    v.split(';').map(parse_list).collect()
}

/// `a..b` (end exclusive) or a comma-separated list.
pub fn parse_seeds(v: &str) -> std::result::Result<Vec<u64>, String> {
    if let Some((a, b)) = v.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range `{v}`"))?;
        let b: u64 = b.trim().parse().map_err(|_| format!("bad seed range `{v}`"))?;
        return Ok((a..b).collect());
    }
    parse_list(v)
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    Grid(GridWorldSpec),
    Bandit(ContinuousBanditSpec),
}

impl EnvSpec {
    pub fn reward_range(&self) -> (f64, f64) {
        match self {
            EnvSpec::Grid(g) => g.reward_range(),
            EnvSpec::Bandit(b) => b.range,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Raw,
    Re,
    SrW,
    Drc,
    Gdrc,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Raw => "raw",
            Method::Re => "re",
            Method::SrW => "sr_w",
            Method::Drc => "drc",
            Method::Gdrc => "gdrc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticKind {
    Tabular,
    Network,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrcSpec {
    pub n_o: usize,
    pub range: (f64, f64),
    pub critic: CriticKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdrcSpec {
    pub candidates: Vec<usize>,
    pub discount: f64,
    pub rule: VotingRule,
    pub deadline: Option<usize>,
    pub alpha: f64,
    /// `None` estimates the range with the percentile sketch.
    pub range: Option<(f64, f64)>,
    pub critic: CriticKind,
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: Config,
    pub env: EnvSpec,
    pub noise: NoiseModel,
    pub method: Method,
    pub drc: Option<DrcSpec>,
    pub gdrc: Option<GdrcSpec>,
    pub network: NetworkConfig,
    pub q: QConfig,
    pub bandit: BanditConfig,
    pub history: bool,
    pub seeds: Vec<u64>,
    pub workers: Option<usize>,
    pub output: Option<String>,
}

fn critic_kind(c: &Config, key: &str) -> Result<CriticKind> {
    match c.get(key).unwrap_or("tabular") {
        "tabular" => Ok(CriticKind::Tabular),
        "network" => Ok(CriticKind::Network),
        v => Err(Error::schema(key, format!("unknown critic `{v}`"))),
    }
}

fn env_spec(c: &Config) -> Result<EnvSpec> {
    match c.get("env.kind").unwrap_or("gridworld") {
        "gridworld" => {
            let mut g = GridWorldSpec::default_5x5();
            g.width = c.or("env.width", g.width)?;
            g.height = c.or("env.height", g.height)?;
            if let Some(r) = c.list("env.rewards")? {
                g.rewards = r;
            }
            if let Some(t) = c.list("env.terminals")? {
                g.terminals = t;
            }
            g.start = c.or("env.start", g.start)?;
            g.step_limit = c.or("env.step_limit", g.step_limit)?;
            g.slip = c.or("env.slip", g.slip)?;
            if let Some(r) = c.range("env.r_min", "env.r_max")? {
                g.range = Some(r);
            }
            g.validate().map_err(|e| Error::schema("env", e.to_string()))?;
            Ok(EnvSpec::Grid(g))
        }
        "bandit" => {
            let mut b = ContinuousBanditSpec::default_cosine();
            if let Some(values) = c.list::<f64>("env.values")? {
                b = ContinuousBanditSpec::constant(values, (0.0, 1.0));
            } else {
                b.dim = c.or("env.dim", b.dim)?;
                b.arms = c.or("env.arms", b.arms)?;
                if let Some(w) = c.get("env.weights") {
                    let weights = parse_matrix(w).map_err(|r| Error::schema("env.weights", r))?;
                    b.reward = BanditReward::Cosine { weights };
                }
            }
            if let Some(r) = c.range("env.r_min", "env.r_max")? {
                b.range = r;
            }
            b.validate().map_err(|e| Error::schema("env", e.to_string()))?;
            Ok(EnvSpec::Bandit(b))
        }
        v => Err(Error::schema("env.kind", format!("unknown environment `{v}`"))),
    }
}

fn noise_model(c: &Config, env_range: (f64, f64)) -> Result<NoiseModel> {
    let m = match c.get("noise.kind").unwrap_or("clean") {
        "clean" => NoiseModel::Clean,
        "gcm" => {
            let (lo, hi) = c.range("noise.r_min", "noise.r_max")?.unwrap_or(env_range);
            let matrix = match c.get("noise.matrix") {
                Some(m) => {
                    let rows = parse_matrix(m).map_err(|r| Error::schema("noise.matrix", r))?;
                    ConfusionMatrix::from_rows(rows).map_err(|e| Error::schema("noise.matrix", e.to_string()))?
                }
                None => {
                    let n: usize = c.required("noise.n_r", "for gcm noise without noise.matrix")?;
                    let omega: f64 = c.required("noise.omega", "for gcm noise without noise.matrix")?;
                    ConfusionMatrix::uniform(n, omega).map_err(|e| Error::schema("noise.omega", e.to_string()))?
                }
            };
            if let Some(n) = c.parsed::<usize>("noise.n_r")? {
                if n != matrix.n() {
                    return Err(Error::schema("noise.n_r", "does not match noise.matrix"));
                }
            }
            let disc =
                Discretization::new(lo, hi, matrix.n()).map_err(|e| Error::schema("noise.r_min", e.to_string()))?;
            NoiseModel::Gcm { disc, matrix }
        }
        "gaussian" => NoiseModel::Gaussian {
            sigma: c.required("noise.sigma", "for gaussian noise")?,
        },
        "uniform_replace" => NoiseModel::UniformReplace {
            omega: c.required("noise.omega", "for uniform_replace noise")?,
            lo: c.required("noise.lo", "for uniform_replace noise")?,
            hi: c.required("noise.hi", "for uniform_replace noise")?,
        },
        "range_uniform" => {
            let (r_min, r_max) = c.range("noise.r_min", "noise.r_max")?.unwrap_or(env_range);
            NoiseModel::RangeUniform {
                omega: c.required("noise.omega", "for range_uniform noise")?,
                r_min,
                r_max,
            }
        }
        v => return Err(Error::schema("noise.kind", format!("unknown noise model `{v}`"))),
    };
    m.validate().map_err(|e| Error::schema("noise", e.to_string()))?;
    Ok(m)
}

impl ExperimentConfig {
    pub fn from_config(c: &Config) -> Result<Self> {
        let env = env_spec(c)?;
        let env_range = env.reward_range();
        let noise = noise_model(c, env_range)?;
        let method = match c.get("method") {
            None => return Err(Error::schema("method", "required")),
            Some("raw") => Method::Raw,
            Some("re") => Method::Re,
            Some("sr_w") => Method::SrW,
            Some("drc") => Method::Drc,
            Some("gdrc") => Method::Gdrc,
            Some(v) => return Err(Error::schema("method", format!("unknown method `{v}`"))),
        };
        if method == Method::SrW && noise.as_gcm().is_none() {
            return Err(Error::schema(
                "noise.kind",
                "sr_w needs a known confusion matrix (gcm noise)",
            ));
        }

        let drc = if method == Method::Drc {
            let n_o: usize = c.required("drc.n_o", "for method drc")?;
            let range = if c.flag("drc.known_range")? {
                env_range
            } else {
                c.range("drc.r_min", "drc.r_max")?.ok_or_else(|| {
                    Error::schema(
                        "drc.known_range",
                        "method drc needs drc.known_range or drc.r_min/drc.r_max",
                    )
                })?
            };
            Discretization::new(range.0, range.1, n_o).map_err(|e| Error::schema("drc.n_o", e.to_string()))?;
            Some(DrcSpec {
                n_o,
                range,
                critic: critic_kind(c, "drc.critic")?,
            })
        } else {
            None
        };

        let gdrc = if method == Method::Gdrc {
            let rule = match c.get("gdrc.rule").unwrap_or("literal") {
                "literal" => VotingRule::Literal,
                "knee" => VotingRule::Knee {
                    tau: c.or("gdrc.tau", 0.2)?,
                },
                v => return Err(Error::schema("gdrc.rule", format!("unknown rule `{v}`"))),
            };
            Some(GdrcSpec {
                candidates: c
                    .list("gdrc.candidates")?
                    .unwrap_or_else(|| DEFAULT_CANDIDATES.to_vec()),
                discount: c.or("gdrc.discount", 0.9)?,
                rule,
                deadline: c.parsed("gdrc.deadline")?,
                alpha: c.or("gdrc.alpha", 0.01)?,
                range: if c.flag("gdrc.known_range")? {
                    Some(env_range)
                } else {
                    None
                },
                critic: critic_kind(c, "gdrc.critic")?,
            })
        } else {
            None
        };

        let mut network = NetworkConfig::default();
        if let Some(h) = c.list("network.hidden")? {
            network.hidden = h;
        }
        network.adam = AdamConfig {
            learning_rate: c.or("network.lr", network.adam.learning_rate)?,
            ..network.adam
        };
        network.iterations = c.or("network.iterations", network.iterations)?;
        network.batch_size = match c.or("network.batch_size", 0usize)? {
            0 => None,
            b => Some(b),
        };

        let mut q = QConfig::default();
        let mut bandit = BanditConfig::default();
        if let Some(steps) = c.parsed::<usize>("agent.steps")? {
            q.steps = steps;
            bandit.rounds = steps;
        }
        if let Some(lr) = c.parsed::<f64>("agent.lr")? {
            q.lr = lr;
            bandit.lr = lr;
        }
        if let Some(k) = c.parsed::<usize>("agent.cadence")? {
            q.cadence = k;
            bandit.cadence = k;
        }
        q.gamma = c.or("agent.gamma", q.gamma)?;
        q.eps_start = c.or("agent.eps_start", q.eps_start)?;
        q.eps_end = c.or("agent.eps_end", q.eps_end)?;
        q.decay_fraction = c.or("agent.decay_fraction", q.decay_fraction)?;
        q.eval_episodes = c.or("agent.eval_episodes", q.eval_episodes)?;
        bandit.eval_contexts = c.or("agent.eval_contexts", bandit.eval_contexts)?;
        bandit.baseline_rate = c.or("agent.baseline_rate", bandit.baseline_rate)?;
        match env {
            EnvSpec::Grid(_) => q.validate()?,
            EnvSpec::Bandit(_) => bandit.validate()?,
        }

        let seeds = match c.get("seeds") {
            Some(v) => parse_seeds(v).map_err(|r| Error::schema("seeds", r))?,
            None => vec![0],
        };
        if seeds.is_empty() {
            return Err(Error::schema("seeds", "at least one seed"));
        }
        let workers = c.parsed::<usize>("workers")?;
        if workers == Some(0) {
            return Err(Error::schema("workers", "must be >= 1"));
        }

        Ok(Self {
            source: c.clone(),
            env,
            noise,
            method,
            drc,
            gdrc,
            network,
            q,
            bandit,
            history: c.flag("agent.history")?,
            seeds,
            workers,
            output: c.get("output").map(str::to_string),
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_config(&Config::parse(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(e: Error) -> String {
        match e {
            Error::Schema { field, .. } => field,
            other => panic!("expected a schema error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let e = ExperimentConfig::parse("method = raw\n").unwrap();
        assert_eq!(e.seeds, vec![0]);
        assert!(matches!(e.env, EnvSpec::Grid(_)));
        assert_eq!(e.noise, NoiseModel::Clean);
        assert_eq!(e.q, QConfig::default());
    }

    #[test]
    fn comments_blank_lines_and_seed_ranges() {
        let e = ExperimentConfig::parse("# header\n\nmethod = raw   # trailing\nseeds = 0..10\nagent.steps = 1000\n")
            .unwrap();
        assert_eq!(e.seeds, (0..10).collect::<Vec<_>>());
        assert_eq!(e.q.steps, 1000);
    }

    #[test]
    fn drc_requirements_name_the_field() {
        let e = ExperimentConfig::parse("method = drc\n").unwrap_err();
        assert_eq!(field(e), "drc.n_o");
        let e = ExperimentConfig::parse("method = drc\ndrc.n_o = 6\n").unwrap_err();
        assert_eq!(field(e), "drc.known_range");
        let e = ExperimentConfig::parse("method = drc\ndrc.n_o = 6\ndrc.r_min = 0\n").unwrap_err();
        assert_eq!(field(e), "drc.r_max");
        let ok = ExperimentConfig::parse("method = drc\ndrc.n_o = 6\ndrc.known_range = true\n").unwrap();
        assert_eq!(ok.drc.unwrap().range, GridWorldSpec::default_5x5().reward_range());
    }

    #[test]
    fn sr_w_needs_a_known_matrix() {
        let e = ExperimentConfig::parse("method = sr_w\nnoise.kind = gaussian\nnoise.sigma = 0.1\n").unwrap_err();
        assert_eq!(field(e), "noise.kind");
        ExperimentConfig::parse("method = sr_w\nnoise.kind = gcm\nnoise.n_r = 6\nnoise.omega = 0.5\n").unwrap();
    }

    #[test]
    fn unknown_keys_and_bad_values() {
        assert_eq!(field(Config::parse("nope = 1\n").unwrap_err()), "nope");
        assert_eq!(
            field(ExperimentConfig::parse("method = magic\n").unwrap_err()),
            "method"
        );
        assert_eq!(
            field(ExperimentConfig::parse("method = raw\nagent.steps = lots\n").unwrap_err()),
            "agent.steps"
        );
        assert!(matches!(
            Config::parse("method raw\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(Config::parse("a.b.c = 1\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn explicit_matrix() {
        let e = ExperimentConfig::parse(
            "method = sr_w\nenv.kind = bandit\nenv.values = 0.25, 0.75\nnoise.kind = gcm\nnoise.matrix = 0.8, 0.2; 0.3, 0.7\n",
        )
        .unwrap();
        let (disc, m) = e.noise.as_gcm().unwrap();
        assert_eq!(disc.n(), 2);
        assert_eq!(m.row(1), &[0.3, 0.7]);
    }

    #[test]
    fn text_round_trip() {
        let c = Config::parse("method = raw\nseeds = 1,2\n").unwrap();
        assert_eq!(Config::parse(&c.to_text()).unwrap(), c);
    }
}
