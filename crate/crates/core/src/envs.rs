//! Environments whose reward structure is known exactly, so corrected
//! rewards can be scored against the truth.
//!
//! Rewards depend on `(state, action)` only: in the grid world the reward is
//! the table entry of the cell the action aims at, whether or not the agent
//! slips. True rewards leave the environment as [`HiddenReward`]; learners
//! only see `r_observed`, which comes from the configured [`NoiseModel`].

use rand::Rng;

use crate::audit::HiddenReward;
use crate::critic::{ActionSpace, InputEncoder, Sample};
use crate::error::{Error, Result};
use crate::perturb::{ConfusionMatrix, NoiseModel};

#[derive(Debug, Clone)]
pub struct Transition<S> {
    pub state: S,
    pub action: usize,
    pub next_state: S,
    pub r_true: HiddenReward,
    pub r_observed: f64,
    pub done: bool,
}

/// Half-open upper bound just above `max`.
fn open_upper(max: f64) -> f64 {
    max + 1e-9 * max.abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridWorldSpec {
    pub width: usize,
    pub height: usize,
    /// Row-major, one reward per cell.
    pub rewards: Vec<f64>,
    pub terminals: Vec<usize>,
    pub start: usize,
    pub step_limit: usize,
    pub slip: f64,
    /// Declared `[r_min, r_max)`; `None` uses the tight bounds of the table.
    pub range: Option<(f64, f64)>,
}

impl GridWorldSpec {
    /// 5x5 board with the six levels `-1, -2/3, ..., 2/3`.
    ///
    /// Start top-left, goal (2/3, terminal) top-right behind a -1/3 cell.
    /// The 1/3 cell in the fourth row sits below a zero cell; shuttling
    /// between the two pays 1/6 per step, which beats the goal over a
    /// 50-step episode. The range is the tight bound of the table.
    pub fn default_5x5() -> Self {
        let lv = |k: usize| -1.0 + k as f64 / 3.0;
        #[rustfmt::skip]
        let layout = [
            3, 3, 2, 3, 5,
            3, 1, 1, 1, 3,
            3, 3, 3, 3, 3,
            1, 2, 4, 2, 0,
            1, 1, 2, 1, 1,
        ];
        Self {
            width: 5,
            height: 5,
            rewards: layout.iter().map(|&k| lv(k)).collect(),
            terminals: vec![4],
            start: 0,
            step_limit: 50,
            slip: 0.0,
            range: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cells = self.width * self.height;
        if cells == 0 {
            return Err(Error::Config("grid must have at least one cell".into()));
        }
        if self.rewards.len() != cells {
            return Err(Error::Config(format!(
                "reward table has {} entries for {cells} cells",
                self.rewards.len()
            )));
        }
        if self.terminals.is_empty() || self.terminals.iter().any(|&t| t >= cells) {
            return Err(Error::Config("need at least one terminal cell inside the grid".into()));
        }
        if self.start >= cells {
            return Err(Error::Config("start cell outside the grid".into()));
        }
        if self.step_limit == 0 {
            return Err(Error::Config("step limit must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.slip) {
            return Err(Error::Config("slip probability outside [0, 1]".into()));
        }
        let (lo, hi) = self.reward_range();
        if lo >= hi || self.rewards.iter().any(|&r| !(r >= lo && r < hi)) {
            return Err(Error::Config(format!("reward table not inside its range [{lo}, {hi})")));
        }
        Ok(())
    }

    pub fn reward_range(&self) -> (f64, f64) {
        self.range.unwrap_or_else(|| {
            let lo = self.rewards.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = self.rewards.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (lo, open_upper(hi))
        })
    }
}

pub const GRID_ACTIONS: usize = 4;

#[derive(Debug, Clone)]
pub struct GridWorld {
    spec: GridWorldSpec,
    noise: NoiseModel,
}

impl GridWorld {
    pub fn new(spec: GridWorldSpec, noise: NoiseModel) -> Result<Self> {
        spec.validate()?;
        noise.validate()?;
        Ok(Self { spec, noise })
    }

    pub fn spec(&self) -> &GridWorldSpec {
        &self.spec
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn n_states(&self) -> usize {
        self.spec.width * self.spec.height
    }

    pub fn n_actions(&self) -> usize {
        GRID_ACTIONS
    }

    pub fn step_limit(&self) -> usize {
        self.spec.step_limit
    }

    pub fn reward_range(&self) -> (f64, f64) {
        self.spec.reward_range()
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.spec.terminals.contains(&s)
    }

    pub fn reset<R: Rng + ?Sized>(&self, _rng: &mut R) -> usize {
        self.spec.start
    }

    /// Cell reached by `action` (0 up, 1 down, 2 left, 3 right); walls block.
    pub fn target(&self, s: usize, action: usize) -> usize {
        let (w, h) = (self.spec.width, self.spec.height);
        let (x, y) = (s % w, s / w);
        match action {
            0 if y > 0 => s - w,
            1 if y + 1 < h => s + w,
            2 if x > 0 => s - 1,
            3 if x + 1 < w => s + 1,
            _ => s,
        }
    }

    pub fn true_reward(&self, s: usize, action: usize) -> f64 {
        self.spec.rewards[self.target(s, action)]
    }

    pub fn step<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        &self,
        s: usize,
        action: usize,
        dynamics: &mut R1,
        noise: &mut R2,
    ) -> Result<Transition<usize>> {
        if action >= GRID_ACTIONS {
            return Err(Error::Usage(format!("invalid action {action}")));
        }
        if s >= self.n_states() {
            return Err(Error::Usage(format!("invalid state {s}")));
        }
        let (next, r, done) = self.step_hidden(s, action, dynamics);
        let observed = self.noise.apply(r.reveal(), noise)?.r_tilde;
        Ok(Transition {
            state: s,
            action,
            next_state: next,
            r_true: r,
            r_observed: observed,
            done,
        })
    }

    /// Dynamics and true reward without the noise channel; used by evaluation.
    pub fn step_hidden<R: Rng + ?Sized>(
        &self,
        s: usize,
        action: usize,
        dynamics: &mut R,
    ) -> (usize, HiddenReward, bool) {
        let slip: f64 = dynamics.random();
        let moved = if slip < self.spec.slip {
            dynamics.random_range(0..GRID_ACTIONS)
        } else {
            action
        };
        let next = self.target(s, moved);
        (
            next,
            HiddenReward::new(self.true_reward(s, action)),
            self.is_terminal(next),
        )
    }

    pub fn encode_state(&self, s: usize) -> Vec<f64> {
        (0..self.n_states()).map(|i| if i == s { 1.0 } else { 0.0 }).collect()
    }

    pub fn encoder(&self) -> InputEncoder {
        InputEncoder::new(self.n_states(), ActionSpace::Discrete(GRID_ACTIONS))
    }

    pub fn sample(&self, t: &Transition<usize>) -> Sample {
        Sample::discrete(self.encode_state(t.state), t.action, t.r_observed)
    }

    /// Discounted optimal action values of the noise-free MDP.
    pub fn value_iteration(&self, gamma: f64, tol: f64) -> Vec<[f64; GRID_ACTIONS]> {
        let n = self.n_states();
        let slip = self.spec.slip;
        let mut v = vec![0.0; n];
        let mut q = vec![[0.0; GRID_ACTIONS]; n];
        loop {
            let mut delta: f64 = 0.0;
            for s in 0..n {
                if self.is_terminal(s) {
                    continue;
                }
                for a in 0..GRID_ACTIONS {
                    let cont = |t: usize| if self.is_terminal(t) { 0.0 } else { v[t] };
                    let mut future = (1.0 - slip) * cont(self.target(s, a));
                    for b in 0..GRID_ACTIONS {
                        future += slip / GRID_ACTIONS as f64 * cont(self.target(s, b));
                    }
                    q[s][a] = self.true_reward(s, a) + gamma * future;
                }
                let best = q[s].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                delta = delta.max((best - v[s]).abs());
                v[s] = best;
            }
            if delta < tol {
                return q;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BanditReward {
    /// `(1 + cos(π s·w_a)) / 2`
    Cosine { weights: Vec<Vec<f64>> },
    /// Context-free arm values.
    Constant { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousBanditSpec {
    /// Contexts are uniform on `[0, 1)^dim`.
    pub dim: usize,
    pub arms: usize,
    pub reward: BanditReward,
    pub range: (f64, f64),
}

pub const MEAN_FLIP_BINS: usize = 10;

impl ContinuousBanditSpec {
    /// d = 2, K = 4 cosine bandit; every arm is best somewhere on the square.
    pub fn default_cosine() -> Self {
        Self {
            dim: 2,
            arms: 4,
            reward: BanditReward::Cosine {
                weights: vec![vec![1.0, 0.05], vec![0.05, 1.0], vec![0.6, 0.3], vec![0.3, 0.6]],
            },
            range: (0.0, 1.0),
        }
    }

    pub fn constant(values: Vec<f64>, range: (f64, f64)) -> Self {
        Self {
            dim: 0,
            arms: values.len(),
            reward: BanditReward::Constant { values },
            range,
        }
    }

    /// Two constant arms on a 10-interval grid over [0, 1). The returned matrix keeps each arm's
    /// true label as the row mode but moves arm 0's mass down and arm 1's up, so the observed
    /// means are 0.34 and 0.66 against true values 0.55 and 0.45.
    pub fn mean_flip() -> (Self, ConfusionMatrix) {
        let n = MEAN_FLIP_BINS;
        let mut rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        rows[5] = (0..n)
            .map(|j| match j {
                5 => 0.4,
                0..=3 => 0.15,
                _ => 0.0,
            })
            .collect();
        rows[4] = (0..n)
            .map(|j| match j {
                4 => 0.4,
                6..=9 => 0.15,
                _ => 0.0,
            })
            .collect();
        let matrix = ConfusionMatrix::from_rows(rows).expect("rows are stochastic");
        (Self::constant(vec![0.55, 0.45], (0.0, 1.0)), matrix)
    }

    pub fn validate(&self) -> Result<()> {
        if self.arms == 0 {
            return Err(Error::Config("bandit needs at least one arm".into()));
        }
        if self.range.0 >= self.range.1 {
            return Err(Error::Config("bandit range must have r_min < r_max".into()));
        }
        match &self.reward {
            BanditReward::Cosine { weights } => {
                if weights.len() != self.arms || weights.iter().any(|w| w.len() != self.dim) {
                    return Err(Error::Config("cosine weights must be arms x dim".into()));
                }
            }
            BanditReward::Constant { values } => {
                if values.len() != self.arms {
                    return Err(Error::Config("one constant per arm".into()));
                }
                if values.iter().any(|&v| !(v >= self.range.0 && v < self.range.1)) {
                    return Err(Error::Config("arm value outside the declared range".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ContinuousBandit {
    spec: ContinuousBanditSpec,
    noise: NoiseModel,
}

impl ContinuousBandit {
    pub fn new(spec: ContinuousBanditSpec, noise: NoiseModel) -> Result<Self> {
        spec.validate()?;
        noise.validate()?;
        Ok(Self { spec, noise })
    }

    pub fn spec(&self) -> &ContinuousBanditSpec {
        &self.spec
    }

    pub fn arms(&self) -> usize {
        self.spec.arms
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn reward_range(&self) -> (f64, f64) {
        self.spec.range
    }

    pub fn context<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.spec.dim).map(|_| rng.random::<f64>()).collect()
    }

    pub fn true_reward(&self, ctx: &[f64], arm: usize) -> f64 {
        match &self.spec.reward {
            BanditReward::Cosine { weights } => {
                let dot: f64 = ctx.iter().zip(&weights[arm]).map(|(s, w)| s * w).sum();
                (1.0 + (std::f64::consts::PI * dot).cos()) / 2.0
            }
            BanditReward::Constant { values } => values[arm],
        }
    }

    pub fn best_arm(&self, ctx: &[f64]) -> (usize, f64) {
        (0..self.arms())
            .map(|a| (a, self.true_reward(ctx, a)))
            .fold((0, f64::NEG_INFINITY), |b, x| if x.1 > b.1 { x } else { b })
    }

    pub fn pull<R: Rng + ?Sized>(&self, ctx: &[f64], arm: usize, noise: &mut R) -> Result<Transition<Vec<f64>>> {
        if arm >= self.arms() {
            return Err(Error::Usage(format!("invalid arm {arm}")));
        }
        let r = self.true_reward(ctx, arm);
        // top edge of a half-open range maps into the last interval
        let r_in = if r >= self.spec.range.1 {
            self.spec.range.1 - (self.spec.range.1 - self.spec.range.0) * 1e-12
        } else {
            r
        };
        let observed = self.noise.apply(r_in, noise)?.r_tilde;
        Ok(Transition {
            state: ctx.to_vec(),
            action: arm,
            next_state: ctx.to_vec(),
            r_true: HiddenReward::new(r),
            r_observed: observed,
            done: true,
        })
    }

    pub fn encoder(&self) -> InputEncoder {
        InputEncoder::new(self.dim(), ActionSpace::Discrete(self.arms())).with_bounds(vec![(0.0, 1.0); self.dim()])
    }

    pub fn sample(&self, t: &Transition<Vec<f64>>) -> Sample {
        Sample::discrete(t.state.clone(), t.action, t.r_observed)
    }
}
