//! A small dense network with tanh hidden layers and a linear head, trained
//! with Adam. Parameters live in one flat vector so the optimizer, gradient
//! checks and text serialization all work on the same layout.

use rand::Rng;

use crate::error::{Error, Result};

/// Floor applied to probabilities before taking logs.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
    // (weight offset, bias offset) per layer; weights row-major [out][in]
    offsets: Vec<(usize, usize)>,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `acts[0]` is the input; `acts[l]` the post-activation output of layer `l`.
    acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("trace has at least the input layer")
    }
}

fn layout(sizes: &[usize]) -> (Vec<(usize, usize)>, usize) {
    let mut offsets = Vec::with_capacity(sizes.len() - 1);
    let mut at = 0;
    for w in sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let wo = at;
        at += fan_in * fan_out;
        let bo = at;
        at += fan_out;
        offsets.push((wo, bo));
    }
    (offsets, at)
}

impl Mlp {
    /// Weights `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, biases zero.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {sizes:?}")));
        }
        let (offsets, total) = layout(sizes);
        let mut params = vec![0.0; total];
        for (l, &(wo, bo)) in offsets.iter().enumerate() {
            let bound = 1.0 / (sizes[l] as f64).sqrt();
            for p in &mut params[wo..bo] {
                *p = rng.random_range(-bound..bound);
            }
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
            offsets,
        })
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {sizes:?}")));
        }
        let (offsets, total) = layout(sizes);
        if params.len() != total {
            return Err(Error::Config(format!(
                "expected {total} parameters for sizes {sizes:?}, got {}",
                params.len()
            )));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
            offsets,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.trace(x).acts.pop().unwrap()
    }

    pub fn trace(&self, x: &[f64]) -> Trace {
        debug_assert_eq!(x.len(), self.inputs());
        let layers = self.offsets.len();
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(x.to_vec());
        for (l, &(wo, bo)) in self.offsets.iter().enumerate() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let input = &acts[l];
            let w = &self.params[wo..bo];
            let b = &self.params[bo..bo + fan_out];
            let mut out: Vec<f64> = (0..fan_out)
                .map(|o| {
                    let row = &w[o * fan_in..(o + 1) * fan_in];
                    b[o] + row.iter().zip(input).map(|(wi, xi)| wi * xi).sum::<f64>()
                })
                .collect();
            if l + 1 < layers {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(out);
        }
        Trace { acts }
    }

    /// Accumulate `d(loss)/d(params)` into `grad` given `d(loss)/d(output)`.
    pub fn backward(&self, trace: &Trace, d_out: &[f64], grad: &mut [f64]) {
        let layers = self.offsets.len();
        let mut delta = d_out.to_vec();
        for l in (0..layers).rev() {
            let (wo, bo) = self.offsets[l];
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let input = &trace.acts[l];
            for o in 0..fan_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                grad[bo + o] += d;
                let g = &mut grad[wo + o * fan_in..wo + (o + 1) * fan_in];
                for (gi, xi) in g.iter_mut().zip(input) {
                    *gi += d * xi;
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[wo..bo];
            let mut prev = vec![0.0; fan_in];
            for o in 0..fan_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &w[o * fan_in..(o + 1) * fan_in];
                for (p, wi) in prev.iter_mut().zip(row) {
                    *p += d * wi;
                }
            }
            // through tanh: input of this layer is tanh(z) of the previous one
            for (p, a) in prev.iter_mut().zip(input) {
                *p *= 1.0 - a * a;
            }
            delta = prev;
        }
    }

    /// Text form: a commented header, the layer sizes, then one parameter per
    /// line in flat layout order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("# mlp v1: tanh hidden layers, linear head\n");
        s.push_str("# layout per layer: weights [out][in] row-major, then biases\n");
        s.push_str("sizes");
        for n in &self.sizes {
            s.push_str(&format!(" {n}"));
        }
        s.push('\n');
        s.push_str(&format!("params {}\n", self.params.len()));
        for p in &self.params {
            s.push_str(&format!("{p:?}\n"));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (ln, sizes_line) = lines.next().ok_or(Error::Parse {
            line: 0,
            reason: "missing sizes line".into(),
        })?;
        let sizes = sizes_line
            .strip_prefix("sizes")
            .ok_or(Error::Parse {
                line: ln,
                reason: "expected `sizes ...`".into(),
            })?
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>().map_err(|e| Error::Parse {
                    line: ln,
                    reason: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let (ln, count_line) = lines.next().ok_or(Error::Parse {
            line: ln,
            reason: "missing params line".into(),
        })?;
        let count: usize = count_line
            .strip_prefix("params")
            .map(str::trim)
            .and_then(|t| t.parse().ok())
            .ok_or(Error::Parse {
                line: ln,
                reason: "expected `params <count>`".into(),
            })?;
        let params = lines
            .take(count)
            .map(|(ln, t)| {
                t.parse::<f64>().map_err(|e| Error::Parse {
                    line: ln,
                    reason: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if params.len() != count {
            return Err(Error::Parse {
                line: 0,
                reason: format!("expected {count} parameters, found {}", params.len()),
            });
        }
        Self::from_params(&sizes, params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, num_params: usize) -> Self {
        Self {
            config,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.m, &self.v)
    }

    pub fn restore(&mut self, m: Vec<f64>, v: Vec<f64>, t: u64) -> Result<()> {
        if m.len() != self.m.len() || v.len() != self.v.len() {
            return Err(Error::Config("adam state length mismatch".into()));
        }
        self.m = m;
        self.v = v;
        self.t = t;
        Ok(())
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of `label` under `softmax(logits)` and its gradient w.r.t. the logits.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let mut p = softmax(logits);
    let loss = -p[label].max(LOG_FLOOR).ln();
    p[label] -= 1.0;
    (loss, p)
}

/// Squared error `(y - target)^2` of a scalar head and its gradient.
pub fn squared_error(output: &[f64], target: f64) -> (f64, Vec<f64>) {
    let d = output[0] - target;
    (d * d, vec![2.0 * d])
}
