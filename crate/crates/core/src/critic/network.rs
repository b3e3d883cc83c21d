//! Network critics: a tanh MLP from encoded `(state, action)` to `n_o` logits
//! (distributional) or to one scalar (regression baseline), trained with Adam.

use rand::seq::index;
use rand::Rng;

use super::{ActionSpace, InputEncoder, Sample};
use crate::audit::TrainingScope;
use crate::error::{Error, Result};
use crate::nn::{softmax, softmax_cross_entropy, Adam, AdamConfig, Mlp};
use crate::perturb::Discretization;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub hidden: Vec<usize>,
    pub adam: AdamConfig,
    /// Optimizer steps per call to `train_epoch`.
    pub iterations: usize,
    /// Minibatch size; `None` uses the whole batch every step.
    pub batch_size: Option<usize>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            adam: AdamConfig::default(),
            iterations: 40,
            batch_size: None,
        }
    }
}

/// Shared body of the distributional and regression critics.
#[derive(Debug, Clone)]
pub(crate) struct Trainer {
    pub(crate) net: Mlp,
    pub(crate) adam: Adam,
    pub(crate) config: NetworkConfig,
}

impl Trainer {
    pub(crate) fn new<R: Rng + ?Sized>(
        inputs: usize,
        outputs: usize,
        config: NetworkConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let mut sizes = vec![inputs];
        sizes.extend(&config.hidden);
        sizes.push(outputs);
        let net = Mlp::new(&sizes, rng)?;
        let adam = Adam::new(config.adam, net.num_params());
        Ok(Self { net, adam, config })
    }

    /// Mean loss over `idx` and its gradient.
    pub(crate) fn loss_grad<F>(&self, xs: &[Vec<f64>], idx: &[usize], loss: &F) -> (f64, Vec<f64>)
    where
        F: Fn(&[f64], usize) -> (f64, Vec<f64>),
    {
        let mut grad = vec![0.0; self.net.num_params()];
        let mut total = 0.0;
        for &i in idx {
            let trace = self.net.trace(&xs[i]);
            let (l, d) = loss(trace.output(), i);
            total += l;
            self.net.backward(&trace, &d, &mut grad);
        }
        let scale = 1.0 / idx.len() as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        (total * scale, grad)
    }

    pub(crate) fn mean_loss<F>(&self, xs: &[Vec<f64>], loss: &F) -> f64
    where
        F: Fn(&[f64], usize) -> (f64, Vec<f64>),
    {
        xs.iter()
            .enumerate()
            .map(|(i, x)| loss(&self.net.forward(x), i).0)
            .sum::<f64>()
            / xs.len() as f64
    }

    /// Run the configured optimizer steps; returns the post-training mean loss.
    pub(crate) fn optimize<F, R>(&mut self, xs: &[Vec<f64>], loss: F, rng: &mut R) -> Result<f64>
    where
        F: Fn(&[f64], usize) -> (f64, Vec<f64>),
        R: Rng + ?Sized,
    {
        if xs.is_empty() {
            return Err(Error::Usage("training batch is empty".into()));
        }
        let n = xs.len();
        let all: Vec<usize> = (0..n).collect();
        for it in 0..self.config.iterations {
            let idx = match self.config.batch_size {
                Some(b) if b < n => index::sample(rng, n, b).into_vec(),
                _ => all.clone(),
            };
            let (l, grad) = self.loss_grad(xs, &idx, &loss);
            if !l.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { iteration: it, loss: l });
            }
            self.adam.step(self.net.params_mut(), &grad);
        }
        let l = self.mean_loss(xs, &loss);
        if !l.is_finite() {
            return Err(Error::Divergence {
                iteration: self.config.iterations,
                loss: l,
            });
        }
        Ok(l)
    }

    fn write_text(&self, out: &mut String) {
        out.push_str(&format!("iterations {}\n", self.config.iterations));
        out.push_str(&format!(
            "batch_size {}\n",
            self.config.batch_size.map_or("full".to_string(), |b| b.to_string())
        ));
        let a = &self.config.adam;
        out.push_str(&format!(
            "adam {:?} {:?} {:?} {:?}\n",
            a.learning_rate, a.beta1, a.beta2, a.epsilon
        ));
        out.push_str(&self.net.to_text());
        let (m, v) = self.adam.moments();
        out.push_str(&format!("adam_t {}\n", self.adam.steps()));
        out.push_str(&format!("adam_m {}\n", m.len()));
        m.iter().for_each(|x| out.push_str(&format!("{x:?}\n")));
        out.push_str(&format!("adam_v {}\n", v.len()));
        v.iter().for_each(|x| out.push_str(&format!("{x:?}\n")));
    }

    fn read_text(header: &Header, body: &str) -> Result<Self> {
        let (net_part, adam_part) = body
            .split_once("adam_t")
            .ok_or_else(|| parse_err("missing adam_t section"))?;
        let net = Mlp::from_text(net_part)?;
        let iterations = header.get("iterations")?.parse().map_err(|_| parse_err("iterations"))?;
        let batch_size = match header.get("batch_size")? {
            "full" => None,
            b => Some(b.parse().map_err(|_| parse_err("batch_size"))?),
        };
        let adam_vals = header.floats("adam")?;
        if adam_vals.len() != 4 {
            return Err(parse_err("adam needs 4 values"));
        }
        let adam_cfg = AdamConfig {
            learning_rate: adam_vals[0],
            beta1: adam_vals[1],
            beta2: adam_vals[2],
            epsilon: adam_vals[3],
        };
        let hidden = net.sizes()[1..net.sizes().len() - 1].to_vec();
        let mut lines = adam_part.lines().map(str::trim).filter(|l| !l.is_empty());
        let t: u64 = lines
            .next()
            .and_then(|l| l.parse().ok())
            .ok_or_else(|| parse_err("adam_t"))?;
        let mut vector = |tag: &str| -> Result<Vec<f64>> {
            let head = lines.next().ok_or_else(|| parse_err(tag))?;
            let n: usize = head
                .strip_prefix(tag)
                .and_then(|r| r.trim().parse().ok())
                .ok_or_else(|| parse_err(tag))?;
            (0..n)
                .map(|_| {
                    lines
                        .next()
                        .and_then(|l| l.parse::<f64>().ok())
                        .ok_or_else(|| parse_err(tag))
                })
                .collect()
        };
        let m = vector("adam_m")?;
        let v = vector("adam_v")?;
        let mut adam = Adam::new(adam_cfg, net.num_params());
        adam.restore(m, v, t)?;
        Ok(Self {
            net,
            adam,
            config: NetworkConfig {
                hidden,
                adam: adam_cfg,
                iterations,
                batch_size,
            },
        })
    }
}

fn parse_err(what: &str) -> Error {
    Error::Parse {
        line: 0,
        reason: format!("critic text: bad or missing `{what}`"),
    }
}

pub(crate) struct Header(Vec<(String, String)>);

impl Header {
    fn parse(text: &str) -> Self {
        Header(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .filter_map(|l| l.split_once(' ').map(|(k, v)| (k.to_string(), v.trim().to_string())))
                .collect(),
        )
    }

    fn get(&self, key: &str) -> Result<&str> {
        self.0
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| parse_err(key))
    }

    fn floats(&self, key: &str) -> Result<Vec<f64>> {
        self.get(key)?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_err(key)))
            .collect()
    }
}

fn write_encoder(e: &InputEncoder, out: &mut String) {
    out.push_str(&format!("state_dim {}\n", e.state_dim));
    if let Some(b) = &e.state_bounds {
        out.push_str("state_bounds");
        for (lo, hi) in b {
            out.push_str(&format!(" {lo:?} {hi:?}"));
        }
        out.push('\n');
    }
    match e.actions {
        ActionSpace::Discrete(n) => out.push_str(&format!("actions discrete {n}\n")),
        ActionSpace::Continuous(n) => out.push_str(&format!("actions continuous {n}\n")),
    }
}

fn read_encoder(h: &Header) -> Result<InputEncoder> {
    let state_dim = h.get("state_dim")?.parse().map_err(|_| parse_err("state_dim"))?;
    let actions = match h.get("actions")?.split_once(' ') {
        Some(("discrete", n)) => ActionSpace::Discrete(n.parse().map_err(|_| parse_err("actions"))?),
        Some(("continuous", n)) => ActionSpace::Continuous(n.parse().map_err(|_| parse_err("actions"))?),
        _ => return Err(parse_err("actions")),
    };
    let mut e = InputEncoder::new(state_dim, actions);
    if let Ok(b) = h.floats("state_bounds") {
        e.state_bounds = Some(b.chunks(2).map(|c| (c[0], c[1])).collect());
    }
    Ok(e)
}

fn split_header(text: &str) -> Result<(Header, &str)> {
    let at = text.find("\nsizes").ok_or_else(|| parse_err("sizes"))?;
    Ok((Header::parse(&text[..at]), &text[at + 1..]))
}

/// Distributional critic backed by an MLP.
#[derive(Debug, Clone)]
pub struct NetworkCritic {
    pub(crate) disc: Discretization,
    encoder: InputEncoder,
    trainer: Trainer,
}

impl NetworkCritic {
    pub fn new<R: Rng + ?Sized>(
        disc: Discretization,
        encoder: InputEncoder,
        config: NetworkConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let trainer = Trainer::new(encoder.width(), disc.n(), config, rng)?;
        Ok(Self { disc, encoder, trainer })
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn encoder(&self) -> &InputEncoder {
        &self.encoder
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.trainer.config
    }

    pub fn set_iterations(&mut self, iterations: usize) {
        self.trainer.config.iterations = iterations;
    }

    pub fn num_params(&self) -> usize {
        self.trainer.net.num_params()
    }

    pub fn params(&self) -> &[f64] {
        self.trainer.net.params()
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        self.trainer.net.params_mut()
    }

    pub fn logits(&self, sample: &Sample) -> Vec<f64> {
        self.trainer.net.forward(&self.encoder.encode(sample))
    }

    pub fn predict_distribution(&self, sample: &Sample) -> Vec<f64> {
        softmax(&self.logits(sample))
    }

    fn ce_loss<'a>(labels: &'a [usize]) -> impl Fn(&[f64], usize) -> (f64, Vec<f64>) + 'a {
        move |out, i| softmax_cross_entropy(out, labels[i])
    }

    /// Mean cross-entropy over the batch and its analytic gradient.
    pub fn loss_gradient(&self, samples: &[Sample], labels: &[usize]) -> (f64, Vec<f64>) {
        let xs: Vec<Vec<f64>> = samples.iter().map(|s| self.encoder.encode(s)).collect();
        let idx: Vec<usize> = (0..xs.len()).collect();
        self.trainer.loss_grad(&xs, &idx, &Self::ce_loss(labels))
    }

    /// Configured number of Adam steps on cross-entropy; returns the
    /// post-training mean loss on the batch.
    pub fn train_epoch<R: Rng + ?Sized>(&mut self, samples: &[Sample], labels: &[usize], rng: &mut R) -> Result<f64> {
        let _scope = TrainingScope::enter();
        assert_eq!(samples.len(), labels.len());
        if let Some(&bad) = labels.iter().find(|&&y| y >= self.disc.n()) {
            return Err(Error::Usage(format!("label {bad} out of range")));
        }
        let xs: Vec<Vec<f64>> = samples.iter().map(|s| self.encoder.encode(s)).collect();
        self.trainer.optimize(&xs, Self::ce_loss(labels), rng)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# distributional reward critic v1\n");
        s.push_str("# header: key value lines; then the mlp block; then adam state\n");
        s.push_str("kind distributional\n");
        s.push_str(&format!(
            "range {:?} {:?} {}\n",
            self.disc.r_min(),
            self.disc.r_max(),
            self.disc.n()
        ));
        write_encoder(&self.encoder, &mut s);
        self.trainer.write_text(&mut s);
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (h, body) = split_header(text)?;
        if h.get("kind")? != "distributional" {
            return Err(parse_err("kind"));
        }
        let r = h.floats("range")?;
        if r.len() != 3 {
            return Err(parse_err("range"));
        }
        let disc = Discretization::new(r[0], r[1], r[2] as usize)?;
        let encoder = read_encoder(&h)?;
        let trainer = Trainer::read_text(&h, body)?;
        if trainer.net.outputs() != disc.n() || trainer.net.inputs() != encoder.width() {
            return Err(parse_err("sizes"));
        }
        Ok(Self { disc, encoder, trainer })
    }

    pub(crate) fn text_parts(text: &str) -> Result<(Header, &str)> {
        split_header(text)
    }

    pub(crate) fn encoder_from(h: &Header) -> Result<InputEncoder> {
        read_encoder(h)
    }

    pub(crate) fn write_encoder_to(e: &InputEncoder, out: &mut String) {
        write_encoder(e, out)
    }

    pub(crate) fn trainer_from(h: &Header, body: &str) -> Result<Trainer> {
        Trainer::read_text(h, body)
    }

    pub(crate) fn write_trainer_to(t: &Trainer, out: &mut String) {
        t.write_text(out)
    }

    pub(crate) fn header_get<'a>(h: &'a Header, key: &str) -> Result<&'a str> {
        h.get(key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critic::mean_cross_entropy;
    use crate::perturb::{gcm_perturb, ConfusionMatrix};
    use crate::rng::{RunRng, Stream};

    fn four_keys() -> InputEncoder {
        InputEncoder::new(4, ActionSpace::Discrete(1))
    }

    fn onehot(i: usize) -> Vec<f64> {
        (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect()
    }

    fn critic(n: usize, iterations: usize, batch: Option<usize>) -> NetworkCritic {
        let d = Discretization::new(0.0, n as f64, n).unwrap();
        let cfg = NetworkConfig {
            iterations,
            batch_size: batch,
            ..Default::default()
        };
        NetworkCritic::new(d, four_keys(), cfg, &mut RunRng::new(3).stream(Stream::Init)).unwrap()
    }

    #[test]
    fn outputs_are_distributions() {
        let c = critic(5, 0, None);
        let p = c.predict_distribution(&Sample::discrete(onehot(2), 0, 0.0));
        assert_eq!(p.len(), 5);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert!(p.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn memorises_single_sample() {
        let mut c = critic(4, 200, None);
        let s = vec![Sample::discrete(onehot(1), 0, 2.5)];
        let mut rng = RunRng::new(0).stream(Stream::Agent);
        let loss = c.train_epoch(&s, &[2], &mut rng).unwrap();
        assert!(loss < 0.01, "loss {loss}");
    }

    #[test]
    fn unlearnable_labels_hit_entropy_floor() {
        let mut c = critic(4, 300, Some(256));
        let mut rng = RunRng::new(8).stream(Stream::Data);
        let samples: Vec<Sample> = (0..4000).map(|i| Sample::discrete(onehot(i % 4), 0, 0.0)).collect();
        let labels: Vec<usize> = (0..4000).map(|_| rng.random_range(0..4)).collect();
        let mut train_rng = RunRng::new(8).stream(Stream::Agent);
        let mut loss = 0.0;
        for _ in 0..5 {
            loss = c.train_epoch(&samples, &labels, &mut train_rng).unwrap();
        }
        assert!((loss - 4f64.ln()).abs() < 0.02, "loss {loss}");
    }

    #[test]
    fn zero_iterations_leave_parameters() {
        let mut c = critic(3, 0, None);
        let before = c.params().to_vec();
        let s = vec![Sample::discrete(onehot(0), 0, 0.5); 3];
        let labels = [0, 1, 2];
        let pre = mean_cross_entropy(&c, &s, &labels);
        let loss = c
            .train_epoch(&s, &labels, &mut RunRng::new(0).stream(Stream::Agent))
            .unwrap();
        assert_eq!(c.params(), &before[..]);
        assert!((loss - pre).abs() < 1e-12);
    }

    #[test]
    fn empty_batch_is_an_error() {
        let mut c = critic(3, 5, None);
        assert!(c
            .train_epoch(&[], &[], &mut RunRng::new(0).stream(Stream::Agent))
            .is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let mut c = critic(3, 3, None);
        c.params_mut()[0] = f64::NAN;
        let s = vec![Sample::discrete(onehot(0), 0, 0.5)];
        let err = c
            .train_epoch(&s, &[0], &mut RunRng::new(0).stream(Stream::Agent))
            .unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }

    #[test]
    fn learns_channel_rows() {
        // four keys with true labels 0..4 under a mode-preserving channel
        let d = Discretization::new(0.0, 4.0, 4).unwrap();
        let ch = ConfusionMatrix::uniform(4, 0.5).unwrap();
        let mut noise = RunRng::new(4).stream(Stream::Noise);
        let samples: Vec<Sample> = (0..10_000)
            .map(|i| {
                let k = i % 4;
                let r = k as f64 + 0.5;
                Sample::discrete(onehot(k), 0, gcm_perturb(&d, &ch, r, &mut noise).unwrap().r_tilde)
            })
            .collect();
        let labels: Vec<usize> = samples.iter().map(|s| d.label(s.r_tilde).index).collect();
        let cfg = NetworkConfig {
            iterations: 2000,
            batch_size: Some(512),
            ..Default::default()
        };
        let mut c = NetworkCritic::new(d, four_keys(), cfg, &mut RunRng::new(4).stream(Stream::Init)).unwrap();
        let mut rng = RunRng::new(4).stream(Stream::Agent);
        c.train_epoch(&samples, &labels, &mut rng).unwrap();
        // the cross-entropy optimum is the empirical label frequency per key
        let mut freq = [[0.0; 4]; 4];
        for (i, &l) in labels.iter().enumerate() {
            freq[i % 4][l] += 4.0 / labels.len() as f64;
        }
        for k in 0..4 {
            let p = c.predict_distribution(&Sample::discrete(onehot(k), 0, 0.0));
            let tv_row: f64 = freq[k].iter().zip(ch.row(k)).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
            assert!(tv_row < 0.03);
            let tv: f64 = p.iter().zip(&freq[k]).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
            assert!(tv < 0.05, "key {k}: tv {tv}, p {p:?}");
        }
    }

    #[test]
    fn text_round_trip() {
        let mut c = critic(3, 2, None);
        let s = vec![Sample::discrete(onehot(0), 0, 0.5); 2];
        c.train_epoch(&s, &[0, 1], &mut RunRng::new(0).stream(Stream::Agent))
            .unwrap();
        let text = c.to_text();
        let back = NetworkCritic::from_text(&text).unwrap();
        assert_eq!(back.params(), c.params());
        assert_eq!(back.to_text(), text);
        assert!(NetworkCritic::from_text("kind distributional\n").is_err());
    }
}
