//! Regression critic baseline: fits `E[r̃ | s, a]` by mean squared error and
//! uses the prediction directly as the corrected reward.

use rand::Rng;

use super::network::{NetworkCritic, Trainer};
use super::{InputEncoder, NetworkConfig, Sample};
use crate::audit::TrainingScope;
use crate::error::{Error, Result};
use crate::nn::squared_error;

#[derive(Debug, Clone)]
pub struct RegressionCritic {
    encoder: InputEncoder,
    trainer: Trainer,
}

impl RegressionCritic {
    pub fn new<R: Rng + ?Sized>(encoder: InputEncoder, config: NetworkConfig, rng: &mut R) -> Result<Self> {
        let trainer = Trainer::new(encoder.width(), 1, config, rng)?;
        Ok(Self { encoder, trainer })
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

    pub fn loss_gradient(&self, samples: &[Sample]) -> (f64, Vec<f64>) {
        let xs: Vec<Vec<f64>> = samples.iter().map(|s| self.encoder.encode(s)).collect();
        let idx: Vec<usize> = (0..xs.len()).collect();
        let targets: Vec<f64> = samples.iter().map(|s| s.r_tilde).collect();
        self.trainer
            .loss_grad(&xs, &idx, &|out: &[f64], i| squared_error(out, targets[i]))
    }

    /// Adam steps on squared error to the observed rewards; returns the
    /// post-training mean squared error.
    pub fn re_train<R: Rng + ?Sized>(&mut self, samples: &[Sample], rng: &mut R) -> Result<f64> {
        let _scope = TrainingScope::enter();
        let xs: Vec<Vec<f64>> = samples.iter().map(|s| self.encoder.encode(s)).collect();
        let targets: Vec<f64> = samples.iter().map(|s| s.r_tilde).collect();
        self.trainer
            .optimize(&xs, |out: &[f64], i| squared_error(out, targets[i]), rng)
    }

    pub fn re_predict(&self, sample: &Sample) -> f64 {
        self.trainer.net.forward(&self.encoder.encode(sample))[0]
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# regression reward critic v1\n");
        s.push_str("kind regression\n");
        NetworkCritic::write_encoder_to(&self.encoder, &mut s);
        NetworkCritic::write_trainer_to(&self.trainer, &mut s);
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (h, body) = NetworkCritic::text_parts(text)?;
        if NetworkCritic::header_get(&h, "kind")? != "regression" {
            return Err(Error::Parse {
                line: 0,
                reason: "not a regression critic".into(),
            });
        }
        let encoder = NetworkCritic::encoder_from(&h)?;
        let trainer = NetworkCritic::trainer_from(&h, body)?;
        Ok(Self { encoder, trainer })
    }
}
