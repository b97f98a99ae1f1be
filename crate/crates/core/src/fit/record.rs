use alloc::string::String;

use crate::error::{Error, Result};

/// One logged evaluation of a training run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunRecord {
    pub run_id: String,
    /// Non-embedding parameters.
    pub n_params: f64,
    pub n_layer: u32,
    /// Tokens per optimizer step.
    pub batch_tokens: f64,
    pub step: u64,
    /// nats/token
    pub test_loss: f64,
    pub train_loss: Option<f64>,
    /// Set for finite-data runs; `None` means the data never repeats.
    pub dataset_tokens: Option<f64>,
    pub warmup_steps: u64,
}

impl RunRecord {
    pub fn validate(&self) -> Result<()> {
        fn bad(msg: &'static str) -> Result<()> {
            Err(Error::Degenerate(String::from(msg)))
        }
        if self.run_id.is_empty() {
            return bad("run_id is empty");
        }
        if !(self.n_params.is_finite() && self.n_params > 0.0) {
            return bad("n_params must be positive");
        }
        if self.n_layer == 0 {
            return bad("n_layer must be at least 1");
        }
        if !(self.batch_tokens.is_finite() && self.batch_tokens >= 1.0) {
            return bad("batch_tokens must be at least 1");
        }
        if self.step == 0 {
            return bad("step must be at least 1");
        }
        if !(self.test_loss.is_finite() && self.test_loss > 0.0) {
            return bad("test_loss must be positive");
        }
        if let Some(train) = self.train_loss {
            if !(train.is_finite() && train > 0.0) {
                return bad("train_loss must be positive");
            }
        }
        if let Some(d) = self.dataset_tokens {
            if !(d.is_finite() && d > 0.0) {
                return bad("dataset_tokens must be positive");
            }
        }
        Ok(())
    }
}
