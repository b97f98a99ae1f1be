//! Parameter and compute accounting for a decoder-only Transformer.
//!
//! Counts follow the per-operation itemization: biases, layer norms and
//! nonlinearities are omitted, and token/positional embeddings are kept out
//! of the model size `N`.

#[allow(unused_imports)] // unused when std's inherent float methods are linked
use num_traits::Float;

use crate::error::{positive, Error, Result};
use crate::PF_DAY_FLOPS;

/// Architectural hyperparameters.
///
/// `n_ctx` may be zero (the attention-mask term then vanishes); every other
/// field must be positive and `d_attn` must split evenly across `n_heads`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransformerShape {
    pub n_layer: u64,
    pub d_model: u64,
    pub d_ff: u64,
    pub d_attn: u64,
    pub n_heads: u64,
    pub n_ctx: u64,
    pub n_vocab: u64,
}

impl TransformerShape {
    /// Shape with the standard ratios `d_attn = d_model`, `d_ff = 4 d_model`.
    pub fn standard(n_layer: u64, d_model: u64, n_heads: u64, n_ctx: u64, n_vocab: u64) -> Self {
        Self {
            n_layer,
            d_model,
            d_ff: 4 * d_model,
            d_attn: d_model,
            n_heads,
            n_ctx,
            n_vocab,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            (self.n_layer, "n_layer must be positive"),
            (self.d_model, "d_model must be positive"),
            (self.d_ff, "d_ff must be positive"),
            (self.d_attn, "d_attn must be positive"),
            (self.n_heads, "n_heads must be positive"),
            (self.n_vocab, "n_vocab must be positive"),
        ];
        for (value, msg) in positive {
            if value == 0 {
                return Err(Error::InvalidShape(msg));
            }
        }
        if !self.d_attn.is_multiple_of(self.n_heads) {
            return Err(Error::InvalidShape("d_attn must be divisible by n_heads"));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> u64 {
        self.d_attn / self.n_heads
    }
}

/// Per-operation parameter counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamBreakdown {
    /// Token plus positional embeddings, `(n_vocab + n_ctx) d_model`. Not part of `N`.
    pub embed: u128,
    pub attn_qkv: u128,
    pub attn_project: u128,
    pub feedforward: u128,
    /// `N`, the model size used by every scaling law.
    pub total_non_embedding: u128,
}

/// Forward-pass FLOPs per token, itemized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlopBreakdown {
    pub embed: u128,
    pub attn_qkv: u128,
    pub attn_mask: u128,
    pub attn_project: u128,
    pub feedforward: u128,
    pub de_embed: u128,
    /// `2N + 2 n_layer n_ctx d_attn`. Embed and de-embed rows are excluded.
    pub c_forward: u128,
    /// Training FLOPs per token with context terms dropped: `6N`.
    pub c_train_per_token: u128,
    /// Training FLOPs per token keeping the context term: `3 c_forward`.
    pub c_train_with_context: u128,
}

pub fn non_embedding_params(shape: &TransformerShape) -> Result<ParamBreakdown> {
    shape.validate()?;
    let n_layer = shape.n_layer as u128;
    let d_model = shape.d_model as u128;
    let d_attn = shape.d_attn as u128;
    let d_ff = shape.d_ff as u128;

    let attn_qkv = n_layer * d_model * 3 * d_attn;
    let attn_project = n_layer * d_attn * d_model;
    let feedforward = n_layer * 2 * d_model * d_ff;
    Ok(ParamBreakdown {
        embed: (shape.n_vocab as u128 + shape.n_ctx as u128) * d_model,
        attn_qkv,
        attn_project,
        feedforward,
        total_non_embedding: attn_qkv + attn_project + feedforward,
    })
}

pub fn forward_flops_per_token(shape: &TransformerShape) -> Result<FlopBreakdown> {
    let params = non_embedding_params(shape)?;
    let n_layer = shape.n_layer as u128;
    let d_model = shape.d_model as u128;
    let d_attn = shape.d_attn as u128;
    let n_ctx = shape.n_ctx as u128;

    let attn_mask = 2 * n_layer * n_ctx * d_attn;
    let n = params.total_non_embedding;
    let c_forward = 2 * n + attn_mask;
    Ok(FlopBreakdown {
        embed: 4 * d_model,
        attn_qkv: 2 * params.attn_qkv,
        attn_mask,
        attn_project: 2 * params.attn_project,
        feedforward: 2 * params.feedforward,
        de_embed: 2 * d_model * shape.n_vocab as u128,
        c_forward,
        c_train_per_token: 6 * n,
        c_train_with_context: 3 * c_forward,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainingCompute {
    pub flops: f64,
    pub pf_days: f64,
}

impl TrainingCompute {
    pub fn from_flops(flops: f64) -> Self {
        Self {
            flops,
            pf_days: flops / PF_DAY_FLOPS,
        }
    }

    pub fn from_pf_days(pf_days: f64) -> Self {
        Self {
            flops: pf_days * PF_DAY_FLOPS,
            pf_days,
        }
    }
}

/// `C = 6 N B S`: non-embedding training compute for `steps` updates of
/// `batch_tokens` tokens on a model with `n_params` non-embedding parameters.
pub fn training_compute(n_params: f64, batch_tokens: f64, steps: f64) -> Result<TrainingCompute> {
    positive("n_params", n_params)?;
    positive("batch_tokens", batch_tokens)?;
    positive("steps", steps)?;
    Ok(TrainingCompute::from_flops(6.0 * n_params * batch_tokens * steps))
}

/// Largest model size for which the learning-rate rule of thumb holds.
pub const LR_HINT_MAX_PARAMS: f64 = 1e10;

/// Learning-rate rule of thumb `0.003239 - 0.0001395 ln N`.
pub fn lr_hint(n_params: f64) -> Result<f64> {
    if !(n_params > 0.0 && n_params <= LR_HINT_MAX_PARAMS) {
        return Err(Error::OutOfRange {
            what: "n_params",
            value: n_params,
            min: 0.0,
            max: LR_HINT_MAX_PARAMS,
        });
    }
    Ok(0.003239 - 0.0001395 * n_params.ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_shape() {
        let shape = TransformerShape {
            n_layer: 1,
            d_model: 1,
            d_ff: 1,
            d_attn: 1,
            n_heads: 1,
            n_ctx: 1,
            n_vocab: 1,
        };
        assert_eq!(non_embedding_params(&shape).unwrap().total_non_embedding, 6);
    }

    #[test]
    fn billion_parameter_reference_model() {
        let shape = TransformerShape::standard(48, 1600, 25, 1024, 50257);
        let params = non_embedding_params(&shape).unwrap();
        assert_eq!(params.total_non_embedding, 1_474_560_000);
        assert_eq!(params.embed, (50257 + 1024) * 1600);

        let flops = forward_flops_per_token(&shape).unwrap();
        assert_eq!(flops.c_forward, 2 * 1_474_560_000 + 2 * 48 * 1024 * 1600);
        assert_eq!(flops.c_forward, 3_106_406_400);
        assert_eq!(flops.c_train_per_token, 6 * 1_474_560_000);
    }

    #[test]
    fn context_term_is_small_for_short_contexts() {
        // the context term is n_ctx / (12 d_model) of 2N
        let shape = TransformerShape::standard(24, 1024, 16, 1024, 50257);
        let f = forward_flops_per_token(&shape).unwrap();
        let n = non_embedding_params(&shape).unwrap().total_non_embedding;
        assert_eq!(f.attn_mask * 12, 2 * n);
        let short = TransformerShape::standard(24, 1024, 16, 128, 50257);
        assert!(forward_flops_per_token(&short).unwrap().attn_mask * 12 * 8 == 2 * n);
    }

    #[test]
    fn zero_context_is_allowed() {
        let shape = TransformerShape::standard(4, 256, 4, 0, 100);
        let f = forward_flops_per_token(&shape).unwrap();
        let n = non_embedding_params(&shape).unwrap().total_non_embedding;
        assert_eq!(f.c_forward, 2 * n);
        assert_eq!(f.c_train_with_context, f.c_train_per_token);
    }

    #[test]
    fn invalid_shapes() {
        let mut shape = TransformerShape::standard(4, 256, 3, 128, 100);
        assert_eq!(
            non_embedding_params(&shape),
            Err(Error::InvalidShape("d_attn must be divisible by n_heads"))
        );
        shape.n_heads = 4;
        shape.n_layer = 0;
        assert!(non_embedding_params(&shape).is_err());
    }

    #[test]
    fn training_compute_examples() {
        assert_eq!(training_compute(1.0, 1.0, 1.0).unwrap().flops, 6.0);
        assert_eq!(TrainingCompute::from_pf_days(1.0).flops, 8.64e19);

        let c = training_compute(1.4746e9, (1u64 << 19) as f64, 2.5e5).unwrap();
        assert!((c.flops / 1.159e21 - 1.0).abs() < 1e-3);
        assert!((c.pf_days - 13.42).abs() < 0.01);
        assert!(training_compute(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn lr_rule_of_thumb() {
        assert!((lr_hint(1.0).unwrap() - 0.003239).abs() < 1e-15);
        // mpmath: 2.68937952733063e-5 and 0.00115847986289478
        assert!((lr_hint(1e10).unwrap() - 2.68937952733063e-5).abs() < 1e-15);
        assert!((lr_hint(3e6).unwrap() - 0.00115847986289478).abs() < 1e-15);
        assert!(matches!(lr_hint(1.0001e10), Err(Error::OutOfRange { .. })));
        assert!(lr_hint(0.0).is_err());
        assert!(lr_hint(f64::NAN).is_err());
    }
}
