use scalelaw_core::arch::TransformerShape;

use crate::error::Result;

/// Shape document; `d_attn` and `d_ff` default to the standard ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeFile {
    pub n_layer: u64,
    pub d_model: u64,
    pub d_ff: Option<u64>,
    pub d_attn: Option<u64>,
    pub n_heads: u64,
    pub n_ctx: u64,
    pub n_vocab: u64,
}

impl ShapeFile {
    pub fn into_shape(self) -> TransformerShape {
        TransformerShape {
            d_attn: self.d_attn.unwrap_or(self.d_model),
            d_ff: self.d_ff.unwrap_or(4 * self.d_model),
            ..TransformerShape::standard(self.n_layer, self.d_model, self.n_heads, self.n_ctx, self.n_vocab)
        }
    }
}

pub fn parse_shape(text: &str) -> Result<TransformerShape> {
    let file: ShapeFile = serde_json::from_str(text)?;
    let shape = file.into_shape();
    shape.validate()?;
    Ok(shape)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_standard_ratios() {
        let s = parse_shape(r#"{"n_layer":48,"d_model":1600,"n_heads":25,"n_ctx":1024,"n_vocab":50257}"#).unwrap();
        assert_eq!((s.d_attn, s.d_ff), (1600, 6400));
        let s = parse_shape(r#"{"n_layer":2,"d_model":64,"d_attn":32,"d_ff":100,"n_heads":2,"n_ctx":8,"n_vocab":10}"#)
            .unwrap();
        assert_eq!((s.d_attn, s.d_ff), (32, 100));
    }

    #[test]
    fn invalid_documents() {
        assert_eq!(parse_shape("{}").unwrap_err().code, "invalid_json");
        let bad_heads = r#"{"n_layer":2,"d_model":64,"n_heads":3,"n_ctx":8,"n_vocab":10}"#;
        assert_eq!(parse_shape(bad_heads).unwrap_err().code, "invalid_shape");
    }
}
