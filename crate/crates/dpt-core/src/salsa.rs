//! Spatial-angular locally-enhanced self-attention (SA-LSA).
//!
//! One layer runs three steps over an angular sequence F of shape
//! [A, C, H, W]: convolutional tokenization (1x1 projections, then
//! overlapping-patch extraction across all A views jointly), fully connected
//! attention over the tokens, and convolutional de-tokenization (fold, 1x1
//! projection, residual). Because tokens are drawn from every view of the
//! sequence, attention is jointly spatial and angular.
//!
//! The cross-attention variant draws queries from one stream and keys/values
//! from another, with the residual on the query stream.

use rand::Rng;

use crate::error::{config_err, dim_err, Result};
use crate::nn::{Conv2d, Linear};
use crate::tensor::Tensor;

/// Token projection style. `Conv` is the locally-enhanced design (1x1
/// convolution before patch extraction); `Linear` is the ViT-style ablation
/// (plain linear map over flattened patches).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tokenizer {
    Conv,
    Linear,
}

#[derive(Clone, Copy, Debug)]
pub struct SalsaConfig {
    pub channels: usize,
    pub patch: (usize, usize),
    pub stride: (usize, usize),
    /// Scale attention logits by 1/sqrt(d) (default). The literal reading
    /// of the attention equation has no scale; toggle for that behavior.
    pub scaled_attention: bool,
    pub tokenizer: Tokenizer,
    /// Whether the Q/K/V/P projections carry bias terms.
    pub bias: bool,
}

impl SalsaConfig {
    pub fn new(channels: usize) -> SalsaConfig {
        SalsaConfig {
            channels,
            patch: (4, 4),
            stride: (2, 2),
            scaled_attention: true,
            tokenizer: Tokenizer::Conv,
            bias: true,
        }
    }

    /// Token feature dimension d = C * Hp * Wp.
    pub fn token_dim(&self) -> usize {
        self.channels * self.patch.0 * self.patch.1
    }
}

/// Fully connected attention over token rows:
/// softmax(Q K^T * s) V, with s = 1/sqrt(d) when `scaled`, else 1.
pub fn attend(q: &Tensor, k: &Tensor, v: &Tensor, scaled: bool) -> Result<Tensor> {
    if q.ndim() != 2 || k.ndim() != 2 || v.ndim() != 2 {
        return dim_err("attend wants 2-D token matrices".to_string());
    }
    if q.shape()[1] != k.shape()[1] || k.shape()[0] != v.shape()[0] {
        return dim_err(format!(
            "attend: Q {:?}, K {:?}, V {:?}",
            q.shape(),
            k.shape(),
            v.shape()
        ));
    }
    let logits = q.matmul(&k.transpose(0, 1)?)?;
    let logits = if scaled {
        logits.scale(1.0 / (q.shape()[1] as f64).sqrt())
    } else {
        logits
    };
    logits.softmax_rows()?.matmul(v)
}

enum Projection {
    Conv(Conv2d),
    Linear(Linear),
}

impl Projection {
    fn new<R: Rng>(config: &SalsaConfig, zero: bool, rng: &mut R) -> Projection {
        let c = config.channels;
        match config.tokenizer {
            Tokenizer::Conv => Projection::Conv(if zero {
                Conv2d::zeros(c, c, 1, config.bias)
            } else {
                Conv2d::new(c, c, 1, 1, 0, 1, config.bias, rng)
            }),
            Tokenizer::Linear => {
                let d = config.token_dim();
                Projection::Linear(if zero {
                    Linear::zeros(d, d, config.bias)
                } else {
                    Linear::new(d, d, config.bias, rng)
                })
            }
        }
    }

    fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        match self {
            Projection::Conv(c) => c.collect_params(prefix, out),
            Projection::Linear(l) => l.collect_params(prefix, out),
        }
    }

    fn param_count(&self) -> usize {
        match self {
            Projection::Conv(c) => c.param_count(),
            Projection::Linear(l) => l.param_count(),
        }
    }
}

/// One SA-LSA layer: f_Q, f_K, f_V projections, attention, f_P
/// de-tokenization projection. f_P starts at zero, so a fresh layer is the
/// identity on its residual stream.
pub struct SalsaLayer {
    pub config: SalsaConfig,
    proj_q: Projection,
    proj_k: Projection,
    proj_v: Projection,
    proj_p: Projection,
}

impl SalsaLayer {
    pub fn new<R: Rng>(config: SalsaConfig, rng: &mut R) -> SalsaLayer {
        SalsaLayer {
            proj_q: Projection::new(&config, false, rng),
            proj_k: Projection::new(&config, false, rng),
            proj_v: Projection::new(&config, false, rng),
            proj_p: Projection::new(&config, true, rng),
            config,
        }
    }

    fn check_input(&self, f: &Tensor) -> Result<()> {
        if f.ndim() != 4 {
            return dim_err(format!("SA-LSA wants [A,C,H,W], got {:?}", f.shape()));
        }
        if f.shape()[1] != self.config.channels {
            return config_err(format!(
                "SA-LSA configured for C={}, got {:?}",
                self.config.channels,
                f.shape()
            ));
        }
        Ok(())
    }

    fn tokenize_with(&self, proj: &Projection, f: &Tensor) -> Result<Tensor> {
        match proj {
            Projection::Conv(conv) => conv.forward(f)?.unfold(self.config.patch, self.config.stride),
            Projection::Linear(lin) => lin.forward(&f.unfold(self.config.patch, self.config.stride)?),
        }
    }

    /// Tokens for an external projection choice; exposed for tests of the
    /// tokenization geometry.
    pub fn tokenize_query(&self, f: &Tensor) -> Result<Tensor> {
        self.check_input(f)?;
        self.tokenize_with(&self.proj_q, f)
    }

    fn detokenize(&self, tokens: &Tensor, residual: &Tensor) -> Result<Tensor> {
        let projected = match &self.proj_p {
            Projection::Conv(conv) => {
                let folded = Tensor::fold(
                    tokens,
                    residual.shape(),
                    self.config.patch,
                    self.config.stride,
                )?;
                conv.forward(&folded)?
            }
            Projection::Linear(lin) => Tensor::fold(
                &lin.forward(tokens)?,
                residual.shape(),
                self.config.patch,
                self.config.stride,
            )?,
        };
        projected.add(residual)
    }

    /// Self-attention over one angular sequence; output shape equals input
    /// shape.
    pub fn forward(&self, f: &Tensor) -> Result<Tensor> {
        self.cross_forward(f, f)
    }

    /// Cross-attention: queries from `queries`, keys and values from
    /// `context`, residual on `queries`. With `context = queries` this is
    /// exactly [`SalsaLayer::forward`].
    pub fn cross_forward(&self, queries: &Tensor, context: &Tensor) -> Result<Tensor> {
        self.check_input(queries)?;
        if queries.shape() != context.shape() {
            return dim_err(format!(
                "cross-attention streams differ: {:?} vs {:?}",
                queries.shape(),
                context.shape()
            ));
        }
        let q = self.tokenize_with(&self.proj_q, queries)?;
        let k = self.tokenize_with(&self.proj_k, context)?;
        let v = self.tokenize_with(&self.proj_v, context)?;
        let mixed = attend(&q, &k, &v, self.config.scaled_attention)?;
        self.detokenize(&mixed, queries)
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        self.proj_q.collect_params(&format!("{prefix}.q"), out);
        self.proj_k.collect_params(&format!("{prefix}.k"), out);
        self.proj_v.collect_params(&format!("{prefix}.v"), out);
        self.proj_p.collect_params(&format!("{prefix}.p"), out);
    }

    pub fn param_count(&self) -> usize {
        self.proj_q.param_count()
            + self.proj_k.param_count()
            + self.proj_v.param_count()
            + self.proj_p.param_count()
    }
}
