//! Convolutional building blocks of the model: residual + atrous-pyramid
//! feature extraction, the parameter-matched conv branch, and the
//! multi-distillation reconstruction head.

use rand::Rng;

use crate::error::{config_err, Result};
use crate::nn::Conv2d;
use crate::tensor::Tensor;

const LEAK: f64 = 0.1;

/// Two 3x3 convolutions with a skip: x + conv2(lrelu(conv1(x))).
pub struct ResidualBlock {
    conv1: Conv2d,
    conv2: Conv2d,
}

impl ResidualBlock {
    pub fn new<R: Rng>(channels: usize, hidden: usize, rng: &mut R) -> ResidualBlock {
        ResidualBlock {
            conv1: Conv2d::new(channels, hidden, 3, 1, 1, 1, true, rng),
            conv2: Conv2d::new(hidden, channels, 3, 1, 1, 1, true, rng),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let h = self.conv1.forward(x)?.leaky_relu(LEAK);
        self.conv2.forward(&h)?.add(x)
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        self.conv1.collect_params(&format!("{prefix}.conv1"), out);
        self.conv2.collect_params(&format!("{prefix}.conv2"), out);
    }

    pub fn param_count(&self) -> usize {
        self.conv1.param_count() + self.conv2.param_count()
    }
}

/// Residual atrous spatial pyramid: parallel 3x3 convolutions at dilations
/// 1, 2 and 4, summed onto the input.
pub struct Raspp {
    branches: [Conv2d; 3],
}

impl Raspp {
    pub fn new<R: Rng>(channels: usize, rng: &mut R) -> Raspp {
        let conv = |d: usize, rng: &mut R| Conv2d::new(channels, channels, 3, 1, d, d, true, rng);
        Raspp {
            branches: [conv(1, rng), conv(2, rng), conv(4, rng)],
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut acc = x.clone();
        for conv in &self.branches {
            acc = acc.add(&conv.forward(x)?.leaky_relu(LEAK))?;
        }
        Ok(acc)
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        for (conv, d) in self.branches.iter().zip([1, 2, 4]) {
            conv.collect_params(&format!("{prefix}.dil{d}"), out);
        }
    }

    pub fn param_count(&self) -> usize {
        self.branches.iter().map(Conv2d::param_count).sum()
    }
}

/// Per-SAI feature extractor: entry conv, then residual blocks interleaved
/// with atrous pyramids, then a plain 3x3 alignment conv shared across
/// views (no deformable convolution).
pub struct Extractor {
    entry: Conv2d,
    rb1: ResidualBlock,
    raspp1: Raspp,
    rb2: ResidualBlock,
    raspp2: Raspp,
    align: Conv2d,
}

impl Extractor {
    pub fn new<R: Rng>(channels: usize, rng: &mut R) -> Extractor {
        Extractor {
            entry: Conv2d::new(1, channels, 3, 1, 1, 1, true, rng),
            rb1: ResidualBlock::new(channels, channels, rng),
            raspp1: Raspp::new(channels, rng),
            rb2: ResidualBlock::new(channels, channels, rng),
            raspp2: Raspp::new(channels, rng),
            align: Conv2d::new(channels, channels, 3, 1, 1, 1, true, rng),
        }
    }

    pub fn output_channels(&self) -> usize {
        self.align.weight.shape()[0]
    }

    /// [B,1,H,W] -> [B,C,H,W], applied per SAI (B is the flattened view
    /// grid).
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let h = self.entry.forward(x)?.leaky_relu(LEAK);
        let h = self.rb1.forward(&h)?;
        let h = self.raspp1.forward(&h)?;
        let h = self.rb2.forward(&h)?;
        let h = self.raspp2.forward(&h)?;
        self.align.forward(&h)
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        self.entry.collect_params(&format!("{prefix}.entry"), out);
        self.rb1.collect_params(&format!("{prefix}.rb1"), out);
        self.raspp1.collect_params(&format!("{prefix}.raspp1"), out);
        self.rb2.collect_params(&format!("{prefix}.rb2"), out);
        self.raspp2.collect_params(&format!("{prefix}.raspp2"), out);
        self.align.collect_params(&format!("{prefix}.align"), out);
    }

    pub fn param_count(&self) -> usize {
        self.entry.param_count()
            + self.rb1.param_count()
            + self.raspp1.param_count()
            + self.rb2.param_count()
            + self.raspp2.param_count()
            + self.align.param_count()
    }
}

/// Information multi-distillation block: three split stages that each peel
/// off a quarter of the channels, a tail conv producing the final quarter,
/// a 1x1 fuse and a residual.
pub struct Imdb {
    conv1: Conv2d,
    conv2: Conv2d,
    conv3: Conv2d,
    conv4: Conv2d,
    fuse: Conv2d,
    channels: usize,
}

impl Imdb {
    pub fn new<R: Rng>(channels: usize, rng: &mut R) -> Result<Imdb> {
        if channels % 4 != 0 {
            return config_err(format!(
                "IMDB channels must be divisible by 4, got {channels}"
            ));
        }
        let rest = channels / 4 * 3;
        Ok(Imdb {
            conv1: Conv2d::new(channels, channels, 3, 1, 1, 1, true, rng),
            conv2: Conv2d::new(rest, channels, 3, 1, 1, 1, true, rng),
            conv3: Conv2d::new(rest, channels, 3, 1, 1, 1, true, rng),
            conv4: Conv2d::new(rest, channels / 4, 3, 1, 1, 1, true, rng),
            fuse: Conv2d::new(channels, channels, 1, 1, 0, 1, true, rng),
            channels,
        })
    }

    fn split(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        let quarter = self.channels / 4;
        Ok((
            x.slice(1, 0, quarter)?,
            x.slice(1, quarter, self.channels - quarter)?,
        ))
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (d1, r1) = self.split(&self.conv1.forward(x)?.leaky_relu(LEAK))?;
        let (d2, r2) = self.split(&self.conv2.forward(&r1)?.leaky_relu(LEAK))?;
        let (d3, r3) = self.split(&self.conv3.forward(&r2)?.leaky_relu(LEAK))?;
        let d4 = self.conv4.forward(&r3)?.leaky_relu(LEAK);
        let cat = Tensor::concat(&[&d1, &d2, &d3, &d4], 1)?;
        self.fuse.forward(&cat)?.add(x)
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        self.conv1.collect_params(&format!("{prefix}.conv1"), out);
        self.conv2.collect_params(&format!("{prefix}.conv2"), out);
        self.conv3.collect_params(&format!("{prefix}.conv3"), out);
        self.conv4.collect_params(&format!("{prefix}.conv4"), out);
        self.fuse.collect_params(&format!("{prefix}.fuse"), out);
    }

    pub fn param_count(&self) -> usize {
        self.conv1.param_count()
            + self.conv2.param_count()
            + self.conv3.param_count()
            + self.conv4.param_count()
            + self.fuse.param_count()
    }
}

/// SAI reconstruction: entry 1x1 to the distillation width, IMDB chain,
/// 1x1 to alpha^2 channels, pixel shuffle, final zero-initialized 1x1.
/// The caller adds the global bicubic skip.
pub struct ReconstructionHead {
    entry: Conv2d,
    imdbs: Vec<Imdb>,
    pre_shuffle: Conv2d,
    post_shuffle: Conv2d,
    alpha: usize,
}

impl ReconstructionHead {
    pub fn new<R: Rng>(
        in_channels: usize,
        recon_channels: usize,
        n_imdb: usize,
        alpha: usize,
        rng: &mut R,
    ) -> Result<ReconstructionHead> {
        let imdbs = (0..n_imdb)
            .map(|_| Imdb::new(recon_channels, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(ReconstructionHead {
            entry: Conv2d::new(in_channels, recon_channels, 1, 1, 0, 1, true, rng),
            imdbs,
            pre_shuffle: Conv2d::new(recon_channels, alpha * alpha, 1, 1, 0, 1, true, rng),
            // zero so the fresh model reproduces its bicubic skip exactly
            post_shuffle: Conv2d::zeros(1, 1, 1, true),
            alpha,
        })
    }

    /// [B,C_in,H,W] plus the per-view bicubic upsample [B,1,aH,aW].
    pub fn forward(&self, z: &Tensor, bicubic_skip: &Tensor) -> Result<Tensor> {
        let mut h = self.entry.forward(z)?.leaky_relu(LEAK);
        for imdb in &self.imdbs {
            h = imdb.forward(&h)?;
        }
        let up = self.pre_shuffle.forward(&h)?.pixel_shuffle(self.alpha)?;
        self.post_shuffle.forward(&up)?.add(bicubic_skip)
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        self.entry.collect_params(&format!("{prefix}.entry"), out);
        for (i, imdb) in self.imdbs.iter().enumerate() {
            imdb.collect_params(&format!("{prefix}.imdb{i}"), out);
        }
        self.pre_shuffle
            .collect_params(&format!("{prefix}.pre_shuffle"), out);
        self.post_shuffle
            .collect_params(&format!("{prefix}.post_shuffle"), out);
    }

    pub fn param_count(&self) -> usize {
        self.entry.param_count()
            + self.imdbs.iter().map(Imdb::param_count).sum::<usize>()
            + self.pre_shuffle.param_count()
            + self.post_shuffle.param_count()
    }
}

/// Drop-in replacement for a unimodal transformer (the conv ablation): K
/// residual stages whose hidden width is picked to match the attention
/// blocks' parameter count.
pub struct ConvBranch {
    stages: Vec<ResidualBlock>,
    hidden: usize,
}

impl ConvBranch {
    /// `target_per_block` is the parameter count of one spatial-angular
    /// attention block; the hidden width is chosen to land within 10% of it.
    pub fn new<R: Rng>(
        channels: usize,
        blocks: usize,
        target_per_block: usize,
        rng: &mut R,
    ) -> ConvBranch {
        let hidden = Self::matched_hidden(channels, target_per_block);
        ConvBranch {
            stages: (0..blocks)
                .map(|_| ResidualBlock::new(channels, hidden, rng))
                .collect(),
            hidden,
        }
    }

    pub fn hidden_width(&self) -> usize {
        self.hidden
    }

    /// Hidden width whose two-conv residual block best matches the target
    /// parameter count.
    pub fn matched_hidden(channels: usize, target: usize) -> usize {
        let count = |hidden: usize| {
            // conv1: 9*C*hidden + hidden, conv2: 9*hidden*C + C
            9 * channels * hidden + hidden + 9 * hidden * channels + channels
        };
        (1..=channels * 4)
            .min_by_key(|&h| count(h).abs_diff(target))
            .unwrap_or(1)
    }

    /// Stage outputs, mirroring the transformer's per-block intermediates.
    pub fn forward(&self, f: &Tensor) -> Result<Vec<Tensor>> {
        let mut outs = Vec::with_capacity(self.stages.len());
        let mut cur = f.clone();
        for stage in &self.stages {
            cur = stage.forward(&cur)?;
            outs.push(cur.clone());
        }
        Ok(outs)
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        for (i, stage) in self.stages.iter().enumerate() {
            stage.collect_params(&format!("{prefix}.stage{i}"), out);
        }
    }

    pub fn param_count(&self) -> usize {
        self.stages.iter().map(ResidualBlock::param_count).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{max_grad_error, DEFAULT_STEP};
    use crate::nn::uniform_tensor;
    use crate::rng::{stream, StreamKind};

    #[test]
    fn extractor_keeps_spatial_extents() {
        let mut rng = stream(12, StreamKind::Test);
        let ex = Extractor::new(8, &mut rng);
        let x = uniform_tensor(&[4, 1, 6, 6], 1.0, &mut rng);
        let y = ex.forward(&x).unwrap();
        assert_eq!(y.shape(), &[4, 8, 6, 6]);
        assert!(y.is_finite());
    }

    #[test]
    fn extractor_param_count_ignores_input_size() {
        let mut rng = stream(12, StreamKind::Test);
        let ex = Extractor::new(8, &mut rng);
        let before = ex.param_count();
        ex.forward(&Tensor::zeros(&[1, 1, 6, 6])).unwrap();
        ex.forward(&Tensor::zeros(&[1, 1, 12, 12])).unwrap();
        assert_eq!(ex.param_count(), before);
    }

    #[test]
    fn imdb_needs_divisible_channels() {
        let mut rng = stream(13, StreamKind::Test);
        assert!(Imdb::new(30, &mut rng).is_err());
        assert!(Imdb::new(32, &mut rng).is_ok());
    }

    #[test]
    fn imdb_gradient_check() {
        let mut rng = stream(14, StreamKind::Test);
        let imdb = Imdb::new(4, &mut rng).unwrap();
        let x = Tensor::param(&[1, 4, 4, 4], uniform_tensor(&[64], 0.8, &mut rng).to_vec()).unwrap();
        let target = uniform_tensor(&[1, 4, 4, 4], 1.0, &mut rng);
        let mut params = vec![x.clone()];
        let mut named = Vec::new();
        imdb.collect_params("imdb", &mut named);
        params.extend(named.into_iter().map(|(_, t)| t));
        let err = max_grad_error(|| imdb.forward(&x)?.l1_loss(&target), &params, DEFAULT_STEP).unwrap();
        assert!(err < 1e-4, "IMDB gradient error {err}");
    }

    #[test]
    fn head_with_zero_final_conv_returns_skip() {
        let mut rng = stream(15, StreamKind::Test);
        let head = ReconstructionHead::new(6, 8, 2, 2, &mut rng).unwrap();
        let z = uniform_tensor(&[2, 6, 4, 4], 1.0, &mut rng);
        let skip = uniform_tensor(&[2, 1, 8, 8], 1.0, &mut rng);
        let y = head.forward(&z, &skip).unwrap();
        assert_eq!(y.shape(), &[2, 1, 8, 8]);
        assert_eq!(y.to_vec(), skip.to_vec());
    }

    #[test]
    fn conv_branch_matches_parameter_target_within_ten_percent() {
        for channels in [8usize, 16, 32, 48] {
            // one attention block = 2 SA-LSA layers of 4 biased 1x1 convs
            let target = 2 * 4 * (channels * channels + channels);
            let mut rng = stream(16, StreamKind::Test);
            let branch = ConvBranch::new(channels, 1, target, &mut rng);
            let got = branch.param_count() as f64;
            let rel = (got - target as f64).abs() / target as f64;
            assert!(rel <= 0.10, "C={channels}: {got} vs {target} ({rel:.3})");
        }
    }
}
