//! The full dual-branch model: per-SAI extractors, content and gradient
//! transformers over horizontal/vertical angular sequences, cross-attention
//! fusion, and the reconstruction head with a global bicubic skip.

use rand::Rng;

use crate::error::{config_err, dim_err, Error, Result};
use crate::lightfield::{gradient_field, LightField};
use crate::rng::{stream, StreamKind};
use crate::salsa::{SalsaConfig, SalsaLayer, Tokenizer};
use crate::tensor::Tensor;

mod blocks;
mod checkpoint;

pub use blocks::{ConvBranch, Extractor, Imdb, Raspp, ReconstructionHead, ResidualBlock};
pub use checkpoint::{load_checkpoint, load_checkpoint_expecting, save_checkpoint};

/// Which model variant to wire (the ablation table's rows).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ablation {
    /// Dual branches, sequence-level cross-attention fusion.
    Full,
    /// Content branch only; no gradient branch, no fusion.
    ContentOnly,
    /// Dual branches fused by elementwise summation.
    SumFusion,
    /// Dual branches, cross-attention per single SAI.
    ImageFusion,
    /// Both unimodal transformers replaced by parameter-matched residual
    /// stacks; fusion kept.
    ConvBranches,
    /// Linear (ViT-style) tokenization in every attention layer.
    VanillaAttention,
}

impl Ablation {
    pub const ALL: [Ablation; 6] = [
        Ablation::Full,
        Ablation::ContentOnly,
        Ablation::SumFusion,
        Ablation::ImageFusion,
        Ablation::ConvBranches,
        Ablation::VanillaAttention,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::ContentOnly => "content_only",
            Ablation::SumFusion => "sum_fusion",
            Ablation::ImageFusion => "image_fusion",
            Ablation::ConvBranches => "conv_branches",
            Ablation::VanillaAttention => "vanilla_attention",
        }
    }

    pub fn parse(s: &str) -> Result<Ablation> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation variant '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DptConfig {
    /// Angular extent A of the square view grid.
    pub angular: usize,
    /// Embedding channels C.
    pub channels: usize,
    /// Spatial-angular attention blocks K per unimodal transformer.
    pub blocks: usize,
    /// Upsampling factor, 2 or 4.
    pub alpha: usize,
    /// IMDB blocks in the reconstruction head.
    pub n_imdb: usize,
    /// Channel width inside the reconstruction head.
    pub recon_channels: usize,
    pub ablation: Ablation,
    pub patch: (usize, usize),
    pub stride: (usize, usize),
    /// 1/sqrt(d) attention scaling (default); false for the literal
    /// unscaled product.
    pub scaled_attention: bool,
    /// Bias terms on the attention projections.
    pub proj_bias: bool,
}

impl Default for DptConfig {
    /// Desk-scale defaults: minutes-scale training runs on a CPU.
    fn default() -> DptConfig {
        DptConfig {
            angular: 3,
            channels: 16,
            blocks: 2,
            alpha: 2,
            n_imdb: 2,
            recon_channels: 32,
            ablation: Ablation::Full,
            patch: (4, 4),
            stride: (2, 2),
            scaled_attention: true,
            proj_bias: true,
        }
    }
}

impl DptConfig {
    pub fn validate(&self) -> Result<()> {
        if self.angular < 1 {
            return config_err("angular extent must be at least 1".to_string());
        }
        if self.blocks < 1 {
            return config_err("K must be at least 1".to_string());
        }
        if !matches!(self.alpha, 2 | 4) {
            return config_err(format!("alpha must be 2 or 4, got {}", self.alpha));
        }
        if self.channels < 1 || self.n_imdb < 1 {
            return config_err("channels and n_imdb must be positive".to_string());
        }
        if self.recon_channels % 4 != 0 || self.recon_channels == 0 {
            return config_err(format!(
                "recon_channels must be a positive multiple of 4, got {}",
                self.recon_channels
            ));
        }
        Ok(())
    }

    fn tokenizer(&self) -> Tokenizer {
        match self.ablation {
            Ablation::VanillaAttention => Tokenizer::Linear,
            _ => Tokenizer::Conv,
        }
    }

    fn salsa_config(&self, channels: usize) -> SalsaConfig {
        SalsaConfig {
            channels,
            patch: self.patch,
            stride: self.stride,
            scaled_attention: self.scaled_attention,
            tokenizer: self.tokenizer(),
            bias: self.proj_bias,
        }
    }

    /// Fusion-stage channel width (K+1)C.
    pub fn fused_channels(&self) -> usize {
        (self.blocks + 1) * self.channels
    }

    /// Key=value lines, one per field.
    pub fn to_manifest(&self) -> String {
        format!(
            "angular={}\nchannels={}\nblocks={}\nalpha={}\nn_imdb={}\nrecon_channels={}\n\
             ablation={}\npatch_h={}\npatch_w={}\nstride_h={}\nstride_w={}\n\
             scaled_attention={}\nproj_bias={}\n",
            self.angular,
            self.channels,
            self.blocks,
            self.alpha,
            self.n_imdb,
            self.recon_channels,
            self.ablation.as_str(),
            self.patch.0,
            self.patch.1,
            self.stride.0,
            self.stride.1,
            self.scaled_attention,
            self.proj_bias,
        )
    }

    pub fn from_manifest(text: &str) -> Result<DptConfig> {
        let mut cfg = DptConfig::default();
        cfg.apply_kv_lines(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply `key=value` lines (unknown keys are rejected; blank lines and
    /// `#` comments skipped).
    pub fn apply_kv_lines(&mut self, text: &str) -> Result<()> {
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("bad config line '{line}'")))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let parse_usize = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::Config(format!("bad value '{v}' for {key}")))
        };
        let parse_bool = |v: &str| {
            v.parse::<bool>()
                .map_err(|_| Error::Config(format!("bad value '{v}' for {key}")))
        };
        match key {
            "angular" => self.angular = parse_usize(value)?,
            "channels" => self.channels = parse_usize(value)?,
            "blocks" => self.blocks = parse_usize(value)?,
            "alpha" => self.alpha = parse_usize(value)?,
            "n_imdb" => self.n_imdb = parse_usize(value)?,
            "recon_channels" => self.recon_channels = parse_usize(value)?,
            "ablation" => self.ablation = Ablation::parse(value)?,
            "patch_h" => self.patch.0 = parse_usize(value)?,
            "patch_w" => self.patch.1 = parse_usize(value)?,
            "stride_h" => self.stride.0 = parse_usize(value)?,
            "stride_w" => self.stride.1 = parse_usize(value)?,
            "scaled_attention" => self.scaled_attention = parse_bool(value)?,
            "proj_bias" => self.proj_bias = parse_bool(value)?,
            _ => return config_err(format!("unknown config key '{key}'")),
        }
        Ok(())
    }
}

/// One spatial-angular attention block: a horizontal SA-LSA pass over each
/// row sequence, then a vertical pass over each column sequence.
pub struct SpatialAngularBlock {
    pub horizontal: SalsaLayer,
    pub vertical: SalsaLayer,
}

fn row_sequence(f: &Tensor, i: usize) -> Result<Tensor> {
    let s = f.shape().to_vec();
    f.slice(0, i, 1)?.reshape(&[s[1], s[2], s[3], s[4]])
}

fn col_sequence(f: &Tensor, i: usize) -> Result<Tensor> {
    let s = f.shape().to_vec();
    f.slice(1, i, 1)?.reshape(&[s[0], s[2], s[3], s[4]])
}

fn assemble_rows(rows: Vec<Tensor>) -> Result<Tensor> {
    let lifted = rows
        .iter()
        .map(|r| {
            let mut shape = vec![1];
            shape.extend_from_slice(r.shape());
            r.reshape(&shape)
        })
        .collect::<Result<Vec<_>>>()?;
    Tensor::concat(&lifted.iter().collect::<Vec<_>>(), 0)
}

fn assemble_cols(cols: Vec<Tensor>) -> Result<Tensor> {
    let lifted = cols
        .iter()
        .map(|c| {
            let s = c.shape().to_vec();
            c.reshape(&[s[0], 1, s[1], s[2], s[3]])
        })
        .collect::<Result<Vec<_>>>()?;
    Tensor::concat(&lifted.iter().collect::<Vec<_>>(), 1)
}

impl SpatialAngularBlock {
    pub fn new<R: Rng>(config: SalsaConfig, rng: &mut R) -> SpatialAngularBlock {
        SpatialAngularBlock {
            horizontal: SalsaLayer::new(config, rng),
            vertical: SalsaLayer::new(config, rng),
        }
    }

    /// Horizontal stage alone: each row sequence processed independently.
    pub fn forward_horizontal(&self, f: &Tensor) -> Result<Tensor> {
        let a = f.shape()[0];
        let rows = (0..a)
            .map(|i| self.horizontal.forward(&row_sequence(f, i)?))
            .collect::<Result<Vec<_>>>()?;
        assemble_rows(rows)
    }

    /// Vertical stage alone.
    pub fn forward_vertical(&self, f: &Tensor) -> Result<Tensor> {
        let a = f.shape()[1];
        let cols = (0..a)
            .map(|i| self.vertical.forward(&col_sequence(f, i)?))
            .collect::<Result<Vec<_>>>()?;
        assemble_cols(cols)
    }

    pub fn forward(&self, f: &Tensor) -> Result<Tensor> {
        self.forward_vertical(&self.forward_horizontal(f)?)
    }

    fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        self.horizontal.collect_params(&format!("{prefix}.h"), out);
        self.vertical.collect_params(&format!("{prefix}.v"), out);
    }

    pub fn param_count(&self) -> usize {
        self.horizontal.param_count() + self.vertical.param_count()
    }
}

/// K spatial-angular attention blocks; returns every block's output so the
/// fusion stage can concatenate all intermediate features.
pub struct UnimodalTransformer {
    pub blocks: Vec<SpatialAngularBlock>,
}

impl UnimodalTransformer {
    pub fn new<R: Rng>(config: SalsaConfig, k: usize, rng: &mut R) -> UnimodalTransformer {
        UnimodalTransformer {
            blocks: (0..k).map(|_| SpatialAngularBlock::new(config, rng)).collect(),
        }
    }

    pub fn forward(&self, f: &Tensor) -> Result<Vec<Tensor>> {
        let mut outs = Vec::with_capacity(self.blocks.len());
        let mut cur = f.clone();
        for block in &self.blocks {
            cur = block.forward(&cur)?;
            outs.push(cur.clone());
        }
        Ok(outs)
    }

    fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        for (i, b) in self.blocks.iter().enumerate() {
            b.collect_params(&format!("{prefix}.block{i}"), out);
        }
    }

    pub fn param_count(&self) -> usize {
        self.blocks.iter().map(SpatialAngularBlock::param_count).sum()
    }
}

/// One cross-attention block: queries from the content stream, keys and
/// values from the gradient stream, residual on content. Sequence mode
/// walks rows then columns; image mode treats every SAI as a length-1
/// sequence.
pub struct FusionTransformer {
    horizontal: SalsaLayer,
    vertical: SalsaLayer,
    per_image: bool,
}

impl FusionTransformer {
    fn new<R: Rng>(config: SalsaConfig, per_image: bool, rng: &mut R) -> FusionTransformer {
        FusionTransformer {
            horizontal: SalsaLayer::new(config, rng),
            vertical: SalsaLayer::new(config, rng),
            per_image,
        }
    }

    pub fn forward(&self, content: &Tensor, gradient: &Tensor) -> Result<Tensor> {
        if content.shape() != gradient.shape() {
            return dim_err(format!(
                "fusion streams differ: {:?} vs {:?}",
                content.shape(),
                gradient.shape()
            ));
        }
        if self.per_image {
            return self.forward_per_image(content, gradient);
        }
        let a = content.shape()[0];
        let rows = (0..a)
            .map(|i| {
                self.horizontal
                    .cross_forward(&row_sequence(content, i)?, &row_sequence(gradient, i)?)
            })
            .collect::<Result<Vec<_>>>()?;
        let mid = assemble_rows(rows)?;
        let cols = (0..a)
            .map(|i| {
                self.vertical
                    .cross_forward(&col_sequence(&mid, i)?, &col_sequence(gradient, i)?)
            })
            .collect::<Result<Vec<_>>>()?;
        assemble_cols(cols)
    }

    fn forward_per_image(&self, content: &Tensor, gradient: &Tensor) -> Result<Tensor> {
        let s = content.shape().to_vec();
        let (a_u, a_v) = (s[0], s[1]);
        // each SAI is its own length-1 sequence
        let view = |f: &Tensor, u: usize, v: usize| -> Result<Tensor> {
            f.slice(0, u, 1)?.slice(1, v, 1)?.reshape(&[1, s[2], s[3], s[4]])
        };
        let mut rows = Vec::with_capacity(a_u);
        for u in 0..a_u {
            let mut views = Vec::with_capacity(a_v);
            for v in 0..a_v {
                let q = view(content, u, v)?;
                let kv = view(gradient, u, v)?;
                let fused = self.horizontal.cross_forward(&q, &kv)?;
                let fused = self.vertical.cross_forward(&fused, &kv)?;
                views.push(fused.reshape(&[1, 1, s[2], s[3], s[4]])?);
            }
            rows.push(Tensor::concat(&views.iter().collect::<Vec<_>>(), 1)?);
        }
        Tensor::concat(&rows.iter().collect::<Vec<_>>(), 0)
    }

    fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        self.horizontal.collect_params(&format!("{prefix}.h"), out);
        self.vertical.collect_params(&format!("{prefix}.v"), out);
    }

    pub fn param_count(&self) -> usize {
        self.horizontal.param_count() + self.vertical.param_count()
    }
}

enum Branch {
    Transformer(UnimodalTransformer),
    Conv(ConvBranch),
}

impl Branch {
    /// Per-block intermediate features T_1..T_K of shape [A,A,C,H,W].
    fn forward(&self, f: &Tensor) -> Result<Vec<Tensor>> {
        match self {
            Branch::Transformer(t) => t.forward(f),
            Branch::Conv(c) => {
                let s = f.shape().to_vec();
                let flat = f.reshape(&[s[0] * s[1], s[2], s[3], s[4]])?;
                c.forward(&flat)?
                    .into_iter()
                    .map(|t| t.reshape(&s))
                    .collect()
            }
        }
    }

    fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        match self {
            Branch::Transformer(t) => t.collect_params(prefix, out),
            Branch::Conv(c) => c.collect_params(prefix, out),
        }
    }

    fn param_count(&self) -> usize {
        match self {
            Branch::Transformer(t) => t.param_count(),
            Branch::Conv(c) => c.param_count(),
        }
    }
}

enum Fusion {
    Cross(FusionTransformer),
    Sum,
    None,
}

/// The assembled model.
pub struct DptModel {
    pub config: DptConfig,
    extract_cont: Extractor,
    extract_grad: Option<Extractor>,
    content: Branch,
    gradient: Option<Branch>,
    fusion: Fusion,
    recon: ReconstructionHead,
}

impl DptModel {
    /// Build a fresh model; all randomness comes from the init stream of
    /// `seed`, so construction is reproducible.
    pub fn new(config: DptConfig, seed: u64) -> Result<DptModel> {
        config.validate()?;
        let mut rng = stream(seed, StreamKind::Init);
        let c = config.channels;
        let salsa = config.salsa_config(c);
        let fused_salsa = config.salsa_config(config.fused_channels());

        let extract_cont = Extractor::new(c, &mut rng);
        let dual = config.ablation != Ablation::ContentOnly;
        let extract_grad = dual.then(|| Extractor::new(c, &mut rng));

        let make_branch = |rng: &mut rand_chacha::ChaCha8Rng| -> Branch {
            match config.ablation {
                Ablation::ConvBranches => {
                    // match one attention block: two SA-LSA layers of four
                    // 1x1 projections each
                    let bias = if config.proj_bias { c } else { 0 };
                    let target = 2 * 4 * (c * c + bias);
                    Branch::Conv(ConvBranch::new(c, config.blocks, target, rng))
                }
                _ => Branch::Transformer(UnimodalTransformer::new(salsa, config.blocks, rng)),
            }
        };
        let content = make_branch(&mut rng);
        let gradient = dual.then(|| make_branch(&mut rng));

        let fusion = match config.ablation {
            Ablation::ContentOnly => Fusion::None,
            Ablation::SumFusion => Fusion::Sum,
            Ablation::ImageFusion => Fusion::Cross(FusionTransformer::new(fused_salsa, true, &mut rng)),
            _ => Fusion::Cross(FusionTransformer::new(fused_salsa, false, &mut rng)),
        };
        let recon = ReconstructionHead::new(
            config.fused_channels(),
            config.recon_channels,
            config.n_imdb,
            config.alpha,
            &mut rng,
        )?;
        Ok(DptModel {
            config,
            extract_cont,
            extract_grad,
            content,
            gradient,
            fusion,
            recon,
        })
    }

    fn check_input(&self, lr: &LightField) -> Result<()> {
        let a = lr.angular()?;
        if a != self.config.angular {
            return dim_err(format!(
                "model expects A={}, got A={a}",
                self.config.angular
            ));
        }
        if lr.channels() != 1 {
            return dim_err(format!(
                "model consumes single-channel (Y) fields, got C={}",
                lr.channels()
            ));
        }
        Ok(())
    }

    fn run_branch(
        extractor: &Extractor,
        branch: &Branch,
        field: &LightField,
    ) -> Result<Tensor> {
        let a = field.views_u();
        let (h, w) = (field.height(), field.width());
        let x = field.to_tensor().reshape(&[a * a, 1, h, w])?;
        let f = extractor
            .forward(&x)?
            .reshape(&[a, a, extractor.output_channels(), h, w])?;
        let chain = branch.forward(&f)?;
        let mut parts = vec![&f];
        parts.extend(chain.iter());
        Tensor::concat(&parts, 2)
    }

    /// Super-resolve a Y-channel LR field; the full taped forward pass used
    /// by training.
    pub fn forward_tensor(&self, lr: &LightField) -> Result<Tensor> {
        self.check_input(lr)?;
        let a = self.config.angular;
        let (h, w) = (lr.height(), lr.width());

        let h_cont = Self::run_branch(&self.extract_cont, &self.content, lr)?;
        let z = match (&self.fusion, &self.extract_grad, &self.gradient) {
            (Fusion::None, _, _) => h_cont,
            (fusion, Some(eg), Some(gb)) => {
                let grad_lr = gradient_field(lr)?;
                let h_grad = Self::run_branch(eg, gb, &grad_lr)?;
                match fusion {
                    Fusion::Sum => h_cont.add(&h_grad)?,
                    Fusion::Cross(f) => f.forward(&h_cont, &h_grad)?,
                    Fusion::None => unreachable!(),
                }
            }
            _ => return config_err("gradient branch missing for a dual-branch mode".to_string()),
        };

        let alpha = self.config.alpha;
        let fused_c = self.config.fused_channels();
        let z_flat = z.reshape(&[a * a, fused_c, h, w])?;
        let skip = lr
            .bicubic_resize(alpha as f64)?
            .to_tensor()
            .reshape(&[a * a, 1, alpha * h, alpha * w])?;
        let out = self.recon.forward(&z_flat, &skip)?;
        out.reshape(&[a, a, 1, alpha * h, alpha * w])
    }

    /// Forward pass returning a light field; rejects non-finite outputs.
    pub fn super_resolve(&self, lr: &LightField) -> Result<LightField> {
        let out = self.forward_tensor(lr)?;
        if !out.is_finite() {
            return Err(Error::NonFinite(
                "model output contains NaN or Inf".to_string(),
            ));
        }
        LightField::from_tensor(&out)
    }

    /// All parameters in a fixed traversal order.
    pub fn named_params(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        self.extract_cont.collect_params("cont_extract", &mut out);
        if let Some(eg) = &self.extract_grad {
            eg.collect_params("grad_extract", &mut out);
        }
        self.content.collect_params("cont_branch", &mut out);
        if let Some(g) = &self.gradient {
            g.collect_params("grad_branch", &mut out);
        }
        if let Fusion::Cross(f) = &self.fusion {
            f.collect_params("fusion", &mut out);
        }
        self.recon.collect_params("recon", &mut out);
        out
    }

    pub fn params(&self) -> Vec<Tensor> {
        self.named_params().into_iter().map(|(_, t)| t).collect()
    }

    pub fn zero_grads(&self) {
        for p in self.params() {
            p.zero_grad();
        }
    }

    /// Exact number of scalar parameters.
    pub fn count_params(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.numel()).sum()
    }

    /// Parameters of one unimodal branch (transformer or its conv
    /// replacement), for variant comparisons.
    pub fn branch_param_count(&self) -> usize {
        self.content.param_count()
    }

    /// Multiply-accumulate estimate of one forward pass over an `a`x`a`
    /// grid of `h`x`w` SAIs (convolutions, attention products and token
    /// projections).
    pub fn estimate_flops(&self, a: usize, h: usize, w: usize) -> u64 {
        let cfg = &self.config;
        let c = cfg.channels as u64;
        let (hu, wu, au) = (h as u64, w as u64, a as u64);
        let views = au * au;
        let conv = |cin: u64, cout: u64, k: u64, oh: u64, ow: u64| cin * cout * k * k * oh * ow;

        // one SA-LSA layer over a sequence of `len` views at `ch` channels
        let salsa = |ch: u64, len: u64| -> u64 {
            let (hp, wp) = (cfg.patch.0 as u64, cfg.patch.1 as u64);
            let (sh, sw) = (cfg.stride.0 as u64, cfg.stride.1 as u64);
            if hu < hp || wu < wp {
                return 0;
            }
            let gh = (hu - hp) / sh + 1;
            let gw = (wu - wp) / sw + 1;
            let n = len * gh * gw;
            let d = ch * hp * wp;
            let attention = 2 * n * n * d;
            match cfg.tokenizer() {
                Tokenizer::Conv => attention + 4 * conv(ch, ch, 1, hu, wu) * len,
                Tokenizer::Linear => attention + 4 * n * d * d,
            }
        };

        let extractor = {
            let body = conv(1, c, 3, hu, wu)
                + 2 * 2 * conv(c, c, 3, hu, wu)
                + 2 * 3 * conv(c, c, 3, hu, wu)
                + conv(c, c, 3, hu, wu);
            body * views
        };

        let branch = match &self.content {
            Branch::Transformer(_) => cfg.blocks as u64 * 2 * au * salsa(c, au),
            Branch::Conv(cb) => {
                let hidden = cb.hidden_width() as u64;
                cfg.blocks as u64 * views * (conv(c, hidden, 3, hu, wu) + conv(hidden, c, 3, hu, wu))
            }
        };

        let fc = cfg.fused_channels() as u64;
        let fusion = match &self.fusion {
            Fusion::Cross(f) if f.per_image => views * 2 * salsa(fc, 1),
            Fusion::Cross(_) => 2 * au * salsa(fc, au),
            Fusion::Sum | Fusion::None => 0,
        };

        let cr = cfg.recon_channels as u64;
        let a2 = (cfg.alpha * cfg.alpha) as u64;
        let imdb = conv(cr, cr, 3, hu, wu)
            + 2 * conv(cr / 4 * 3, cr, 3, hu, wu)
            + conv(cr / 4 * 3, cr / 4, 3, hu, wu)
            + conv(cr, cr, 1, hu, wu);
        let recon = views
            * (conv(fc, cr, 1, hu, wu)
                + cfg.n_imdb as u64 * imdb
                + conv(cr, a2, 1, hu, wu)
                + conv(1, 1, 1, hu * cfg.alpha as u64, wu * cfg.alpha as u64));

        let branches = if self.extract_grad.is_some() { 2 } else { 1 };
        branches * (extractor + branch) + fusion + recon
    }
}
