//! Patch tokenization (unfold/fold) and sub-pixel rearrangement.

use super::Tensor;
use crate::error::{config_err, dim_err, Result};

#[derive(Clone, Copy)]
struct PatchGeom {
    batch: usize,
    channels: usize,
    h: usize,
    w: usize,
    hp: usize,
    wp: usize,
    sh: usize,
    sw: usize,
    gh: usize,
    gw: usize,
}

impl PatchGeom {
    fn new(shape: &[usize], patch: (usize, usize), stride: (usize, usize)) -> Result<PatchGeom> {
        let (batch, channels, h, w) = (shape[0], shape[1], shape[2], shape[3]);
        let (hp, wp) = patch;
        let (sh, sw) = stride;
        if hp == 0 || wp == 0 || sh == 0 || sw == 0 {
            return config_err("patch and stride extents must be positive".to_string());
        }
        if hp > h || wp > w || (h - hp) % sh != 0 || (w - wp) % sw != 0 {
            return config_err(format!(
                "patch {hp}x{wp} stride {sh}x{sw} does not tile a {h}x{w} grid"
            ));
        }
        Ok(PatchGeom {
            batch,
            channels,
            h,
            w,
            hp,
            wp,
            sh,
            sw,
            gh: (h - hp) / sh + 1,
            gw: (w - wp) / sw + 1,
        })
    }

    fn tokens(&self) -> usize {
        self.batch * self.gh * self.gw
    }

    fn dim(&self) -> usize {
        self.channels * self.hp * self.wp
    }

    /// Source pixel offset for token element (t, j).
    fn source(&self, t: usize, j: usize) -> usize {
        let gx = t % self.gw;
        let gy = (t / self.gw) % self.gh;
        let b = t / (self.gw * self.gh);
        let px = j % self.wp;
        let py = (j / self.wp) % self.hp;
        let c = j / (self.wp * self.hp);
        ((b * self.channels + c) * self.h + gy * self.sh + py) * self.w + gx * self.sw + px
    }

    /// How many patches cover each (h, w) pixel; shared by every batch item
    /// and channel.
    fn overlap_counts(&self) -> Vec<f64> {
        let mut counts = vec![0.0; self.h * self.w];
        for gy in 0..self.gh {
            for gx in 0..self.gw {
                for py in 0..self.hp {
                    for px in 0..self.wp {
                        counts[(gy * self.sh + py) * self.w + gx * self.sw + px] += 1.0;
                    }
                }
            }
        }
        counts
    }
}

impl Tensor {
    /// Extract every patch of a [B,C,H,W] tensor as a row of an n×d matrix,
    /// d = C*Hp*Wp. The patch grid must tile the spatial extents exactly;
    /// tokens are ordered batch-major, then patch-grid row-major.
    pub fn unfold(&self, patch: (usize, usize), stride: (usize, usize)) -> Result<Tensor> {
        if self.ndim() != 4 {
            return dim_err(format!("unfold wants a 4-D tensor, got {:?}", self.shape()));
        }
        let g = PatchGeom::new(self.shape(), patch, stride)?;
        let (n, d) = (g.tokens(), g.dim());
        let src = self.data();
        let mut out = vec![0.0; n * d];
        for t in 0..n {
            for j in 0..d {
                out[t * d + j] = src[g.source(t, j)];
            }
        }
        drop(src);
        Ok(Tensor::from_op(
            vec![n, d],
            out,
            vec![self.clone()],
            Box::new(move |parents, _out, grad| {
                parents[0].with_grad_mut(|gx| {
                    for t in 0..n {
                        for j in 0..d {
                            gx[g.source(t, j)] += grad[t * d + j];
                        }
                    }
                });
            }),
        ))
    }

    /// Inverse of [`Tensor::unfold`]: scatter token rows back onto the
    /// [B,C,H,W] grid, averaging where patches overlap so that
    /// fold(unfold(x)) reproduces x.
    pub fn fold(
        tokens: &Tensor,
        out_shape: &[usize],
        patch: (usize, usize),
        stride: (usize, usize),
    ) -> Result<Tensor> {
        if tokens.ndim() != 2 || out_shape.len() != 4 {
            return dim_err(format!(
                "fold wants n×d tokens and a 4-D target, got {:?} -> {:?}",
                tokens.shape(),
                out_shape
            ));
        }
        let g = match PatchGeom::new(out_shape, patch, stride) {
            Ok(g) => g,
            Err(_) => {
                return dim_err(format!(
                    "fold: patch {patch:?} stride {stride:?} does not tile {out_shape:?}"
                ))
            }
        };
        if tokens.shape()[0] != g.tokens() || tokens.shape()[1] != g.dim() {
            return dim_err(format!(
                "fold: token shape {:?} inconsistent with target {:?} (want {}x{})",
                tokens.shape(),
                out_shape,
                g.tokens(),
                g.dim()
            ));
        }
        let (n, d) = (g.tokens(), g.dim());
        let counts = g.overlap_counts();
        let plane = g.h * g.w;
        let src = tokens.data();
        let mut out = vec![0.0; out_shape.iter().product()];
        for t in 0..n {
            for j in 0..d {
                out[g.source(t, j)] += src[t * d + j];
            }
        }
        drop(src);
        for (i, v) in out.iter_mut().enumerate() {
            *v /= counts[i % plane];
        }
        Ok(Tensor::from_op(
            out_shape.to_vec(),
            out,
            vec![tokens.clone()],
            Box::new(move |parents, _out, grad| {
                let counts = g.overlap_counts();
                let plane = g.h * g.w;
                parents[0].with_grad_mut(|gt| {
                    for t in 0..n {
                        for j in 0..d {
                            let p = g.source(t, j);
                            gt[t * d + j] += grad[p] / counts[p % plane];
                        }
                    }
                });
            }),
        ))
    }

    /// Sub-pixel rearrangement of a [B, C*r*r, H, W] tensor into
    /// [B, C, r*H, r*W]: out(b, c, r*h+i, r*w+j) = in(b, c*r*r + i*r + j, h, w).
    pub fn pixel_shuffle(&self, factor: usize) -> Result<Tensor> {
        if self.ndim() != 4 {
            return dim_err(format!("pixel_shuffle wants a 4-D tensor, got {:?}", self.shape()));
        }
        if factor == 0 {
            return dim_err("pixel_shuffle: factor must be positive".to_string());
        }
        let (batch, cin, h, w) = (
            self.shape()[0],
            self.shape()[1],
            self.shape()[2],
            self.shape()[3],
        );
        let r2 = factor * factor;
        if cin % r2 != 0 {
            return dim_err(format!(
                "pixel_shuffle: {cin} channels not divisible by {factor}^2"
            ));
        }
        let cout = cin / r2;
        let (oh, ow) = (h * factor, w * factor);
        let forward_index = move |b: usize, c: usize, oy: usize, ox: usize| {
            let (hy, i) = (oy / factor, oy % factor);
            let (wx, j) = (ox / factor, ox % factor);
            ((b * cin + c * r2 + i * factor + j) * h + hy) * w + wx
        };
        let src = self.data();
        let mut out = vec![0.0; batch * cout * oh * ow];
        let mut p = 0;
        for b in 0..batch {
            for c in 0..cout {
                for oy in 0..oh {
                    for ox in 0..ow {
                        out[p] = src[forward_index(b, c, oy, ox)];
                        p += 1;
                    }
                }
            }
        }
        drop(src);
        Ok(Tensor::from_op(
            vec![batch, cout, oh, ow],
            out,
            vec![self.clone()],
            Box::new(move |parents, _out, grad| {
                parents[0].with_grad_mut(|gx| {
                    let mut p = 0;
                    for b in 0..batch {
                        for c in 0..cout {
                            for oy in 0..oh {
                                for ox in 0..ow {
                                    gx[forward_index(b, c, oy, ox)] += grad[p];
                                    p += 1;
                                }
                            }
                        }
                    }
                });
            }),
        ))
    }

    /// Inverse of [`Tensor::pixel_shuffle`] (used by tests and FLOP-free
    /// shape plumbing, not by the model itself).
    pub fn pixel_unshuffle(&self, factor: usize) -> Result<Tensor> {
        if self.ndim() != 4 {
            return dim_err(format!("pixel_unshuffle wants a 4-D tensor, got {:?}", self.shape()));
        }
        let (batch, cin, h, w) = (
            self.shape()[0],
            self.shape()[1],
            self.shape()[2],
            self.shape()[3],
        );
        if factor == 0 || h % factor != 0 || w % factor != 0 {
            return dim_err(format!(
                "pixel_unshuffle: {h}x{w} not divisible by {factor}"
            ));
        }
        let cout = cin * factor * factor;
        let (oh, ow) = (h / factor, w / factor);
        let src = self.data();
        let mut out = vec![0.0; batch * cout * oh * ow];
        for b in 0..batch {
            for c in 0..cin {
                for i in 0..factor {
                    for j in 0..factor {
                        let co = c * factor * factor + i * factor + j;
                        for oy in 0..oh {
                            for ox in 0..ow {
                                out[((b * cout + co) * oh + oy) * ow + ox] =
                                    src[((b * cin + c) * h + oy * factor + i) * w + ox * factor + j];
                            }
                        }
                    }
                }
            }
        }
        drop(src);
        Tensor::from_vec(&[batch, cout, oh, ow], out)
    }
}
