//! 2-D convolution (cross-correlation) via im2col and GEMM.

use super::gemm::gemm;
use super::Tensor;
use crate::error::{dim_err, Result};

#[derive(Clone, Copy)]
struct ConvGeom {
    batch: usize,
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    dilation: usize,
    oh: usize,
    ow: usize,
}

fn out_extent(input: usize, k: usize, stride: usize, pad: usize, dilation: usize) -> Option<usize> {
    let span = dilation * (k - 1) + 1;
    let padded = input + 2 * pad;
    if padded < span {
        return None;
    }
    Some((padded - span) / stride + 1)
}

/// Gather one batch item into a [cin*kh*kw, oh*ow] column matrix.
fn im2col(src: &[f64], g: ConvGeom, cols: &mut [f64]) {
    let positions = g.oh * g.ow;
    debug_assert_eq!(cols.len(), g.cin * g.kh * g.kw * positions);
    let mut row = 0;
    for c in 0..g.cin {
        let plane = &src[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let dst = &mut cols[row * positions..(row + 1) * positions];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ki * g.dilation) as isize - g.pad as isize;
                    let base = oy * g.ow;
                    if iy < 0 || iy >= g.h as isize {
                        dst[base..base + g.ow].fill(0.0);
                        continue;
                    }
                    let row_off = iy as usize * g.w;
                    for ox in 0..g.ow {
                        let ix = (ox * g.stride + kj * g.dilation) as isize - g.pad as isize;
                        dst[base + ox] = if ix < 0 || ix >= g.w as isize {
                            0.0
                        } else {
                            plane[row_off + ix as usize]
                        };
                    }
                }
                row += 1;
            }
        }
    }
}

/// Scatter-add a column matrix back onto one batch item.
fn col2im(cols: &[f64], g: ConvGeom, dst: &mut [f64]) {
    let positions = g.oh * g.ow;
    let mut row = 0;
    for c in 0..g.cin {
        let plane_off = c * g.h * g.w;
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let src = &cols[row * positions..(row + 1) * positions];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ki * g.dilation) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let row_off = plane_off + iy as usize * g.w;
                    for ox in 0..g.ow {
                        let ix = (ox * g.stride + kj * g.dilation) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            dst[row_off + ix as usize] += src[oy * g.ow + ox];
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

impl Tensor {
    /// Cross-correlation of a [B,Cin,H,W] input with a [Cout,Cin,kh,kw]
    /// kernel. Output extent per spatial axis is
    /// floor((in + 2*pad - dilation*(k-1) - 1) / stride) + 1.
    pub fn conv2d(
        &self,
        weight: &Tensor,
        bias: Option<&Tensor>,
        stride: usize,
        pad: usize,
        dilation: usize,
    ) -> Result<Tensor> {
        if self.ndim() != 4 || weight.ndim() != 4 {
            return dim_err(format!(
                "conv2d wants 4-D input and kernel, got {:?} and {:?}",
                self.shape(),
                weight.shape()
            ));
        }
        let (batch, cin, h, w) = (
            self.shape()[0],
            self.shape()[1],
            self.shape()[2],
            self.shape()[3],
        );
        let (cout, wcin, kh, kw) = (
            weight.shape()[0],
            weight.shape()[1],
            weight.shape()[2],
            weight.shape()[3],
        );
        if cin != wcin {
            return dim_err(format!(
                "conv2d channels: input {:?} vs kernel {:?}",
                self.shape(),
                weight.shape()
            ));
        }
        if stride == 0 || dilation == 0 {
            return dim_err("conv2d: stride and dilation must be positive".to_string());
        }
        if let Some(b) = bias {
            if b.shape() != [cout] {
                return dim_err(format!("conv2d bias shape {:?}, want [{cout}]", b.shape()));
            }
        }
        let (Some(oh), Some(ow)) = (
            out_extent(h, kh, stride, pad, dilation),
            out_extent(w, kw, stride, pad, dilation),
        ) else {
            return dim_err(format!(
                "conv2d: {kh}x{kw} kernel (dilation {dilation}) exceeds padded {h}x{w} input"
            ));
        };
        let g = ConvGeom {
            batch,
            cin,
            h,
            w,
            cout,
            kh,
            kw,
            stride,
            pad,
            dilation,
            oh,
            ow,
        };

        let positions = oh * ow;
        let krows = cin * kh * kw;
        let mut cols = vec![0.0; krows * positions];
        let mut out = vec![0.0; batch * cout * positions];
        {
            let x = self.data();
            let wgt = weight.data();
            for b in 0..batch {
                im2col(&x[b * cin * h * w..(b + 1) * cin * h * w], g, &mut cols);
                gemm(
                    false,
                    false,
                    cout,
                    krows,
                    positions,
                    1.0,
                    &wgt,
                    &cols,
                    0.0,
                    &mut out[b * cout * positions..(b + 1) * cout * positions],
                );
            }
        }
        if let Some(bt) = bias {
            let bd = bt.data();
            for b in 0..batch {
                for co in 0..cout {
                    let off = (b * cout + co) * positions;
                    let bv = bd[co];
                    for v in &mut out[off..off + positions] {
                        *v += bv;
                    }
                }
            }
        }

        let mut parents = vec![self.clone(), weight.clone()];
        if let Some(b) = bias {
            parents.push(b.clone());
        }
        Ok(Tensor::from_op(
            vec![batch, cout, oh, ow],
            out,
            parents,
            Box::new(move |parents, _out, grad| {
                let positions = g.oh * g.ow;
                let krows = g.cin * g.kh * g.kw;
                let x = parents[0].data();
                let wgt = parents[1].data();
                let mut cols = vec![0.0; krows * positions];
                if parents[1].requires_grad() || parents[0].requires_grad() {
                    // dW accumulates dY_b * cols_b^T; dX scatters W^T * dY_b.
                    let mut dcols = vec![0.0; krows * positions];
                    for b in 0..g.batch {
                        let dy = &grad[b * g.cout * positions..(b + 1) * g.cout * positions];
                        if parents[1].requires_grad() {
                            im2col(&x[b * g.cin * g.h * g.w..(b + 1) * g.cin * g.h * g.w], g, &mut cols);
                            parents[1].with_grad_mut(|gw| {
                                gemm(false, true, g.cout, positions, krows, 1.0, dy, &cols, 1.0, gw);
                            });
                        }
                        if parents[0].requires_grad() {
                            gemm(true, false, krows, g.cout, positions, 1.0, &wgt, dy, 0.0, &mut dcols);
                            parents[0].with_grad_mut(|gx| {
                                col2im(
                                    &dcols,
                                    g,
                                    &mut gx[b * g.cin * g.h * g.w..(b + 1) * g.cin * g.h * g.w],
                                );
                            });
                        }
                    }
                }
                if parents.len() == 3 && parents[2].requires_grad() {
                    parents[2].with_grad_mut(|gb| {
                        for b in 0..g.batch {
                            for co in 0..g.cout {
                                let off = (b * g.cout + co) * positions;
                                gb[co] += grad[off..off + positions].iter().sum::<f64>();
                            }
                        }
                    });
                }
            }),
        ))
    }
}
