//! Keys bicubic resampling (a = -0.5, half-pixel centers, replicate edges).

use super::LightField;
use crate::error::{config_err, dim_err, Result};
use crate::tensor::Tensor;

/// Catmull-Rom / Keys kernel with a = -0.5.
fn keys(t: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 {
        (1.5 * t - 2.5) * t * t + 1.0
    } else if t < 2.0 {
        ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0
    } else {
        0.0
    }
}

/// Resample one axis of length `n_in` to `n_out`; returns (tap indices, weights)
/// per output position. Taps are clamped for replicate boundary handling.
fn axis_taps(n_in: usize, n_out: usize) -> Vec<([usize; 4], [f64; 4])> {
    let scale = n_out as f64 / n_in as f64;
    (0..n_out)
        .map(|o| {
            let src = (o as f64 + 0.5) / scale - 0.5;
            let base = src.floor() as isize;
            let mut idx = [0usize; 4];
            let mut wgt = [0f64; 4];
            for k in 0..4 {
                let tap = base - 1 + k as isize;
                idx[k] = tap.clamp(0, n_in as isize - 1) as usize;
                wgt[k] = keys(src - tap as f64);
            }
            (idx, wgt)
        })
        .collect()
}

/// Resize one H×W plane to oh×ow, separably (rows, then columns).
pub fn bicubic_resize_plane(src: &[f64], h: usize, w: usize, oh: usize, ow: usize) -> Vec<f64> {
    assert_eq!(src.len(), h * w);
    let col_taps = axis_taps(w, ow);
    let mut mid = vec![0.0; h * ow];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for (x, (idx, wgt)) in col_taps.iter().enumerate() {
            mid[y * ow + x] = wgt[0] * row[idx[0]]
                + wgt[1] * row[idx[1]]
                + wgt[2] * row[idx[2]]
                + wgt[3] * row[idx[3]];
        }
    }
    let row_taps = axis_taps(h, oh);
    let mut out = vec![0.0; oh * ow];
    for (y, (idx, wgt)) in row_taps.iter().enumerate() {
        for x in 0..ow {
            out[y * ow + x] = wgt[0] * mid[idx[0] * ow + x]
                + wgt[1] * mid[idx[1] * ow + x]
                + wgt[2] * mid[idx[2] * ow + x]
                + wgt[3] * mid[idx[3] * ow + x];
        }
    }
    out
}

fn scaled_extent(n: usize, alpha: f64) -> Result<usize> {
    let target = n as f64 * alpha;
    if target < 1.0 || (target - target.round()).abs() > 1e-9 {
        return config_err(format!("extent {n} times {alpha} is not a positive integer"));
    }
    Ok(target.round() as usize)
}

/// Resize a [C,H,W] image tensor by a positive real factor.
pub fn bicubic_resize(img: &Tensor, alpha: f64) -> Result<Tensor> {
    if img.ndim() != 3 {
        return dim_err(format!("bicubic_resize wants a [C,H,W] tensor, got {:?}", img.shape()));
    }
    if alpha <= 0.0 {
        return config_err(format!("scale factor must be positive, got {alpha}"));
    }
    let (c, h, w) = (img.shape()[0], img.shape()[1], img.shape()[2]);
    let oh = scaled_extent(h, alpha)?;
    let ow = scaled_extent(w, alpha)?;
    let src = img.data();
    let mut out = vec![0.0; c * oh * ow];
    for ch in 0..c {
        let plane = bicubic_resize_plane(&src[ch * h * w..(ch + 1) * h * w], h, w, oh, ow);
        out[ch * oh * ow..(ch + 1) * oh * ow].copy_from_slice(&plane);
    }
    drop(src);
    Tensor::from_vec(&[c, oh, ow], out)
}

impl LightField {
    /// Per-view bicubic resampling of every channel.
    pub fn bicubic_resize(&self, alpha: f64) -> Result<LightField> {
        let oh = scaled_extent(self.height(), alpha)?;
        let ow = scaled_extent(self.width(), alpha)?;
        let mut out = LightField::zeros(self.views_u(), self.views_v(), self.channels(), oh, ow);
        for u in 0..self.views_u() {
            for v in 0..self.views_v() {
                for c in 0..self.channels() {
                    let plane =
                        bicubic_resize_plane(self.plane(u, v, c), self.height(), self.width(), oh, ow);
                    out.plane_mut(u, v, c).copy_from_slice(&plane);
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_scale_is_exact_copy() {
        let img = Tensor::from_vec(&[1, 2, 3], vec![0.1, 0.9, 0.4, 0.3, 0.7, 0.2]).unwrap();
        let out = bicubic_resize(&img, 1.0).unwrap();
        assert_eq!(out.to_vec(), img.to_vec());
    }

    #[test]
    fn constant_image_stays_constant() {
        let img = Tensor::full(&[1, 4, 4], 0.37);
        for alpha in [0.5, 2.0, 4.0, 0.25] {
            let out = bicubic_resize(&img, alpha).unwrap();
            for v in out.to_vec() {
                assert!((v - 0.37).abs() < 1e-12, "alpha {alpha}");
            }
        }
    }

    #[test]
    fn upsampled_ramp_is_exact_in_interior() {
        // Keys a=-0.5 reproduces cubics; a linear ramp must come back exactly
        // wherever no boundary clamping is involved.
        let (h, w) = (8, 8);
        let data: Vec<f64> = (0..h * w).map(|i| 0.1 * (i % w) as f64).collect();
        let img = Tensor::from_vec(&[1, h, w], data).unwrap();
        let out = bicubic_resize(&img, 2.0).unwrap();
        let od = out.to_vec();
        for y in 0..2 * h {
            for x in 4..2 * w - 4 {
                // src x coordinate of this output column
                let sx = (x as f64 + 0.5) / 2.0 - 0.5;
                let want = 0.1 * sx;
                assert!(
                    (od[y * 2 * w + x] - want).abs() < 1e-12,
                    "at ({y},{x}): {} vs {want}",
                    od[y * 2 * w + x]
                );
            }
        }
    }

    #[test]
    fn non_integral_target_is_config_error() {
        let img = Tensor::zeros(&[1, 3, 3]);
        assert!(matches!(
            bicubic_resize(&img, 0.5),
            Err(crate::Error::Config(_))
        ));
        assert!(bicubic_resize(&img, 2.0).is_ok());
    }
}
