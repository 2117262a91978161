//! Sobel gradient-magnitude fields.

use super::LightField;
use crate::error::{dim_err, Result};

/// Per-SAI gradient magnitude sqrt(Gx^2 + Gy^2) from 3x3 Sobel kernels with
/// replicate padding, scaled by 1/8 so [0,1] inputs stay bounded.
pub fn gradient_field(lf: &LightField) -> Result<LightField> {
    if lf.channels() != 1 {
        return dim_err(format!("gradient_field wants C=1, got {}", lf.channels()));
    }
    let (h, w) = (lf.height(), lf.width());
    let mut out = LightField::zeros(lf.views_u(), lf.views_v(), 1, h, w);
    for u in 0..lf.views_u() {
        for v in 0..lf.views_v() {
            let src = lf.plane(u, v, 0);
            let dst = out.plane_mut(u, v, 0);
            let at = |y: isize, x: isize| {
                let y = y.clamp(0, h as isize - 1) as usize;
                let x = x.clamp(0, w as isize - 1) as usize;
                src[y * w + x]
            };
            for y in 0..h as isize {
                for x in 0..w as isize {
                    let gx = at(y - 1, x + 1) + 2.0 * at(y, x + 1) + at(y + 1, x + 1)
                        - at(y - 1, x - 1)
                        - 2.0 * at(y, x - 1)
                        - at(y + 1, x - 1);
                    let gy = at(y + 1, x - 1) + 2.0 * at(y + 1, x) + at(y + 1, x + 1)
                        - at(y - 1, x - 1)
                        - 2.0 * at(y - 1, x)
                        - at(y - 1, x + 1);
                    let (gx, gy) = (gx / 8.0, gy / 8.0);
                    dst[(y as usize) * w + x as usize] = (gx * gx + gy * gy).sqrt();
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_has_zero_gradient() {
        let mut lf = LightField::zeros(2, 2, 1, 5, 5);
        for v in lf.data_mut() {
            *v = 0.73;
        }
        let g = gradient_field(&lf).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn horizontal_ramp_gives_slope_magnitude() {
        let (h, w) = (6, 8);
        let slope = 0.05;
        let mut lf = LightField::zeros(1, 1, 1, h, w);
        for y in 0..h {
            for x in 0..w {
                lf.plane_mut(0, 0, 0)[y * w + x] = slope * x as f64;
            }
        }
        let g = gradient_field(&lf).unwrap();
        for y in 0..h {
            for x in 1..w - 1 {
                assert!(
                    (g.plane(0, 0, 0)[y * w + x] - slope).abs() < 1e-12,
                    "interior magnitude should equal |slope|"
                );
            }
        }
    }

    #[test]
    fn random_view_matches_stencil_oracle() {
        let mut rng = crate::rng::stream(17, crate::rng::StreamKind::Test);
        use rand::Rng;
        let (h, w) = (6, 6);
        let mut lf = LightField::zeros(1, 1, 1, h, w);
        for v in lf.data_mut() {
            *v = rng.gen_range(0.0..1.0);
        }
        let g = gradient_field(&lf).unwrap();
        let src = lf.plane(0, 0, 0);
        let clamp_at = |y: isize, x: isize| {
            src[(y.clamp(0, h as isize - 1) as usize) * w + x.clamp(0, w as isize - 1) as usize]
        };
        let kx: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut gx = 0.0;
                let mut gy = 0.0;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let p = clamp_at(y + dy as isize, x + dx as isize);
                        gx += kx[(dy + 1) as usize][(dx + 1) as usize] * p;
                        gy += kx[(dx + 1) as usize][(dy + 1) as usize] * p;
                    }
                }
                let want = ((gx / 8.0).powi(2) + (gy / 8.0).powi(2)).sqrt();
                let got = g.plane(0, 0, 0)[(y as usize) * w + x as usize];
                assert!((got - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn multi_channel_rejected() {
        assert!(gradient_field(&LightField::zeros(1, 1, 3, 4, 4)).is_err());
    }
}
