//! Aligned HR/LR patch cropping and joint spatial-angular augmentation.

use rand::Rng;

use super::LightField;
use crate::error::{config_err, Result};

/// One training sample: spatially aligned HR and LR crops over the full
/// angular grid.
#[derive(Clone, Debug)]
pub struct PatchPair {
    pub hr: LightField,
    pub lr: LightField,
}

fn axis_positions(extent: usize, patch: usize, stride: usize) -> Vec<usize> {
    let last = extent - patch;
    let mut pos: Vec<usize> = (0..=last).step_by(stride.max(1)).collect();
    // keep corner-aligned coverage when the stride does not land on the edge
    if *pos.last().unwrap() != last {
        pos.push(last);
    }
    pos
}

/// Crop aligned HR/LR patch pairs; every view is cropped at the same spatial
/// window. `patch` and `stride` are HR-scale pixels and must be multiples of
/// the scale factor so the LR window stays integral.
pub fn crop_patches(
    hr: &LightField,
    lr: &LightField,
    patch: usize,
    stride: usize,
    alpha: usize,
) -> Result<Vec<PatchPair>> {
    if patch == 0 || patch > hr.height() || patch > hr.width() {
        return config_err(format!(
            "patch {patch} exceeds the {}x{} image",
            hr.height(),
            hr.width()
        ));
    }
    if alpha == 0 || patch % alpha != 0 || stride % alpha != 0 {
        return config_err(format!(
            "patch {patch} and stride {stride} must be multiples of the scale {alpha}"
        ));
    }
    if hr.height() != lr.height() * alpha
        || hr.width() != lr.width() * alpha
        || hr.views_u() != lr.views_u()
        || hr.views_v() != lr.views_v()
        || hr.channels() != lr.channels()
    {
        return config_err("HR/LR extents are not related by the scale factor".to_string());
    }
    if hr.height() % alpha != 0 || hr.width() % alpha != 0 {
        return config_err("HR extents must be divisible by the scale factor".to_string());
    }

    let mut pairs = Vec::new();
    for &y in &axis_positions(hr.height(), patch, stride) {
        for &x in &axis_positions(hr.width(), patch, stride) {
            pairs.push(PatchPair {
                hr: crop(hr, y, x, patch),
                lr: crop(lr, y / alpha, x / alpha, patch / alpha),
            });
        }
    }
    Ok(pairs)
}

fn crop(lf: &LightField, y0: usize, x0: usize, size: usize) -> LightField {
    let mut out = LightField::zeros(lf.views_u(), lf.views_v(), lf.channels(), size, size);
    for u in 0..lf.views_u() {
        for v in 0..lf.views_v() {
            for c in 0..lf.channels() {
                let src = lf.plane(u, v, c);
                let dst = out.plane_mut(u, v, c);
                for y in 0..size {
                    let src_off = (y0 + y) * lf.width() + x0;
                    dst[y * size..(y + 1) * size].copy_from_slice(&src[src_off..src_off + size]);
                }
            }
        }
    }
    out
}

/// A joint spatial-angular transform: flips reverse matching spatial and
/// angular axes, quarter turns rotate both grids together. Canonical
/// application order: horizontal flip, vertical flip, then rotation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Augmentation {
    pub flip_h: bool,
    pub flip_v: bool,
    pub quarter_turns: u8,
}

impl Augmentation {
    pub fn identity() -> Augmentation {
        Augmentation {
            flip_h: false,
            flip_v: false,
            quarter_turns: 0,
        }
    }

    pub fn random<R: Rng>(rng: &mut R) -> Augmentation {
        Augmentation {
            flip_h: rng.gen(),
            flip_v: rng.gen(),
            quarter_turns: rng.gen_range(0..4),
        }
    }

    /// Apply to a square-angular-grid field. Rotation requires square
    /// spatial extents so all transforms stay composable.
    pub fn apply(&self, lf: &LightField) -> Result<LightField> {
        let a = lf.angular()?;
        if self.quarter_turns % 4 != 0 && lf.height() != lf.width() {
            return config_err("rotation needs square spatial extents".to_string());
        }
        let mut cur = lf.clone();
        if self.flip_h {
            cur = flip_h(&cur, a);
        }
        if self.flip_v {
            cur = flip_v(&cur, a);
        }
        for _ in 0..self.quarter_turns % 4 {
            cur = rot90(&cur, a);
        }
        Ok(cur)
    }

    /// Apply the same transform to both halves of a patch pair.
    pub fn apply_pair(&self, pair: &PatchPair) -> Result<PatchPair> {
        Ok(PatchPair {
            hr: self.apply(&pair.hr)?,
            lr: self.apply(&pair.lr)?,
        })
    }
}

fn flip_h(lf: &LightField, a: usize) -> LightField {
    let (h, w) = (lf.height(), lf.width());
    let mut out = lf.clone();
    for u in 0..a {
        for v in 0..a {
            for c in 0..lf.channels() {
                let src = lf.plane(u, a - 1 - v, c);
                let dst = out.plane_mut(u, v, c);
                for y in 0..h {
                    for x in 0..w {
                        dst[y * w + x] = src[y * w + (w - 1 - x)];
                    }
                }
            }
        }
    }
    out
}

fn flip_v(lf: &LightField, a: usize) -> LightField {
    let (h, w) = (lf.height(), lf.width());
    let mut out = lf.clone();
    for u in 0..a {
        for v in 0..a {
            for c in 0..lf.channels() {
                let src = lf.plane(a - 1 - u, v, c);
                let dst = out.plane_mut(u, v, c);
                for y in 0..h {
                    for x in 0..w {
                        dst[y * w + x] = src[(h - 1 - y) * w + x];
                    }
                }
            }
        }
    }
    out
}

/// Quarter turn applied to the spatial and angular grids simultaneously:
/// out(u, v)(y, x) = in(n-1-v, u)(n-1-x, y).
fn rot90(lf: &LightField, a: usize) -> LightField {
    let n = lf.height();
    let mut out = lf.clone();
    for u in 0..a {
        for v in 0..a {
            for c in 0..lf.channels() {
                let src = lf.plane(a - 1 - v, u, c);
                let dst = out.plane_mut(u, v, c);
                for y in 0..n {
                    for x in 0..n {
                        dst[y * n + x] = src[(n - 1 - x) * n + y];
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lightfield::SyntheticScene;

    fn sample_pair() -> (LightField, LightField) {
        SyntheticScene::new(31, 0.5).render(3, 1, 32, 32, 2).unwrap()
    }

    #[test]
    fn patch_grid_count() {
        let (hr, lr) = SyntheticScene::new(2, 0.5).render(3, 1, 128, 128, 2).unwrap();
        let pairs = crop_patches(&hr, &lr, 64, 32, 2).unwrap();
        assert_eq!(pairs.len(), 9);
        assert_eq!(pairs[0].hr.height(), 64);
        assert_eq!(pairs[0].lr.height(), 32);
    }

    #[test]
    fn corner_alignment_when_stride_does_not_tile() {
        // 32-wide image, patch 16, stride 12: positions 0, 12, then forced 16
        let (hr, lr) = sample_pair();
        let pairs = crop_patches(&hr, &lr, 16, 12, 2).unwrap();
        assert_eq!(pairs.len(), 9);
    }

    #[test]
    fn patches_are_positionally_aligned() {
        let (hr, lr) = sample_pair();
        let pairs = crop_patches(&hr, &lr, 16, 16, 2).unwrap();
        // LR patch equals the matching window of the degraded full image,
        // by construction (degrade-then-crop).
        let p = &pairs[3];
        assert_eq!(p.lr.plane(1, 1, 0)[0], lr.plane(1, 1, 0)[8 * 16 + 8]);
        assert_eq!(p.hr.plane(1, 1, 0)[0], hr.plane(1, 1, 0)[16 * 32 + 16]);
    }

    #[test]
    fn oversized_patch_rejected() {
        let (hr, lr) = sample_pair();
        assert!(crop_patches(&hr, &lr, 64, 32, 2).is_err());
    }

    #[test]
    fn identity_augmentation_is_identity() {
        let (hr, _) = sample_pair();
        assert_eq!(Augmentation::identity().apply(&hr).unwrap(), hr);
    }

    #[test]
    fn flips_are_involutions_and_rotation_has_order_four() {
        let (hr, _) = sample_pair();
        for aug in [
            Augmentation { flip_h: true, flip_v: false, quarter_turns: 0 },
            Augmentation { flip_h: false, flip_v: true, quarter_turns: 0 },
        ] {
            let twice = aug.apply(&aug.apply(&hr).unwrap()).unwrap();
            assert_eq!(twice, hr);
        }
        let rot = Augmentation { flip_h: false, flip_v: false, quarter_turns: 1 };
        let mut cur = hr.clone();
        for _ in 0..4 {
            cur = rot.apply(&cur).unwrap();
        }
        assert_eq!(cur, hr);
    }

    #[test]
    fn flip_reverses_spatial_and_angular_axes_jointly() {
        let (hr, _) = sample_pair();
        let aug = Augmentation { flip_h: true, flip_v: false, quarter_turns: 0 };
        let flipped = aug.apply(&hr).unwrap();
        let w = hr.width();
        assert_eq!(flipped.plane(0, 0, 0)[0], hr.plane(0, 2, 0)[w - 1]);
    }

    #[test]
    fn rotation_preserves_epi_structure() {
        // a rotated disparity-d scene is still a disparity-d scene: adjacent
        // views along the new rows are exact integer shifts
        let (hr, _) = SyntheticScene::new(7, 1.0).render(3, 1, 24, 24, 2).unwrap();
        let rot = Augmentation { flip_h: false, flip_v: false, quarter_turns: 1 };
        let r = rot.apply(&hr).unwrap();
        let w = r.width();
        let c = r.plane(1, 1, 0);
        let right = r.plane(1, 2, 0);
        let mut max_err = 0.0f64;
        for y in 0..r.height() {
            for x in 0..w - 1 {
                max_err = max_err.max((right[y * w + x] - c[y * w + x + 1]).abs());
            }
        }
        assert_eq!(max_err, 0.0);
    }
}
