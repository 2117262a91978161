//! 4-D light-field container and its data pipeline: color conversion,
//! gradient fields, bicubic resampling, synthetic scenes, patching,
//! augmentation and file formats.

use crate::error::{dim_err, Result};
use crate::tensor::Tensor;

mod bicubic;
mod color;
mod format;
mod gradient;
mod patches;
mod scene;

pub use bicubic::{bicubic_resize, bicubic_resize_plane};
pub use color::{rgb_to_ycbcr, ycbcr_to_rgb};
pub use format::{export_pgm, read_lfr, read_pgm, write_lfr};
pub use gradient::gradient_field;
pub use patches::{crop_patches, Augmentation, PatchPair};
pub use scene::SyntheticScene;

/// A U×V grid of C×H×W sub-aperture images, row-major [u][v][c][h][w].
///
/// Image-valued fields live in [0,1]; feature fields are unconstrained.
#[derive(Clone, Debug, PartialEq)]
pub struct LightField {
    views_u: usize,
    views_v: usize,
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl LightField {
    pub fn zeros(views_u: usize, views_v: usize, channels: usize, height: usize, width: usize) -> LightField {
        LightField {
            views_u,
            views_v,
            channels,
            height,
            width,
            data: vec![0.0; views_u * views_v * channels * height * width],
        }
    }

    pub fn from_data(
        views_u: usize,
        views_v: usize,
        channels: usize,
        height: usize,
        width: usize,
        data: Vec<f64>,
    ) -> Result<LightField> {
        let want = views_u * views_v * channels * height * width;
        if data.len() != want {
            return dim_err(format!(
                "light field {views_u}x{views_v}x{channels}x{height}x{width} wants {want} scalars, got {}",
                data.len()
            ));
        }
        Ok(LightField {
            views_u,
            views_v,
            channels,
            height,
            width,
            data,
        })
    }

    pub fn views_u(&self) -> usize {
        self.views_u
    }

    pub fn views_v(&self) -> usize {
        self.views_v
    }

    /// Angular extent A of a square view grid.
    pub fn angular(&self) -> Result<usize> {
        if self.views_u != self.views_v {
            return dim_err(format!(
                "expected a square view grid, got {}x{}",
                self.views_u, self.views_v
            ));
        }
        Ok(self.views_u)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn index(&self, u: usize, v: usize, c: usize, h: usize, w: usize) -> usize {
        (((u * self.views_v + v) * self.channels + c) * self.height + h) * self.width + w
    }

    /// One H*W plane of a view.
    pub fn plane(&self, u: usize, v: usize, c: usize) -> &[f64] {
        let start = self.index(u, v, c, 0, 0);
        &self.data[start..start + self.height * self.width]
    }

    pub fn plane_mut(&mut self, u: usize, v: usize, c: usize) -> &mut [f64] {
        let start = self.index(u, v, c, 0, 0);
        let len = self.height * self.width;
        &mut self.data[start..start + len]
    }

    /// Copy out a single channel as a C=1 field.
    pub fn channel(&self, c: usize) -> Result<LightField> {
        if c >= self.channels {
            return dim_err(format!("channel {c} out of {}", self.channels));
        }
        let mut out = LightField::zeros(self.views_u, self.views_v, 1, self.height, self.width);
        for u in 0..self.views_u {
            for v in 0..self.views_v {
                out.plane_mut(u, v, 0).copy_from_slice(self.plane(u, v, c));
            }
        }
        Ok(out)
    }

    /// Overwrite a single channel from a C=1 field of matching extents.
    pub fn set_channel(&mut self, c: usize, src: &LightField) -> Result<()> {
        if c >= self.channels
            || src.channels != 1
            || src.views_u != self.views_u
            || src.views_v != self.views_v
            || src.height != self.height
            || src.width != self.width
        {
            return dim_err("set_channel extent mismatch".to_string());
        }
        for u in 0..self.views_u {
            for v in 0..self.views_v {
                self.plane_mut(u, v, c).copy_from_slice(src.plane(u, v, 0));
            }
        }
        Ok(())
    }

    /// View the field as a [U,V,C,H,W] tensor (plain value, no gradient).
    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_vec(
            &[self.views_u, self.views_v, self.channels, self.height, self.width],
            self.data.clone(),
        )
        .expect("light field extents")
    }

    pub fn from_tensor(t: &Tensor) -> Result<LightField> {
        if t.ndim() != 5 {
            return dim_err(format!("expected a 5-D tensor, got {:?}", t.shape()));
        }
        let s = t.shape().to_vec();
        LightField::from_data(s[0], s[1], s[2], s[3], s[4], t.to_vec())
    }

    pub fn max_abs_diff(&self, other: &LightField) -> f64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_is_row_major() {
        let mut lf = LightField::zeros(2, 2, 1, 2, 3);
        let i = lf.index(1, 0, 0, 1, 2);
        lf.data_mut()[i] = 9.0;
        assert_eq!(lf.plane(1, 0, 0)[5], 9.0);
    }

    #[test]
    fn tensor_round_trip() {
        let lf = LightField::from_data(1, 2, 1, 1, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let t = lf.to_tensor();
        assert_eq!(t.shape(), &[1, 2, 1, 1, 3]);
        assert_eq!(LightField::from_tensor(&t).unwrap(), lf);
    }

    #[test]
    fn angular_requires_square_grid() {
        assert!(LightField::zeros(2, 3, 1, 1, 1).angular().is_err());
        assert_eq!(LightField::zeros(3, 3, 1, 1, 1).angular().unwrap(), 3);
    }
}
