//! Synthetic light-field scenes.
//!
//! Views sample a band-limited procedural texture (a sum of random-phase
//! sinusoids) at disparity-shifted positions, so the angular structure is
//! exact by construction and sub-pixel shifts need no boundary handling.

use rand::Rng;
use std::f64::consts::TAU;

use super::LightField;
use crate::error::{config_err, Result};
use crate::rng::{stream, StreamKind};

struct Wave {
    amplitude: f64,
    freq_y: f64,
    freq_x: f64,
    phase: f64,
}

/// Procedural scene: one texture per channel, one disparity for the whole
/// scene, fully determined by the seed.
#[derive(Clone, Debug)]
pub struct SyntheticScene {
    /// Pixels of shift per view step.
    pub disparity: f64,
    /// Sinusoid components per channel texture.
    pub waves: usize,
    /// Band limit in cycles per pixel.
    pub max_frequency: f64,
    pub seed: u64,
}

impl SyntheticScene {
    pub fn new(seed: u64, disparity: f64) -> SyntheticScene {
        SyntheticScene {
            disparity,
            waves: 8,
            max_frequency: 0.15,
            seed,
        }
    }

    fn texture<R: Rng>(&self, rng: &mut R) -> Vec<Wave> {
        (0..self.waves.max(1))
            .map(|_| Wave {
                amplitude: rng.gen_range(0.25..1.0),
                freq_y: rng.gen_range(-self.max_frequency..self.max_frequency),
                freq_x: rng.gen_range(-self.max_frequency..self.max_frequency),
                phase: rng.gen_range(0.0..TAU),
            })
            .collect()
    }

    /// Render the HR field and its bicubic-decimated LR counterpart.
    ///
    /// Every view satisfies view(u,v)(y,x) = texture(y + (u-u0)*disparity,
    /// x + (v-v0)*disparity) with u0 = v0 = (A-1)/2, and
    /// LR(u,v) = bicubic_resize(HR(u,v), 1/alpha).
    pub fn render(
        &self,
        angular: usize,
        channels: usize,
        height: usize,
        width: usize,
        alpha: usize,
    ) -> Result<(LightField, LightField)> {
        if !matches!(alpha, 2 | 4) {
            return config_err(format!("upsampling factor must be 2 or 4, got {alpha}"));
        }
        if height % alpha != 0 || width % alpha != 0 {
            return config_err(format!(
                "spatial extents {height}x{width} must be divisible by {alpha}"
            ));
        }
        if angular == 0 || channels == 0 {
            return config_err("angular and channel extents must be positive".to_string());
        }
        let mut rng = stream(self.seed, StreamKind::Data);
        let textures: Vec<Vec<Wave>> = (0..channels).map(|_| self.texture(&mut rng)).collect();
        let norms: Vec<f64> = textures
            .iter()
            .map(|t| 2.0 * t.iter().map(|w| w.amplitude).sum::<f64>())
            .collect();

        let center = (angular as f64 - 1.0) / 2.0;
        let mut hr = LightField::zeros(angular, angular, channels, height, width);
        for u in 0..angular {
            for v in 0..angular {
                let dy = (u as f64 - center) * self.disparity;
                let dx = (v as f64 - center) * self.disparity;
                for c in 0..channels {
                    let plane = hr.plane_mut(u, v, c);
                    for y in 0..height {
                        for x in 0..width {
                            let sy = y as f64 + dy;
                            let sx = x as f64 + dx;
                            let mut acc = 0.0;
                            for w in &textures[c] {
                                acc += w.amplitude
                                    * (TAU * (w.freq_y * sy + w.freq_x * sx) + w.phase).sin();
                            }
                            plane[y * width + x] = 0.5 + acc / norms[c];
                        }
                    }
                }
            }
        }
        let lr = hr.bicubic_resize(1.0 / alpha as f64)?;
        Ok((hr, lr))
    }
}
