//! Full-range BT.601 RGB <-> YCbCr conversion.

use super::LightField;
use crate::error::{dim_err, Result};

const KR: f64 = 0.299;
const KG: f64 = 0.587;
const KB: f64 = 0.114;

pub fn rgb_to_ycbcr(lf: &LightField) -> Result<LightField> {
    if lf.channels() != 3 {
        return dim_err(format!("rgb_to_ycbcr wants C=3, got {}", lf.channels()));
    }
    let mut out = lf.clone();
    for u in 0..lf.views_u() {
        for v in 0..lf.views_v() {
            for i in 0..lf.height() * lf.width() {
                let r = lf.plane(u, v, 0)[i];
                let g = lf.plane(u, v, 1)[i];
                let b = lf.plane(u, v, 2)[i];
                let y = KR * r + KG * g + KB * b;
                out.plane_mut(u, v, 0)[i] = y;
                out.plane_mut(u, v, 1)[i] = 0.5 + (b - y) / (2.0 * (1.0 - KB));
                out.plane_mut(u, v, 2)[i] = 0.5 + (r - y) / (2.0 * (1.0 - KR));
            }
        }
    }
    Ok(out)
}

pub fn ycbcr_to_rgb(lf: &LightField) -> Result<LightField> {
    if lf.channels() != 3 {
        return dim_err(format!("ycbcr_to_rgb wants C=3, got {}", lf.channels()));
    }
    let mut out = lf.clone();
    for u in 0..lf.views_u() {
        for v in 0..lf.views_v() {
            for i in 0..lf.height() * lf.width() {
                let y = lf.plane(u, v, 0)[i];
                let cb = lf.plane(u, v, 1)[i];
                let cr = lf.plane(u, v, 2)[i];
                let r = y + 2.0 * (1.0 - KR) * (cr - 0.5);
                let b = y + 2.0 * (1.0 - KB) * (cb - 0.5);
                let g = (y - KR * r - KB * b) / KG;
                out.plane_mut(u, v, 0)[i] = r;
                out.plane_mut(u, v, 1)[i] = g;
                out.plane_mut(u, v, 2)[i] = b;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pixel_field(r: f64, g: f64, b: f64) -> LightField {
        LightField::from_data(1, 1, 3, 1, 1, vec![r, g, b]).unwrap()
    }

    #[test]
    fn white_point() {
        let y = rgb_to_ycbcr(&pixel_field(1.0, 1.0, 1.0)).unwrap();
        assert!((y.data()[0] - 1.0).abs() < 1e-12);
        assert!((y.data()[1] - 0.5).abs() < 1e-12);
        assert!((y.data()[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn black_point() {
        let y = rgb_to_ycbcr(&pixel_field(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(y.data()[0], 0.0);
        assert_eq!(y.data()[1], 0.5);
        assert_eq!(y.data()[2], 0.5);
    }

    #[test]
    fn round_trip_within_1e6() {
        let mut lf = LightField::zeros(2, 2, 3, 3, 3);
        let mut rng = crate::rng::stream(21, crate::rng::StreamKind::Test);
        use rand::Rng;
        for v in lf.data_mut() {
            *v = rng.gen_range(0.0..1.0);
        }
        let back = ycbcr_to_rgb(&rgb_to_ycbcr(&lf).unwrap()).unwrap();
        assert!(back.max_abs_diff(&lf) < 1e-6);
    }

    #[test]
    fn wrong_channel_count_rejected() {
        let lf = LightField::zeros(1, 1, 1, 2, 2);
        assert!(rgb_to_ycbcr(&lf).is_err());
        assert!(ycbcr_to_rgb(&lf).is_err());
    }
}
