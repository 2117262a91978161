//! PSNR and SSIM over light fields, averaged across all views of all scenes.

use crate::error::{config_err, dim_err, Result};
use crate::lightfield::LightField;

/// 100 dB stands in for the unbounded PSNR of identical images.
pub const PSNR_CAP: f64 = 100.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Peak signal-to-noise ratio in dB, capped at 100.
pub fn psnr(reference: &[f64], test: &[f64], peak: f64) -> Result<f64> {
    if reference.len() != test.len() || reference.is_empty() {
        return dim_err(format!(
            "psnr: {} vs {} samples",
            reference.len(),
            test.len()
        ));
    }
    let mse = reference
        .iter()
        .zip(test)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / reference.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP).max(0.0))
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in w.iter_mut().enumerate() {
        *v = (-((i as f64 - c) * (i as f64 - c)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Mean local SSIM with an 11x11 Gaussian window (sigma 1.5), K1=0.01,
/// K2=0.03, dynamic range 1, aggregated over the valid (unpadded) region.
pub fn ssim(reference: &[f64], test: &[f64], height: usize, width: usize) -> Result<f64> {
    if reference.len() != height * width || test.len() != reference.len() {
        return dim_err("ssim: sample count does not match extents".to_string());
    }
    if height < SSIM_WINDOW || width < SSIM_WINDOW {
        return config_err(format!(
            "ssim wants images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {height}x{width}"
        ));
    }
    let w1d = gaussian_window();
    let c1 = (SSIM_K1 * 1.0) * (SSIM_K1 * 1.0);
    let c2 = (SSIM_K2 * 1.0) * (SSIM_K2 * 1.0);
    let half = SSIM_WINDOW / 2;

    let mut total = 0.0;
    let mut count = 0usize;
    for cy in half..height - half {
        for cx in half..width - half {
            let mut mu_x = 0.0;
            let mut mu_y = 0.0;
            for dy in 0..SSIM_WINDOW {
                let row = (cy + dy - half) * width + cx - half;
                for dx in 0..SSIM_WINDOW {
                    let wgt = w1d[dy] * w1d[dx];
                    mu_x += wgt * reference[row + dx];
                    mu_y += wgt * test[row + dx];
                }
            }
            let mut var_x = 0.0;
            let mut var_y = 0.0;
            let mut cov = 0.0;
            for dy in 0..SSIM_WINDOW {
                let row = (cy + dy - half) * width + cx - half;
                for dx in 0..SSIM_WINDOW {
                    let wgt = w1d[dy] * w1d[dx];
                    let ex = reference[row + dx] - mu_x;
                    let ey = test[row + dx] - mu_y;
                    var_x += wgt * (ex * ex);
                    var_y += wgt * (ey * ey);
                    // grouped so the expression is bitwise symmetric in x/y
                    cov += wgt * (ex * ey);
                }
            }
            total += ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2))
                / ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Per-view metrics plus their arithmetic means.
#[derive(Clone, Debug)]
pub struct MetricReport {
    /// (scene, u, v, psnr dB, ssim) rows in scene-major order.
    pub per_view: Vec<(usize, usize, usize, f64, f64)>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    pub n_views: usize,
}

impl MetricReport {
    fn from_rows(per_view: Vec<(usize, usize, usize, f64, f64)>) -> MetricReport {
        let n = per_view.len();
        let mean_psnr = per_view.iter().map(|r| r.3).sum::<f64>() / n as f64;
        let mean_ssim = per_view.iter().map(|r| r.4).sum::<f64>() / n as f64;
        MetricReport {
            per_view,
            mean_psnr,
            mean_ssim,
            n_views: n,
        }
    }

    /// Tab-separated table, one row per view, means last.
    pub fn to_table(&self) -> String {
        let mut out = String::from("scene\tu\tv\tpsnr_db\tssim\n");
        for (s, u, v, p, q) in &self.per_view {
            out.push_str(&format!("{s}\t{u}\t{v}\t{p:.4}\t{q:.6}\n"));
        }
        out.push_str(&format!(
            "mean\t-\t-\t{:.4}\t{:.6}\n",
            self.mean_psnr, self.mean_ssim
        ));
        out
    }

    /// Machine-readable key=value lines.
    pub fn to_summary(&self) -> String {
        format!(
            "n_views={}\nmean_psnr={:.6}\nmean_ssim={:.8}\n",
            self.n_views, self.mean_psnr, self.mean_ssim
        )
    }
}

/// Evaluate one predicted field against its ground truth (Y channel).
pub fn evaluate(prediction: &LightField, truth: &LightField) -> Result<MetricReport> {
    evaluate_scenes(&[(prediction.clone(), truth.clone())])
}

/// The averaging protocol over T scenes: metric values of all U*V views of
/// every scene are averaged into one score.
pub fn evaluate_scenes(pairs: &[(LightField, LightField)]) -> Result<MetricReport> {
    if pairs.is_empty() {
        return config_err("evaluate: no scenes".to_string());
    }
    let mut rows = Vec::new();
    for (scene, (pred, truth)) in pairs.iter().enumerate() {
        if pred.channels() != 1 || truth.channels() != 1 {
            return dim_err("evaluate wants single-channel (Y) fields".to_string());
        }
        if pred.views_u() != truth.views_u()
            || pred.views_v() != truth.views_v()
            || pred.height() != truth.height()
            || pred.width() != truth.width()
        {
            return dim_err(format!(
                "evaluate extents differ: {}x{}x{}x{} vs {}x{}x{}x{}",
                pred.views_u(),
                pred.views_v(),
                pred.height(),
                pred.width(),
                truth.views_u(),
                truth.views_v(),
                truth.height(),
                truth.width()
            ));
        }
        for u in 0..pred.views_u() {
            for v in 0..pred.views_v() {
                let p = psnr(truth.plane(u, v, 0), pred.plane(u, v, 0), 1.0)?;
                let s = ssim(
                    truth.plane(u, v, 0),
                    pred.plane(u, v, 0),
                    pred.height(),
                    pred.width(),
                )?;
                rows.push((scene, u, v, p, s));
            }
        }
    }
    Ok(MetricReport::from_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn psnr_identical_hits_cap() {
        let x = vec![0.3; 64];
        assert_eq!(psnr(&x, &x, 1.0).unwrap(), 100.0);
    }

    #[test]
    fn psnr_uniform_error_is_twenty_db() {
        let a = vec![0.0; 100];
        let b = vec![0.1; 100];
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn psnr_mse_equal_peak_squared_is_zero_db() {
        let a = vec![0.0; 10];
        let b = vec![1.0; 10];
        assert_eq!(psnr(&a, &b, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn ssim_identical_is_exactly_one() {
        let mut rng = crate::rng::stream(4, crate::rng::StreamKind::Test);
        let img: Vec<f64> = (0..16 * 16).map(|_| rng.gen_range(0.0..1.0)).collect();
        assert_eq!(ssim(&img, &img, 16, 16).unwrap(), 1.0);
    }

    #[test]
    fn ssim_constant_images_match_closed_form() {
        let c = 0.4;
        let delta = 0.2;
        let a = vec![c; 12 * 12];
        let b = vec![c + delta; 12 * 12];
        let got = ssim(&a, &b, 12, 12).unwrap();
        // contrast/structure terms collapse; only luminance remains
        let c1 = 0.01f64 * 0.01;
        let want = (2.0 * c * (c + delta) + c1) / (c * c + (c + delta) * (c + delta) + c1);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn ssim_is_symmetric() {
        let mut rng = crate::rng::stream(5, crate::rng::StreamKind::Test);
        let a: Vec<f64> = (0..14 * 14).map(|_| rng.gen_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..14 * 14).map(|_| rng.gen_range(0.0..1.0)).collect();
        assert_eq!(ssim(&a, &b, 14, 14).unwrap(), ssim(&b, &a, 14, 14).unwrap());
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = vec![0.0; 100];
        assert!(matches!(
            ssim(&a, &a, 10, 10),
            Err(crate::Error::Config(_))
        ));
    }

    #[test]
    fn report_means_equal_per_view_means() {
        let mut rng = crate::rng::stream(6, crate::rng::StreamKind::Test);
        let mut truth = LightField::zeros(2, 2, 1, 12, 12);
        for v in truth.data_mut() {
            *v = rng.gen_range(0.0..1.0);
        }
        let mut pred = truth.clone();
        for v in pred.data_mut() {
            *v = (*v + rng.gen_range(-0.05..0.05)).clamp(0.0, 1.0);
        }
        let report = evaluate(&pred, &truth).unwrap();
        assert_eq!(report.n_views, 4);
        let mp = report.per_view.iter().map(|r| r.3).sum::<f64>() / 4.0;
        let ms = report.per_view.iter().map(|r| r.4).sum::<f64>() / 4.0;
        assert!((report.mean_psnr - mp).abs() < 1e-12);
        assert!((report.mean_ssim - ms).abs() < 1e-12);
    }

    #[test]
    fn identical_fields_score_perfectly() {
        let mut lf = LightField::zeros(2, 2, 1, 12, 12);
        let mut rng = crate::rng::stream(7, crate::rng::StreamKind::Test);
        for v in lf.data_mut() {
            *v = rng.gen_range(0.0..1.0);
        }
        let report = evaluate(&lf, &lf).unwrap();
        assert_eq!(report.mean_psnr, 100.0);
        assert_eq!(report.mean_ssim, 1.0);
    }

    #[test]
    fn two_scenes_average_eight_views() {
        let mut lf = LightField::zeros(2, 2, 1, 12, 12);
        let mut rng = crate::rng::stream(8, crate::rng::StreamKind::Test);
        for v in lf.data_mut() {
            *v = rng.gen_range(0.0..1.0);
        }
        let report =
            evaluate_scenes(&[(lf.clone(), lf.clone()), (lf.clone(), lf.clone())]).unwrap();
        assert_eq!(report.n_views, 8);
    }

    #[test]
    fn mismatched_extents_rejected() {
        let a = LightField::zeros(2, 2, 1, 12, 12);
        let b = LightField::zeros(2, 2, 1, 14, 14);
        assert!(evaluate(&a, &b).is_err());
    }
}
