//! l1/Adam training loop with the halving learning-rate schedule, plus the
//! ablation and K-sweep harnesses.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{config_err, Error, Result};
use crate::lightfield::{Augmentation, LightField, PatchPair};
use crate::metrics::{evaluate_scenes, MetricReport};
use crate::model::{Ablation, DptConfig, DptModel};
use crate::rng::{stream, StreamKind};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct TrainConfig {
    /// Initial learning rate.
    pub lr0: f64,
    /// Epoch interval after which the rate halves.
    pub halve_every: usize,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    /// Joint spatial-angular flips/rotations drawn per sample.
    pub augment: bool,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            lr0: 2e-4,
            halve_every: 15,
            epochs: 75,
            batch: 8,
            seed: 0,
            augment: false,
        }
    }
}

impl TrainConfig {
    /// lr(e) = lr0 * 0.5^floor(e / halve_every).
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        self.lr0 * 0.5f64.powi((epoch / self.halve_every.max(1)) as i32)
    }
}

/// Bias-corrected Adam (beta1 0.9, beta2 0.999, eps 1e-8). Moments are kept
/// per parameter, indexed by position in the model's fixed parameter order.
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &[Tensor]) -> Adam {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Consume accumulated gradients and update every parameter in place.
    pub fn step(&mut self, params: &[Tensor], lr: f64) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::Usage(format!(
                "Adam tracks {} parameters, got {}",
                self.m.len(),
                params.len()
            )));
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (i, p) in params.iter().enumerate() {
            let grad = p.take_grad().unwrap_or_else(|| vec![0.0; p.numel()]);
            if grad.len() != p.numel() {
                return Err(Error::Usage("gradient shape mismatch".to_string()));
            }
            let mut data = p.to_vec();
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..data.len() {
                let g = grad[j];
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g * g;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                data[j] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
            p.set_data(data);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossPoint {
    pub step: usize,
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
}

/// Tab-separated (step, epoch, lr, loss) rows.
pub fn loss_log_to_tsv(curve: &[LossPoint]) -> String {
    let mut out = String::from("step\tepoch\tlr\tloss\n");
    for p in curve {
        out.push_str(&format!("{}\t{}\t{:e}\t{:.12e}\n", p.step, p.epoch, p.lr, p.loss));
    }
    out
}

/// Train in place over (LR, HR) patch pairs. One epoch is one shuffled pass
/// over the patch list; the per-batch mean l1 is recorded per step. Aborts
/// with a diagnostic if the loss stops being finite.
pub fn train(
    model: &DptModel,
    dataset: &[PatchPair],
    config: &TrainConfig,
) -> Result<Vec<LossPoint>> {
    if dataset.is_empty() {
        return config_err("training dataset is empty".to_string());
    }
    let params = model.params();
    let mut adam = Adam::new(&params);
    let mut shuffle_rng = stream(config.seed, StreamKind::Shuffle);
    let mut curve = Vec::new();
    let mut step = 0usize;

    for epoch in 0..config.epochs {
        let lr = config.learning_rate(epoch);
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(config.batch.max(1)) {
            model.zero_grads();
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &idx in batch {
                let pair;
                let sample = if config.augment {
                    pair = Augmentation::random(&mut shuffle_rng).apply_pair(&dataset[idx])?;
                    &pair
                } else {
                    &dataset[idx]
                };
                let loss = model
                    .forward_tensor(&sample.lr)?
                    .l1_loss(&sample.hr.to_tensor())?;
                batch_loss += loss.item() * scale;
                loss.scale(scale).backward()?;
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss became non-finite at step {step} (epoch {epoch}); aborting"
                )));
            }
            adam.step(&params, lr)?;
            step += 1;
            curve.push(LossPoint {
                step,
                epoch,
                lr,
                loss: batch_loss,
            });
        }
    }
    Ok(curve)
}

/// Mean l1 over a dataset without updating anything.
pub fn mean_l1(model: &DptModel, dataset: &[PatchPair]) -> Result<f64> {
    if dataset.is_empty() {
        return config_err("empty dataset".to_string());
    }
    let mut total = 0.0;
    for pair in dataset {
        total += model
            .forward_tensor(&pair.lr)?
            .l1_loss(&pair.hr.to_tensor())?
            .item();
    }
    Ok(total / dataset.len() as f64)
}

/// Super-resolve every LR patch and score against its HR ground truth.
pub fn evaluate_model(model: &DptModel, dataset: &[PatchPair]) -> Result<MetricReport> {
    let pairs = dataset
        .iter()
        .map(|p| Ok((model.super_resolve(&p.lr)?, p.hr.clone())))
        .collect::<Result<Vec<(LightField, LightField)>>>()?;
    evaluate_scenes(&pairs)
}

#[derive(Clone, Debug)]
pub struct AblationRow {
    pub variant: Ablation,
    pub params: usize,
    pub final_loss: f64,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

/// Train and evaluate each variant under identical seed and data.
pub fn run_ablation(
    variants: &[Ablation],
    dataset: &[PatchPair],
    base: &DptConfig,
    train_config: &TrainConfig,
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    for &variant in variants {
        let config = DptConfig {
            ablation: variant,
            ..base.clone()
        };
        let model = DptModel::new(config, train_config.seed)?;
        let curve = train(&model, dataset, train_config)?;
        let report = evaluate_model(&model, dataset)?;
        rows.push(AblationRow {
            variant,
            params: model.count_params(),
            final_loss: curve.last().map_or(f64::NAN, |p| p.loss),
            mean_psnr: report.mean_psnr,
            mean_ssim: report.mean_ssim,
        });
    }
    Ok(rows)
}

pub fn ablation_table(rows: &[AblationRow]) -> String {
    let mut out = String::from("variant\tparams\tfinal_l1\tmean_psnr\tmean_ssim\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{:.6}\t{:.4}\t{:.6}\n",
            r.variant.as_str(),
            r.params,
            r.final_loss,
            r.mean_psnr,
            r.mean_ssim
        ));
    }
    out
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub k: usize,
    pub params: usize,
    pub mean_psnr: f64,
}

/// Table 4-style sweep over attention-block counts; every entry trains
/// under the same seed and data.
pub fn sweep_k(
    values: &[usize],
    dataset: &[PatchPair],
    base: &DptConfig,
    train_config: &TrainConfig,
) -> Result<Vec<SweepRow>> {
    if values.iter().any(|&k| !(1..=4).contains(&k)) {
        return config_err("K sweep values must lie in 1..=4".to_string());
    }
    let mut rows = Vec::new();
    for &k in values {
        let config = DptConfig {
            blocks: k,
            ..base.clone()
        };
        let model = DptModel::new(config, train_config.seed)?;
        train(&model, dataset, train_config)?;
        let report = evaluate_model(&model, dataset)?;
        rows.push(SweepRow {
            k,
            params: model.count_params(),
            mean_psnr: report.mean_psnr,
        });
    }
    Ok(rows)
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = String::from("k\tparams\tmean_psnr\n");
    for r in rows {
        out.push_str(&format!("{}\t{}\t{:.4}\n", r.k, r.params, r.mean_psnr));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lightfield::SyntheticScene;

    fn micro_config() -> DptConfig {
        DptConfig {
            angular: 2,
            channels: 4,
            blocks: 1,
            alpha: 2,
            n_imdb: 1,
            recon_channels: 4,
            patch: (2, 2),
            stride: (2, 2),
            ..DptConfig::default()
        }
    }

    fn tiny_dataset(seed: u64) -> Vec<PatchPair> {
        let (hr, lr) = SyntheticScene::new(seed, 0.5).render(2, 1, 16, 16, 2).unwrap();
        vec![PatchPair { hr, lr }]
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let p = Tensor::param(&[3], vec![1.0, -2.0, 3.0]).unwrap();
        let mut adam = Adam::new(&[p.clone()]);
        adam.step(&[p.clone()], 0.1).unwrap();
        assert_eq!(p.to_vec(), vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let p = Tensor::param(&[3], vec![0.0, 0.0, 0.0]).unwrap();
        p.with_grad_mut(|g| g.copy_from_slice(&[0.5, -2.0, 1e-3]));
        let mut adam = Adam::new(&[p.clone()]);
        adam.step(&[p.clone()], 0.01).unwrap();
        for (got, g) in p.to_vec().iter().zip([0.5, -2.0, 1e-3]) {
            let want = -0.01 * g / (g.abs() + 1e-8);
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn two_constant_gradient_steps_match_recurrence_oracle() {
        let g = 0.7;
        let p = Tensor::param(&[1], vec![0.0]).unwrap();
        let mut adam = Adam::new(&[p.clone()]);
        let lr = 0.05;
        for _ in 0..2 {
            p.with_grad_mut(|gr| gr[0] = g);
            adam.step(&[p.clone()], lr).unwrap();
        }
        // direct evaluation of the recurrence
        let (b1, b2, eps) = (0.9, 0.999, 1e-8);
        let mut m = 0.0;
        let mut v = 0.0;
        let mut x: f64 = 0.0;
        for t in 1..=2 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - f64::powi(b1, t));
            let vh = v / (1.0 - f64::powi(b2, t));
            x -= lr * mh / (vh.sqrt() + eps);
        }
        assert!((p.to_vec()[0] - x).abs() < 1e-15);
    }

    #[test]
    fn update_magnitude_is_bounded_by_lr() {
        for g in [1e-6, 0.01, 1.0, 250.0] {
            let p = Tensor::param(&[1], vec![0.0]).unwrap();
            let mut adam = Adam::new(&[p.clone()]);
            for _ in 0..5 {
                let before = p.to_vec()[0];
                p.with_grad_mut(|gr| gr[0] = g);
                adam.step(&[p.clone()], 0.01).unwrap();
                assert!((p.to_vec()[0] - before).abs() <= 0.01 * (1.0 + 1e-6));
            }
        }
    }

    #[test]
    fn schedule_matches_closed_form() {
        let config = TrainConfig::default();
        assert_eq!(config.learning_rate(0), 2e-4);
        assert_eq!(config.learning_rate(14), 2e-4);
        assert_eq!(config.learning_rate(15), 1e-4);
        assert_eq!(config.learning_rate(30), 5e-5);
        assert_eq!(config.learning_rate(45), 2.5e-5);
    }

    #[test]
    fn empty_dataset_is_config_error() {
        let model = DptModel::new(micro_config(), 1).unwrap();
        assert!(matches!(
            train(&model, &[], &TrainConfig::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn training_is_bit_deterministic() {
        let config = TrainConfig {
            epochs: 5,
            batch: 1,
            seed: 9,
            augment: true,
            ..TrainConfig::default()
        };
        let data = tiny_dataset(5);
        let run = || {
            let model = DptModel::new(micro_config(), 9).unwrap();
            let curve = train(&model, &data, &config).unwrap();
            let params: Vec<Vec<f64>> = model.params().iter().map(Tensor::to_vec).collect();
            (curve, params)
        };
        let (c1, p1) = run();
        let (c2, p2) = run();
        assert_eq!(c1, c2);
        assert_eq!(p1, p2);
    }

    #[test]
    fn loss_decreases_when_overfitting_one_patch() {
        let data = tiny_dataset(61);
        for seed in 0..5 {
            let model = DptModel::new(micro_config(), seed).unwrap();
            let config = TrainConfig {
                lr0: 1e-3,
                halve_every: 1000,
                epochs: 30,
                batch: 1,
                seed,
                ..TrainConfig::default()
            };
            let curve = train(&model, &data, &config).unwrap();
            assert!(
                curve.last().unwrap().loss < curve.first().unwrap().loss,
                "seed {seed}: {} -> {}",
                curve.first().unwrap().loss,
                curve.last().unwrap().loss
            );
        }
    }

    #[test]
    fn nan_guard_aborts_with_diagnostic() {
        let data = tiny_dataset(7);
        let model = DptModel::new(micro_config(), 7).unwrap();
        let config = TrainConfig {
            lr0: 1e12,
            epochs: 50,
            batch: 1,
            ..TrainConfig::default()
        };
        match train(&model, &data, &config) {
            Err(Error::NonFinite(msg)) => assert!(msg.contains("step")),
            other => panic!("expected the NaN guard to fire, got {other:?}"),
        }
    }

    #[test]
    fn sweep_rejects_out_of_range_k() {
        let data = tiny_dataset(3);
        assert!(sweep_k(&[0], &data, &micro_config(), &TrainConfig::default()).is_err());
        assert!(sweep_k(&[5], &data, &micro_config(), &TrainConfig::default()).is_err());
    }

    #[test]
    fn loss_log_format() {
        let tsv = loss_log_to_tsv(&[LossPoint { step: 1, epoch: 0, lr: 2e-4, loss: 0.5 }]);
        let mut lines = tsv.lines();
        assert_eq!(lines.next().unwrap(), "step\tepoch\tlr\tloss");
        assert!(lines.next().unwrap().starts_with("1\t0\t2e-4"));
    }
}
