//! Central finite-difference gradient oracle.
//!
//! Test support: verifies analytic gradients independently of the tape by
//! re-evaluating the forward pass at perturbed inputs. Keep instances tiny;
//! the cost is two forward passes per scalar.

use crate::error::Result;
use crate::tensor::Tensor;

pub const DEFAULT_STEP: f64 = 1e-4;

/// Max mixed absolute/relative disagreement between the taped gradients of
/// `params` and central finite differences of `forward`.
///
/// `forward` must rebuild the graph from the live parameter tensors on every
/// call and return a scalar loss.
pub fn max_grad_error(
    forward: impl Fn() -> Result<Tensor>,
    params: &[Tensor],
    step: f64,
) -> Result<f64> {
    for p in params {
        p.zero_grad();
    }
    let loss = forward()?;
    loss.backward()?;
    let analytic: Vec<Vec<f64>> = params
        .iter()
        .map(|p| p.take_grad().unwrap_or_else(|| vec![0.0; p.numel()]))
        .collect();

    let mut worst = 0.0f64;
    for (p, grads) in params.iter().zip(&analytic) {
        let base = p.to_vec();
        for i in 0..base.len() {
            let mut bumped = base.clone();
            bumped[i] = base[i] + step;
            p.set_data(bumped.clone());
            let up = forward()?.item();
            bumped[i] = base[i] - step;
            p.set_data(bumped);
            let down = forward()?.item();
            p.set_data(base.clone());
            let numeric = (up - down) / (2.0 * step);
            let a = grads[i];
            let err = (a - numeric).abs() / 1.0f64.max(a.abs()).max(numeric.abs());
            worst = worst.max(err);
        }
    }
    for p in params {
        p.zero_grad();
    }
    Ok(worst)
}
