//! Parameterized layers built on the tensor engine.

use rand::Rng;

use crate::error::Result;
use crate::tensor::Tensor;

/// Uniform(-bound, bound) value tensor.
pub fn uniform_tensor<R: Rng>(shape: &[usize], bound: f64, rng: &mut R) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::from_vec(shape, data).expect("uniform_tensor shape")
}

fn uniform_param<R: Rng>(shape: &[usize], bound: f64, rng: &mut R) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::param(shape, data).expect("uniform_param shape")
}

/// 2-D convolution layer; weights follow the usual 1/sqrt(fan_in) uniform
/// init unless constructed as zeros.
pub struct Conv2d {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
    pub stride: usize,
    pub pad: usize,
    pub dilation: usize,
}

impl Conv2d {
    pub fn new<R: Rng>(
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        dilation: usize,
        with_bias: bool,
        rng: &mut R,
    ) -> Conv2d {
        let bound = 1.0 / ((cin * kernel * kernel) as f64).sqrt();
        Conv2d {
            weight: uniform_param(&[cout, cin, kernel, kernel], bound, rng),
            bias: with_bias.then(|| uniform_param(&[cout], bound, rng)),
            stride,
            pad,
            dilation,
        }
    }

    /// Zero-initialized variant; the layer maps everything to zero until
    /// trained (the residual-identity trick used by f_P and the output head).
    pub fn zeros(cin: usize, cout: usize, kernel: usize, with_bias: bool) -> Conv2d {
        Conv2d {
            weight: Tensor::param(&[cout, cin, kernel, kernel], vec![0.0; cout * cin * kernel * kernel])
                .expect("zeros weight"),
            bias: with_bias.then(|| Tensor::param(&[cout], vec![0.0; cout]).expect("zeros bias")),
            stride: 1,
            pad: 0,
            dilation: 1,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        x.conv2d(&self.weight, self.bias.as_ref(), self.stride, self.pad, self.dilation)
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        out.push((format!("{prefix}.weight"), self.weight.clone()));
        if let Some(b) = &self.bias {
            out.push((format!("{prefix}.bias"), b.clone()));
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight.numel() + self.bias.as_ref().map_or(0, Tensor::numel)
    }
}

/// Fully connected layer over token rows: y = x W (+ bias).
pub struct Linear {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
}

impl Linear {
    pub fn new<R: Rng>(d_in: usize, d_out: usize, with_bias: bool, rng: &mut R) -> Linear {
        let bound = 1.0 / (d_in as f64).sqrt();
        Linear {
            weight: uniform_param(&[d_in, d_out], bound, rng),
            bias: with_bias.then(|| uniform_param(&[d_out], bound, rng)),
        }
    }

    pub fn zeros(d_in: usize, d_out: usize, with_bias: bool) -> Linear {
        Linear {
            weight: Tensor::param(&[d_in, d_out], vec![0.0; d_in * d_out]).expect("zeros weight"),
            bias: with_bias.then(|| Tensor::param(&[d_out], vec![0.0; d_out]).expect("zeros bias")),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = x.matmul(&self.weight)?;
        match &self.bias {
            Some(b) => y.add_row_bias(b),
            None => Ok(y),
        }
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        out.push((format!("{prefix}.weight"), self.weight.clone()));
        if let Some(b) = &self.bias {
            out.push((format!("{prefix}.bias"), b.clone()));
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight.numel() + self.bias.as_ref().map_or(0, Tensor::numel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamKind};

    #[test]
    fn conv_layer_init_is_seed_deterministic() {
        let mut r1 = stream(3, StreamKind::Init);
        let mut r2 = stream(3, StreamKind::Init);
        let a = Conv2d::new(4, 8, 3, 1, 1, 1, true, &mut r1);
        let b = Conv2d::new(4, 8, 3, 1, 1, 1, true, &mut r2);
        assert_eq!(a.weight.to_vec(), b.weight.to_vec());
        assert_eq!(a.bias.unwrap().to_vec(), b.bias.unwrap().to_vec());
    }

    #[test]
    fn linear_bias_broadcasts_over_rows() {
        let l = Linear {
            weight: Tensor::param(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
            bias: Some(Tensor::param(&[2], vec![10.0, 20.0]).unwrap()),
        };
        let x = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = l.forward(&x).unwrap();
        assert_eq!(y.to_vec(), vec![11.0, 22.0, 13.0, 24.0]);
    }
}
