//! Elementwise, shape and linear-algebra operations with their gradients.

use super::gemm::gemm;
use super::{row_major_strides, Tensor};
use crate::error::{dim_err, Result};

fn check_same_shape(op: &str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return dim_err(format!(
            "{op}: shape {:?} vs {:?}",
            a.shape(),
            b.shape()
        ));
    }
    Ok(())
}

impl Tensor {
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        check_same_shape("add", self, other)?;
        let data = self
            .data()
            .iter()
            .zip(other.data().iter())
            .map(|(a, b)| a + b)
            .collect();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone(), other.clone()],
            Box::new(|parents, _out, grad| {
                for p in parents {
                    if p.requires_grad() {
                        p.with_grad_mut(|g| {
                            for (gi, di) in g.iter_mut().zip(grad) {
                                *gi += di;
                            }
                        });
                    }
                }
            }),
        ))
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        check_same_shape("sub", self, other)?;
        let data = self
            .data()
            .iter()
            .zip(other.data().iter())
            .map(|(a, b)| a - b)
            .collect();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone(), other.clone()],
            Box::new(|parents, _out, grad| {
                if parents[0].requires_grad() {
                    parents[0].with_grad_mut(|g| {
                        for (gi, di) in g.iter_mut().zip(grad) {
                            *gi += di;
                        }
                    });
                }
                if parents[1].requires_grad() {
                    parents[1].with_grad_mut(|g| {
                        for (gi, di) in g.iter_mut().zip(grad) {
                            *gi -= di;
                        }
                    });
                }
            }),
        ))
    }

    /// Elementwise product.
    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        check_same_shape("mul", self, other)?;
        let data = self
            .data()
            .iter()
            .zip(other.data().iter())
            .map(|(a, b)| a * b)
            .collect();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone(), other.clone()],
            Box::new(|parents, _out, grad| {
                if parents[0].requires_grad() {
                    let b = parents[1].data();
                    parents[0].with_grad_mut(|g| {
                        for i in 0..g.len() {
                            g[i] += grad[i] * b[i];
                        }
                    });
                }
                if parents[1].requires_grad() {
                    let a = parents[0].data();
                    parents[1].with_grad_mut(|g| {
                        for i in 0..g.len() {
                            g[i] += grad[i] * a[i];
                        }
                    });
                }
            }),
        ))
    }

    pub fn scale(&self, factor: f64) -> Tensor {
        let data = self.data().iter().map(|v| v * factor).collect();
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            Box::new(move |parents, _out, grad| {
                parents[0].with_grad_mut(|g| {
                    for (gi, di) in g.iter_mut().zip(grad) {
                        *gi += di * factor;
                    }
                });
            }),
        )
    }

    pub fn relu(&self) -> Tensor {
        self.leaky_relu(0.0)
    }

    /// max(x, slope * x); the DPT default slope is 0.1.
    pub fn leaky_relu(&self, slope: f64) -> Tensor {
        let data = self
            .data()
            .iter()
            .map(|&v| if v > 0.0 { v } else { slope * v })
            .collect();
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            Box::new(move |parents, _out, grad| {
                let x = parents[0].to_vec();
                parents[0].with_grad_mut(|g| {
                    for i in 0..g.len() {
                        g[i] += grad[i] * if x[i] > 0.0 { 1.0 } else { slope };
                    }
                });
            }),
        )
    }

    /// Sum of all scalars, as a one-element tensor.
    pub fn sum(&self) -> Tensor {
        let total: f64 = self.data().iter().sum();
        Tensor::from_op(
            vec![1],
            vec![total],
            vec![self.clone()],
            Box::new(|parents, _out, grad| {
                let d = grad[0];
                parents[0].with_grad_mut(|g| {
                    for gi in g.iter_mut() {
                        *gi += d;
                    }
                });
            }),
        )
    }

    /// Mean absolute difference; the training loss.
    ///
    /// The |x| subgradient at 0 is taken as 0, so l1_loss(x, x) has an
    /// exactly zero gradient.
    pub fn l1_loss(&self, target: &Tensor) -> Result<Tensor> {
        check_same_shape("l1_loss", self, target)?;
        let n = self.numel() as f64;
        let total: f64 = self
            .data()
            .iter()
            .zip(target.data().iter())
            .map(|(a, b)| (a - b).abs())
            .sum();
        Ok(Tensor::from_op(
            vec![1],
            vec![total / n],
            vec![self.clone(), target.clone()],
            Box::new(move |parents, _out, grad| {
                let d = grad[0] / n;
                let pred = parents[0].to_vec();
                let tgt = parents[1].to_vec();
                let sign = |i: usize| {
                    let diff = pred[i] - tgt[i];
                    if diff > 0.0 {
                        1.0
                    } else if diff < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                };
                if parents[0].requires_grad() {
                    parents[0].with_grad_mut(|g| {
                        for i in 0..g.len() {
                            g[i] += d * sign(i);
                        }
                    });
                }
                if parents[1].requires_grad() {
                    parents[1].with_grad_mut(|g| {
                        for i in 0..g.len() {
                            g[i] -= d * sign(i);
                        }
                    });
                }
            }),
        ))
    }

    /// Row-stabilized softmax over the last axis of an n×m matrix.
    pub fn softmax_rows(&self) -> Result<Tensor> {
        if self.ndim() != 2 {
            return dim_err(format!("softmax_rows wants a 2-D tensor, got {:?}", self.shape()));
        }
        let (n, m) = (self.shape()[0], self.shape()[1]);
        let x = self.data();
        let mut out = vec![0.0; n * m];
        for r in 0..n {
            let row = &x[r * m..(r + 1) * m];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for c in 0..m {
                let e = (row[c] - max).exp();
                out[r * m + c] = e;
                denom += e;
            }
            for c in 0..m {
                out[r * m + c] /= denom;
            }
        }
        drop(x);
        Ok(Tensor::from_op(
            vec![n, m],
            out,
            vec![self.clone()],
            Box::new(move |parents, out, grad| {
                // dx = y * (dy - sum(y * dy)) per row
                parents[0].with_grad_mut(|g| {
                    for r in 0..n {
                        let y = &out[r * m..(r + 1) * m];
                        let dy = &grad[r * m..(r + 1) * m];
                        let dot: f64 = y.iter().zip(dy).map(|(a, b)| a * b).sum();
                        for c in 0..m {
                            g[r * m + c] += y[c] * (dy[c] - dot);
                        }
                    }
                });
            }),
        ))
    }

    /// Standard 2-D matrix product.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.ndim() != 2 || other.ndim() != 2 {
            return dim_err(format!(
                "matmul wants 2-D tensors, got {:?} and {:?}",
                self.shape(),
                other.shape()
            ));
        }
        let (n, k) = (self.shape()[0], self.shape()[1]);
        let (k2, m) = (other.shape()[0], other.shape()[1]);
        if k != k2 {
            return dim_err(format!(
                "matmul inner extents: {:?} x {:?}",
                self.shape(),
                other.shape()
            ));
        }
        let mut out = vec![0.0; n * m];
        gemm(false, false, n, k, m, 1.0, &self.data(), &other.data(), 0.0, &mut out);
        Ok(Tensor::from_op(
            vec![n, m],
            out,
            vec![self.clone(), other.clone()],
            Box::new(move |parents, _out, grad| {
                // dA = dC * B^T, dB = A^T * dC
                if parents[0].requires_grad() {
                    let b = parents[1].data();
                    parents[0].with_grad_mut(|g| {
                        gemm(false, true, n, m, k, 1.0, grad, &b, 1.0, g);
                    });
                }
                if parents[1].requires_grad() {
                    let a = parents[0].data();
                    parents[1].with_grad_mut(|g| {
                        gemm(true, false, k, n, m, 1.0, &a, grad, 1.0, g);
                    });
                }
            }),
        ))
    }

    /// Add a length-d bias to every row of an n×d matrix.
    pub fn add_row_bias(&self, bias: &Tensor) -> Result<Tensor> {
        if self.ndim() != 2 || bias.ndim() != 1 || bias.shape()[0] != self.shape()[1] {
            return dim_err(format!(
                "add_row_bias: {:?} with bias {:?}",
                self.shape(),
                bias.shape()
            ));
        }
        let (n, d) = (self.shape()[0], self.shape()[1]);
        let b = bias.data();
        let data = self
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| v + b[i % d])
            .collect();
        drop(b);
        Ok(Tensor::from_op(
            vec![n, d],
            data,
            vec![self.clone(), bias.clone()],
            Box::new(move |parents, _out, grad| {
                if parents[0].requires_grad() {
                    parents[0].with_grad_mut(|g| {
                        for (gi, di) in g.iter_mut().zip(grad) {
                            *gi += di;
                        }
                    });
                }
                if parents[1].requires_grad() {
                    parents[1].with_grad_mut(|g| {
                        for r in 0..n {
                            for c in 0..d {
                                g[c] += grad[r * d + c];
                            }
                        }
                    });
                }
            }),
        ))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if shape.iter().product::<usize>() != self.numel() {
            return dim_err(format!(
                "reshape {:?} -> {:?} changes element count",
                self.shape(),
                shape
            ));
        }
        Ok(Tensor::from_op(
            shape.to_vec(),
            self.to_vec(),
            vec![self.clone()],
            Box::new(|parents, _out, grad| {
                parents[0].with_grad_mut(|g| {
                    for (gi, di) in g.iter_mut().zip(grad) {
                        *gi += di;
                    }
                });
            }),
        ))
    }

    /// Swap two axes.
    pub fn transpose(&self, axis_a: usize, axis_b: usize) -> Result<Tensor> {
        let nd = self.ndim();
        if axis_a >= nd || axis_b >= nd {
            return dim_err(format!(
                "transpose axes ({axis_a},{axis_b}) out of range for {:?}",
                self.shape()
            ));
        }
        let mut out_shape = self.shape().to_vec();
        out_shape.swap(axis_a, axis_b);
        let data = permute_swap(&self.data(), self.shape(), axis_a, axis_b);
        Ok(Tensor::from_op(
            out_shape.clone(),
            data,
            vec![self.clone()],
            Box::new(move |parents, _out, grad| {
                let back = permute_swap(grad, &out_shape, axis_a, axis_b);
                parents[0].with_grad_mut(|g| {
                    for (gi, di) in g.iter_mut().zip(&back) {
                        *gi += di;
                    }
                });
            }),
        ))
    }

    /// Concatenate along an axis; all other extents must agree.
    pub fn concat(parts: &[&Tensor], axis: usize) -> Result<Tensor> {
        if parts.is_empty() {
            return dim_err("concat of zero tensors".to_string());
        }
        let nd = parts[0].ndim();
        if axis >= nd {
            return dim_err(format!("concat axis {axis} out of range"));
        }
        let mut axis_total = 0;
        for p in parts {
            if p.ndim() != nd {
                return dim_err("concat rank mismatch".to_string());
            }
            for (d, (&a, &b)) in parts[0].shape().iter().zip(p.shape()).enumerate() {
                if d != axis && a != b {
                    return dim_err(format!(
                        "concat shape mismatch on axis {d}: {:?} vs {:?}",
                        parts[0].shape(),
                        p.shape()
                    ));
                }
            }
            axis_total += p.shape()[axis];
        }
        let mut out_shape = parts[0].shape().to_vec();
        out_shape[axis] = axis_total;

        let outer: usize = out_shape[..axis].iter().product();
        let inner: usize = out_shape[axis + 1..].iter().product();
        let mut data = vec![0.0; out_shape.iter().product()];
        let mut offsets = Vec::with_capacity(parts.len());
        let mut cursor = 0;
        for p in parts {
            offsets.push(cursor);
            let len = p.shape()[axis];
            let src = p.data();
            for o in 0..outer {
                let dst_start = (o * axis_total + cursor) * inner;
                let src_start = o * len * inner;
                data[dst_start..dst_start + len * inner]
                    .copy_from_slice(&src[src_start..src_start + len * inner]);
            }
            cursor += len;
        }

        let lens: Vec<usize> = parts.iter().map(|p| p.shape()[axis]).collect();
        Ok(Tensor::from_op(
            out_shape,
            data,
            parts.iter().map(|p| (*p).clone()).collect(),
            Box::new(move |parents, _out, grad| {
                for (pi, p) in parents.iter().enumerate() {
                    if !p.requires_grad() {
                        continue;
                    }
                    let len = lens[pi];
                    let off = offsets[pi];
                    p.with_grad_mut(|g| {
                        for o in 0..outer {
                            let src_start = (o * axis_total + off) * inner;
                            let dst_start = o * len * inner;
                            for i in 0..len * inner {
                                g[dst_start + i] += grad[src_start + i];
                            }
                        }
                    });
                }
            }),
        ))
    }

    /// Take `len` extents starting at `start` along `axis`.
    pub fn slice(&self, axis: usize, start: usize, len: usize) -> Result<Tensor> {
        if axis >= self.ndim() || start + len > self.shape()[axis] {
            return dim_err(format!(
                "slice axis {axis} range {start}..{} out of {:?}",
                start + len,
                self.shape()
            ));
        }
        let axis_len = self.shape()[axis];
        let outer: usize = self.shape()[..axis].iter().product();
        let inner: usize = self.shape()[axis + 1..].iter().product();
        let mut out_shape = self.shape().to_vec();
        out_shape[axis] = len;
        let src = self.data();
        let mut data = vec![0.0; outer * len * inner];
        for o in 0..outer {
            let src_start = (o * axis_len + start) * inner;
            let dst_start = o * len * inner;
            data[dst_start..dst_start + len * inner]
                .copy_from_slice(&src[src_start..src_start + len * inner]);
        }
        drop(src);
        Ok(Tensor::from_op(
            out_shape,
            data,
            vec![self.clone()],
            Box::new(move |parents, _out, grad| {
                parents[0].with_grad_mut(|g| {
                    for o in 0..outer {
                        let dst_start = (o * axis_len + start) * inner;
                        let src_start = o * len * inner;
                        for i in 0..len * inner {
                            g[dst_start + i] += grad[src_start + i];
                        }
                    }
                });
            }),
        ))
    }
}

fn permute_swap(data: &[f64], shape: &[usize], a: usize, b: usize) -> Vec<f64> {
    if a == b {
        return data.to_vec();
    }
    let mut out_shape = shape.to_vec();
    out_shape.swap(a, b);
    let in_strides = row_major_strides(shape);
    let out_strides = row_major_strides(&out_shape);
    let mut out = vec![0.0; data.len()];
    let nd = shape.len();
    let mut idx = vec![0usize; nd];
    for &val in data {
        let mut off = 0;
        for d in 0..nd {
            let od = if d == a {
                b
            } else if d == b {
                a
            } else {
                d
            };
            off += idx[d] * out_strides[od];
        }
        out[off] = val;
        // advance the row-major counter
        for d in (0..nd).rev() {
            idx[d] += 1;
            if idx[d] < shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    let _ = in_strides;
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn matmul_identity() {
        let eye = Tensor::from_vec(&[3, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let m = Tensor::from_vec(&[3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(eye.matmul(&m).unwrap().to_vec(), m.to_vec());

        let a = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let i2 = Tensor::from_vec(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(a.matmul(&i2).unwrap().to_vec(), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        let mut rng = crate::rng::stream(11, crate::rng::StreamKind::Test);
        let a = crate::nn::uniform_tensor(&[3, 4], 1.0, &mut rng);
        let b = crate::nn::uniform_tensor(&[4, 2], 1.0, &mut rng);
        let c = a.matmul(&b).unwrap();
        let (ad, bd) = (a.to_vec(), b.to_vec());
        for i in 0..3 {
            for j in 0..2 {
                let mut want = 0.0;
                for p in 0..4 {
                    want += ad[i * 4 + p] * bd[p * 2 + j];
                }
                assert!(close(c.to_vec()[i * 2 + j], want, 1e-12));
            }
        }
    }

    #[test]
    fn matmul_shape_mismatch_is_dimension_error() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[2, 3]);
        assert!(a.matmul(&b).is_err());
    }

    #[test]
    fn softmax_single_column_is_ones() {
        let x = Tensor::from_vec(&[3, 1], vec![-5.0, 0.0, 17.0]).unwrap();
        let y = x.softmax_rows().unwrap();
        assert_eq!(y.to_vec(), vec![1.0; 3]);
    }

    #[test]
    fn softmax_symmetric_row() {
        let x = Tensor::from_vec(&[1, 3], vec![0.0, 0.0, 0.0]).unwrap();
        let y = x.softmax_rows().unwrap();
        for v in y.to_vec() {
            assert!(close(v, 1.0 / 3.0, 1e-15));
        }
    }

    #[test]
    fn softmax_large_inputs_match_shifted_computation() {
        let x = Tensor::from_vec(&[1, 3], vec![1000.0, 1000.5, 999.0]).unwrap();
        let y = x.softmax_rows().unwrap();
        // expected via the shifted form exp(x - max) / sum
        let shifted = [0.0f64, 0.5, -1.0];
        let denom: f64 = shifted.iter().map(|v| (v - 0.5).exp()).sum();
        for (got, s) in y.to_vec().iter().zip(shifted) {
            assert!(got.is_finite());
            assert!(close(*got, (s - 0.5).exp() / denom, 1e-12));
        }
    }

    #[test]
    fn l1_loss_cases() {
        let x = Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap();
        assert_eq!(x.l1_loss(&x).unwrap().item(), 0.0);
        let y = Tensor::from_vec(&[2], vec![2.0, 4.0]).unwrap();
        assert_eq!(x.l1_loss(&y).unwrap().item(), 1.5);
    }

    #[test]
    fn l1_grad_matches_hand_derivative() {
        // loss = l1(w * x, y) at w=2, x=[1,2], y=[1,5]
        // pred = [2,4], diff = [1,-1], dl/dpred = [1/2, -1/2]
        // dl/dw = sum(dl/dpred * x) = 1/2 - 1 = -0.5
        let w = Tensor::param(&[2], vec![2.0, 2.0]).unwrap();
        let x = Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap();
        let y = Tensor::from_vec(&[2], vec![1.0, 5.0]).unwrap();
        let loss = w.mul(&x).unwrap().l1_loss(&y).unwrap();
        loss.backward().unwrap();
        assert_eq!(w.grad().unwrap(), vec![0.5, -1.0]);

        // subgradient at zero diff is zero
        let p = Tensor::param(&[2], vec![1.0, 2.0]).unwrap();
        let t = Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap();
        p.l1_loss(&t).unwrap().backward().unwrap();
        assert_eq!(p.grad().unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn concat_and_slice_round_trip() {
        let a = Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Tensor::from_vec(&[2, 3], vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]).unwrap();
        let c = Tensor::concat(&[&a, &b], 0).unwrap();
        assert_eq!(c.shape(), &[4, 3]);
        assert_eq!(c.slice(0, 0, 2).unwrap().to_vec(), a.to_vec());
        assert_eq!(c.slice(0, 2, 2).unwrap().to_vec(), b.to_vec());

        let d = Tensor::concat(&[&a, &b], 1).unwrap();
        assert_eq!(d.shape(), &[2, 6]);
        assert_eq!(d.slice(1, 3, 3).unwrap().to_vec(), b.to_vec());
    }

    #[test]
    fn transpose_swaps_axes() {
        let a = Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let t = a.transpose(0, 1).unwrap();
        assert_eq!(t.shape(), &[3, 2]);
        assert_eq!(t.to_vec(), vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        let back = t.transpose(1, 0).unwrap();
        assert_eq!(back.to_vec(), a.to_vec());
    }

    #[test]
    fn leaky_relu_forward_and_grad() {
        let x = Tensor::param(&[4], vec![-2.0, -0.5, 0.5, 2.0]).unwrap();
        let y = x.leaky_relu(0.1);
        assert_eq!(y.to_vec(), vec![-0.2, -0.05, 0.5, 2.0]);
        y.sum().backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![0.1, 0.1, 1.0, 1.0]);
    }
}
