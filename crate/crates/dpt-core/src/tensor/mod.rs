//! Dense f64 tensors with taped reverse-mode automatic differentiation.
//!
//! Every operation that sees at least one gradient-tracking input records a
//! node (parent handles plus a backward closure) on the output tensor. The
//! graph is a DAG ordered by creation id; [`Tensor::backward`] walks it once
//! in reverse topological order, accumulates gradients into every tensor
//! that requires them, and frees the tape as it goes. Tensor data is
//! immutable after creation except for gradient accumulation and explicit
//! leaf updates through [`Tensor::set_data`] (the optimizer path).

use std::cell::{Cell, Ref, RefCell};
use std::collections::HashSet;
use std::fmt;
use std::rc::Rc;

use crate::error::{dim_err, Error, Result};

pub(crate) mod gemm;

mod conv;
mod ops;
mod patch;

thread_local! {
    static NEXT_ID: Cell<u64> = const { Cell::new(0) };
}

fn next_id() -> u64 {
    NEXT_ID.with(|c| {
        let id = c.get();
        c.set(id + 1);
        id
    })
}

/// Backward closure: (parents, output data, output gradient).
type BackwardFn = Box<dyn Fn(&[Tensor], &[f64], &[f64])>;

struct Node {
    parents: Vec<Tensor>,
    backward: BackwardFn,
}

struct Inner {
    id: u64,
    shape: Vec<usize>,
    data: RefCell<Vec<f64>>,
    requires_grad: bool,
    grad: RefCell<Option<Vec<f64>>>,
    node: RefCell<Option<Node>>,
}

/// Dense N-dimensional array of f64 scalars in row-major order.
///
/// Cloning is cheap (shared handle); two clones see the same data and
/// gradient buffer.
#[derive(Clone)]
pub struct Tensor {
    inner: Rc<Inner>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.inner.id)
            .field("shape", &self.inner.shape)
            .field("requires_grad", &self.inner.requires_grad)
            .finish()
    }
}

pub(crate) fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    strides
}

impl Tensor {
    fn build(shape: Vec<usize>, data: Vec<f64>, requires_grad: bool, node: Option<Node>) -> Tensor {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor {
            inner: Rc::new(Inner {
                id: next_id(),
                shape,
                data: RefCell::new(data),
                requires_grad,
                grad: RefCell::new(None),
                node: RefCell::new(node),
            }),
        }
    }

    /// A plain value tensor (no gradient tracking).
    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        if shape.iter().product::<usize>() != data.len() {
            return dim_err(format!(
                "shape {:?} wants {} scalars, got {}",
                shape,
                shape.iter().product::<usize>(),
                data.len()
            ));
        }
        Ok(Self::build(shape.to_vec(), data, false, None))
    }

    /// A leaf parameter: gradient-tracking enabled.
    pub fn param(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        let t = Self::from_vec(shape, data)?;
        Ok(Self::build(t.inner.shape.clone(), t.into_data(), true, None))
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        Self::build(shape.to_vec(), vec![0.0; shape.iter().product()], false, None)
    }

    pub fn full(shape: &[usize], value: f64) -> Tensor {
        Self::build(shape.to_vec(), vec![value; shape.iter().product()], false, None)
    }

    pub fn scalar(value: f64) -> Tensor {
        Self::build(vec![1], vec![value], false, None)
    }

    /// Output of a recorded operation. The node is taped only when some
    /// parent tracks gradients.
    pub(crate) fn from_op(
        shape: Vec<usize>,
        data: Vec<f64>,
        parents: Vec<Tensor>,
        backward: BackwardFn,
    ) -> Tensor {
        let requires_grad = parents.iter().any(|p| p.requires_grad());
        let node = requires_grad.then_some(Node { parents, backward });
        Self::build(shape, data, requires_grad, node)
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn ndim(&self) -> usize {
        self.inner.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.inner.shape.iter().product()
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    pub(crate) fn id(&self) -> u64 {
        self.inner.id
    }

    /// Borrow the raw row-major scalar buffer.
    pub fn data(&self) -> Ref<'_, Vec<f64>> {
        self.inner.data.borrow()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.inner.data.borrow().clone()
    }

    fn into_data(self) -> Vec<f64> {
        self.inner.data.borrow().clone()
    }

    /// The single scalar of a one-element tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.numel(), 1, "item() on a non-scalar tensor");
        self.inner.data.borrow()[0]
    }

    /// Replace the data of a leaf tensor in place (optimizer updates).
    pub fn set_data(&self, data: Vec<f64>) {
        assert_eq!(data.len(), self.numel(), "set_data length mismatch");
        debug_assert!(self.inner.node.borrow().is_none(), "set_data on a taped node");
        *self.inner.data.borrow_mut() = data;
    }

    pub fn is_finite(&self) -> bool {
        self.inner.data.borrow().iter().all(|v| v.is_finite())
    }

    /// Current gradient, if any backward pass has deposited one.
    pub fn grad(&self) -> Option<Vec<f64>> {
        self.inner.grad.borrow().clone()
    }

    /// Take and clear the gradient.
    pub fn take_grad(&self) -> Option<Vec<f64>> {
        self.inner.grad.borrow_mut().take()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    /// Accumulate into the gradient buffer, allocating zeros on first use.
    pub(crate) fn with_grad_mut<R>(&self, f: impl FnOnce(&mut [f64]) -> R) -> R {
        let mut grad = self.inner.grad.borrow_mut();
        let buf = grad.get_or_insert_with(|| vec![0.0; self.numel()]);
        f(buf)
    }

    /// Reverse-mode sweep from a scalar result.
    ///
    /// Visits each recorded node exactly once in reverse topological order,
    /// accumulating gradients across all uses of every tensor, and frees the
    /// tape behind itself. Calling it a second time on the same graph is a
    /// no-op for the already-freed part.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::Usage(format!(
                "backward requires a scalar, got shape {:?}",
                self.shape()
            )));
        }
        // Collect every reachable taped node, then order by descending id.
        // Ids grow monotonically at creation, so children always sort before
        // their parents.
        let mut order: Vec<Tensor> = Vec::new();
        let mut seen: HashSet<u64> = HashSet::new();
        let mut stack = vec![self.clone()];
        seen.insert(self.id());
        while let Some(t) = stack.pop() {
            if let Some(node) = t.inner.node.borrow().as_ref() {
                for p in &node.parents {
                    if seen.insert(p.id()) {
                        stack.push(p.clone());
                    }
                }
            }
            order.push(t);
        }
        order.sort_by(|x, y| y.id().cmp(&x.id()));

        self.with_grad_mut(|g| g[0] += 1.0);
        for t in order {
            let node = t.inner.node.borrow_mut().take();
            let Some(node) = node else { continue };
            let grad = t.inner.grad.borrow();
            if let Some(grad) = grad.as_ref() {
                let data = t.inner.data.borrow();
                (node.backward)(&node.parents, &data, grad);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_data_length_enforced() {
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let x = Tensor::param(&[2], vec![1.0, 2.0]).unwrap();
        assert!(matches!(x.backward(), Err(Error::Usage(_))));
    }

    #[test]
    fn grad_of_sum_is_ones() {
        let x = Tensor::param(&[2, 2], vec![1.0, -2.0, 3.0, 4.0]).unwrap();
        let loss = x.sum();
        loss.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![1.0; 4]);
    }

    #[test]
    fn gradient_accumulates_across_uses() {
        // y = x + x  =>  dy/dx = 2, matching the sum of the two path grads.
        let x = Tensor::param(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        let y = x.add(&x).unwrap().sum();
        y.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![2.0; 3]);

        let a = Tensor::param(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        let b = Tensor::param(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        let z = a.add(&b).unwrap().sum();
        z.backward().unwrap();
        assert_eq!(a.grad().unwrap(), vec![1.0; 3]);
        assert_eq!(b.grad().unwrap(), vec![1.0; 3]);
    }

    #[test]
    fn tape_is_freed_after_backward() {
        let x = Tensor::param(&[2], vec![1.0, 2.0]).unwrap();
        let y = x.scale(2.0).sum();
        y.backward().unwrap();
        assert!(y.inner.node.borrow().is_none());
        // A second sweep finds no tape and leaves the gradient unchanged.
        y.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![2.0; 2]);
    }

    #[test]
    fn no_tape_without_requires_grad() {
        let x = Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap();
        let y = x.scale(2.0);
        assert!(!y.requires_grad());
        assert!(y.inner.node.borrow().is_none());
    }
}
