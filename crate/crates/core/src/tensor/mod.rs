//! Dense row-major tensors with reverse-mode automatic differentiation.
//!
//! `Tensor` is plain storage plus gradient bookkeeping. Differentiable
//! computation happens on a [`Graph`]: a define-by-run tape rebuilt for every
//! forward pass, which suits alternating generator/discriminator updates.

mod graph;
mod kernels;

pub use graph::{Activation, ElemOp, Graph, Var, LEAKY_SLOPE};
pub use kernels::{matmul_nn_acc, matmul_nt_acc, matmul_tn_acc};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use std::cell::{Ref, RefCell, RefMut};
use std::rc::Rc;

/// Dense N-dimensional array of scalars in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F: Scalar> {
    shape: Vec<usize>,
    data: Vec<F>,
    pub requires_grad: bool,
    /// Accumulated gradient, same extents as `data` when present.
    pub grad: Option<Vec<F>>,
}

impl<F: Scalar> Tensor<F> {
    pub fn new(shape: Vec<usize>, data: Vec<F>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::shape(format!("zero extent in shape {shape:?}")));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} implies {expected} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data, requires_grad: false, grad: None })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor { shape, data: vec![F::zero(); n], requires_grad: false, grad: None }
    }

    pub fn filled(shape: Vec<usize>, value: F) -> Self {
        let n = shape.iter().product();
        Tensor { shape, data: vec![value; n], requires_grad: false, grad: None }
    }

    /// Rank-1 singleton holding one value.
    pub fn scalar(value: F) -> Self {
        Tensor { shape: vec![1], data: vec![value], requires_grad: false, grad: None }
    }

    pub fn from_vec(data: Vec<F>) -> Self {
        Tensor { shape: vec![data.len()], data, requires_grad: false, grad: None }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    /// Value of a rank-0/1 singleton.
    pub fn item(&self) -> F {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    /// Row `i` of a rank-2 tensor.
    pub fn row(&self, i: usize) -> &[F] {
        let cols = self.shape[self.shape.len() - 1];
        &self.data[i * cols..(i + 1) * cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Zeroes or installs the gradient accumulator.
    pub fn zero_grad(&mut self) {
        match &mut self.grad {
            Some(g) => g.iter_mut().for_each(|v| *v = F::zero()),
            None => self.grad = Some(vec![F::zero(); self.data.len()]),
        }
    }

    pub fn accumulate_grad(&mut self, contribution: &[F]) {
        debug_assert_eq!(contribution.len(), self.data.len());
        let g = self.grad.get_or_insert_with(|| vec![F::zero(); self.data.len()]);
        for (dst, src) in g.iter_mut().zip(contribution) {
            *dst += *src;
        }
    }
}

/// Named trainable tensor shared between a model, the graphs it builds, and
/// the optimizer. Single-thread confined (models own their training thread).
#[derive(Clone)]
pub struct Param<F: Scalar> {
    inner: Rc<RefCell<ParamInner<F>>>,
}

#[derive(Debug)]
pub struct ParamInner<F: Scalar> {
    pub name: String,
    pub value: Tensor<F>,
}

impl<F: Scalar> Param<F> {
    pub fn new(name: impl Into<String>, mut value: Tensor<F>) -> Self {
        value.requires_grad = true;
        value.zero_grad();
        Param { inner: Rc::new(RefCell::new(ParamInner { name: name.into(), value })) }
    }

    pub fn name(&self) -> String {
        self.inner.borrow().name.clone()
    }

    pub fn borrow(&self) -> Ref<'_, ParamInner<F>> {
        self.inner.borrow()
    }

    pub fn borrow_mut(&self) -> RefMut<'_, ParamInner<F>> {
        self.inner.borrow_mut()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.inner.borrow().value.shape().to_vec()
    }

    pub fn numel(&self) -> usize {
        self.inner.borrow().value.numel()
    }

    /// Stable identity for de-duplicating registrations within one graph.
    pub(crate) fn id(&self) -> usize {
        Rc::as_ptr(&self.inner) as usize
    }

    pub fn value_clone(&self) -> Tensor<F> {
        self.inner.borrow().value.clone()
    }

    pub fn grad_clone(&self) -> Vec<F> {
        self.inner.borrow().value.grad.clone().unwrap_or_default()
    }

    pub fn zero_grad(&self) {
        self.inner.borrow_mut().value.zero_grad();
    }

    pub fn accumulate_grad(&self, contribution: &[F]) {
        self.inner.borrow_mut().value.accumulate_grad(contribution);
    }

    /// In-place update of the stored value (optimizer step, checkpoint load).
    pub fn update<T>(&self, f: impl FnOnce(&mut [F]) -> T) -> T {
        f(self.inner.borrow_mut().value.data_mut())
    }
}

impl<F: Scalar> std::fmt::Debug for Param<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let inner = self.inner.borrow();
        write!(f, "Param({:?}, shape {:?})", inner.name, inner.value.shape())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_shape_data_consistency() {
        assert!(Tensor::<f64>::new(vec![2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::<f64>::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::<f64>::new(vec![2, 0], vec![]).is_err());
    }

    #[test]
    fn grad_accumulates_in_place() {
        let mut t = Tensor::<f64>::zeros(vec![3]);
        t.accumulate_grad(&[1.0, 2.0, 3.0]);
        t.accumulate_grad(&[1.0, 1.0, 1.0]);
        assert_eq!(t.grad.as_deref().unwrap(), &[2.0, 3.0, 4.0]);
        t.zero_grad();
        assert_eq!(t.grad.as_deref().unwrap(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn generic_storage_works_for_f32() {
        let t = Tensor::<f32>::filled(vec![2, 2], 0.5);
        assert_eq!(t.numel(), 4);
        assert_eq!(t.row(1), &[0.5, 0.5]);
    }
}
