//! Floating-point scalar abstraction: the numeric engine is generic over
//! `Scalar`, concrete code uses the `f64` aliases at the crate root.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::fmt::{Debug, Display};
use std::iter::Sum;

pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + num_traits::NumAssignOps
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` constant (hyperparameters, literals).
    fn from_config(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 constant")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }

    /// One standard-normal draw from the given stream.
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Fused multiply-add where the target has hardware FMA, plain `a*b + c`
    /// otherwise (so builds without FMA never hit the libm soft fallback).
    fn mul_add_fast(self, b: Self, c: Self) -> Self;

    /// `c += a · b` on row-major storage with explicit [row, col] strides per
    /// operand, via the single-threaded GEMM backend.
    fn gemm_acc(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        a_strides: [isize; 2],
        b: &[Self],
        b_strides: [isize; 2],
        c: &mut [Self],
    );
}

impl Scalar for f64 {
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    #[inline(always)]
    fn mul_add_fast(self, b: Self, c: Self) -> Self {
        #[cfg(target_feature = "fma")]
        {
            self.mul_add(b, c)
        }
        #[cfg(not(target_feature = "fma"))]
        {
            self * b + c
        }
    }

    fn gemm_acc(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        a_strides: [isize; 2],
        b: &[Self],
        b_strides: [isize; 2],
        c: &mut [Self],
    ) {
        debug_assert_eq!(c.len(), m * n);
        // Slice extents are validated by the callers in `tensor::kernels`.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr(),
                a_strides[0],
                a_strides[1],
                b.as_ptr(),
                b_strides[0],
                b_strides[1],
                1.0,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
}

impl Scalar for f32 {
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    #[inline(always)]
    fn mul_add_fast(self, b: Self, c: Self) -> Self {
        #[cfg(target_feature = "fma")]
        {
            self.mul_add(b, c)
        }
        #[cfg(not(target_feature = "fma"))]
        {
            self * b + c
        }
    }

    fn gemm_acc(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        a_strides: [isize; 2],
        b: &[Self],
        b_strides: [isize; 2],
        c: &mut [Self],
    ) {
        debug_assert_eq!(c.len(), m * n);
        unsafe {
            matrixmultiply::sgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr(),
                a_strides[0],
                a_strides[1],
                b.as_ptr(),
                b_strides[0],
                b_strides[1],
                1.0,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
}
