//! Dense NCHW tensors and reverse-mode autodiff.
//!
//! The compute core is deliberately simple: contiguous `Vec<T>` storage,
//! loop-nest kernels, and a Wengert tape for gradients. No external ML
//! framework; every operator here has a hand-written adjoint that is checked
//! against finite differences in the test suite.

mod adam;
mod conv;
mod tape;

pub use adam::{adam_step, AdamState};
pub use conv::{conv2d_raw, transposed_conv2d_raw, upsample_bilinear_raw};
pub use tape::{Gradients, Tape, TensorId};

use crate::error::{Error, Result};
use num_traits::{Float, FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};

/// Scalar type the whole stack is generic over. `f32` for speed, `f64` for
/// gradient checking. The byte hooks give checkpoints a fixed LE layout.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Default + Send + Sync + 'static
{
    const BYTE_WIDTH: u8;
    fn to_le_bytes(self) -> Vec<u8>;
    fn from_le_slice(bytes: &[u8]) -> Self;
    /// Lossy conversion used when a quantity is naturally computed in f64
    /// (RNG draws, fan-in scales) and then stored at working precision.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 conversion")
    }
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("f64 conversion")
    }
}

impl Real for f32 {
    const BYTE_WIDTH: u8 = 4;
    fn to_le_bytes(self) -> Vec<u8> {
        f32::to_le_bytes(self).to_vec()
    }
    fn from_le_slice(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4 bytes"))
    }
}

impl Real for f64 {
    const BYTE_WIDTH: u8 = 8;
    fn to_le_bytes(self) -> Vec<u8> {
        f64::to_le_bytes(self).to_vec()
    }
    fn from_le_slice(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8 bytes"))
    }
}

/// NCHW shape. All rank-4; vectors and scalars use size-1 axes.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Shape4 {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape4 {
    pub fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape4 { n, c, h, w }
    }

    pub fn scalar() -> Self {
        Shape4::new(1, 1, 1, 1)
    }

    pub fn len(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_scalar(&self) -> bool {
        self.len() == 1
    }

    #[inline]
    pub fn index(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.c + c) * self.h + h) * self.w + w
    }
}

impl Display for Shape4 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}, {}, {}]", self.n, self.c, self.h, self.w)
    }
}

/// Plain dense tensor. Cheap to clone only when you mean it; most code moves.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4<T: Real> {
    pub shape: Shape4,
    pub data: Vec<T>,
}

impl<T: Real> Tensor4<T> {
    pub fn zeros(shape: Shape4) -> Self {
        Tensor4 {
            shape,
            data: vec![T::zero(); shape.len()],
        }
    }

    pub fn full(shape: Shape4, value: T) -> Self {
        Tensor4 {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_vec(shape: Shape4, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::ShapeMismatch {
                context: "Tensor4::from_vec",
                left: shape.to_string(),
                right: format!("[len {}]", data.len()),
            });
        }
        Ok(Tensor4 { shape, data })
    }

    pub fn scalar(value: T) -> Self {
        Tensor4 {
            shape: Shape4::scalar(),
            data: vec![value],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> T {
        self.data[self.shape.index(n, c, h, w)]
    }

    #[inline]
    pub fn at_mut(&mut self, n: usize, c: usize, h: usize, w: usize) -> &mut T {
        let i = self.shape.index(n, c, h, w);
        &mut self.data[i]
    }

    pub fn scalar_value(&self) -> Result<T> {
        if !self.shape.is_scalar() {
            return Err(Error::NonScalarRoot(self.shape.to_string()));
        }
        Ok(self.data[0])
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor4 {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }
}

/// Largest elementwise |a - b|. Test helper exposed for examples too.
pub fn max_abs_diff<T: Real>(a: &Tensor4<T>, b: &Tensor4<T>) -> T {
    assert_eq!(a.shape, b.shape, "max_abs_diff shapes");
    a.data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| (x - y).abs())
        .fold(T::zero(), T::max)
}
