//! Scalar abstraction shared by every solver in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::sync::Arc;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the solvers are generic over (`f32` or `f64`).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + LowerExp + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Converts a count into the scalar type.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// A shareable real function of one real variable (load amplitudes, kernels,
/// degradation maps).
#[derive(Clone)]
pub struct ScalarFn<T>(Arc<dyn Fn(T) -> T + Send + Sync>);

impl<T: Scalar> ScalarFn<T> {
    pub fn new(f: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn constant(c: T) -> Self {
        Self::new(move |_| c)
    }

    #[inline]
    pub fn call(&self, x: T) -> T {
        (self.0)(x)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &ScalarFn<T>) -> Self {
        let outer = self.clone();
        let inner = inner.clone();
        Self::new(move |x| outer.call(inner.call(x)))
    }

    pub fn scaled(&self, factor: T) -> Self {
        let f = self.clone();
        Self::new(move |x| factor * f.call(x))
    }
}

impl<T> Debug for ScalarFn<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ScalarFn(..)")
    }
}

/// Composite trapezoid weights for `n` uniformly spaced samples with spacing `h`.
pub(crate) fn trapezoid<T: Scalar>(values: impl ExactSizeIterator<Item = T>, h: T) -> T {
    let n = values.len();
    if n < 2 {
        return T::zero();
    }
    let half = T::lit(0.5);
    let mut sum = T::zero();
    for (i, v) in values.enumerate() {
        let w = if i == 0 || i + 1 == n { half } else { T::one() };
        sum += w * v;
    }
    sum * h
}
