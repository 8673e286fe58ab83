//! Scalar abstraction: every numeric routine in this crate is generic over a
//! floating-point type implementing [`Real`]. `f64` is what the CLI and the
//! test suites use; `f32` is available for callers that want it.

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use rand::distr::StandardUniform;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Floating-point scalar usable throughout the library: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum<Self>
    + fmt::Debug
    + fmt::Display
    + fmt::LowerExp
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64` (rounds to nearest for `f32`).
    fn cast(x: f64) -> Self;

    /// Widening conversion to `f64`.
    fn to_f64_lossy(self) -> f64;

    /// One standard-normal draw.
    fn standard_normal<G: Rng + ?Sized>(rng: &mut G) -> Self;

    /// One uniform draw from `[0, 1)`.
    fn unit_uniform<G: Rng + ?Sized>(rng: &mut G) -> Self;

    /// ln(2π), used by Gaussian normalizers.
    fn ln_two_pi() -> Self {
        Self::cast(1.837_877_066_409_345_5)
    }
}

impl Real for f64 {
    fn cast(x: f64) -> Self {
        x
    }

    fn to_f64_lossy(self) -> f64 {
        self
    }

    fn standard_normal<G: Rng + ?Sized>(rng: &mut G) -> Self {
        StandardNormal.sample(rng)
    }

    fn unit_uniform<G: Rng + ?Sized>(rng: &mut G) -> Self {
        StandardUniform.sample(rng)
    }
}

impl Real for f32 {
    fn cast(x: f64) -> Self {
        x as f32
    }

    fn to_f64_lossy(self) -> f64 {
        f64::from(self)
    }

    fn standard_normal<G: Rng + ?Sized>(rng: &mut G) -> Self {
        StandardNormal.sample(rng)
    }

    fn unit_uniform<G: Rng + ?Sized>(rng: &mut G) -> Self {
        StandardUniform.sample(rng)
    }
}
