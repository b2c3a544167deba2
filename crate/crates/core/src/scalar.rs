//! Floating-point scalar abstraction shared by the geometry, clustering and
//! loss code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar usable by every numeric routine in the crate (`f32` or `f64`).
///
/// The tolerance constants are expressed in pixel units and are tuned for
/// image coordinates up to a few thousand pixels.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Display + Send + Sync + 'static
{
    /// Orientation / containment tolerance, px.
    const GEOM_EPS: Self;
    /// Area below which a polygon counts as empty, px².
    const AREA_EPS: Self;
    /// Allowed deviation of a probability vector from unit sum.
    const PROB_SUM_TOL: Self;

    /// Converts an `f64` literal. Every finite `f64` is representable
    /// (possibly rounded) in both supported types.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const GEOM_EPS: Self = 1e-9;
    const AREA_EPS: Self = 1e-6;
    const PROB_SUM_TOL: Self = 1e-9;
}

impl Scalar for f32 {
    const GEOM_EPS: Self = 1e-4;
    const AREA_EPS: Self = 1e-2;
    const PROB_SUM_TOL: Self = 1e-5;
}
