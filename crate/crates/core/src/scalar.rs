//! Scalar abstraction shared by the amplitude algebra.

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Real floating-point type the simulator can run on (`f32` or `f64`).
///
/// The tolerances are the thresholds used by normalization and unitarity
/// checks. They are tied to the precision of the type: a handful of dozen
/// arithmetic steps stay well inside them.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Allowed `|Σ|amp|² − 1|` after construction or evolution.
    const NORM_TOL: Self;
    /// Allowed `‖U†U − I‖_max` for an optical element.
    const UNITARY_TOL: Self;

    /// Lossless-enough conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {
    const NORM_TOL: Self = 1e-5;
    const UNITARY_TOL: Self = 1e-5;
}

impl Real for f64 {
    const NORM_TOL: Self = 1e-12;
    const UNITARY_TOL: Self = 1e-12;
}

/// Complex probability amplitude.
pub type Amplitude<T> = Complex<T>;

pub(crate) fn is_finite<T: Real>(z: &Complex<T>) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

pub(crate) fn deg_to_rad<T: Real>(deg: T) -> T {
    deg * T::PI() / T::lit(180.0)
}
