//! Scalar abstraction shared by the matrix and waveform code.

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display};

/// Real floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + rustfft::FftNum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any Real")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `e^{j 2 pi turns}`.
///
/// The phase is reduced to `[-1/2, 1/2]` turns in `f64` before it is cast, so
/// large integer arguments keep full precision even when `T = f32`.
pub fn cis<T: Real>(turns: f64) -> Complex<T> {
    let reduced = turns - turns.round();
    let (s, c) = (2.0 * std::f64::consts::PI * reduced).sin_cos();
    Complex::new(T::from_f64_lossy(c), T::from_f64_lossy(s))
}

/// Phase `a * b / m` in turns reduced exactly with integer arithmetic.
pub(crate) fn ratio_turns(a: i64, b: i64, m: i64) -> f64 {
    debug_assert!(m > 0);
    let num = ((a as i128 * b as i128).rem_euclid(m as i128)) as f64;
    num / m as f64
}

/// Euclidean remainder for signed indices.
pub fn wrap(i: i64, n: usize) -> usize {
    i.rem_euclid(n as i64) as usize
}

pub(crate) fn cast<T: Real>(z: Complex<f64>) -> Complex<T> {
    Complex::new(T::from_f64_lossy(z.re), T::from_f64_lossy(z.im))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cis_quarter_turn() {
        let z: Complex<f64> = cis(0.25);
        assert!((z - Complex::new(0.0, 1.0)).norm() < 1e-15);
        let z: Complex<f32> = cis(1e9 + 0.5);
        assert!((z - Complex::new(-1.0, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn ratio_turns_negative() {
        assert_eq!(ratio_turns(-1, 3, 4), 1.0 / 4.0);
        assert_eq!(wrap(-5, 12), 7);
    }
}
