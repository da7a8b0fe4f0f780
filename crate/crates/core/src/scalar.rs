//! Scalar abstraction shared by the physics, the networks and the analysis code.
//!
//! Everything numeric in this crate is generic over [`Scalar`], implemented for
//! `f32` and `f64`. Gradient checks run in `f64`; either type can drive a session.

use std::fmt::{Debug, Display};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type usable throughout the crate.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + LinalgScalar
    + ScalarOperand
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Short dtype tag used in persisted headers.
    const DTYPE: &'static str;

    /// Converts an `f64` literal. Lossy for `f32`, exact for `f64`.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    /// Hidden-layer activation: `tanh` to within a few ulp of one, cheaper
    /// than the library call.
    fn tanh_fast(self) -> Self;

    /// Little-endian byte encoding used by the fingerprint payloads.
    fn write_le(self, out: &mut Vec<u8>);

    /// Inverse of [`Scalar::write_le`]; `bytes` has exactly `size_of::<Self>()` bytes.
    fn read_le(bytes: &[u8]) -> Self;
}

impl Scalar for f32 {
    const DTYPE: &'static str = "f32";

    /// Odd rational minimax fit on a clamped input, branch free.
    #[inline]
    fn tanh_fast(self) -> Self {
        const CLAMP: f32 = 7.905_311;
        const A: [f32; 7] = [
            4.893_524_6e-3,
            6.372_619_3e-4,
            1.485_722_4e-5,
            5.122_297e-8,
            -8.604_672e-11,
            2.000_188e-13,
            -2.760_768_5e-16,
        ];
        const B: [f32; 4] = [4.893_525e-3, 2.268_434_7e-3, 1.185_347_1e-4, 1.198_258_4e-6];
        let x = self.clamp(-CLAMP, CLAMP);
        let x2 = x * x;
        let mut p = A[6];
        for a in A[..6].iter().rev() {
            p = p * x2 + a;
        }
        let q = ((B[3] * x2 + B[2]) * x2 + B[1]) * x2 + B[0];
        x * p / q
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4 bytes"))
    }
}

impl Scalar for f64 {
    const DTYPE: &'static str = "f64";

    #[inline]
    fn tanh_fast(self) -> Self {
        let ax = self.abs();
        if ax > 40.0 {
            return 1.0f64.copysign(self);
        }
        let e = (ax + ax).exp();
        (1.0 - 2.0 / (e + 1.0)).copysign(self)
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8 bytes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_tanh_tracks_libm() {
        let mut x = -45.0f64;
        while x < 45.0 {
            assert!((x.tanh_fast() - x.tanh()).abs() < 4e-16, "{x}");
            let xf = x as f32;
            assert!((xf.tanh_fast() as f64 - (xf as f64).tanh()).abs() < 5e-7, "{x}");
            x += 0.001_37;
        }
        assert_eq!(0.0f64.tanh_fast(), 0.0);
        assert_eq!(0.0f32.tanh_fast(), 0.0);
        assert_eq!(f64::INFINITY.tanh_fast(), 1.0);
        assert_eq!(f32::NEG_INFINITY.tanh_fast(), -1.0);
    }

    #[test]
    fn byte_roundtrip() {
        let mut buf = Vec::new();
        (-0.125f32).write_le(&mut buf);
        1.0e-300f64.write_le(&mut buf);
        assert_eq!(f32::read_le(&buf[..4]), -0.125);
        assert_eq!(f64::read_le(&buf[4..]), 1.0e-300);
    }

    #[test]
    fn literals() {
        assert_eq!(f32::lit(0.5), 0.5f32);
        assert_eq!(f64::lit(5.0 / 7.0).as_f64(), 5.0 / 7.0);
    }
}
