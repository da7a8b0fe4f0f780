//! Collaborative tilt-maze: simulation, learning agent, session protocol and
//! policy fingerprinting.
//!
//! The numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases.

pub mod fingerprint;
pub mod nn;
#[cfg(any(test, feature = "test-oracle"))]
pub mod oracle;
pub mod partner;
pub mod physics;
pub mod sac;
pub mod scalar;
pub mod session;

pub use scalar::Scalar;

pub type TrayStateF32 = physics::TrayState<f32>;
pub type TrayStateF64 = physics::TrayState<f64>;
pub type TraySimF32 = physics::TraySim<f32>;
pub type TraySimF64 = physics::TraySim<f64>;
pub type SacAgentF32 = sac::SacAgent<f32>;
pub type SacAgentF64 = sac::SacAgent<f64>;
pub type FingerprintF32 = fingerprint::Fingerprint<f32>;
pub type FingerprintF64 = fingerprint::Fingerprint<f64>;
