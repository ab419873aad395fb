//! Physical-layer secret key generation with an intelligent reflecting
//! surface (IRS).
//!
//! The crate models the cascaded channel `H_AB = G_RB diag(w) G_AR + G_AB`,
//! the pilot-based baseline and the least-squares attack that colluding
//! eavesdroppers mount against it, and the random-Gaussian-matrix (RGM)
//! scheme in which Alice and Bob probe with random matrices and keep the
//! largest singular value of what they receive. Around that sit the moment
//! approximations for that singular value, mutual-information estimators,
//! secret-key-rate bounds, and the experiment harness behind the `irskg`
//! binary.
//!
//! Numeric code is generic over [`scalar::Real`] (`f32` or `f64`); the
//! estimators and the harness work in `f64`.

pub mod adversary;
pub mod channel;
pub mod error;
pub mod harness;
pub mod infotheory;
pub mod linalg;
pub mod pilot;
pub mod rgm;
pub mod sampling;
pub mod scalar;
pub mod stats;
pub mod theory;

pub use error::{Error, Result};
pub use scalar::Real;

pub type ComplexMatrix = linalg::Matrix<f64>;
pub type ComplexMatrix32 = linalg::Matrix<f32>;
pub type ChannelSet = channel::ChannelSet<f64>;
pub type ChannelSet32 = channel::ChannelSet<f32>;
pub type DirectChannels = channel::DirectChannels<f64>;
pub type VarianceProfile = sampling::VarianceProfile<f64>;
pub type GaussianApprox = theory::GaussianApprox<f64>;
pub type SingularObservation = rgm::SingularObservation<f64>;
