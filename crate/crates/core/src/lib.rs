//! Exact free-fermion solution of the periodic XY chain with a non-Hermitian pairing term,
//! plus a dense exact-diagonalization oracle, phase classification, Berry curvature and
//! critical scaling tools.
//!
//! The analytic modules are generic over [`scalar::Real`] (`f32` or `f64`). The aliases at the
//! crate root fix the scalar to `f64`.

pub mod cli;
pub mod coupling;
pub mod exprlang;
pub mod freefermion;
pub mod geometry;
pub mod oracle;
pub mod phase;
pub mod scalar;
pub mod scaling;

pub use scalar::Real;

pub type ParamPoint = coupling::ParamPoint<f64>;
pub type CouplingValues = coupling::CouplingValues<f64>;
pub type ModelConfig = freefermion::ModelConfig<f64>;
pub type Mode = freefermion::Mode<f64>;
pub type SpectrumReport = freefermion::SpectrumReport<f64>;
pub type PairAmplitudes = freefermion::PairAmplitudes<f64>;
