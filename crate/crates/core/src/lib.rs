//! Berezin–Toeplitz quantization on the sphere S² and on the Bargmann plane,
//! with the remainder, noise and rigidity measurements built on top.

pub mod hermitian;
pub mod quadrature;
pub mod sphere;
pub mod bargmann;
pub mod measurement;
pub mod quantizer;
pub mod symbols;
pub mod error;
pub mod experiments;

pub use error::{Error, Result};
