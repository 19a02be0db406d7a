//! Link-level Monte Carlo simulation of uplink massive MU-MIMO with
//! low-resolution ADCs and linear (ZF / MMSE) detection.
//!
//! The pipeline per symbol vector is `y = H x + n`, `r = Q(y)` applied to
//! the real and imaginary parts separately, `x̂ = A^H r`, followed by a hard
//! minimum-distance decision. See [`simulator`] for the experiment engine and
//! [`cli`] for the command-line front end.

pub mod channel;
pub mod cli;
pub mod detector;
pub mod linalg;
pub mod modem;
pub mod quantizer;
pub mod simulator;

pub use num_complex::Complex64;
