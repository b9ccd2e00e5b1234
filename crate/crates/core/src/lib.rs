//! Simulation and numerical verification of heavy-tailed, nearly unstable
//! INAR(∞) processes and of their scaling limit, an integrated rough
//! fractional Cox–Ingersoll–Ross process.
//!
//! The crate is organized bottom-up:
//!
//! * [`kernels`] builds power-law offspring kernels and the horizon-indexed
//!   near-critical parametrization.
//! * [`renewal`] holds the discrete convolution algebra: resolvents,
//!   renewal-equation solvers and the rescaled resolvent density.
//! * [`mlf`] evaluates Mittag-Leffler functions and the limit kernel.
//! * [`inar_sim`] simulates paths, rescales them and checks the exact path
//!   identities.
//! * [`limit_sim`] runs a Volterra Euler scheme for the limiting rough
//!   square-root diffusion.
//! * [`stats`] provides KS distances, Hölder estimates and bracket and
//!   martingale-CLT diagnostics.
//! * [`harness`] ties everything into reproducible experiments with
//!   digest-stamped outputs.

pub mod error;
pub mod harness;
pub mod inar_sim;
pub mod kernels;
pub mod limit_sim;
pub mod mlf;
pub mod quad;
pub mod renewal;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use kernels::{make_scaling_family, scale_kernel, Kernel, ScalingFamily};
pub use mlf::{f_alpha_lambda, ml, F_alpha_lambda};
pub use renewal::{renewal_sequence, RenewalSequence};
