//! Simulation and inversion toolkit for 1D variable-coefficient acoustics.
//!
//! The pipeline, end to end:
//!
//! 1. [`profile`] — admissible cross-section profiles `A(x)` (equal to 1 below
//!    `x_minus`, to `A_inf` above `x_plus`) and the decay constants `(M, ell,
//!    lambda)` the energy estimates need.
//! 2. [`solver`] — a second-order leapfrog solver for `A ∂²w/∂t² = ∂/∂x(A ∂w/∂x)`
//!    on a truncated half-line with Neumann forcing at `x = 0` and a transparent
//!    right boundary; realizes the Neumann-to-Dirichlet (ND) map and its time
//!    reversal.
//! 3. [`noise`] — seeded Gaussian white noise (variance `1/dt` per sample) with
//!    a smooth switch-on cut-off, and the discrete L² pairing.
//! 4. [`correlation`] — the time-averaged cross-correlation estimator that
//!    recovers the ND convolution kernel from a single-point measurement under
//!    white-noise excitation, plus Monte-Carlo convergence diagnostics.
//! 5. [`energy`] — the weighted energy functional with explicit exponential
//!    weights `g1, g2`, its certified decay rate `lambda`, and the boundary
//!    measurement decay bound.
//! 6. [`reconstruction`] — impulse-response estimation (by deconvolution or
//!    from the correlation kernel), the second-kind probe equation, and
//!    recovery of the area profile `A(x)` from `Phi(a) = ∫₀ᵃ A dx`.
//! 7. [`persist`] — CSV/JSON persistence with byte-deterministic formatting.
//!
//! All arithmetic is in `f64`. Lengths and times are in the same unit (the wave
//! speed on the plateaus is 1).

pub mod correlation;
pub mod energy;
pub mod error;
pub mod noise;
pub mod persist;
pub mod profile;
pub mod reconstruction;
pub mod solver;

pub use error::{Result, WavekitError};
