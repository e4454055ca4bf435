//! Reservoir-engineered dissipative spin squeezing.
//!
//! Collective spin ensembles coupled to a squeezed reservoir relax towards
//! the dark state of the Bogoliubov operator
//! `Σ[r] = cosh(r) S₋ − sinh(r) S₊`. This crate builds the Lindblad
//! superoperators for the ideal, thermal, general-collective, local-noise,
//! hybrid spin–cavity and one-axis-twisting models, solves for steady
//! states, spectra and trajectories, and evaluates the Wineland squeezing
//! parameter and related observables.
//!
//! The permutation-symmetric Dicke representation stores one matrix per
//! total-angular-momentum block `j`; a brute-force `2^N` product-space
//! representation is kept alongside as an oracle for small `N`.
//!
//! Module map:
//! - [`spinspace`]: Dicke blocks, collective and product-space operators.
//! - [`liouvillian`]: sparse superoperator builders and reservoir mappings.
//! - [`solver`]: steady states, time evolution, spectra, j-hopping rates.
//! - [`analytic`]: dark states, LMG spectrum, closed-form asymptotics.
//! - [`measure`]: Wineland parameter, purity, moments, `S_y` statistics.
//! - [`meanfield`]: second-order cumulant equations and cooperativity scans.
//! - [`oat`]: one-axis-twisting baseline.
//! - [`protocols`]: dynamical decoupling and spin-loss sensing.

pub mod analytic;
pub mod error;
pub mod half;
pub mod liouvillian;
pub mod meanfield;
pub mod measure;
pub mod oat;
pub mod optim;
pub mod protocols;
pub mod solver;
pub mod sparse;
pub mod spinspace;
pub mod state;

pub use error::{Error, Result};
pub use half::Half;
pub use num_complex::Complex64 as C64;
