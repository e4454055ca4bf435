//! Steady states, time evolution, spectra and the perturbative `j`-space
//! rate matrix.

mod evolve;
mod lu;
pub mod ode;
mod rates;
mod spectrum;
mod steady;

pub use evolve::{evolve, evolve_observed, evolve_with, propagate, EvolveOptions, Integrator, IntegratorStats, Propagator, Trajectory};
pub use rates::{jspace_rate_matrix, RateMatrix};
pub use spectrum::{dissipative_gap, spectrum, spectrum_with, SpectralResult, SpectrumOptions};
pub use steady::{steady_state, steady_state_y_frame, steady_state_from, steady_state_from_with, steady_state_with, SteadyMethod, SteadyOptions, SteadyReport};
