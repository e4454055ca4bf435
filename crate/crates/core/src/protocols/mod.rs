//! Time-structured protocols: pulse sequences that cancel inhomogeneous
//! broadening, and spin-loss sensing runs.

mod dd;
mod sensing;

pub use dd::{
    dd_average_hamiltonian, dd_reference, pulse_unitary, simulate_dd, AverageHamiltonian, DdTrajectory, Pulse, PulseSequence, Segment,
    SegmentKind,
};
pub use sensing::{remove_random_spin, remove_spin, sensing_trajectory, settle_time, LossEvent, LossSchedule, SensingTrajectory};
