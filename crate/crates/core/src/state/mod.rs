//! One-dimensional discretized states: the lattice, wavefunctions, moments
//! and the centre-of-mass frame transform.

mod grid;
mod params;
mod wavefunction;

pub use grid::{make_grid, SpatialGrid, LEAK_TOLERANCE, MIN_POINTS};
pub use params::PhysicalParams;
pub use wavefunction::{
    com_frame, gaussian_packet, inner, moments, normalize, Moments, NormPolicy, Wavefunction,
    MIN_SQUARED_NORM, NORM_TOLERANCE,
};

pub(crate) use wavefunction::{
    check_leakage, momentum_moments,
};
