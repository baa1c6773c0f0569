//! Finite-volume Fokker-Planck solver on rectangular boxes with reflecting
//! walls, and stationary densities.

pub(crate) mod band;
mod density;
mod dump;
mod grid;
mod scheme;
mod solver;
mod stationary;

pub use density::{init_density, DensityField, InitialCondition, MAX_OUTSIDE_MASS};
pub use dump::{format_dump, parse_dump, write_dump};
pub use grid::{make_grid, Grid, MIN_CELLS};
pub use scheme::{bernoulli, flux, Discretization, Face, FaceFlux};
pub use solver::{uniform_times, FpSolver, SolverOptions, DEFAULT_DT};
pub use stationary::{
    stationary_density, stationary_density_long_time, StationaryMethod, StationarySolution,
    GIBBS_BOUNDARY_MASS, STATIONARY_RESIDUAL,
};
