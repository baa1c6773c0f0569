//! Numerical laboratory for the entropy and free-energy balance of diffusion
//! processes.
//!
//! * [`model`]: diffusion systems and the built-in catalog.
//! * [`fpsolve`]: positivity-preserving finite-volume Fokker-Planck solver.
//! * [`thermo`]: entropy, entropy production, heat exchange, free energy,
//!   house-keeping heat, and the balance residuals along solutions.
//! * [`ougauss`]: exact Ornstein-Uhlenbeck closed forms.
//! * [`asympt`]: the large-alpha machinery (deterministic flow, fluctuations,
//!   alpha sweeps, fourth moments, landscape checks, ensembles).
//! * [`markov`]: the discrete-time entropy decomposition.
//! * [`cli`]: configuration, run orchestration and reports.

pub mod asympt;
pub mod cli;
pub mod error;
pub mod fpsolve;
pub mod markov;
pub mod model;
pub mod ougauss;
pub mod thermo;

pub use error::{Error, Result};
