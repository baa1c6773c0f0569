//! Large-alpha asymptotics: the deterministic flow and its Gaussian
//! fluctuations, the macroscopic entropy balance, alpha sweeps of the
//! extensive rates, Gaussian fourth moments, the stationary landscape, and a
//! stochastic ensemble for cross-checks.

mod ensemble;
mod flow;
mod landscape;
mod moments;
mod sweep;

pub use ensemble::{simulate_ensemble, EnsembleOptions, EnsembleSnapshot, MIN_PATHS};
pub use flow::{
    count_modes, estimate_hessian_from_density, macroscopic_entropy_balance, ode_flow,
    ode_flow_with, propagate_fluctuations, FlowOptions, FlowPoint, HessianSource, MacroBalance,
    RateFunctionEstimate,
};
pub use landscape::{
    landscape_check, landscape_check_with, landscape_point, macroscopic_free_energy, GridPhi,
    LandscapeCheck, MacroFreeEnergy, PhiSs, PhiSsProvider,
};
pub use moments::{brownian_entropy_rate, gaussian_fourth_moment, FourthMomentTensor};
pub use sweep::{
    alpha_sweep, linear_fit, FpSweepOptions, LinearFit, SweepResult, SweepRoute,
    CANCELLATION_FLOOR, DEFAULT_ALPHAS, MIN_SWEEP_POINTS,
};
