//! Executable theory for the screened Poisson model: closed-form point
//! sources, `K0`, the multi-source coefficient system with its distance
//! bounds, an independent finite-difference solver and a spectral
//! stability simulator.

pub mod experiments;

mod closed_form;
mod fd;
mod multipoint;
mod stability;

pub use closed_form::{bessel_k0, bessel_k0_scaled, h_point_2d, h_point_3d, varadhan_recover, varadhan_recover_all};
pub use fd::{fd_radial_3d, fd_screened_poisson, fd_screened_poisson_with, FdOptions};
pub use multipoint::{
    bound_tolerance, check_bounds, check_bounds_with, convergence_csv, convergence_sweep, solve_multipoint, BoundReport,
    BoundRow, PointSourceSystem,
};
pub use stability::{euler_stability_limit, grid_heat_euler, mixed_modes, stability_sim, trajectories_csv, Flow};
