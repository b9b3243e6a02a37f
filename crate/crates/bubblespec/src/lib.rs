//! Spectral toolkit for radial gas-bubble dynamics in an incompressible liquid
//! with thermal damping.
//!
//! The gas density inside a spherical bubble is expanded in Dirichlet
//! eigenfunctions of the unit ball; together with the bubble radius and its
//! velocity this gives the Galerkin state w = (ℛ, ℛ̇, c_1, …, c_N). The crate
//! provides the equilibrium, the linear generator and its characteristic
//! function, decay-rate bounds, linear and nonlinear time integration, and
//! periodic orbits under time-periodic forcing.

// Guards such as `!(x > 0.0)` are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod integrator;
pub mod linear_evolution;
pub mod linear_operator;
pub mod nonlinear_dynamics;
pub mod params;
pub mod periodic_orbit;
pub mod rate_report;
pub mod series;
pub mod spectral_basis;
pub mod spectrum;
pub mod state;

pub use error::{Error, Result};
pub use linear_operator::{build_operator, Assembly, TruncatedOperator};
pub use params::{solve_equilibrium, Equilibrium, PhysicalParams};
pub use state::{GalerkinState, StateScale};
