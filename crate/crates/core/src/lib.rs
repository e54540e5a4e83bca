//! Cournot-Nash bandwidth allocation between base stations and users.
//!
//! Pipeline: sample station and user locations ([`geometry`]), build the
//! SINR-derived cost and demand ([`radio`]), solve for the equilibrium
//! allocation exactly or approximately ([`equilibria`], using [`transport`]),
//! then aggregate performance indicators over Monte-Carlo sweeps ([`metrics`]).

pub mod eigen;
pub mod equilibria;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod radio;
pub mod rng;
pub mod transport;

pub use equilibria::{
    approx_solve, solve_exact, AllocateMode, Equilibrium, ExactOptions, ExactProblem, Method, SupplyMode,
};
pub use error::{Error, Result};
pub use geometry::{Deployment, Point, PointPattern, Window};
pub use io::Config;
pub use metrics::{
    find_crossing, indicators, run_instance, sweep, Crossing, Indicators, Outcome, Scenario, SweepResult,
};
pub use radio::{LinkMatrix, RadioInstance, RadioParams};
pub use transport::{Marginal, TransportPlan};
