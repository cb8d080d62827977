//! SIS epidemics in the N-intertwined mean-field approximation (NIMFA) on
//! static and time-varying networks.
//!
//! The crate covers graph construction and spectra ([`graphs`]), the NIMFA
//! ODE and its steady state ([`dynamics`]), piecewise integration over graph
//! sequences and quenched prediction ([`temporal`]), exact Markovian SIS
//! simulation ([`stochastic`]), measurement and bounds of the upper-transition
//! time ([`transition`]) and checks of the decay envelope ([`conjecture`]).
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common case. Times are in units of `1/delta` unless a
//! function takes explicit rates.

pub mod conjecture;
pub mod dynamics;
pub mod error;
pub mod graphs;
pub mod io;
mod linalg;
pub mod scalar;
pub mod stochastic;
pub mod temporal;
pub mod transition;

pub use error::{Error, Result};
pub use graphs::{Graph, GraphModel, GraphSpec, NamedGraph, RngSeed, SpectralData};
pub use scalar::Scalar;

pub type EpidemicParams64 = dynamics::EpidemicParams<f64>;
pub type EpidemicParams32 = dynamics::EpidemicParams<f32>;
pub type Trajectory64 = dynamics::Trajectory<f64>;
pub type Trajectory32 = dynamics::Trajectory<f32>;
pub type SpectralData64 = graphs::SpectralData<f64>;
pub type SteadyState64 = dynamics::SteadyState<f64>;
pub type PredictionReport64 = temporal::PredictionReport<f64>;
pub type TransitionReport64 = transition::TransitionReport<f64>;
pub type DecayCheckResult64 = conjecture::DecayCheckResult<f64>;
