//! Pseudo-spectral simulation of the 2D non-viscous MHD system with magnetic
//! diffusion on the periodic box, together with the harmonic-analysis toolkit
//! (dyadic frequency blocks, Besov and Chemin-Lerner norms) used to measure
//! its behavior: linear propagator estimates, an iterative linearized scheme,
//! an explicit lifespan formula, decay fits and bootstrap diagnostics.

pub mod besov;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod filter_bank;
pub mod grid;
pub mod gronwall;
pub mod initial_data;
pub mod lifespan;
pub mod mhd;
pub mod picard;
pub mod propagators;
pub mod selftest;
pub mod snapshot;

pub use besov::{
    besov_norm, besov_norm_vector, chemin_lerner_norm, chemin_lerner_norm_vector, TimeSeries,
};
pub use error::{Error, Result};
pub use field::{Axis, ScalarField, VectorField2};
pub use filter_bank::{BesovParams, DyadicFilterBank};
pub use grid::TorusGrid;
