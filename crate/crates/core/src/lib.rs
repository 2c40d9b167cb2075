//! Gaussian beam methods for the semiclassical Dirac equation, with a
//! time-splitting spectral reference solver.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dirac;
pub mod error;
pub mod eulerian;
pub mod initial;
pub mod io;
pub mod lagrangian;
pub mod potential;
pub mod small;
pub mod spectral;
pub mod summation;
