//! Riemannian geometry of adiabatic quantum evolution.
//!
//! Ground-state projectors of a parametrized Hamiltonian family induce a metric
//! on the control manifold; its geodesics are the schedules that minimize the
//! geometric part of the adiabatic error. This crate computes the metric (and
//! the related geometric, Bures and brachistochrone tensors), solves geodesic
//! boundary-value problems, propagates the Schrödinger equation exactly to
//! measure adiabatic errors, and fits critical scaling exponents.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod geodesic;
pub mod ham;
pub mod io;
pub mod linalg;
pub mod metric;
pub mod models;
pub mod quad;
pub mod scaling;
pub mod schedule;
pub mod sweep;

pub use error::{Error, Result};
pub use ham::{diagonalize, ControlPoint, HamiltonianModel, LocalSpectrum, SpectralData, SpectralOptions};
pub use schedule::{LinearSchedule, Path, Schedule};
