//! Fourier-space simulation of the spatially homogeneous Kac equation (1D)
//! and the radially symmetric Boltzmann equation for Maxwellian molecules (3D).
//!
//! The collision operator is evaluated in the Fourier variable, where for
//! Maxwellian-type kernels it closes over products of the transform at the
//! split frequencies. Singular (grazing-collision) kernels are approximated
//! by a sequence of bounded cut-off kernels; each cut-off problem is solved
//! either by the explicit Wild series (with rigorous geometric truncation
//! control) or by a classical fourth-order time stepper, the two acting as
//! mutual oracles.
//!
//! On top of the solvers sits an envelope engine: it derives a piecewise
//! decay bound `H(|xi|)` (quadratic below a split radius, `K psi(|xi|^2)`
//! above) from measured properties of the initial datum, checks the
//! sub-additivity inequality that makes the bound invariant under the
//! collision splitting, and certifies numerically that solution snapshots
//! stay below the bound for all sampled times.
//!
//! Entry points:
//! - [`initial_data::DatumSpec::realize`] builds canonical initial data in
//!   Fourier form (Gaussian, Gaussian mixtures, compactly supported bumps).
//! - [`wild::solve_wild`] / [`wild::solve_ode`] advance a state in time.
//! - [`envelopes::build_envelope`] and [`envelopes::certify_propagation`]
//!   derive and verify decay envelopes.
//! - [`run`] wires everything into the batch workflows used by the CLI.

pub mod config;
pub mod envelopes;
pub mod error;
pub mod initial_data;
pub mod kernels;
pub mod moments;
pub mod numerics;
pub mod run;
pub mod spectral;
pub mod wild;

pub use error::{Error, Result};
pub use kernels::{CutoffKernel, KernelFamily, KernelSpec};
pub use spectral::{GridSpacing, Mode, SpectralGrid, SpectralState};
