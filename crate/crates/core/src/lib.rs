//! Topological Euler-alignment dynamics on the periodic torus.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`] and [`spectral`]: uniform periodic grids, fields and Fourier
//!   multipliers (derivatives, fractional Laplacian, heat semigroup, Sobolev
//!   seminorms), plus the binary field snapshot format.
//! * [`domain`]: the reference communication domain, its quadrature, and the
//!   density-mass queries behind the topological quasi-distance.
//! * [`kernel`]: the singular topological kernel and its per-stage cache.
//! * [`operator`]: the alignment operator, the commutator force and the
//!   Dirichlet form, all evaluated with paired singular quadrature.
//! * [`evolution`]: the SSP-RK3 / integrating-factor time stepper.
//! * [`diagnostics`]: conserved and monitored quantities.
//! * [`harness`]: numerical checks of the coercivity and Sobolev-variant
//!   inequalities, and the vanishing-viscosity study.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod domain;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod harness;
pub mod kernel;
pub mod operator;
pub mod random;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
