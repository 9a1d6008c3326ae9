//! Numerical toolkit for the nonlocal Onsager/Maier-Saupe free energy of
//! nematic liquid crystals under strong anchoring, and for its small
//! interaction-distance limit.
//!
//! The crate is organised around the objects of mean-field molecular theory:
//!
//! * [`sphere`] — quadrature on the unit sphere of molecular orientations,
//!   and the rotational-gradient identities used by the Euler-Lagrange
//!   manipulations.
//! * [`bingham`] — the exponential family `exp(m·Bm)/Z`, its partition
//!   function, Q-tensor moment, entropy, and the homogeneous isotropic/nematic
//!   phase diagram `alpha(eta)`.
//! * [`field`] — Q-tensor and director fields on rectangular lattices with
//!   domain/boundary-shell masks, director extraction and orientable lifting.
//! * [`kernel`] — the Gaussian interaction kernel, its FFT convolution, and
//!   the Fourier-multiplier operators built from it.
//! * [`energy`] — the full nonlocal free energy in Q-tensor form, boundary
//!   extensions, and the a-priori quantities of the continuum theory.
//! * [`solver`] — damped self-consistent-field minimization over the
//!   admissible set, with Euler-Lagrange certification and continuation in
//!   the interaction scale.
//! * [`harmonic`] — reference harmonic-map solver (projected-gradient heat
//!   flow into the sphere) and Oseen-Frank energy evaluation for the limit
//!   comparison.

pub mod bingham;
pub mod energy;
pub mod error;
pub mod field;
pub mod harmonic;
pub mod kernel;
pub mod optim;
pub mod quad;
pub mod solver;
pub mod sphere;

pub use error::{Error, Result};
