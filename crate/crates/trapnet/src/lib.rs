//! Design and analysis of zero-field intersections for rf trap networks.
//!
//! An rf trap network guides ions along lines where the oscillating electric
//! field vanishes; transport junctions need those zero lines to cross. This
//! crate provides the pieces needed to design and validate such a crossing:
//!
//! * [`multipole`] — low-order Cartesian multipole expansions of the rf
//!   field about an intersection point, the derived electrostatic potential,
//!   and the ponderomotive (pseudo)potential `∝ |E|²`.
//! * [`intersection`] — linear constraint systems expressing "the field
//!   vanishes along these crossing paths" together with the Maxwell
//!   (symmetry/trace) conditions, and their nullspaces. For a straight
//!   two-path crossing the nullspace is one-dimensional and purely hexapole.
//! * [`analysis`] — landscape analysis of the crossing field: zero-line
//!   tracing, topology classification under a homogeneous bias field,
//!   barrier heights, grid sampling and isosurface extraction.
//! * [`bem`] — a boundary-element electrostatics solver (constant-density
//!   collocation on triangle panels) used to tune a concrete electrode
//!   geometry until it realizes the ideal crossing field.
//! * [`dynamics`] — time-resolved ion motion in the oscillating field, used
//!   to validate the pseudopotential picture.
//!
//! Lengths are measured in units of the distance `d` from the intersection
//! point to the nearest electrode, potentials in units of the rf amplitude
//! `V0`, so multipole coefficients of polynomial order `k` carry units
//! `V0/d^k`. Time is measured in rf periods unless stated otherwise.

// Negated comparisons (`!(x > 0.0)`) are deliberate NaN-rejecting guards,
// and index loops over small fixed-size tensors read better than iterator
// chains in the rank-3/rank-4 algebra.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod bem;
pub mod dynamics;
pub mod error;
pub mod harmonic;
pub mod intersection;
pub mod isosurface;
pub mod linalg;
pub mod multipole;

pub use error::Error;
pub use multipole::{MultipoleField, Point3, PseudopotentialScale};

/// Crate-wide `Result` with the crate error type.
pub type Result<T> = std::result::Result<T, Error>;
