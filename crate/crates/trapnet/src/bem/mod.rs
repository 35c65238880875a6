//! Boundary-element electrostatics for electrode structures.
//!
//! The pipeline: build or load a triangulated electrode surface with fixed
//! potential tags ([`ElectrodeMesh`]), solve for the surface charge density
//! that reproduces those potentials ([`assemble_and_solve`]), evaluate the
//! resulting potential and field anywhere off the surface, fit a local
//! multipole expansion around the trap center ([`fit_multipoles`]), and tune
//! a single geometry parameter of a parametric electrode family until the
//! homogeneous axial field at the center vanishes ([`tune_alpha_h`]).
//!
//! Unit conventions: lengths in units of the center-to-nearest-electrode
//! distance `d`, potentials in units of the drive amplitude `V0`, Gauss-free
//! kernel `G(r, r') = 1/(4π|r − r'|)` so a unit sphere at potential `V0`
//! carries total charge `4π·V0` and exterior potential `V0/r`.

mod family;
mod fit;
mod mesh;
mod solve;

pub use family::{reference_family, tune_alpha_h, GeometryFamily, TuneResult};
pub use fit::{
    fibonacci_sphere_points, fit_multipoles, fit_potential_samples, mirror_symmetric_sphere_points,
    FitOptions, MultipoleFit,
};
pub use mesh::{
    cuboid, icosphere, point_triangle_distance, read_obj_mesh, write_obj_mesh, ElectrodeMesh,
    SymmetryClassReport,
};
pub use solve::{assemble_and_solve, BemSolution};
