//! Local multipole fits of a solved field around the trap center.
//!
//! The potential is sampled on a sphere in the charge-free region and
//! least-squares projected onto the harmonic polynomial basis of orders
//! 0–4 (a constant plus the 3+5+7+9 admissible field coefficients). The
//! fit exposes the crossing-design coefficients directly: the axial
//! homogeneous term `α_H = −E_z(0)` and the two symmetry-allowed hexapole
//! components `α_X^x`, `α_X^y` (coefficients of `z(3x²−z²)` and
//! `z(3y²−z²)` in the potential).
//!
//! Sampling is mirror-symmetrized: every direction appears together with
//! its reflections in all three coordinate planes. A symmetric point set
//! makes truncated orders ≥ 5 alias only into coefficients of the same
//! parity class, so a field with the crossing symmetries cannot leak into
//! the symmetry-forbidden coefficients through fit truncation.

use crate::bem::solve::BemSolution;
use crate::error::Error;
use crate::harmonic::symmetric_traceless_basis;
use crate::linalg;
use crate::multipole::{MultipoleField, Point3, Rank3};
use crate::Result;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Sampling controls for [`fit_multipoles`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOptions {
    /// Sampling-sphere radius (d units). Small enough that orders above 4
    /// contribute little, large enough to stay well conditioned.
    pub radius: f64,
    /// Number of base sampling directions; each is expanded to its eight
    /// coordinate-plane reflections, so the sample count is `8 × points`.
    pub points: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            radius: 0.2,
            points: 120,
        }
    }
}

/// Result of a sphere-sampled harmonic fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultipoleFit {
    /// Fitted expansion, orders 1–4, about `center`.
    pub field: MultipoleField,
    /// Fitted constant potential at the center (gauge term).
    pub offset: f64,
    pub center: Point3,
    pub radius: f64,
    /// Homogeneous axial term: `α_H = −E_z(center)` = potential slope in z.
    pub alpha_h: f64,
    /// Coefficient of `z(3x²−z²)` in the potential.
    pub alpha_x_x: f64,
    /// Coefficient of `z(3y²−z²)` in the potential.
    pub alpha_x_y: f64,
    /// Crossing half-angle `arctan√(−α_X^x/α_X^y)`, present when the two
    /// hexapole components have the opposite signs a crossing requires.
    pub theta_fit: Option<f64>,
    /// Crossing strength `α_X = α_X^x − α_X^y`.
    pub alpha_x: f64,
    /// RMS misfit over RMS signal on the sampling sphere.
    pub residual: f64,
    /// Largest coefficient forbidden by the crossing symmetry class
    /// (x/y dipoles, all quadrupoles, hexapoles other than the two allowed
    /// components, all octupoles).
    pub symmetry_leakage: f64,
}

/// Deterministic, nearly uniform unit-sphere sample (Fibonacci lattice).
pub fn fibonacci_sphere_points(n: usize) -> Vec<Point3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden * i as f64;
            Point3::new(r * a.cos(), r * a.sin(), z)
        })
        .collect()
}

/// `n` Fibonacci directions expanded to their orbits under reflection in
/// the three coordinate planes: `8n` points, exactly invariant under
/// `x→−x`, `y→−y`, and `z→−z` (sign flips are lossless in floating point).
pub fn mirror_symmetric_sphere_points(n: usize) -> Vec<Point3> {
    let mut points = Vec::with_capacity(8 * n);
    for p in fibonacci_sphere_points(n) {
        for sx in [1.0, -1.0] {
            for sy in [1.0, -1.0] {
                for sz in [1.0, -1.0] {
                    points.push(Point3::new(sx * p.x, sy * p.y, sz * p.z));
                }
            }
        }
    }
    points
}

/// Fit the harmonic expansion to a solved electrode field by sampling its
/// potential on a sphere around `center`.
pub fn fit_multipoles(
    solution: &BemSolution,
    center: Point3,
    options: &FitOptions,
) -> Result<MultipoleFit> {
    if !(options.radius > 0.0 && options.radius.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "fit radius must be positive and finite, got {}",
            options.radius
        )));
    }
    let clearance = solution.mesh().nearest_distance(&center);
    if clearance <= options.radius {
        return Err(Error::InvalidArgument(format!(
            "sampling sphere (radius {}) reaches the electrodes (nearest at {clearance:.3})",
            options.radius
        )));
    }
    let points: Vec<Point3> = mirror_symmetric_sphere_points(options.points)
        .into_iter()
        .map(|u| center + u * options.radius)
        .collect();
    let values = solution.potential_batch(&points)?;
    fit_potential_samples(&points, &values, center)
}

/// Fit the harmonic expansion directly to potential samples (the sample
/// layout need not be spherical, only well spread).
pub fn fit_potential_samples(
    points: &[Point3],
    values: &[f64],
    center: Point3,
) -> Result<MultipoleFit> {
    if points.len() != values.len() {
        return Err(Error::InvalidArgument(format!(
            "{} sample points but {} values",
            points.len(),
            values.len()
        )));
    }
    let basis_fields = harmonic_basis_fields();
    let cols = 1 + basis_fields.len();
    if points.len() < cols {
        return Err(Error::InvalidArgument(format!(
            "{} samples cannot determine {cols} expansion coefficients",
            points.len()
        )));
    }

    let design = DMatrix::from_fn(points.len(), cols, |i, j| {
        if j == 0 {
            1.0
        } else {
            basis_fields[j - 1].potential(&(points[i] - center))
        }
    });
    let rhs = DVector::from_iterator(values.len(), values.iter().copied());

    // Reject rank-deficient sampling before trusting the solution.
    let svd = design.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-10 * smax)
        .count();
    if rank < cols {
        return Err(Error::Numerical(format!(
            "sample layout only determines {rank} of {cols} coefficients"
        )));
    }

    let coeffs = linalg::solve_least_squares(&design, &rhs, 1e-12);

    let mut field = MultipoleField::zero();
    let mut k = 1;
    for order in 1..=4usize {
        let basis = symmetric_traceless_basis(order);
        let mut flat = DVector::zeros(basis[0].len());
        for b in basis {
            flat += b * coeffs[k];
            k += 1;
        }
        field.set_order_from_flat(order, &flat);
    }
    let offset = coeffs[0];

    let misfit = (&design * &coeffs - &rhs).norm();
    let signal = rhs.norm();
    let residual = if signal > 0.0 { misfit / signal } else { 0.0 };

    Ok(summarize_fit(field, offset, center, points, residual))
}

/// The 24 unit basis fields of orders 1–4 (3 + 5 + 7 + 9 coefficients).
fn harmonic_basis_fields() -> Vec<MultipoleField> {
    let mut fields = Vec::with_capacity(24);
    for order in 1..=4usize {
        for b in symmetric_traceless_basis(order) {
            let mut f = MultipoleField::zero();
            f.set_order_from_flat(order, b);
            fields.push(f);
        }
    }
    fields
}

/// Extract the crossing-design numbers from a fitted expansion.
fn summarize_fit(
    field: MultipoleField,
    offset: f64,
    center: Point3,
    points: &[Point3],
    residual: f64,
) -> MultipoleFit {
    let radius = points
        .iter()
        .map(|p| (p - center).norm())
        .fold(0.0f64, f64::max);

    // V ⊃ −(1/6)·h_ijk r_i r_j r_k, so the x²z monomial carries −h_113/2
    // and Θ_X^x = z(3x²−z²) contributes 3·α_X^x of it.
    let alpha_h = -field.dipole.z;
    let alpha_x_x = -field.hexapole[0][0][2] / 6.0;
    let alpha_x_y = -field.hexapole[1][1][2] / 6.0;
    let alpha_x = alpha_x_x - alpha_x_y;
    let theta_fit = if alpha_x_x * alpha_x_y < 0.0 {
        Some((-alpha_x_x / alpha_x_y).sqrt().atan())
    } else {
        None
    };

    // Everything the crossing symmetry class forbids: x/y dipoles, the
    // whole quadrupole, hexapole content beyond the two allowed components,
    // and the whole octupole.
    let mut leakage = field.dipole.x.abs().max(field.dipole.y.abs());
    leakage = leakage.max(field.quadrupole.amax());
    let allowed = allowed_hexapole(alpha_x_x, alpha_x_y);
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                leakage = leakage.max((field.hexapole[i][j][k] - allowed[i][j][k]).abs());
                for l in 0..3 {
                    leakage = leakage.max(field.octupole[i][j][k][l].abs());
                }
            }
        }
    }

    MultipoleFit {
        field,
        offset,
        center,
        radius,
        alpha_h,
        alpha_x_x,
        alpha_x_y,
        theta_fit,
        alpha_x,
        residual,
        symmetry_leakage: leakage,
    }
}

/// Hexapole tensor of `α_X^x·z(3x²−z²) + α_X^y·z(3y²−z²)`.
fn allowed_hexapole(alpha_x_x: f64, alpha_x_y: f64) -> Rank3 {
    let mut h = [[[0.0f64; 3]; 3]; 3];
    for perm in [[0, 0, 2], [0, 2, 0], [2, 0, 0]] {
        h[perm[0]][perm[1]][perm[2]] = -6.0 * alpha_x_x;
    }
    for perm in [[1, 1, 2], [1, 2, 1], [2, 1, 1]] {
        h[perm[0]][perm[1]][perm[2]] = -6.0 * alpha_x_y;
    }
    h[2][2][2] = 6.0 * (alpha_x_x + alpha_x_y);
    h
}
