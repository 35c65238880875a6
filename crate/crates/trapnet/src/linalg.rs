//! Small dense linear-algebra helpers shared across modules.
//!
//! Everything here wraps nalgebra; the helpers exist to pin down the exact
//! rank/nullspace conventions (relative singular-value cutoff) used by the
//! constraint solver and the zero-line tracer.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff below which a direction counts as null.
pub const NULLSPACE_REL_TOL: f64 = 1e-10;

/// Result of a nullspace computation.
#[derive(Debug, Clone)]
pub struct Nullspace {
    /// Rank of the matrix at the chosen cutoff.
    pub rank: usize,
    /// Orthonormal basis of the nullspace (columns of V past the rank).
    pub basis: Vec<DVector<f64>>,
    /// Singular values, descending.
    pub singular_values: Vec<f64>,
}

/// Nullspace of `m` using an SVD with relative cutoff `rel_tol * σ_max`.
///
/// nalgebra computes a thin SVD, which for a wide matrix (fewer rows than
/// columns) does not carry the full right-singular basis; rows of zeros are
/// appended first so that V is always square.
pub fn nullspace(m: &DMatrix<f64>, rel_tol: f64) -> Nullspace {
    let (rows, cols) = m.shape();
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };

    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("SVD requested with right vectors");
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let cutoff = rel_tol * sigma_max.max(1e-300);

    // v_t rows are ordered by nalgebra to match singular_values (unsorted in
    // general), so pair them explicitly before thresholding.
    let mut pairs: Vec<(f64, DVector<f64>)> = svd
        .singular_values
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, v_t.row(i).transpose().clone_owned()))
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    let rank = pairs.iter().filter(|(s, _)| *s > cutoff).count();
    let basis = pairs[rank..].iter().map(|(_, v)| v.clone()).collect();
    Nullspace {
        rank,
        basis,
        singular_values: sv,
    }
}

/// Minimum-norm least-squares solution of `m x = rhs` via SVD pseudo-inverse.
pub fn solve_least_squares(m: &DMatrix<f64>, rhs: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
    let svd = m.clone().svd(true, true);
    svd.solve(rhs, rel_tol * svd.singular_values.max())
        .expect("SVD solve with both factor sets")
}

/// Smallest singular value of `m` (0 for an empty matrix).
pub fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().min()
}
