//! Symmetric traceless tensor spaces for harmonic field expansions.
//!
//! A static field obeying Laplace's equation has a Taylor expansion whose
//! order-`k` coefficient tensor is fully symmetric with vanishing partial
//! traces. This module works with those tensors in *flattened* form (an
//! order-`k` tensor over 3 dimensions becomes a vector of length `3^k`) and
//! provides:
//!
//! * the Maxwell constraint rows (symmetry differences + traces) over the
//!   raw `3^k`-dimensional component space,
//! * an orthonormal basis of the admissible subspace, whose dimension is
//!   `2k + 1` (3, 5, 7, 9 for orders 1..=4),
//! * the orthogonal projection onto that subspace,
//! * the polynomial view `p(r) = T[r, ..., r]` used when fitting potentials.
//!
//! Bases are computed once per order via an SVD nullspace and cached; the
//! construction is deterministic, which keeps downstream reports bit-stable.

use crate::linalg::{nullspace, NULLSPACE_REL_TOL};
use nalgebra::{DMatrix, DVector};
use std::sync::OnceLock;

/// Number of raw components of an order-`k` tensor over 3 dimensions.
pub fn raw_dimension(order: usize) -> usize {
    3usize.pow(order as u32)
}

/// Dimension of the symmetric traceless subspace at `order` (= 2k+1).
pub fn free_dimension(order: usize) -> usize {
    2 * order + 1
}

/// Flatten a multi-index (most significant first) into a linear offset.
pub fn flatten(idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &i| acc * 3 + i)
}

/// Enumerate all multi-indices of the given order, in lexicographic order.
pub fn multi_indices(order: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(raw_dimension(order));
    let mut idx = vec![0usize; order];
    loop {
        out.push(idx.clone());
        // increment like a base-3 counter
        let mut pos = order;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < 3 {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Provenance of a Maxwell constraint row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MaxwellRow {
    /// `t[idx] - t[canonical(idx)] = 0` forcing full index symmetry.
    Symmetry { order: usize, index: Vec<usize> },
    /// `Σ_i t[i, i, rest...] = 0` forcing vanishing partial trace.
    Trace { order: usize, rest: Vec<usize> },
}

/// Maxwell constraint rows over the raw component space of one order.
///
/// Order 1 (a homogeneous field vector) is unconstrained and yields no rows.
pub fn maxwell_rows(order: usize) -> (DMatrix<f64>, Vec<MaxwellRow>) {
    let dim = raw_dimension(order);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut tags: Vec<MaxwellRow> = Vec::new();

    if order >= 2 {
        for idx in multi_indices(order) {
            let mut canonical = idx.clone();
            canonical.sort_unstable();
            if canonical != idx {
                let mut row = vec![0.0; dim];
                row[flatten(&idx)] += 1.0;
                row[flatten(&canonical)] -= 1.0;
                rows.push(row);
                tags.push(MaxwellRow::Symmetry { order, index: idx });
            }
        }
        for rest in multi_indices(order - 2) {
            let mut row = vec![0.0; dim];
            for i in 0..3 {
                let mut idx = vec![i, i];
                idx.extend_from_slice(&rest);
                row[flatten(&idx)] += 1.0;
            }
            rows.push(row);
            tags.push(MaxwellRow::Trace { order, rest });
        }
    }

    let m = if rows.is_empty() {
        DMatrix::zeros(0, dim)
    } else {
        DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j])
    };
    (m, tags)
}

/// Orthonormal basis (flattened) of symmetric traceless tensors at `order`.
pub fn symmetric_traceless_basis(order: usize) -> &'static [DVector<f64>] {
    static CACHE: OnceLock<[Vec<DVector<f64>>; 5]> = OnceLock::new();
    let cache = CACHE.get_or_init(|| {
        let mut all: [Vec<DVector<f64>>; 5] = Default::default();
        for (k, slot) in all.iter_mut().enumerate().skip(1) {
            let (rows, _) = maxwell_rows(k);
            *slot = if rows.nrows() == 0 {
                (0..3)
                    .map(|i| DVector::from_fn(3, |j, _| if i == j { 1.0 } else { 0.0 }))
                    .collect()
            } else {
                nullspace(&rows, NULLSPACE_REL_TOL).basis
            };
        }
        all
    });
    assert!((1..=4).contains(&order), "supported tensor orders are 1..=4");
    &cache[order]
}

/// Orthogonal projection of a flattened tensor onto the symmetric traceless
/// subspace of its order.
pub fn project_symmetric_traceless(order: usize, flat: &DVector<f64>) -> DVector<f64> {
    assert_eq!(flat.len(), raw_dimension(order));
    let mut out = DVector::zeros(flat.len());
    for b in symmetric_traceless_basis(order) {
        out += b * b.dot(flat);
    }
    out
}

/// Evaluate the polynomial view `p(r) = T[r, ..., r]` of a flattened tensor.
pub fn polynomial_value(order: usize, flat: &DVector<f64>, r: &[f64; 3]) -> f64 {
    let mut sum = 0.0;
    for idx in multi_indices(order) {
        let mut prod = flat[flatten(&idx)];
        if prod == 0.0 {
            continue;
        }
        for &i in &idx {
            prod *= r[i];
        }
        sum += prod;
    }
    sum
}

/// Monomial coefficients of the polynomial view, keyed by exponents
/// `(a, b, c)` of `x^a y^b z^c` with `a + b + c = order`.
///
/// Only correct for symmetric tensors (all permutations of a multi-index are
/// assumed equal; the canonical representative is read).
pub fn monomial_coefficients(order: usize, flat: &DVector<f64>) -> Vec<((usize, usize, usize), f64)> {
    let mut out = Vec::new();
    for idx in multi_indices(order) {
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        if sorted != idx {
            continue; // visit each monomial once, via its canonical index
        }
        let a = idx.iter().filter(|&&i| i == 0).count();
        let b = idx.iter().filter(|&&i| i == 1).count();
        let c = idx.iter().filter(|&&i| i == 2).count();
        let m = multinomial(order, a, b, c) as f64;
        out.push(((a, b, c), m * flat[flatten(&idx)]));
    }
    out
}

/// Multinomial coefficient `order! / (a! b! c!)`.
pub fn multinomial(order: usize, a: usize, b: usize, c: usize) -> usize {
    debug_assert_eq!(a + b + c, order);
    factorial(order) / (factorial(a) * factorial(b) * factorial(c))
}

/// Factorial, small arguments only.
pub fn factorial(n: usize) -> usize {
    (1..=n).product::<usize>().max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_dimensions_match_nullspace_dimensions() {
        // The admissible-space dimensions 3/5/7/9 are what the Maxwell rows
        // must leave free; this is the structural check the whole expansion
        // machinery rests on.
        for order in 1..=4 {
            let basis = symmetric_traceless_basis(order);
            assert_eq!(
                basis.len(),
                free_dimension(order),
                "order {order}: expected 2k+1 free parameters"
            );
        }
    }

    #[test]
    fn basis_vectors_are_orthonormal_and_admissible() {
        for order in 2..=4 {
            let (rows, _) = maxwell_rows(order);
            let basis = symmetric_traceless_basis(order);
            for (i, v) in basis.iter().enumerate() {
                let residual = (&rows * v).norm();
                assert!(residual < 1e-9, "order {order} basis {i}: residual {residual}");
                for (j, w) in basis.iter().enumerate() {
                    let dot = v.dot(w);
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((dot - expect).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn projection_is_idempotent_and_kills_pure_trace() {
        // diag(1,1,1) is orthogonal to every traceless symmetric tensor, so
        // the projection must send it to zero.
        let mut flat = DVector::zeros(9);
        for i in 0..3 {
            flat[flatten(&[i, i])] = 1.0;
        }
        let p = project_symmetric_traceless(2, &flat);
        assert!(p.norm() < 1e-12);

        let mut generic = DVector::zeros(27);
        for (k, idx) in multi_indices(3).iter().enumerate() {
            generic[flatten(idx)] = (k as f64 * 0.37).sin();
        }
        let once = project_symmetric_traceless(3, &generic);
        let twice = project_symmetric_traceless(3, &once);
        assert!((&once - &twice).norm() < 1e-12 * once.norm().max(1.0));
    }

    #[test]
    fn symmetrize_matches_hand_formula_for_quadrupole() {
        // For order 2 the projection has the closed form
        // (M + M^T)/2 - tr(M)/3 I; check against it on a generic matrix.
        let m = [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 10.0]];
        let mut flat = DVector::zeros(9);
        for i in 0..3 {
            for j in 0..3 {
                flat[flatten(&[i, j])] = m[i][j];
            }
        }
        let p = project_symmetric_traceless(2, &flat);
        let trace = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
        for i in 0..3 {
            for j in 0..3 {
                let want = 0.5 * (m[i][j] + m[j][i]) - if i == j { trace } else { 0.0 };
                assert!((p[flatten(&[i, j])] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn monomial_coefficients_expand_symmetric_tensor() {
        // q = symmetric with q_01 = q_10 = 1: polynomial must be 2xy.
        let mut flat = DVector::zeros(9);
        flat[flatten(&[0, 1])] = 1.0;
        flat[flatten(&[1, 0])] = 1.0;
        let coeffs = monomial_coefficients(2, &flat);
        for ((a, b, c), value) in coeffs {
            if (a, b, c) == (1, 1, 0) {
                assert!((value - 2.0).abs() < 1e-15);
            } else {
                assert_eq!(value, 0.0);
            }
        }
        let v = polynomial_value(2, &flat, &[2.0, 3.0, 5.0]);
        assert!((v - 12.0).abs() < 1e-15);
    }
}
