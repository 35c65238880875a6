//! Zero-field intersection constraints and their nullspaces.
//!
//! A trap path is a curve along which the rf field vanishes identically.
//! Writing the path as an arc-length power series `γ(s) = Σ u⁽ⁿ⁾ sⁿ` and the
//! field as a multipole expansion, the requirement `E(γ(s)) = 0` becomes a
//! set of *linear* equations on the multipole tensors, one per path, per
//! power of `s`, per field component. Together with the Maxwell rows
//! (symmetry + tracelessness) this forms a homogeneous linear system whose
//! nullspace is exactly the space of fields supporting the requested
//! intersection.
//!
//! The headline result reproduced here: for two straight paths crossing at
//! `±θ` around the x axis in the z = 0 plane, the dipole and quadrupole
//! blocks are forced to zero and the hexapole block has a *one-dimensional*
//! nullspace, spanned by [`theta_x`]. Quadrupole exclusion extends to any
//! cotangential crossing ([`verify_cotangential_quadrupole`]), and no field
//! can vanish on a half-line without vanishing on the full line
//! ([`verify_no_straight_y`]), which rules out Y- and T-shaped junctions.
//!
//! Constraint composition is exact polynomial arithmetic on the series
//! coefficients — no sampling of points along the paths is involved.

use crate::error::Error;
use crate::harmonic;
use crate::linalg::{nullspace, NULLSPACE_REL_TOL};
use crate::multipole::{MultipoleField, Point3, Rank3, Rank4};
use crate::Result;
use nalgebra::{DMatrix, DVector, Vector3};

/// Tolerance on the path-series invariants (unit tangent, arc-length rows).
const PATH_TOL: f64 = 1e-9;

/// A trap path through the origin as a truncated arc-length power series
/// `γ(s) = Σ_{n≥1} u⁽ⁿ⁾ sⁿ` (no constant term: every path passes through the
/// intersection point).
///
/// Invariants: `|u⁽¹⁾| = 1`, and `|γ'(s)|² = 1 + O(s^N)` holds coefficient
/// by coefficient up to the stored order `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathCurve {
    coeffs: Vec<Vector3<f64>>,
}

impl PathCurve {
    /// Build from raw series coefficients `[u⁽¹⁾, u⁽²⁾, ...]`, validating the
    /// arc-length invariants.
    pub fn new(coeffs: Vec<Vector3<f64>>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidPath("a path needs at least a tangent".into()));
        }
        let path = Self { coeffs };
        let n = path.order();
        if (path.coeffs[0].norm() - 1.0).abs() > PATH_TOL {
            return Err(Error::InvalidPath(format!(
                "tangent must be a unit vector, |u1| = {}",
                path.coeffs[0].norm()
            )));
        }
        for m in 1..n {
            let c = path.speed_sq_coefficient(m);
            if c.abs() > PATH_TOL {
                return Err(Error::InvalidPath(format!(
                    "arc-length consistency violated at s^{m}: coefficient {c:.3e}"
                )));
            }
        }
        Ok(path)
    }

    /// A straight path along `dir` (normalized here; zero vectors rejected).
    pub fn straight(dir: Vector3<f64>) -> Result<Self> {
        let norm = dir.norm();
        if norm < 1e-12 {
            return Err(Error::InvalidPath("straight path needs a nonzero direction".into()));
        }
        Ok(Self {
            coeffs: vec![dir / norm],
        })
    }

    /// Build an arc-length-consistent curved path from a unit tangent and
    /// the *transverse* parts of the higher coefficients.
    ///
    /// `transverse[m-2]` is the component of `u⁽ᵐ⁾` perpendicular to the
    /// tangent (any parallel residue is projected out); the parallel parts
    /// are solved recursively from the arc-length coefficient equations, so
    /// the result always satisfies the [`PathCurve`] invariants. With the
    /// printed curvature convention the first transverse entry is `n̂ κ`
    /// (unit normal times curvature).
    pub fn from_transverse(tangent: Vector3<f64>, transverse: &[Vector3<f64>]) -> Result<Self> {
        let norm = tangent.norm();
        if norm < 1e-12 {
            return Err(Error::InvalidPath("path needs a nonzero tangent".into()));
        }
        let u1 = tangent / norm;
        let mut coeffs = vec![u1];
        for (m, t) in transverse.iter().enumerate() {
            // solving the s^(m+1)-coefficient of |γ'|² - 1 = 0 for the
            // parallel part of u^(m+2):
            let new_n = m + 2;
            let t_perp = t - u1 * u1.dot(t);
            let mut rhs = 0.0;
            for a in 2..new_n {
                let b = new_n + 1 - a;
                if b < 2 || b > coeffs.len() {
                    continue;
                }
                rhs += (a * b) as f64 * coeffs[a - 1].dot(&coeffs[b - 1]);
            }
            let parallel = -rhs / (2.0 * new_n as f64);
            coeffs.push(t_perp + u1 * parallel);
        }
        Self::new(coeffs)
    }

    /// Stored series order `N`.
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// Unit tangent `u⁽¹⁾`.
    pub fn tangent(&self) -> Vector3<f64> {
        self.coeffs[0]
    }

    /// Coefficient `u⁽ⁿ⁾` (zero beyond the stored order; `n ≥ 1`).
    pub fn coefficient(&self, n: usize) -> Vector3<f64> {
        assert!(n >= 1, "series starts at the tangent, n = 1");
        self.coeffs.get(n - 1).copied().unwrap_or_else(Vector3::zeros)
    }

    /// Evaluate the (polynomial) path at parameter `s`.
    pub fn eval(&self, s: f64) -> Point3 {
        let mut r = Vector3::zeros();
        let mut sn = s;
        for u in &self.coeffs {
            r += u * sn;
            sn *= s;
        }
        r
    }

    /// Coefficient of `s^m` in `|γ'(s)|² - 1`.
    fn speed_sq_coefficient(&self, m: usize) -> f64 {
        let mut c = 0.0;
        for a in 1..=(m + 1) {
            let b = m + 2 - a;
            if a > self.order() || b > self.order() || b < 1 {
                continue;
            }
            c += (a * b) as f64 * self.coeffs[a - 1].dot(&self.coeffs[b - 1]);
        }
        if m == 0 {
            c -= 1.0;
        }
        c
    }

    /// True when the stored polynomial is *globally* arc-length
    /// parametrized, i.e. `|γ'(s)|² = 1` exactly for all `s` (every
    /// coefficient up to `s^(2N-2)` vanishes). Straight paths qualify.
    pub fn is_exactly_arc_length(&self) -> bool {
        let n = self.order();
        (1..=(2 * n).saturating_sub(2)).all(|m| self.speed_sq_coefficient(m).abs() <= PATH_TOL)
    }

    /// Whether the series determines the `s^m` coefficient of `E(γ(s))`.
    ///
    /// A truncated series pins down coefficients only up to its stored
    /// order; an exactly arc-length polynomial path (straight lines in
    /// particular) is the complete curve and supports every order.
    pub fn supports_order(&self, m: usize) -> bool {
        m <= self.order() || self.is_exactly_arc_length()
    }
}

/// The pair of straight paths crossing at half-angle `θ` around the x axis
/// in the z = 0 plane: tangents `(cos θ, ±sin θ, 0)`.
///
/// `θ` is restricted to `(0, π/4]`: 0 is no crossing at all and anything
/// past π/4 is the same geometry relabeled around the y axis.
pub fn straight_x_paths(theta: f64) -> Result<(PathCurve, PathCurve)> {
    check_theta(theta)?;
    let p1 = PathCurve::straight(Vector3::new(theta.cos(), theta.sin(), 0.0))?;
    let p2 = PathCurve::straight(Vector3::new(theta.cos(), -theta.sin(), 0.0))?;
    Ok((p1, p2))
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta <= std::f64::consts::FRAC_PI_4) {
        return Err(Error::InvalidArgument(format!(
            "crossing half-angle must lie in (0, π/4], got {theta}"
        )));
    }
    Ok(())
}

/// A zero-field intersection design problem: paths that must carry zero
/// field, the multipole orders allowed, and the series order to which the
/// zero-field condition is imposed.
#[derive(Debug, Clone)]
pub struct IntersectionProblem {
    pub paths: Vec<PathCurve>,
    /// Highest multipole order in the ansatz (2..=4).
    pub max_multipole_order: usize,
    /// Impose the `s^m` coefficients of `E(γ(s)) = 0` for `m = 0..=max_s_order`.
    pub max_s_order: usize,
}

impl IntersectionProblem {
    pub fn new(paths: Vec<PathCurve>, max_multipole_order: usize, max_s_order: usize) -> Result<Self> {
        if !(2..=4).contains(&max_multipole_order) {
            return Err(Error::InvalidArgument(format!(
                "max multipole order must be 2..=4, got {max_multipole_order}"
            )));
        }
        for (i, p) in paths.iter().enumerate() {
            if !p.supports_order(max_s_order) {
                return Err(Error::InvalidPath(format!(
                    "path {i} (order {}) does not determine s^{max_s_order} constraints",
                    p.order()
                )));
            }
        }
        for i in 0..paths.len() {
            for j in (i + 1)..paths.len() {
                let max_n = paths[i].order().max(paths[j].order());
                let distinct = (1..=max_n)
                    .any(|n| (paths[i].coefficient(n) - paths[j].coefficient(n)).norm() > 1e-12);
                if !distinct {
                    return Err(Error::InvalidPath(format!("paths {i} and {j} coincide")));
                }
            }
        }
        Ok(Self {
            paths,
            max_multipole_order,
            max_s_order,
        })
    }
}

/// Provenance of one constraint row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowTag {
    /// Tensor symmetry row from Maxwell (mixed partials commute).
    MaxwellSymmetry { order: usize, index: Vec<usize> },
    /// Partial-trace row from Maxwell (Laplace equation).
    MaxwellTrace { order: usize, rest: Vec<usize> },
    /// Coefficient of `s^m` in component `i` of `E(γ_path(s))`.
    Path { path: usize, s_order: usize, component: usize },
}

/// Homogeneous linear system over the stacked raw multipole components
/// (orders `min_order..=max_order`, each order contributing `3^k` unknowns).
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    pub matrix: DMatrix<f64>,
    pub tags: Vec<RowTag>,
    pub min_order: usize,
    pub max_order: usize,
}

impl ConstraintSystem {
    /// Offset of an order's block in the unknown vector.
    pub fn block_offset(&self, order: usize) -> usize {
        (self.min_order..order).map(harmonic::raw_dimension).sum()
    }

    /// Total number of unknowns.
    pub fn unknowns(&self) -> usize {
        (self.min_order..=self.max_order)
            .map(harmonic::raw_dimension)
            .sum()
    }

    /// Maxwell rows only, over a single block or a range of blocks — the
    /// "no path constraints yet" baseline whose nullspace dimension is the
    /// free-parameter count `Σ (2k+1)`.
    pub fn maxwell_only(min_order: usize, max_order: usize) -> Self {
        let mut builder = SystemBuilder::new(min_order, max_order);
        builder.push_maxwell_rows();
        builder.finish()
    }
}

struct SystemBuilder {
    min_order: usize,
    max_order: usize,
    rows: Vec<Vec<f64>>,
    tags: Vec<RowTag>,
}

impl SystemBuilder {
    fn new(min_order: usize, max_order: usize) -> Self {
        assert!(min_order >= 1 && max_order <= 4 && min_order <= max_order);
        Self {
            min_order,
            max_order,
            rows: Vec::new(),
            tags: Vec::new(),
        }
    }

    fn unknowns(&self) -> usize {
        (self.min_order..=self.max_order)
            .map(harmonic::raw_dimension)
            .sum()
    }

    fn block_offset(&self, order: usize) -> usize {
        (self.min_order..order).map(harmonic::raw_dimension).sum()
    }

    fn push_maxwell_rows(&mut self) {
        for order in self.min_order..=self.max_order {
            let (rows, tags) = harmonic::maxwell_rows(order);
            let offset = self.block_offset(order);
            for (r, tag) in tags.iter().enumerate() {
                let mut row = vec![0.0; self.unknowns()];
                for c in 0..rows.ncols() {
                    row[offset + c] = rows[(r, c)];
                }
                self.rows.push(row);
                self.tags.push(match tag {
                    harmonic::MaxwellRow::Symmetry { order, index } => RowTag::MaxwellSymmetry {
                        order: *order,
                        index: index.clone(),
                    },
                    harmonic::MaxwellRow::Trace { order, rest } => RowTag::MaxwellTrace {
                        order: *order,
                        rest: rest.clone(),
                    },
                });
            }
        }
    }

    /// Row for the `s^m` coefficient of component `i` of `E(γ(s))`.
    ///
    /// The order-`k` tensor enters the field with a `1/(k-1)!` Taylor factor
    /// and is contracted with `k-1` copies of the path, so its contribution
    /// to `s^m` sums products of coefficients over compositions
    /// `a₁ + ... + a_{k-1} = m`.
    fn push_path_rows(&mut self, path_index: usize, path: &PathCurve, max_s_order: usize) {
        for m in 0..=max_s_order {
            for comp in 0..3 {
                let mut row = vec![0.0; self.unknowns()];
                if self.min_order == 1 && m == 0 {
                    row[self.block_offset(1) + comp] = 1.0;
                }
                if self.min_order <= 2 && self.max_order >= 2 && m >= 1 {
                    let u = path.coefficient(m);
                    let off = self.block_offset(2);
                    for j in 0..3 {
                        row[off + 3 * comp + j] = u[j];
                    }
                }
                if self.min_order <= 3 && self.max_order >= 3 && m >= 2 {
                    let off = self.block_offset(3);
                    for a in 1..m {
                        let b = m - a;
                        let ua = path.coefficient(a);
                        let ub = path.coefficient(b);
                        for j in 0..3 {
                            for k in 0..3 {
                                row[off + 9 * comp + 3 * j + k] += 0.5 * ua[j] * ub[k];
                            }
                        }
                    }
                }
                if self.min_order <= 4 && self.max_order >= 4 && m >= 3 {
                    let off = self.block_offset(4);
                    for a in 1..m {
                        for b in 1..(m - a) {
                            let c = m - a - b;
                            let ua = path.coefficient(a);
                            let ub = path.coefficient(b);
                            let uc = path.coefficient(c);
                            for j in 0..3 {
                                for k in 0..3 {
                                    for l in 0..3 {
                                        row[off + 27 * comp + 9 * j + 3 * k + l] +=
                                            ua[j] * ub[k] * uc[l] / 6.0;
                                    }
                                }
                            }
                        }
                    }
                }
                self.rows.push(row);
                self.tags.push(RowTag::Path {
                    path: path_index,
                    s_order: m,
                    component: comp,
                });
            }
        }
    }

    fn finish(self) -> ConstraintSystem {
        let n = self.unknowns();
        let matrix = if self.rows.is_empty() {
            DMatrix::zeros(0, n)
        } else {
            DMatrix::from_fn(self.rows.len(), n, |i, j| self.rows[i][j])
        };
        ConstraintSystem {
            matrix,
            tags: self.tags,
            min_order: self.min_order,
            max_order: self.max_order,
        }
    }
}

/// Assemble Maxwell + path rows for an intersection problem.
pub fn build_constraints(problem: &IntersectionProblem) -> Result<ConstraintSystem> {
    let mut builder = SystemBuilder::new(1, problem.max_multipole_order);
    builder.push_maxwell_rows();
    for (i, p) in problem.paths.iter().enumerate() {
        if !p.supports_order(problem.max_s_order) {
            return Err(Error::InvalidPath(format!(
                "path {i} does not determine s^{} constraints",
                problem.max_s_order
            )));
        }
        builder.push_path_rows(i, p, problem.max_s_order);
    }
    Ok(builder.finish())
}

/// Nullspace of a constraint system, with the basis reshaped into fields.
#[derive(Debug, Clone)]
pub struct NullspaceResult {
    pub dimension: usize,
    /// Orthonormal basis over the stacked raw components.
    pub basis_raw: Vec<DVector<f64>>,
    /// The same basis as multipole fields (only meaningful when the system
    /// starts at order 1; block layout is preserved either way).
    pub fields: Vec<MultipoleField>,
    /// Singular values of the constraint matrix, descending.
    pub singular_values: Vec<f64>,
}

/// Solve for the admissible-field space of a constraint system via SVD with
/// relative cutoff 1e-10.
pub fn solve_nullspace(system: &ConstraintSystem) -> NullspaceResult {
    let ns = nullspace(&system.matrix, NULLSPACE_REL_TOL);
    let fields = ns
        .basis
        .iter()
        .map(|v| {
            let mut f = MultipoleField::zero();
            for order in system.min_order..=system.max_order {
                let off = system.block_offset(order);
                let dim = harmonic::raw_dimension(order);
                let block = DVector::from_fn(dim, |i, _| v[off + i]);
                f.set_order_from_flat(order, &block);
            }
            f
        })
        .collect();
    NullspaceResult {
        dimension: ns.basis.len(),
        basis_raw: ns.basis,
        fields,
        singular_values: ns.singular_values,
    }
}

/// The unique crossing field for straight paths at half-angle `θ`:
/// a pure hexapole whose potential is
/// `V = α (sin²θ · z(3x² - z²) - cos²θ · z(3y² - z²))`.
///
/// Component values `(h_113, h_223, h_333) = 6α(-sin²θ, cos²θ, sin²θ - cos²θ)`,
/// all index permutations filled in.
pub fn theta_x(theta: f64, alpha: f64) -> Result<MultipoleField> {
    check_theta(theta)?;
    let (sx, cx) = (theta.sin().powi(2), theta.cos().powi(2));
    let (cx_field, cy_field) = theta_x_components();
    Ok(cx_field.scaled(alpha * sx).add_scaled(&cy_field, -alpha * cx))
}

/// The two single-plane building blocks: hexapole fields whose potentials
/// are `z(3x² - z²)` and `z(3y² - z²)` respectively. Each vanishes on its
/// own axis (and more); their weighted difference forms [`theta_x`].
pub fn theta_x_components() -> (MultipoleField, MultipoleField) {
    let mut hx: Rank3 = [[[0.0; 3]; 3]; 3];
    set_symmetric3(&mut hx, [0, 0, 2], -6.0);
    set_symmetric3(&mut hx, [2, 2, 2], 6.0);
    let mut hy: Rank3 = [[[0.0; 3]; 3]; 3];
    set_symmetric3(&mut hy, [1, 1, 2], -6.0);
    set_symmetric3(&mut hy, [2, 2, 2], 6.0);
    (MultipoleField::from_hexapole(hx), MultipoleField::from_hexapole(hy))
}

/// The right-angle octupole intersection field: potential
/// `V = z⁴ - 3(x² + y²)z² + 3x²y²`, which carries zero field on the x and y
/// axes (and nowhere else on lines through the origin in the z = 0 plane).
pub fn theta_o() -> MultipoleField {
    let mut o: Rank4 = [[[[0.0; 3]; 3]; 3]; 3];
    set_symmetric4(&mut o, [2, 2, 2, 2], -24.0);
    set_symmetric4(&mut o, [0, 0, 2, 2], 12.0);
    set_symmetric4(&mut o, [1, 1, 2, 2], 12.0);
    set_symmetric4(&mut o, [0, 0, 1, 1], -12.0);
    MultipoleField::from_octupole(o)
}

fn set_symmetric3(t: &mut Rank3, idx: [usize; 3], value: f64) {
    let mut perm = idx;
    perm.sort_unstable();
    loop {
        t[perm[0]][perm[1]][perm[2]] = value;
        if !next_permutation(&mut perm) {
            break;
        }
    }
}

fn set_symmetric4(t: &mut Rank4, idx: [usize; 4], value: f64) {
    let mut perm = idx;
    perm.sort_unstable();
    loop {
        t[perm[0]][perm[1]][perm[2]][perm[3]] = value;
        if !next_permutation(&mut perm) {
            break;
        }
    }
}

/// Lexicographic next-permutation over a small index slice.
fn next_permutation(idx: &mut [usize]) -> bool {
    let n = idx.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && idx[i - 1] >= idx[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while idx[j] <= idx[i - 1] {
        j -= 1;
    }
    idx.swap(i - 1, j);
    idx[i..].reverse();
    true
}

/// Outcome of the cotangential quadrupole-exclusion check.
#[derive(Debug, Clone)]
pub struct CotangentialReport {
    /// Smallest series order `M ≥ 2` at which the two paths differ.
    pub first_difference_order: usize,
    /// `|u⁽¹⁾·(u⁽ᴹ⁾ - v⁽ᴹ⁾)| / |u⁽ᴹ⁾ - v⁽ᴹ⁾|`; arc-length parametrization
    /// forces this to zero, and the forced-quadrupole argument rests on it.
    pub tangent_orthogonality_residual: f64,
    /// Nullspace dimension of the quadrupole block under both membership
    /// conditions (`q·u⁽¹⁾ = 0` and `q·(u⁽ᴹ⁾ - v⁽ᴹ⁾) = 0`).
    pub quadrupole_nullspace_dim: usize,
    /// True exactly when the quadrupole block is forced to zero.
    pub forced_q_zero: bool,
}

/// For two distinct paths sharing a tangent at the intersection, show that
/// no quadrupole can vanish on both: the zero set of a quadrupole through
/// the origin is a line pair/plane determined by its null directions, and
/// membership of both the common tangent and the (tangent-orthogonal) first
/// difference direction forces the symmetric traceless block to zero.
pub fn verify_cotangential_quadrupole(p1: &PathCurve, p2: &PathCurve) -> Result<CotangentialReport> {
    let u1 = p1.tangent();
    if (u1 - p2.tangent()).norm() > PATH_TOL {
        return Err(Error::InvalidPath(
            "paths are not cotangential (tangents differ)".into(),
        ));
    }
    let max_n = p1.order().max(p2.order());
    let mut first_diff = None;
    for n in 2..=max_n {
        let delta = p1.coefficient(n) - p2.coefficient(n);
        if delta.norm() > PATH_TOL {
            first_diff = Some((n, delta));
            break;
        }
    }
    let Some((m_order, delta)) = first_diff else {
        return Err(Error::InvalidPath(
            "paths coincide to their stored order; no difference direction".into(),
        ));
    };

    let residual = u1.dot(&delta).abs() / delta.norm();

    // Quadrupole block system: Maxwell rows + both membership conditions.
    let mut builder = SystemBuilder::new(2, 2);
    builder.push_maxwell_rows();
    for (tag_path, v) in [(0usize, u1), (1usize, delta)] {
        for comp in 0..3 {
            let mut row = vec![0.0; 9];
            for j in 0..3 {
                row[3 * comp + j] = v[j];
            }
            builder.rows.push(row);
            builder.tags.push(RowTag::Path {
                path: tag_path,
                s_order: 1,
                component: comp,
            });
        }
    }
    let system = builder.finish();
    let ns = solve_nullspace(&system);

    Ok(CotangentialReport {
        first_difference_order: m_order,
        tangent_orthogonality_residual: residual,
        quadrupole_nullspace_dim: ns.dimension,
        forced_q_zero: ns.dimension == 0,
    })
}

/// Restriction of the field to the line `r = s·dir`: polynomial coefficients
/// `c[i][n]` of `E_i(s·dir) = Σ_n c[i][n] sⁿ`, exact for the stored orders.
pub fn line_restriction(field: &MultipoleField, dir: &Vector3<f64>) -> [[f64; 4]; 3] {
    let u = *dir;
    let mut c = [[0.0; 4]; 3];
    for i in 0..3 {
        c[i][0] = field.dipole[i];
        for j in 0..3 {
            c[i][1] += field.quadrupole[(i, j)] * u[j];
            for k in 0..3 {
                c[i][2] += 0.5 * field.hexapole[i][j][k] * u[j] * u[k];
                for l in 0..3 {
                    c[i][3] += field.octupole[i][j][k][l] * u[j] * u[k] * u[l] / 6.0;
                }
            }
        }
    }
    c
}

/// Check whether `field` vanishes on the *full* line through the origin
/// along `dir`, demonstrating on the way that vanishing on a sampled
/// half-line already implies it: the restriction of a polynomial field to a
/// line is a polynomial in `s`, and a polynomial that is zero on a ray is
/// identically zero. Consequently no trap network can contain a zero
/// half-line that stops at the intersection (no Y or T junctions).
///
/// Returns true exactly when the line is a zero line. `s_range = (lo, hi)`
/// with `0 < lo < hi` is the half-line sampling window.
pub fn verify_no_straight_y(
    field: &MultipoleField,
    dir: &Vector3<f64>,
    s_range: (f64, f64),
) -> Result<bool> {
    let norm = dir.norm();
    if norm < 1e-12 {
        return Err(Error::InvalidArgument("line direction must be nonzero".into()));
    }
    let (lo, hi) = s_range;
    if !(0.0 < lo && lo < hi && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "half-line sample range must satisfy 0 < lo < hi, got ({lo}, {hi})"
        )));
    }
    let u = dir / norm;

    let coeffs = line_restriction(field, &u);
    let scale: f64 = coeffs.iter().flatten().fold(0.0f64, |m, c| m.max(c.abs()));
    let vanishes_full = scale <= 1e-12;

    // Sample the half-line; with exact polynomial structure this can only
    // agree with the coefficient test, which is the point being verified.
    let samples = 32;
    let max_field = (0..samples)
        .map(|k| {
            let s = lo + (hi - lo) * k as f64 / (samples - 1) as f64;
            field.field(&(u * s)).norm()
        })
        .fold(0.0f64, f64::max);
    let vanishes_half = max_field <= 1e-9 * field_scale(field).max(1.0);
    debug_assert_eq!(
        vanishes_half, vanishes_full,
        "polynomial field vanished on a half-line but not the full line"
    );

    Ok(vanishes_full)
}

fn field_scale(f: &MultipoleField) -> f64 {
    (1..=4).map(|k| f.flatten_order(k).amax()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multipole::PseudopotentialScale;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_6};

    #[test]
    fn straight_x_paths_have_expected_tangents() {
        let (p1, p2) = straight_x_paths(FRAC_PI_6).unwrap();
        assert!((p1.tangent() - Vector3::new(0.8660254037844387, 0.5, 0.0)).norm() < 1e-12);
        assert!((p2.tangent() - Vector3::new(0.8660254037844387, -0.5, 0.0)).norm() < 1e-12);
        assert!(straight_x_paths(0.0).is_err());
        assert!(straight_x_paths(80.0_f64.to_radians()).is_err());
    }

    #[test]
    fn path_invariants_are_enforced() {
        // non-unit tangent
        assert!(PathCurve::new(vec![Vector3::new(1.0, 1.0, 0.0)]).is_err());
        // arc-length violated: u2 with a parallel component
        assert!(PathCurve::new(vec![Vector3::x(), Vector3::new(0.5, 0.3, 0.0)]).is_err());
        // transverse curvature is fine
        let p = PathCurve::new(vec![Vector3::x(), Vector3::new(0.0, 0.3, 0.0)]).unwrap();
        assert_eq!(p.order(), 2);
    }

    #[test]
    fn from_transverse_builds_consistent_series() {
        // curvature 0.3 in y, then a torsion-like transverse part in z
        let p = PathCurve::from_transverse(
            Vector3::x(),
            &[Vector3::new(0.0, 0.3, 0.0), Vector3::new(0.0, 0.0, 0.1)],
        )
        .unwrap();
        assert_eq!(p.order(), 3);
        // parallel part of u3 must cancel |u2|²: u1·u3 = -(2/3)κ²
        let expect = -2.0 / 3.0 * 0.09;
        assert!((p.coefficient(3).x - expect).abs() < 1e-12);
        // and the construction round-trips the validator
        PathCurve::new(vec![p.coefficient(1), p.coefficient(2), p.coefficient(3)]).unwrap();
    }

    #[test]
    fn maxwell_only_dimensions_match_free_parameter_counts() {
        // hexapole block alone: 7; stacked orders 1..=3: 3+5+7
        let hex = ConstraintSystem::maxwell_only(3, 3);
        assert_eq!(solve_nullspace(&hex).dimension, 7);
        let all = ConstraintSystem::maxwell_only(1, 3);
        assert_eq!(solve_nullspace(&all).dimension, 15);
    }

    #[test]
    fn single_straight_path_leaves_two_parameter_quadrupole_family() {
        let path = PathCurve::straight(Vector3::new(0.6, 0.0, 0.8)).unwrap();
        let problem = IntersectionProblem::new(vec![path.clone()], 2, 1).unwrap();
        let system = build_constraints(&problem).unwrap();
        let ns = solve_nullspace(&system);
        assert_eq!(ns.dimension, 2);
        for f in &ns.fields {
            assert!(f.dipole.norm() < 1e-10);
            let qv = f.quadrupole * path.tangent();
            assert!(qv.norm() < 1e-10, "tangent must be a zero eigenvector");
            f.validate().unwrap();
        }
    }

    #[test]
    fn straight_x_nullspace_is_unique_hexapole() {
        let (p1, p2) = straight_x_paths(FRAC_PI_6).unwrap();
        let problem = IntersectionProblem::new(vec![p1, p2], 3, 2).unwrap();
        let system = build_constraints(&problem).unwrap();
        let ns = solve_nullspace(&system);
        assert_eq!(ns.dimension, 1);

        // basis satisfies every row to 1e-9
        let residual = (&system.matrix * &ns.basis_raw[0]).amax();
        assert!(residual < 1e-9);

        // aligned with the closed form
        let reference = theta_x(FRAC_PI_6, 1.0).unwrap();
        let a = ns.fields[0].flatten_order(3);
        let b = reference.flatten_order(3);
        let cos = a.dot(&b).abs() / (a.norm() * b.norm());
        assert!(cos >= 1.0 - 1e-9, "alignment {cos}");
        // and the dipole/quadrupole parts are zero
        assert!(ns.fields[0].dipole.norm() < 1e-10);
        assert!(ns.fields[0].quadrupole.norm() < 1e-10);
    }

    #[test]
    fn theta_x_component_ratios() {
        // (h_113, h_223, h_333) ∝ (-sin²θ, cos²θ, sin²θ - cos²θ)
        let f = theta_x(FRAC_PI_4, 2.0).unwrap();
        let (a, b, c) = (f.hexapole[0][0][2], f.hexapole[1][1][2], f.hexapole[2][2][2]);
        assert!((a + b).abs() < 1e-12 && c.abs() < 1e-12, "π/4 ratio (-1, 1, 0)");

        let f = theta_x(FRAC_PI_6, 1.0).unwrap();
        let (a, b, c) = (f.hexapole[0][0][2], f.hexapole[1][1][2], f.hexapole[2][2][2]);
        assert!((a / c - 0.5).abs() < 1e-12, "(-1/4)/(-1/2)");
        assert!((b / c + 1.5).abs() < 1e-12, "(3/4)/(-1/2)");
        f.validate().unwrap();
    }

    #[test]
    fn theta_x_potential_and_field_values() {
        let theta = FRAC_PI_6;
        let alpha = 1.3;
        let f = theta_x(theta, alpha).unwrap();
        // V(0,0,1) = α cos 2θ (both component blocks contribute -1)
        let v = f.potential(&Point3::new(0.0, 0.0, 1.0));
        assert!((v - alpha * (2.0 * theta).cos()).abs() < 1e-12);
        // V = 0 at (1,1,1) for θ = π/4 by x/y symmetry
        let f45 = theta_x(FRAC_PI_4, 0.7).unwrap();
        assert!(f45.potential(&Point3::new(1.0, 1.0, 1.0)).abs() < 1e-12);
        // field vanishes along both paths, exactly, for all s
        for s in [-2.0, -0.5, 0.1, 1.7] {
            let r = Point3::new(theta.cos() * s, theta.sin() * s, 0.0);
            assert!(f.field(&r).norm() < 1e-12 * s.abs().powi(2).max(1.0));
        }
        // field at (0,0,1) is (0, 0, -3 α cos 2θ)
        let e = f.field(&Point3::new(0.0, 0.0, 1.0));
        assert!((e - Vector3::new(0.0, 0.0, -3.0 * alpha * (2.0 * theta).cos())).norm() < 1e-12);
    }

    #[test]
    fn theta_x_confinement_profiles() {
        // |E|² = 9α² y⁴ cos⁴θ on the y axis and 9α² z⁴ cos²2θ on the z axis
        let theta = FRAC_PI_6;
        let alpha = 0.8;
        let f = theta_x(theta, alpha).unwrap();
        let s = PseudopotentialScale::default();
        for v in [0.1, 0.5, 1.0, 2.0] {
            let uy = f.pseudopotential(&Point3::new(0.0, v, 0.0), &s);
            let want_y = 9.0 * alpha * alpha * v.powi(4) * theta.cos().powi(4);
            assert!((uy - want_y).abs() <= 1e-10 * want_y);
            let uz = f.pseudopotential(&Point3::new(0.0, 0.0, v), &s);
            let want_z = 9.0 * alpha * alpha * v.powi(4) * (2.0 * theta).cos().powi(2);
            assert!((uz - want_z).abs() <= 1e-10 * want_z);
        }
        // right angle: z axis goes flat
        let f45 = theta_x(FRAC_PI_4, alpha).unwrap();
        for v in [0.3, 1.0, 1.9] {
            assert!(f45.pseudopotential(&Point3::new(0.0, 0.0, v), &s) < 1e-12);
        }
    }

    #[test]
    fn theta_x_components_span_and_values() {
        let (fx, fy) = theta_x_components();
        fx.validate().unwrap();
        fy.validate().unwrap();
        assert!(fx.potential(&Point3::new(1.0, 0.0, 0.0)).abs() < 1e-15);
        assert!((fx.potential(&Point3::new(0.0, 0.0, 1.0)) + 1.0).abs() < 1e-15);
        assert!((fy.potential(&Point3::new(0.0, 1.0, 1.0)) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn theta_o_is_valid_and_vanishes_on_axes() {
        let f = theta_o();
        f.validate().unwrap();
        let v = f.potential(&Point3::new(1.0, 1.0, 1.0));
        // z⁴ - 3(x²+y²)z² + 3x²y² at (1,1,1) = 1 - 6 + 3 = -2
        assert!((v + 2.0).abs() < 1e-12);
        for s in [-1.5, 0.2, 0.9] {
            assert!(f.field(&Point3::new(s, 0.0, 0.0)).norm() < 1e-13);
            assert!(f.field(&Point3::new(0.0, s, 0.0)).norm() < 1e-13);
        }
        // ∇V = (6, 6, 0) there, so the field E = -∇V points the other way
        let e = f.field(&Point3::new(1.0, 1.0, 0.0));
        assert!((e - Vector3::new(-6.0, -6.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn cotangential_pairs_force_quadrupole_to_zero() {
        // M = 2: same tangent, different curvature planes
        let p1 = PathCurve::from_transverse(Vector3::x(), &[Vector3::new(0.0, 0.3, 0.0)]).unwrap();
        let p2 = PathCurve::from_transverse(Vector3::x(), &[Vector3::new(0.0, 0.0, 0.2)]).unwrap();
        let report = verify_cotangential_quadrupole(&p1, &p2).unwrap();
        assert_eq!(report.first_difference_order, 2);
        assert!(report.tangent_orthogonality_residual < 1e-12);
        assert!(report.forced_q_zero);

        // M = 3: same curvature, torsion differs in sign
        let t2 = Vector3::new(0.0, 0.25, 0.0);
        let p1 = PathCurve::from_transverse(Vector3::x(), &[t2, Vector3::new(0.0, 0.0, 0.15)]).unwrap();
        let p2 = PathCurve::from_transverse(Vector3::x(), &[t2, Vector3::new(0.0, 0.0, -0.15)]).unwrap();
        let report = verify_cotangential_quadrupole(&p1, &p2).unwrap();
        assert_eq!(report.first_difference_order, 3);
        assert!(report.tangent_orthogonality_residual < 1e-12);
        assert!(report.forced_q_zero);
    }

    #[test]
    fn cotangential_check_rejects_bad_inputs() {
        let (p1, p2) = straight_x_paths(FRAC_PI_6).unwrap();
        assert!(verify_cotangential_quadrupole(&p1, &p2).is_err(), "tangents differ");
        assert!(verify_cotangential_quadrupole(&p1, &p1).is_err(), "identical paths");
    }

    #[test]
    fn no_straight_y_line_classification() {
        let theta = FRAC_PI_6;
        let f = theta_x(theta, 1.0).unwrap();
        let zero_line = Vector3::new(theta.cos(), theta.sin(), 0.0);
        assert!(verify_no_straight_y(&f, &zero_line, (0.1, 2.0)).unwrap());
        // the x axis is not a zero line of Θ_X away from θ = π/4
        assert!(!verify_no_straight_y(&f, &Vector3::x(), (0.1, 2.0)).unwrap());
        // but it is one of the octupole field
        assert!(verify_no_straight_y(&theta_o(), &Vector3::x(), (0.1, 2.0)).unwrap());
        assert!(verify_no_straight_y(&f, &Vector3::x(), (0.0, 1.0)).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            /// Scaling a path's transverse data rotates/scales the difference
            /// direction but never rescues the quadrupole: cotangential
            /// exclusion is generic, not an accident of axis alignment.
            #[test]
            fn cotangential_exclusion_is_generic(
                ky in 0.05f64..0.5, kz in 0.05f64..0.5,
                az in -0.4f64..0.4, ang in 0.0f64..std::f64::consts::PI,
            ) {
                // a generic shared tangent
                let t = Vector3::new(ang.cos(), ang.sin() * 0.6, ang.sin() * 0.8);
                let p1 = PathCurve::from_transverse(t, &[perp(&t, ky, 0.0)]).unwrap();
                let p2 = PathCurve::from_transverse(t, &[perp(&t, 0.0, kz + az.abs() + 0.01)]).unwrap();
                let report = verify_cotangential_quadrupole(&p1, &p2).unwrap();
                prop_assert!(report.forced_q_zero);
                prop_assert!(report.tangent_orthogonality_residual < 1e-9);
            }

            /// The straight-X nullspace stays one-dimensional across the
            /// admissible angle range.
            #[test]
            fn straight_x_uniqueness_over_theta(theta in 0.05f64..std::f64::consts::FRAC_PI_4) {
                let (p1, p2) = straight_x_paths(theta).unwrap();
                let problem = IntersectionProblem::new(vec![p1, p2], 3, 2).unwrap();
                let ns = solve_nullspace(&build_constraints(&problem).unwrap());
                prop_assert_eq!(ns.dimension, 1);
            }
        }

        /// Two directions orthogonal to t, combined with weights a and b.
        fn perp(t: &Vector3<f64>, a: f64, b: f64) -> Vector3<f64> {
            let e1 = t.cross(&Vector3::z());
            let e1 = if e1.norm() < 1e-6 { t.cross(&Vector3::y()) } else { e1 };
            let e1 = e1.normalize();
            let e2 = t.cross(&e1).normalize();
            e1 * a + e2 * b
        }
    }
}
