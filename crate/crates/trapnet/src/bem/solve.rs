//! Collocation boundary-element solver for surface charge densities.
//!
//! Constant-density panels; the influence matrix entry `A_ij` is the
//! potential at panel `i`'s centroid from unit charge density on panel `j`,
//! always through the closed-form single-layer integral over a flat
//! triangle — no far-field shortcut, so the assembled operator inherits the
//! mesh's reflection symmetries to rounding accuracy instead of flipping
//! approximation branches on last-bit coordinate noise. Kernel
//! `1/(4π|r − r'|)`.

use crate::bem::mesh::{point_triangle_distance, ElectrodeMesh};
use crate::error::Error;
use crate::multipole::Point3;
use crate::Result;
use nalgebra::{DMatrix, DVector, Vector3};
use rayon::prelude::*;

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Evaluation points closer than this to any panel are rejected.
pub const MIN_EVAL_DISTANCE: f64 = 1e-6;

/// Relative residual bound the solve must meet.
const SOLVE_RESIDUAL_TOL: f64 = 1e-8;

/// Precomputed per-panel geometry.
#[derive(Debug, Clone)]
struct Panel {
    verts: [Point3; 3],
    centroid: Point3,
    area: f64,
    diameter: f64,
}

impl Panel {
    fn from_mesh(mesh: &ElectrodeMesh, t: usize) -> Self {
        let verts = mesh.triangle_vertices(t);
        let centroid = (verts[0] + verts[1] + verts[2]) / 3.0;
        let area = 0.5 * (verts[1] - verts[0]).cross(&(verts[2] - verts[0])).norm();
        let diameter = (verts[1] - verts[0])
            .norm()
            .max((verts[2] - verts[1]).norm())
            .max((verts[0] - verts[2]).norm());
        Self {
            verts,
            centroid,
            area,
            diameter,
        }
    }
}

/// `I(p) = ∫_T dA'/|p − r'|` over a flat triangle and its gradient in `p`.
///
/// Edge-wise closed form: with `ŝ` the edge direction, `m̂ = ŝ × n̂` the
/// in-plane outward edge normal, `h` the signed height of `p` over the
/// plane, `P0` the signed in-plane distance to the edge line, and `(s, R)`
/// arclength/distance at the endpoints,
///
/// `I = Σ_e P0·ln((R₊+s₊)/(R₋+s₋)) − |h|·Σ_e β_e`,
/// `∇I = −Σ_e m̂·ln(…) − n̂·sgn(h)·Σ_e β_e`,
///
/// where `β_e = atan2(P0·s₊, R0² + |h|R₊) − atan2(P0·s₋, R0² + |h|R₋)` and
/// `R0² = P0² + h²`. The log is evaluated in whichever of its two
/// algebraically equal forms keeps the denominator away from zero.
fn single_layer(verts: &[Point3; 3], p: &Point3) -> (f64, Vector3<f64>) {
    let raw_normal = (verts[1] - verts[0]).cross(&(verts[2] - verts[0]));
    let nh = raw_normal / raw_normal.norm();
    let h = (p - verts[0]).dot(&nh);
    let ah = h.abs();
    let sgn_h = if h > 0.0 {
        1.0
    } else if h < 0.0 {
        -1.0
    } else {
        0.0
    };

    let mut pot = 0.0;
    let mut grad = Vector3::zeros();
    let mut beta = 0.0;
    for e in 0..3 {
        let a = verts[e];
        let b = verts[(e + 1) % 3];
        let s_hat = (b - a).normalize();
        let m_hat = s_hat.cross(&nh);
        let pa = a - p;
        let pb = b - p;
        let ra = pa.norm();
        let rb = pb.norm();
        let sa = pa.dot(&s_hat);
        let sb = pb.dot(&s_hat);
        let p0 = pa.dot(&m_hat);
        let r0sq = p0 * p0 + h * h;

        let f = if sa + sb >= 0.0 {
            ((rb + sb) / (ra + sa)).ln()
        } else {
            ((ra - sa) / (rb - sb)).ln()
        };
        // Exactly on an edge line both forms are 0/0; the contribution's
        // true limit is zero there (it is always weighted by P0 → 0).
        let f = if f.is_finite() { f } else { 0.0 };

        pot += p0 * f;
        grad -= m_hat * f;
        beta += (p0 * sb).atan2(r0sq + ah * rb) - (p0 * sa).atan2(r0sq + ah * ra);
    }
    pot -= ah * beta;
    grad -= nh * (sgn_h * beta);
    (pot, grad)
}

/// Surface charge densities solving the fixed-potential problem on a mesh.
#[derive(Debug, Clone)]
pub struct BemSolution {
    mesh: ElectrodeMesh,
    panels: Vec<Panel>,
    /// Charge density per panel (charge per d²).
    pub sigma: Vec<f64>,
    /// Relative solve residual `‖Aσ − v‖/‖v‖` (zero for an all-ground mesh).
    pub residual: f64,
}

/// Solve for the panel charge densities that reproduce the mesh's potential
/// tags at every panel centroid.
pub fn assemble_and_solve(mesh: &ElectrodeMesh) -> Result<BemSolution> {
    mesh.validate()?;
    let n = mesh.panel_count();
    if n == 0 {
        return Err(Error::InvalidMesh("mesh has no panels".into()));
    }
    let panels: Vec<Panel> = (0..n).map(|t| Panel::from_mesh(mesh, t)).collect();

    check_duplicate_panels(&panels)?;

    // All-ground short-circuit: zero is the exact solution.
    if mesh.potentials.iter().all(|&v| v == 0.0) {
        return Ok(BemSolution {
            mesh: mesh.clone(),
            panels,
            sigma: vec![0.0; n],
            residual: 0.0,
        });
    }

    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = panels[i].centroid;
            (0..n)
                .map(|j| single_layer(&panels[j].verts, &p).0 / FOUR_PI)
                .collect::<Vec<f64>>()
        })
        .collect();
    let a = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let v = DVector::from_iterator(n, mesh.potentials.iter().copied());

    let lu = a.clone().lu();
    let sigma = lu.solve(&v).ok_or_else(|| {
        Error::Numerical("influence matrix is singular; check for overlapping electrodes".into())
    })?;

    let residual = (&a * &sigma - &v).norm() / v.norm();
    if !(residual < SOLVE_RESIDUAL_TOL) {
        return Err(Error::Numerical(format!(
            "solve residual {residual:.3e} exceeds {SOLVE_RESIDUAL_TOL:.0e}"
        )));
    }

    Ok(BemSolution {
        mesh: mesh.clone(),
        panels,
        sigma: sigma.iter().copied().collect(),
        residual,
    })
}

/// Two panels whose centroids coincide produce identical collocation rows;
/// find such pairs before they surface as a singular matrix.
fn check_duplicate_panels(panels: &[Panel]) -> Result<()> {
    let scale = panels
        .iter()
        .map(|p| p.centroid.amax())
        .fold(0.0f64, f64::max)
        .max(1e-30);
    let quantum = 1e-9 * scale;
    let mut keyed: Vec<([i64; 3], usize)> = panels
        .iter()
        .enumerate()
        .map(|(i, p)| {
            (
                [
                    (p.centroid.x / quantum).round() as i64,
                    (p.centroid.y / quantum).round() as i64,
                    (p.centroid.z / quantum).round() as i64,
                ],
                i,
            )
        })
        .collect();
    keyed.sort_unstable();
    for w in keyed.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::InvalidMesh(format!(
                "panels {} and {} coincide (identical centroids)",
                w[0].1.min(w[1].1),
                w[0].1.max(w[1].1)
            )));
        }
    }
    Ok(())
}

impl BemSolution {
    pub fn mesh(&self) -> &ElectrodeMesh {
        &self.mesh
    }

    /// Total charge (density × area summed over panels).
    pub fn total_charge(&self) -> f64 {
        self.panels
            .iter()
            .zip(&self.sigma)
            .map(|(p, s)| p.area * s)
            .sum()
    }

    /// Reject evaluation points on or nearly on a panel.
    fn check_clearance(&self, p: &Point3) -> Result<()> {
        for (t, panel) in self.panels.iter().enumerate() {
            // Cheap centroid bound first; exact distance only when close.
            if (p - panel.centroid).norm() < panel.diameter + MIN_EVAL_DISTANCE
                && point_triangle_distance(p, &panel.verts) <= MIN_EVAL_DISTANCE
            {
                return Err(Error::InvalidArgument(format!(
                    "evaluation point within {MIN_EVAL_DISTANCE:.0e} of panel {t}"
                )));
            }
        }
        Ok(())
    }

    /// Electrostatic potential at `p` (analytic panel integrals throughout).
    pub fn potential(&self, p: &Point3) -> Result<f64> {
        self.check_clearance(p)?;
        Ok(self.potential_unchecked(p))
    }

    fn potential_unchecked(&self, p: &Point3) -> f64 {
        self.panels
            .iter()
            .zip(&self.sigma)
            .map(|(panel, s)| s * single_layer(&panel.verts, p).0)
            .sum::<f64>()
            / FOUR_PI
    }

    /// Field `E = −∇V` at `p` (analytic panel integrals throughout).
    pub fn field(&self, p: &Point3) -> Result<Vector3<f64>> {
        self.check_clearance(p)?;
        Ok(self.field_unchecked(p))
    }

    fn field_unchecked(&self, p: &Point3) -> Vector3<f64> {
        let mut grad = Vector3::zeros();
        for (panel, s) in self.panels.iter().zip(&self.sigma) {
            grad += single_layer(&panel.verts, p).1 * *s;
        }
        -grad / FOUR_PI
    }

    /// Potentials at many points, in parallel.
    pub fn potential_batch(&self, points: &[Point3]) -> Result<Vec<f64>> {
        for p in points {
            self.check_clearance(p)?;
        }
        Ok(points
            .par_iter()
            .map(|p| self.potential_unchecked(p))
            .collect())
    }

    /// Fields at many points, in parallel.
    pub fn field_batch(&self, points: &[Point3]) -> Result<Vec<Vector3<f64>>> {
        for p in points {
            self.check_clearance(p)?;
        }
        Ok(points.par_iter().map(|p| self.field_unchecked(p)).collect())
    }
}
