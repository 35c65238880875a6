//! Parametric electrode geometries and the axial-field nulling loop.
//!
//! A [`GeometryFamily`] is a one-parameter family of electrode meshes. The
//! shipped [`reference_family`] realizes a crossed-guide junction: a strong
//! six-rod transverse guide along x and a weak one along y, driven with
//! opposite handedness so their near-axis cubic terms combine into the
//! crossing potential, plus a pair of axial shield plates whose differential
//! compensation drive `λ` moves the residual axial term `α_H` through zero.
//! [`tune_alpha_h`] finds that zero by a scanned bisection on `λ`.

use crate::bem::fit::{fit_multipoles, FitOptions, MultipoleFit};
use crate::bem::mesh::{cuboid, ElectrodeMesh};
use crate::bem::solve::assemble_and_solve;
use crate::error::Error;
use crate::multipole::Point3;
use crate::Result;
use serde::Deserialize;
use std::fmt;
use std::sync::Arc;

/// Dimensions of the reference geometry, kept as versioned data.
const REFERENCE_DIMENSIONS: &str = include_str!("reference_dimensions.json");

/// Coarse scan points (endpoints included) used to bracket the `α_H` zero
/// and to judge whether the sweep is monotone before bisecting.
const PRESCAN_POINTS: usize = 5;

/// Cap on bisection steps after the bracket is found.
const MAX_BISECTIONS: usize = 60;

type MeshBuilder = Arc<dyn Fn(f64, f64) -> Result<ElectrodeMesh> + Send + Sync>;

/// A one-parameter family of electrode meshes.
#[derive(Clone)]
pub struct GeometryFamily {
    pub name: String,
    /// Inclusive parameter range accepted by the builder.
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    /// Panel-density multiplier used by [`GeometryFamily::mesh`]; panel
    /// counts grow roughly linearly with it.
    pub default_density: f64,
    builder: MeshBuilder,
}

impl fmt::Debug for GeometryFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeometryFamily")
            .field("name", &self.name)
            .field("lambda_lo", &self.lambda_lo)
            .field("lambda_hi", &self.lambda_hi)
            .field("default_density", &self.default_density)
            .finish()
    }
}

impl GeometryFamily {
    /// Build the mesh at parameter `lambda` with the default panel density.
    pub fn mesh(&self, lambda: f64) -> Result<ElectrodeMesh> {
        self.mesh_with_density(lambda, self.default_density)
    }

    /// Build the mesh at `lambda` with an explicit density multiplier.
    pub fn mesh_with_density(&self, lambda: f64, density: f64) -> Result<ElectrodeMesh> {
        if !(lambda >= self.lambda_lo && lambda <= self.lambda_hi) {
            return Err(Error::InvalidArgument(format!(
                "parameter {lambda} outside the {} family range [{}, {}]",
                self.name, self.lambda_lo, self.lambda_hi
            )));
        }
        if !(density > 0.0 && density.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "panel density must be positive and finite, got {density}"
            )));
        }
        (self.builder)(lambda, density)
    }
}

#[derive(Debug, Clone, Deserialize)]
struct GuideDims {
    radius: f64,
    half_width: f64,
    length: f64,
    max_edge: f64,
    /// Drive amplitude of this guide's rods (sets the hexapole ratio and
    /// with it the crossing angle).
    amplitude: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct PlateDims {
    height: f64,
    half_extents: [f64; 3],
    max_edge: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[allow(dead_code)]
struct ReferenceDims {
    schema_version: u32,
    name: String,
    lambda_lo: f64,
    lambda_hi: f64,
    default_density: f64,
    shield_plate: PlateDims,
    strong_guide: GuideDims,
    weak_guide: GuideDims,
}

/// The built-in crossed-guide junction family, parametrized by the
/// differential compensation drive `λ` on its axial shield plates.
///
/// The structure: a shield plate pair on the z-axis sets the
/// center-to-nearest-electrode distance; a strong six-rod guide along x
/// supplies the `z(3y²−z²)` hexapole component and a weak guide along y
/// the `z(3x²−z²)` component, their radii and drive amplitudes fixing the
/// crossing angle. The shields pick up opposite induced charges from the
/// guides' odd field, which leaves a residual homogeneous axial term; the
/// plates are therefore driven at `+λ` (top) and `−λ` (bottom) and that
/// drive is the tuning knob that moves `α_H` through zero. Because the
/// boundary problem is linear in the drives, `α_H(λ)` is exactly affine,
/// which makes the bisection bracket trivially monotone.
///
/// Conventions: all lengths are rescaled so the nearest electrode surface
/// sits at distance 1 from the junction center, and drives are quoted in
/// units of the strong guide's amplitude.
pub fn reference_family() -> GeometryFamily {
    let dims: ReferenceDims =
        serde_json::from_str(REFERENCE_DIMENSIONS).expect("built-in dimension data parses");
    GeometryFamily {
        name: dims.name.clone(),
        lambda_lo: dims.lambda_lo,
        lambda_hi: dims.lambda_hi,
        default_density: dims.default_density,
        builder: Arc::new(move |lambda, density| build_reference_mesh(&dims, lambda, density)),
    }
}

/// Rod azimuths of a six-rod guide: a hexagon starting 30° off the first
/// transverse axis, written with exact constants so reflected rods have
/// bit-identical coordinates.
fn hexagon() -> [(f64, f64); 6] {
    let h = 3f64.sqrt() / 2.0;
    [
        (h, 0.5),
        (0.0, 1.0),
        (-h, 0.5),
        (-h, -0.5),
        (0.0, -1.0),
        (h, -0.5),
    ]
}

fn build_reference_mesh(
    dims: &ReferenceDims,
    lambda: f64,
    density: f64,
) -> Result<ElectrodeMesh> {
    let scale = density.sqrt();
    let ring = hexagon();
    // Alternating drives; sign patterns chosen so the strong guide's cubic
    // term is negative on `z(3y²−z²)` and the weak guide's positive on
    // `z(3x²−z²)`.
    let strong_tags = [-1.0, 1.0, -1.0, 1.0, -1.0, 1.0];
    let weak_tags = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0];

    let mut mesh = ElectrodeMesh::new(Vec::new(), Vec::new(), Vec::new())?;

    let g = &dims.strong_guide;
    for (&(u, v), &tag) in ring.iter().zip(&strong_tags) {
        mesh.append(&cuboid(
            Point3::new(0.0, g.radius * u, g.radius * v),
            [0.5 * g.length, g.half_width, g.half_width],
            g.max_edge / scale,
            tag * g.amplitude,
        ));
    }

    let g = &dims.weak_guide;
    for (&(u, v), &tag) in ring.iter().zip(&weak_tags) {
        mesh.append(&cuboid(
            Point3::new(g.radius * u, 0.0, g.radius * v),
            [g.half_width, 0.5 * g.length, g.half_width],
            g.max_edge / scale,
            tag * g.amplitude,
        ));
    }

    // Shield plates carry the differential compensation drive.
    let p = &dims.shield_plate;
    for sign in [1.0, -1.0] {
        mesh.append(&cuboid(
            Point3::new(0.0, 0.0, sign * p.height),
            p.half_extents,
            p.max_edge / scale,
            sign * lambda,
        ));
    }

    // Normalize so the nearest electrode surface is at distance exactly 1
    // from the junction center. The geometry does not depend on λ (only
    // the drives do), so neither does the factor.
    let nearest = mesh.nearest_distance(&Point3::zeros());
    mesh.scale(1.0 / nearest);
    mesh.validate()?;
    Ok(mesh)
}

/// Outcome of [`tune_alpha_h`].
#[derive(Debug, Clone)]
pub struct TuneResult {
    /// Parameter value at which `α_H` crosses zero (within tolerance).
    pub lambda: f64,
    /// Field fit at the tuned parameter.
    pub fit: MultipoleFit,
    /// All `(λ, α_H)` evaluations, sorted by `λ`.
    pub evaluations: Vec<(f64, f64)>,
    /// Whether the coarse scan saw exactly one sign change, i.e. the sweep
    /// behaved monotonically at the scan resolution.
    pub monotone: bool,
}

/// Find the parameter where the axial field term `α_H` vanishes.
///
/// Solves the electrode problem across a coarse `λ` scan of `bracket`,
/// brackets the sign change, and bisects until `|α_H| < tol·|α_X|`. The
/// bracket must lie inside the family's parameter range.
pub fn tune_alpha_h(family: &GeometryFamily, bracket: (f64, f64), tol: f64) -> Result<TuneResult> {
    let (lo, hi) = bracket;
    if !(lo >= family.lambda_lo && hi <= family.lambda_hi) {
        return Err(Error::InvalidArgument(format!(
            "search interval [{lo}, {hi}] exceeds the '{}' parameter range [{}, {}]",
            family.name, family.lambda_lo, family.lambda_hi
        )));
    }
    let options = FitOptions::default();
    let eval = |lambda: f64| -> Result<(f64, MultipoleFit)> {
        let mesh = family.mesh(lambda)?;
        let solution = assemble_and_solve(&mesh)?;
        let fit = fit_multipoles(&solution, Point3::zeros(), &options)?;
        Ok((fit.alpha_h, fit))
    };
    bisect_alpha_h(eval, lo, hi, tol)
}

/// Scanned bisection for the `α_H` zero, generic over the evaluator so the
/// control flow can be tested without electrode solves.
///
/// The evaluator returns `(α_H, fit)` at a given parameter; convergence is
/// declared when `|α_H| < tol·|α_X|` with `α_X` taken from the same fit.
fn bisect_alpha_h(
    mut eval: impl FnMut(f64) -> Result<(f64, MultipoleFit)>,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<TuneResult> {
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "invalid search interval [{lo}, {hi}]"
        )));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }

    let mut evaluations: Vec<(f64, f64)> = Vec::new();
    let converged = |alpha_h: f64, fit: &MultipoleFit| alpha_h.abs() < tol * fit.alpha_x.abs();

    // Coarse scan: bracket the sign change and detect non-monotone sweeps.
    let mut scan: Vec<(f64, f64, MultipoleFit)> = Vec::with_capacity(PRESCAN_POINTS);
    for k in 0..PRESCAN_POINTS {
        let lambda = lo + (hi - lo) * k as f64 / (PRESCAN_POINTS - 1) as f64;
        let (alpha_h, fit) = eval(lambda)?;
        evaluations.push((lambda, alpha_h));
        scan.push((lambda, alpha_h, fit));
    }
    let sign_changes = scan
        .windows(2)
        .filter(|w| w[0].1.signum() * w[1].1.signum() < 0.0)
        .count();
    let monotone = sign_changes == 1;

    if let Some((lambda, _, fit)) = scan
        .iter()
        .find(|(_, alpha_h, fit)| converged(*alpha_h, fit))
        .cloned()
    {
        evaluations.sort_by(|a, b| a.0.total_cmp(&b.0));
        return Ok(TuneResult {
            lambda,
            fit,
            evaluations,
            monotone,
        });
    }

    let Some(w) = scan
        .windows(2)
        .find(|w| w[0].1.signum() * w[1].1.signum() < 0.0)
    else {
        return Err(Error::NoConvergence(format!(
            "α_H does not change sign on [{lo}, {hi}]: α_H({lo}) = {:.6e}, α_H({hi}) = {:.6e}",
            scan.first().map(|s| s.1).unwrap_or(f64::NAN),
            scan.last().map(|s| s.1).unwrap_or(f64::NAN),
        )));
    };
    let (mut a, mut fa) = (w[0].0, w[0].1);
    let mut b = w[1].0;

    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break; // interval exhausted at floating-point resolution
        }
        let (alpha_h, fit) = eval(mid)?;
        evaluations.push((mid, alpha_h));
        if converged(alpha_h, &fit) {
            evaluations.sort_by(|x, y| x.0.total_cmp(&y.0));
            return Ok(TuneResult {
                lambda: mid,
                fit,
                evaluations,
                monotone,
            });
        }
        if fa.signum() * alpha_h.signum() < 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = alpha_h;
        }
    }

    let best = evaluations
        .iter()
        .map(|(_, ah)| ah.abs())
        .fold(f64::INFINITY, f64::min);
    Err(Error::NoConvergence(format!(
        "axial term not nulled to tolerance after {} evaluations (best |α_H| = {best:.3e})",
        evaluations.len()
    )))
}
