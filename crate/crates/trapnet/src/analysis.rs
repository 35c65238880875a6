//! Ponderomotive landscape analysis of perturbed hexapole intersections.
//!
//! The central object is a crossing field plus a uniform axial perturbation,
//! `V = α_H z + α_X Θ_X(θ)`. This module classifies the topology of the
//! resulting zero-field set, traces its curves numerically, locates the
//! saddle points of the ponderomotive potential `U ∝ |E|²`, and reports the
//! barrier heights along the valleys connecting the zero-field regions —
//! everything a designer needs to judge whether a perturbed intersection
//! still transports ions.
//!
//! Closed forms (all for `ratio = α_H/α_X`, half-angle `θ < π/4`):
//! - `ratio > 0`: the crossing splits into two disjoint zero curves, the
//!   branches of `cos²θ·y² − sin²θ·x² = ratio/3` in the `z = 0` plane, with
//!   vertices at `y = ±secθ·√(ratio/3)` and a barrier `α_H²` at the origin.
//! - `ratio < 0`: the zero set is the two branches of the hyperbola
//!   `sin²θ·x² − cos²θ·y² = |ratio|/3` in `z = 0` with junction vertices at
//!   `x = ±cscθ·√(|ratio|/3)`, plus two isolated quadrupole zeros on the z
//!   axis at `z = ±√(|ratio|/(3cos2θ))`; four pseudopotential saddles of
//!   height `α_H²tan²θ` sit between them.

use crate::error::Error;
use crate::intersection::theta_x;
use crate::multipole::{MultipoleField, Point3, PseudopotentialScale};
use crate::Result;
use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_4;

/// Relative threshold below which the axial perturbation counts as absent
/// and the half-angle counts as exactly π/4.
const CLASSIFY_REL_TOL: f64 = 1e-12;

/// Topology classes of the zero-field set of a perturbed intersection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Topology {
    /// Unperturbed crossing: two straight zero-field lines through the
    /// origin with no ponderomotive barrier along either.
    Ideal,
    /// Perturbation with `α_H/α_X < 0`: two curved zero lines whose closest
    /// approach points (junctions) sit on the x axis, plus two isolated
    /// quadrupole zeros on the z axis; finite barriers separate them.
    DoubleJunction,
    /// Perturbation with `α_H/α_X > 0`: the crossing breaks into two
    /// disjoint zero curves separated by a barrier at the origin.
    Disjoint,
    /// `θ = π/4` without perturbation: the lines cross at right angles and
    /// transverse confinement along the z axis vanishes, leaving an
    /// escape channel.
    DegenerateRightAngle,
    /// `θ = π/4` with perturbation: the landscape is degenerate (no
    /// z-axis zeros, no finite confining barrier structure); only
    /// classification and curve tracing are offered.
    DegeneratePerturbed,
}

/// A crossing field `α_X Θ_X(θ)` with a uniform axial perturbation `α_H ẑ`
/// added to the potential: `V = α_H z + α_X Θ_X(θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbedIntersection {
    alpha_h: f64,
    alpha_x: f64,
    theta: f64,
}

impl PerturbedIntersection {
    /// Build from the axial amplitude, crossing amplitude and half-angle.
    ///
    /// `alpha_x` must be nonzero and `theta` must lie in `(0, π/4]`; a
    /// crossing with its acute opening along y is the same geometry with
    /// the x and y axes swapped, so it is not representable directly.
    pub fn new(alpha_h: f64, alpha_x: f64, theta: f64) -> Result<Self> {
        if !(alpha_x != 0.0 && alpha_x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "crossing amplitude must be nonzero and finite, got {alpha_x}"
            )));
        }
        if !alpha_h.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "axial amplitude must be finite, got {alpha_h}"
            )));
        }
        // validates theta ∈ (0, π/4]
        theta_x(theta, 1.0)?;
        Ok(Self {
            alpha_h,
            alpha_x,
            theta,
        })
    }

    /// Axial perturbation amplitude `α_H`.
    pub fn alpha_h(&self) -> f64 {
        self.alpha_h
    }

    /// Crossing amplitude `α_X`.
    pub fn alpha_x(&self) -> f64 {
        self.alpha_x
    }

    /// Crossing half-angle `θ`.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Perturbation ratio `α_H / α_X`; its sign decides the topology.
    pub fn ratio(&self) -> f64 {
        self.alpha_h / self.alpha_x
    }

    /// The multipole field of this intersection (dipole + hexapole blocks).
    pub fn to_field(&self) -> MultipoleField {
        let crossing = theta_x(self.theta, self.alpha_x).expect("validated on construction");
        // V = α_H z needs d = (0, 0, -α_H) in the E-expansion convention.
        crossing.add_scaled(
            &MultipoleField::from_dipole(Vector3::new(0.0, 0.0, -self.alpha_h)),
            1.0,
        )
    }

    /// Recover the parameters from a multipole field, validating that the
    /// field really is a perturbed crossing (dipole along z plus a crossing
    /// hexapole; no quadrupole or octupole content).
    pub fn from_field(field: &MultipoleField) -> Result<Self> {
        let scale = block_scale(field);
        if scale <= 0.0 {
            return Err(Error::InvalidField("field is identically zero".into()));
        }
        let tol = 1e-9 * scale;
        let h113 = field.hexapole[0][0][2];
        let h223 = field.hexapole[1][1][2];
        if h113.abs() <= tol || h223.abs() <= tol {
            return Err(Error::InvalidField(
                "hexapole carries no crossing content (x²z or y²z component missing)".into(),
            ));
        }
        let t2 = -h113 / h223;
        if t2 <= 0.0 {
            return Err(Error::InvalidField(
                "hexapole x²z and y²z components have the same sign; not a crossing field".into(),
            ));
        }
        let theta = t2.sqrt().atan();
        if theta > FRAC_PI_4 + 1e-12 {
            return Err(Error::InvalidField(format!(
                "recovered half-angle {theta:.6} exceeds π/4; swap the x and y axes first"
            )));
        }
        let alpha_x = (h223 - h113) / 6.0;
        let alpha_h = -field.dipole[2];
        let candidate = Self::new(alpha_h, alpha_x, theta.min(FRAC_PI_4))?;
        let residual = block_scale(&field.add_scaled(&candidate.to_field(), -1.0));
        if residual > tol {
            return Err(Error::InvalidField(format!(
                "field deviates from a perturbed crossing by {residual:.3e} (tolerance {tol:.3e})"
            )));
        }
        Ok(candidate)
    }

    /// Classify the zero-set topology from the signs of the parameters.
    ///
    /// Thresholds are sharp (relative `1e-12`); near-degenerate inputs
    /// classify by sign like any other value.
    pub fn classify(&self) -> Topology {
        let right_angle = (self.theta - FRAC_PI_4).abs() <= CLASSIFY_REL_TOL;
        let unperturbed = self.alpha_h.abs() <= CLASSIFY_REL_TOL * self.alpha_x.abs();
        match (right_angle, unperturbed) {
            (true, true) => Topology::DegenerateRightAngle,
            (true, false) => Topology::DegeneratePerturbed,
            (false, true) => Topology::Ideal,
            (false, false) => {
                if self.ratio() < 0.0 {
                    Topology::DoubleJunction
                } else {
                    Topology::Disjoint
                }
            }
        }
    }

    /// Saddle points and valley paths of the ponderomotive landscape.
    ///
    /// Returns `None` for the degenerate-perturbed class, whose landscape
    /// has no finite barrier structure to report. `Ideal` and
    /// `DegenerateRightAngle` return a zero barrier with no saddles.
    pub fn barrier_analysis(
        &self,
        scale: &PseudopotentialScale,
    ) -> Result<Option<BarrierAnalysis>> {
        scale.validate()?;
        let pf = scale.prefactor;
        match self.classify() {
            Topology::Ideal | Topology::DegenerateRightAngle => Ok(Some(BarrierAnalysis {
                barrier_height: 0.0,
                saddles: Vec::new(),
                valley_paths: Vec::new(),
            })),
            Topology::DegeneratePerturbed => Ok(None),
            Topology::Disjoint => {
                let height = pf * self.alpha_h * self.alpha_h;
                let saddle = Saddle {
                    position: Point3::zeros(),
                    height,
                };
                Ok(Some(BarrierAnalysis {
                    barrier_height: height,
                    saddles: vec![saddle],
                    valley_paths: vec![self.disjoint_valley(pf)],
                }))
            }
            Topology::DoubleJunction => {
                let t = self.theta.tan();
                let height = pf * self.alpha_h * self.alpha_h * t * t;
                let (s2, c2) = (self.theta.sin().powi(2), self.theta.cos().powi(2));
                let c2t = (2.0 * self.theta).cos();
                let amp = (self.alpha_h / self.alpha_x).abs() / 6.0;
                let xs = (amp * c2t / (s2 * c2)).sqrt();
                let zs = (amp / c2).sqrt();
                let mut saddles = Vec::new();
                let mut valley_paths = Vec::new();
                for &sx in &[1.0, -1.0] {
                    for &sz in &[1.0, -1.0] {
                        saddles.push(Saddle {
                            position: Point3::new(sx * xs, 0.0, sz * zs),
                            height,
                        });
                        valley_paths.push(self.double_junction_valley(sx, sz, pf));
                    }
                }
                Ok(Some(BarrierAnalysis {
                    barrier_height: height,
                    saddles,
                    valley_paths,
                }))
            }
        }
    }

    /// The disjoint-topology valley: the y-axis segment between the two
    /// branch vertices, with its barrier `α_H²` at the origin.
    fn disjoint_valley(&self, prefactor: f64) -> ValleyPath {
        let y0 = self.disjoint_vertex_y();
        let c2 = self.theta.cos().powi(2);
        let n = 241;
        let mut points = Vec::with_capacity(n);
        let mut pseudopotential = Vec::with_capacity(n);
        for k in 0..n {
            let y = y0 * (2.0 * k as f64 / (n - 1) as f64 - 1.0);
            let g_z = self.alpha_h - 3.0 * self.alpha_x * c2 * y * y;
            points.push(Point3::new(0.0, y, 0.0));
            pseudopotential.push(prefactor * g_z * g_z);
        }
        ValleyPath {
            points,
            pseudopotential,
        }
    }

    /// One quadrant of the double-junction valley loop, from the junction
    /// vertex `(±x_j, 0, 0)` to the quadrupole zero `(0, 0, ±z₀)`.
    ///
    /// Along each in-plane ray `ρ·(cosφ, 0, sinφ)` the field is
    /// `∇V = α_H ẑ + ρ²·w(φ)`; minimizing `|∇V|²` over `ρ` gives the
    /// closed-form valley `ρ*² = −α_H·w_z/|w|²` with floor height
    /// `U = α_H²·w_x²/|w|²`, whose maximum over `φ` is exactly the saddle.
    fn double_junction_valley(&self, sx: f64, sz: f64, prefactor: f64) -> ValleyPath {
        let s2 = self.theta.sin().powi(2);
        let c2t = (2.0 * self.theta).cos();
        let n = 181;
        let mut phis: Vec<f64> = (0..n)
            .map(|k| std::f64::consts::FRAC_PI_2 * k as f64 / (n - 1) as f64)
            .collect();
        // Insert the exact maximizer sin²φ* = tan²θ so the sampled path
        // passes through the saddle itself.
        let phi_star = self.theta.tan().asin();
        let slot = phis.partition_point(|&p| p < phi_star);
        phis.insert(slot, phi_star);
        let mut points = Vec::with_capacity(phis.len());
        let mut pseudopotential = Vec::with_capacity(phis.len());
        for phi in phis {
            let (sp, cp) = phi.sin_cos();
            let wx = 6.0 * self.alpha_x * cp * sp * s2;
            let wz = 3.0 * self.alpha_x * (sp * sp * c2t + cp * cp * s2);
            let w2 = wx * wx + wz * wz;
            let rho = (-self.alpha_h * wz / w2).sqrt();
            points.push(Point3::new(sx * rho * cp, 0.0, sz * rho * sp));
            pseudopotential.push(prefactor * self.alpha_h * self.alpha_h * wx * wx / w2);
        }
        ValleyPath {
            points,
            pseudopotential,
        }
    }

    /// Full landscape report: classification, traced zero curves, junction
    /// and quadrupole-zero positions, saddles and valley paths.
    ///
    /// Seeds in `options.trace.seeds` are used verbatim when given;
    /// otherwise seeds are placed from the closed-form zero positions of
    /// the classified topology.
    pub fn analyze(&self, options: &AnalyzeOptions) -> Result<ZeroLocusReport> {
        let topology = self.classify();
        let field = self.to_field();
        let mut trace_options = options.trace.clone();
        if trace_options.seeds.is_empty() {
            trace_options.seeds = self.default_seeds(trace_options.half_width);
        }
        let traced = trace_zero_lines(&field, &trace_options)?;
        let barrier = self.barrier_analysis(&options.scale)?;
        let (saddles, valley_paths, barrier_height) = match barrier {
            Some(b) => (b.saddles, b.valley_paths, Some(b.barrier_height)),
            None => (Vec::new(), Vec::new(), None),
        };
        let junction_points = match topology {
            Topology::Ideal | Topology::DegenerateRightAngle => vec![Point3::zeros()],
            Topology::DoubleJunction => {
                let xj = self.junction_vertex_x();
                vec![Point3::new(xj, 0.0, 0.0), Point3::new(-xj, 0.0, 0.0)]
            }
            _ => Vec::new(),
        };
        Ok(ZeroLocusReport {
            topology,
            polylines: traced.polylines,
            junction_points,
            quadrupole_zeros: traced.isolated_zeros,
            saddles,
            valley_paths,
            barrier_height,
        })
    }

    /// `y` coordinate of the branch vertices in the disjoint topology.
    fn disjoint_vertex_y(&self) -> f64 {
        (self.ratio() / 3.0).sqrt() / self.theta.cos()
    }

    /// `x` coordinate of the junction vertices in the double-junction
    /// topology.
    fn junction_vertex_x(&self) -> f64 {
        (self.ratio().abs() / 3.0).sqrt() / self.theta.sin()
    }

    /// `z` coordinate of the isolated quadrupole zeros (double junction).
    fn quadrupole_zero_z(&self) -> f64 {
        (self.ratio().abs() / (3.0 * (2.0 * self.theta).cos())).sqrt()
    }

    /// Topology-informed seed points for the zero-curve tracer.
    fn default_seeds(&self, half_width: f64) -> Vec<Point3> {
        let t = self.theta.tan();
        let reach = 0.7 * half_width;
        match self.classify() {
            Topology::Ideal => vec![
                Point3::new(reach, reach * t, 0.0),
                Point3::new(-reach, -reach * t, 0.0),
                Point3::new(reach, -reach * t, 0.0),
                Point3::new(-reach, reach * t, 0.0),
            ],
            Topology::DegenerateRightAngle => vec![
                Point3::new(reach, reach, 0.0),
                Point3::new(reach, -reach, 0.0),
            ],
            Topology::Disjoint => {
                let y0 = self.disjoint_vertex_y();
                vec![Point3::new(0.0, y0, 0.0), Point3::new(0.0, -y0, 0.0)]
            }
            Topology::DoubleJunction => {
                let xj = self.junction_vertex_x();
                let z0 = self.quadrupole_zero_z();
                vec![
                    Point3::new(xj, 0.0, 0.0),
                    Point3::new(-xj, 0.0, 0.0),
                    Point3::new(0.0, 0.0, z0),
                    Point3::new(0.0, 0.0, -z0),
                ]
            }
            Topology::DegeneratePerturbed => {
                // θ = π/4: a single hyperbola family in the z = 0 plane,
                // opening along y for ratio > 0 and along x for ratio < 0.
                let v = (2.0 * self.ratio().abs() / 3.0).sqrt();
                if self.ratio() > 0.0 {
                    vec![Point3::new(0.0, v, 0.0), Point3::new(0.0, -v, 0.0)]
                } else {
                    vec![Point3::new(v, 0.0, 0.0), Point3::new(-v, 0.0, 0.0)]
                }
            }
        }
    }
}

/// Options for [`PerturbedIntersection::analyze`].
#[derive(Debug, Clone, Default)]
pub struct AnalyzeOptions {
    /// Zero-curve tracer settings (empty seed list = automatic placement).
    pub trace: TraceOptions,
    /// Ponderomotive prefactor used for saddle heights and valley samples.
    pub scale: PseudopotentialScale,
}

/// A saddle point of the ponderomotive potential.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Saddle {
    pub position: Point3,
    /// Pseudopotential at the saddle (scaled by the chosen prefactor).
    pub height: f64,
}

/// A low-|E| valley of the ponderomotive landscape, sampled from one
/// zero-field region over a saddle into another.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValleyPath {
    pub points: Vec<Point3>,
    /// Pseudopotential at each sample (same indexing as `points`).
    pub pseudopotential: Vec<f64>,
}

/// Saddles, valleys and the controlling barrier height of a landscape.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BarrierAnalysis {
    /// Height of the lowest pass an ion must cross between zero-field
    /// regions (0 when the zero set is connected).
    pub barrier_height: f64,
    pub saddles: Vec<Saddle>,
    pub valley_paths: Vec<ValleyPath>,
}

/// Everything [`PerturbedIntersection::analyze`] reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZeroLocusReport {
    pub topology: Topology,
    /// Traced zero-field curves (|E| below the tracer tolerance throughout).
    pub polylines: Vec<Polyline>,
    /// Points where zero curves meet or pinch (closed-form positions).
    pub junction_points: Vec<Point3>,
    /// Isolated zeros with a full-rank field gradient.
    pub quadrupole_zeros: Vec<Point3>,
    pub saddles: Vec<Saddle>,
    pub valley_paths: Vec<ValleyPath>,
    /// `None` when the landscape class has no barrier structure to report.
    pub barrier_height: Option<f64>,
}

// ---------------------------------------------------------------------------
// Zero-curve tracing
// ---------------------------------------------------------------------------

/// Settings for [`trace_zero_lines`].
#[derive(Debug, Clone)]
pub struct TraceOptions {
    /// Arc-length step between polyline points.
    pub step: f64,
    /// Tracing box: curves are followed while `|xᵢ| ≤ half_width`.
    pub half_width: f64,
    /// Maximum steps per branch direction.
    pub max_steps: usize,
    /// Absolute |E| convergence threshold for the Newton corrector;
    /// `None` picks `1e-11 ×` the field magnitude scale at `half_width`.
    pub field_tol: Option<f64>,
    /// Starting guesses; each is pulled onto the zero set before tracing.
    /// Empty = a generic pattern of axis and ring points.
    pub seeds: Vec<Point3>,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            step: 0.01,
            half_width: 1.5,
            max_steps: 20_000,
            field_tol: None,
            seeds: Vec::new(),
        }
    }
}

/// A traced zero-field curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<Point3>,
    /// True when the curve closed back onto its starting point.
    pub closed: bool,
}

/// Output of [`trace_zero_lines`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TraceResult {
    pub polylines: Vec<Polyline>,
    /// Zeros whose field gradient has full rank (no curve through them).
    pub isolated_zeros: Vec<Point3>,
    /// Points where several zero curves meet (rank-deficient gradient).
    pub junctions: Vec<Point3>,
}

/// Trace the zero-field curves of a multipole field.
///
/// Each seed is Newton-corrected onto the zero set (minimum-norm steps, so
/// the correction never slides along a curve), then the curve through it is
/// followed in both directions by a tangent predictor / Newton corrector
/// with turn-limited step control. Seeds landing on an isolated zero are
/// reported separately; seeds landing where the field gradient is
/// rank-deficient trigger a direction enumeration that starts one branch
/// per zero direction found. Duplicate coverage is merged away and
/// junctions are located by refining local minima of the second singular
/// value of the field gradient along each curve.
pub fn trace_zero_lines(field: &MultipoleField, options: &TraceOptions) -> Result<TraceResult> {
    if !(options.step > 0.0 && options.half_width > 0.0 && options.step < options.half_width) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < step < half_width, got step {} and half-width {}",
            options.step, options.half_width
        )));
    }
    if options.max_steps < 10 {
        return Err(Error::InvalidArgument(
            "max_steps must be at least 10".into(),
        ));
    }
    let e_scale = field_magnitude_scale(field, options.half_width);
    if e_scale <= 0.0 {
        return Err(Error::InvalidField(
            "cannot trace an identically zero field".into(),
        ));
    }
    let tol = options.field_tol.unwrap_or(1e-11 * e_scale);
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "field tolerance must be positive, got {tol}"
        )));
    }
    let jac_scale = jacobian_magnitude_scale(field, options.half_width);

    let seeds = if options.seeds.is_empty() {
        generic_seeds(options.half_width)
    } else {
        options.seeds.clone()
    };

    let mut result = TraceResult::default();
    for seed in &seeds {
        let Some(zero) = project_to_zero(field, seed, tol) else {
            continue;
        };
        if zero.amax() > options.half_width {
            continue;
        }
        let (sv, vecs) = jacobian_singular_system(field, &zero);
        if sv[0] <= 1e-7 * jac_scale {
            // Rank-deficient point: several curves may pass through here.
            let branches = enumerate_branches(field, &zero, options, tol);
            if branches.len() >= 3 {
                push_unique_point(&mut result.junctions, &zero, 2.0 * options.step);
            } else if branches.is_empty() {
                push_unique_point(&mut result.isolated_zeros, &zero, options.step);
            }
            for (start, dir) in branches {
                let branch = trace_branch(field, &start, &dir, options, tol);
                push_polyline(&mut result.polylines, branch, options.step);
            }
            continue;
        }
        if sv[2] > 1e-5 * sv[0] {
            push_unique_point(&mut result.isolated_zeros, &zero, options.step);
            continue;
        }
        let tangent = vecs[2];
        let forward = trace_branch(field, &zero, &tangent, options, tol);
        if forward.closed {
            push_polyline(&mut result.polylines, forward, options.step);
            continue;
        }
        let backward = trace_branch(field, &zero, &(-tangent), options, tol);
        let mut points: Vec<Point3> = backward.points.iter().skip(1).rev().cloned().collect();
        points.extend(forward.points.iter().cloned());
        push_polyline(
            &mut result.polylines,
            Polyline {
                points,
                closed: false,
            },
            options.step,
        );
    }

    for j in scan_polyline_junctions(field, &result.polylines, tol, jac_scale) {
        push_unique_point(&mut result.junctions, &j, 2.0 * options.step);
    }
    Ok(result)
}

/// Pull a (possibly distant) starting guess onto the nearest part of the
/// zero set: first descend `|E|²` with exact line minimization of the
/// linearized residual — the descent flow respects basins, where a raw
/// Newton flow on a homogeneous field would drift to the origin — then
/// polish with local Newton steps.
fn project_to_zero(field: &MultipoleField, start: &Point3, tol: f64) -> Option<Point3> {
    let mut p = *start;
    for _ in 0..150 {
        let e = field.field(&p);
        if e.norm() <= tol {
            return Some(p);
        }
        let j = field.jacobian(&p);
        let g = j.transpose() * e;
        let w = j * g;
        let denom = w.norm_squared();
        if denom <= f64::MIN_POSITIVE {
            break;
        }
        let mut t = e.dot(&w) / denom;
        let mut accepted = false;
        for _ in 0..40 {
            let q = p - g * t;
            if field.field(&q).norm() < e.norm() {
                p = q;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    newton_zero(field, &p, tol, 60)
}

/// Newton iteration onto `E = 0` with minimum-norm (pseudo-inverse) steps
/// and backtracking damping. Local: converges to the zero-set point near
/// the start. Returns the converged point or `None`.
fn newton_zero(field: &MultipoleField, start: &Point3, tol: f64, max_iter: usize) -> Option<Point3> {
    let mut p = *start;
    let mut e = field.field(&p);
    for _ in 0..max_iter {
        if e.norm() <= tol {
            return Some(p);
        }
        let j = field.jacobian(&p);
        let svd = j.svd(true, true);
        let smax = svd.singular_values.max();
        if smax <= f64::MIN_POSITIVE {
            return None;
        }
        let Ok(step) = svd.solve(&(-e), 1e-12 * smax) else {
            return None;
        };
        let mut accepted = false;
        let mut damping = 1.0;
        for _ in 0..40 {
            let q = p + step * damping;
            let eq = field.field(&q);
            if eq.norm() < e.norm() {
                p = q;
                e = eq;
                accepted = true;
                break;
            }
            damping *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (e.norm() <= tol).then_some(p)
}

/// Singular values (descending) and matching right singular vectors of the
/// field Jacobian at `p`. The last vector spans the curve tangent on a
/// regular zero-curve point.
fn jacobian_singular_system(field: &MultipoleField, p: &Point3) -> ([f64; 3], [Vector3<f64>; 3]) {
    let svd = field.jacobian(p).svd(true, true);
    let v_t = svd.v_t.expect("requested");
    let mut pairs: Vec<(f64, Vector3<f64>)> = (0..3)
        .map(|i| (svd.singular_values[i], v_t.row(i).transpose()))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    (
        [pairs[0].0, pairs[1].0, pairs[2].0],
        [pairs[0].1, pairs[1].1, pairs[2].1],
    )
}

/// Follow one zero curve from `start` in direction `dir`.
fn trace_branch(
    field: &MultipoleField,
    start: &Point3,
    dir: &Vector3<f64>,
    options: &TraceOptions,
    tol: f64,
) -> Polyline {
    let mut points = vec![*start];
    let mut p = *start;
    let mut t = dir.normalize();
    let mut closed = false;
    'outer: for _ in 0..options.max_steps {
        let mut h = options.step;
        let mut next: Option<(Point3, Vector3<f64>)> = None;
        // Shrink the step until the turn angle stays moderate; this keeps
        // the corrector from hopping to a different curve near crossings.
        for _ in 0..7 {
            let Some(q) = newton_zero(field, &(p + t * h), tol, 50) else {
                h *= 0.5;
                continue;
            };
            if (q - p).norm() < 0.05 * options.step {
                break 'outer;
            }
            let (_, vecs) = jacobian_singular_system(field, &q);
            let mut tq = vecs[2];
            if tq.dot(&t) < 0.0 {
                tq = -tq;
            }
            if tq.dot(&t) >= std::f64::consts::FRAC_1_SQRT_2 {
                next = Some((q, tq));
                break;
            }
            h *= 0.5;
        }
        let Some((q, tq)) = next else {
            break;
        };
        if q.amax() > options.half_width {
            break;
        }
        if points.len() >= 6 && (q - points[0]).norm() < 0.6 * options.step {
            closed = true;
            break;
        }
        points.push(q);
        p = q;
        t = tq;
    }
    Polyline { points, closed }
}

/// At a rank-deficient zero, probe a sphere of directions and cluster the
/// zero-curve points found; returns one (start point, outward tangent)
/// pair per branch direction.
fn enumerate_branches(
    field: &MultipoleField,
    center: &Point3,
    options: &TraceOptions,
    tol: f64,
) -> Vec<(Point3, Vector3<f64>)> {
    let r_probe = (3.0 * options.step).max(1e-3 * options.half_width);
    let mut clusters: Vec<(Vector3<f64>, Point3)> = Vec::new();
    for u in fibonacci_sphere(120) {
        let Some(q) = project_to_zero(field, &(center + u * r_probe), tol) else {
            continue;
        };
        let d = q - center;
        let dist = d.norm();
        if !(0.3 * r_probe..=3.0 * r_probe).contains(&dist) {
            continue;
        }
        let v = d / dist;
        if !clusters
            .iter()
            .any(|(rep, _)| rep.dot(&v) > 25f64.to_radians().cos())
        {
            clusters.push((v, q));
        }
    }
    clusters
        .into_iter()
        .map(|(v, q)| {
            let (_, vecs) = jacobian_singular_system(field, &q);
            let mut tq = vecs[2];
            if tq.dot(&v) < 0.0 {
                tq = -tq;
            }
            (q, tq)
        })
        .collect()
}

/// Locate junctions as refined local minima of the second singular value
/// of the field gradient along traced curves: both leading singular values
/// shrink linearly on the approach to a curve crossing, so a deep local
/// minimum of σ₂ flags one.
fn scan_polyline_junctions(
    field: &MultipoleField,
    polylines: &[Polyline],
    tol: f64,
    jac_scale: f64,
) -> Vec<Point3> {
    let mut junctions = Vec::new();
    for line in polylines {
        let n = line.points.len();
        if n < 5 {
            continue;
        }
        let sv: Vec<[f64; 3]> = line
            .points
            .iter()
            .map(|p| jacobian_singular_system(field, p).0)
            .collect();
        let mut s1: Vec<f64> = sv.iter().map(|s| s[0]).collect();
        s1.sort_by(f64::total_cmp);
        let s1_med = s1[n / 2].max(1e-300);
        for i in 0..n {
            let here = sv[i][1];
            let left_ok = i == 0 || here <= sv[i - 1][1];
            let right_ok = i == n - 1 || here <= sv[i + 1][1];
            if !(left_ok && right_ok && here < 0.05 * s1_med) {
                continue;
            }
            let a = line.points[i.saturating_sub(1)];
            let b = line.points[(i + 1).min(n - 1)];
            if let Some(p) = refine_sigma2_minimum(field, &a, &b, tol) {
                let (s_ref, _) = jacobian_singular_system(field, &p);
                if s_ref[1] < 1e-4 * s1_med.max(1e-9 * jac_scale) {
                    junctions.push(p);
                }
            }
        }
    }
    junctions
}

/// Golden-section minimization of σ₂ along the zero curve between two
/// nearby curve points (each evaluation re-corrects onto the curve).
fn refine_sigma2_minimum(
    field: &MultipoleField,
    a: &Point3,
    b: &Point3,
    tol: f64,
) -> Option<Point3> {
    let eval = |s: f64| -> Option<(f64, Point3)> {
        let guess = a + (b - a) * s;
        let p = newton_zero(field, &guess, tol, 50)?;
        Some((jacobian_singular_system(field, &p).0[1], p))
    };
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    for _ in 0..48 {
        if f1.0 <= f2.0 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = eval(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = eval(x2)?;
        }
    }
    Some(if f1.0 <= f2.0 { f1.1 } else { f2.1 })
}

/// Keep a polyline only if it is long enough and not already covered.
fn push_polyline(kept: &mut Vec<Polyline>, candidate: Polyline, step: f64) {
    if candidate.points.len() < 3 {
        return;
    }
    let threshold = 0.75 * step;
    let covered = |p: &Point3| {
        kept.iter().any(|line| {
            line.points
                .iter()
                .any(|q| (p - q).norm() < threshold)
        })
    };
    let n_covered = candidate.points.iter().filter(|p| covered(p)).count();
    if (n_covered as f64) < 0.9 * candidate.points.len() as f64 {
        kept.push(candidate);
    }
}

fn push_unique_point(kept: &mut Vec<Point3>, p: &Point3, min_dist: f64) {
    if !kept.iter().any(|q| (p - q).norm() < min_dist) {
        kept.push(*p);
    }
}

/// Magnitude scale of |E| within a box of the given half-width.
fn field_magnitude_scale(field: &MultipoleField, radius: f64) -> f64 {
    let (d, q, h, o) = block_norms(field);
    d + q * radius + 0.5 * h * radius * radius + o * radius.powi(3) / 6.0
}

/// Magnitude scale of the field Jacobian within a box.
fn jacobian_magnitude_scale(field: &MultipoleField, radius: f64) -> f64 {
    let (_, q, h, o) = block_norms(field);
    q + h * radius + 0.5 * o * radius * radius
}

/// Frobenius norms of the four expansion blocks.
fn block_norms(field: &MultipoleField) -> (f64, f64, f64, f64) {
    let d = field.dipole.norm();
    let q = field.quadrupole.norm();
    let mut h2 = 0.0;
    let mut o2 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                h2 += field.hexapole[i][j][k].powi(2);
                for l in 0..3 {
                    o2 += field.octupole[i][j][k][l].powi(2);
                }
            }
        }
    }
    (d, q, h2.sqrt(), o2.sqrt())
}

/// Combined magnitude of all blocks (for field-to-field comparisons).
fn block_scale(field: &MultipoleField) -> f64 {
    let (d, q, h, o) = block_norms(field);
    d + q + h + o
}

/// Evenly distributed unit directions (golden-angle spiral).
fn fibonacci_sphere(n: usize) -> Vec<Vector3<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vector3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Generic seed pattern used when the caller supplies none: the origin,
/// points on each axis, and rings in the three coordinate planes.
fn generic_seeds(half_width: f64) -> Vec<Point3> {
    let mut seeds = vec![Point3::zeros()];
    for &s in &[0.5, -0.5] {
        seeds.push(Point3::new(s * half_width, 0.0, 0.0));
        seeds.push(Point3::new(0.0, s * half_width, 0.0));
        seeds.push(Point3::new(0.0, 0.0, s * half_width));
    }
    let r = 0.6 * half_width;
    for k in 0..12 {
        let a = 2.0 * std::f64::consts::PI * k as f64 / 12.0;
        seeds.push(Point3::new(r * a.cos(), r * a.sin(), 0.0));
    }
    for k in 0..8 {
        let a = 2.0 * std::f64::consts::PI * k as f64 / 8.0;
        seeds.push(Point3::new(r * a.cos(), 0.0, r * a.sin()));
        seeds.push(Point3::new(0.0, r * a.cos(), r * a.sin()));
    }
    seeds
}

// ---------------------------------------------------------------------------
// Pseudopotential gradient
// ---------------------------------------------------------------------------

/// Gradient of the ponderomotive potential `U = prefactor·|E|²`:
/// `∇U = 2·prefactor·Jᵀ E` (J symmetric for a Maxwell-valid field).
pub fn pseudopotential_gradient(
    field: &MultipoleField,
    r: &Point3,
    scale: &PseudopotentialScale,
) -> Vector3<f64> {
    let e = field.field(r);
    field.jacobian(r).transpose() * e * (2.0 * scale.prefactor)
}

// ---------------------------------------------------------------------------
// Grid sampling and symmetry diagnostics
// ---------------------------------------------------------------------------

/// Pseudopotential samples on a cubic grid centred on the origin.
///
/// Values are stored x-fastest, then y, then z:
/// `values[ix + n·(iy + n·iz)]`, with axis coordinates
/// `-half_width + i·(2·half_width/(n-1))`.
#[derive(Debug, Clone)]
pub struct GridSampling {
    pub half_width: f64,
    /// Points per axis (≥ 2).
    pub resolution: usize,
    pub values: Vec<f64>,
}

impl GridSampling {
    /// Validate sizes and wrap the raw samples.
    pub fn new(half_width: f64, resolution: usize, values: Vec<f64>) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "grid half-width must be positive and finite, got {half_width}"
            )));
        }
        if resolution < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 points per axis, got {resolution}"
            )));
        }
        if values.len() != resolution.pow(3) {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples for resolution {}, got {}",
                resolution.pow(3),
                resolution,
                values.len()
            )));
        }
        Ok(Self {
            half_width,
            resolution,
            values,
        })
    }

    /// Grid spacing along each axis.
    pub fn step(&self) -> f64 {
        2.0 * self.half_width / (self.resolution - 1) as f64
    }

    /// Coordinate of axis index `i`.
    pub fn axis_coordinate(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.step()
    }

    /// Flat index of grid point `(ix, iy, iz)`.
    pub fn index_of(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.resolution * (iy + self.resolution * iz)
    }

    /// Value at grid point `(ix, iy, iz)`.
    pub fn value_at(&self, ix: usize, iy: usize, iz: usize) -> f64 {
        self.values[self.index_of(ix, iy, iz)]
    }

    /// Position of the grid point behind a flat index.
    pub fn point_of_index(&self, idx: usize) -> Point3 {
        let n = self.resolution;
        let ix = idx % n;
        let iy = (idx / n) % n;
        let iz = idx / (n * n);
        Point3::new(
            self.axis_coordinate(ix),
            self.axis_coordinate(iy),
            self.axis_coordinate(iz),
        )
    }
}

/// Sample `U = prefactor·|E|²` on a cubic grid (parallel over points).
pub fn sample_pseudopotential(
    field: &MultipoleField,
    scale: &PseudopotentialScale,
    half_width: f64,
    resolution: usize,
) -> Result<GridSampling> {
    scale.validate()?;
    let probe = GridSampling::new(half_width, resolution, vec![0.0; resolution.pow(3)])?;
    let values: Vec<f64> = (0..resolution.pow(3))
        .into_par_iter()
        .map(|idx| field.pseudopotential(&probe.point_of_index(idx), scale))
        .collect();
    GridSampling::new(half_width, resolution, values)
}

/// Reflection and in-plane-field diagnostics of a landscape. All entries
/// are relative residuals (0 = exact symmetry).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymmetryReport {
    /// `max |U(x,…) − U(−x,…)| / max U` over the sample grid.
    pub mirror_x: f64,
    /// Same for `y → −y`.
    pub mirror_y: f64,
    /// Same for `z → −z` (the pseudopotential of a crossing field is even
    /// in z even though its potential is odd).
    pub z_parity: f64,
    /// Largest in-plane fraction `|E_xy| / |E|` found at `z = 0` samples:
    /// a canonical crossing field is purely axial in its symmetry plane.
    pub plane_axiality: f64,
}

/// Measure the mirror symmetries of `U` and the axiality of the field in
/// the `z = 0` plane on a cubic sample grid.
pub fn symmetry_check(
    field: &MultipoleField,
    scale: &PseudopotentialScale,
    half_width: f64,
    resolution: usize,
) -> Result<SymmetryReport> {
    scale.validate()?;
    let grid = GridSampling::new(half_width, resolution, vec![0.0; resolution.pow(3)])?;
    let n = resolution;
    let mut u_max = 0.0f64;
    let mut dx = 0.0f64;
    let mut dy = 0.0f64;
    let mut dz = 0.0f64;
    for iz in 0..n {
        for iy in 0..n {
            for ix in 0..n {
                let p = Point3::new(
                    grid.axis_coordinate(ix),
                    grid.axis_coordinate(iy),
                    grid.axis_coordinate(iz),
                );
                let u = field.pseudopotential(&p, scale);
                u_max = u_max.max(u.abs());
                let mirror = |q: Point3| field.pseudopotential(&q, scale);
                dx = dx.max((u - mirror(Point3::new(-p.x, p.y, p.z))).abs());
                dy = dy.max((u - mirror(Point3::new(p.x, -p.y, p.z))).abs());
                dz = dz.max((u - mirror(Point3::new(p.x, p.y, -p.z))).abs());
            }
        }
    }
    let e_scale = field_magnitude_scale(field, half_width);
    let mut axiality = 0.0f64;
    for iy in 0..n {
        for ix in 0..n {
            let p = Point3::new(grid.axis_coordinate(ix), grid.axis_coordinate(iy), 0.0);
            let e = field.field(&p);
            let norm = e.norm();
            if norm > 1e-13 * e_scale {
                axiality = axiality.max(e.xy().norm() / norm);
            }
        }
    }
    if u_max <= 0.0 {
        return Err(Error::InvalidField(
            "pseudopotential vanishes on the whole sample grid".into(),
        ));
    }
    Ok(SymmetryReport {
        mirror_x: dx / u_max,
        mirror_y: dy / u_max,
        z_parity: dz / u_max,
        plane_axiality: axiality,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn dist_to_line(p: &Point3, dir: &Vector3<f64>) -> f64 {
        let d = dir.normalize();
        (p - d * p.dot(&d)).norm()
    }

    #[test]
    fn classification_covers_all_topologies() {
        let case = |ah, ax, th| PerturbedIntersection::new(ah, ax, th).unwrap().classify();
        assert_eq!(case(0.0, 0.13, PI / 6.0), Topology::Ideal);
        assert_eq!(case(-1e-3, 0.13, PI / 6.0), Topology::DoubleJunction);
        assert_eq!(case(1e-3, 0.13, PI / 6.0), Topology::Disjoint);
        assert_eq!(case(0.0, 1.0, PI / 4.0), Topology::DegenerateRightAngle);
        assert_eq!(case(-1e-3, 0.13, PI / 4.0), Topology::DegeneratePerturbed);
        // Only the ratio sign matters, not the overall field sign.
        assert_eq!(case(-1e-3, -0.13, PI / 6.0), Topology::Disjoint);
        assert_eq!(case(1e-3, -0.13, PI / 6.0), Topology::DoubleJunction);
    }

    #[test]
    fn construction_rejects_bad_parameters() {
        assert!(PerturbedIntersection::new(0.1, 0.0, PI / 6.0).is_err());
        assert!(PerturbedIntersection::new(f64::NAN, 1.0, PI / 6.0).is_err());
        assert!(PerturbedIntersection::new(0.1, 1.0, 0.0).is_err());
        assert!(PerturbedIntersection::new(0.1, 1.0, PI / 3.0).is_err());
    }

    #[test]
    fn field_round_trips_through_parameter_recovery() {
        let original = PerturbedIntersection::new(-0.02, 0.37, 0.29).unwrap();
        let recovered = PerturbedIntersection::from_field(&original.to_field()).unwrap();
        assert_relative_eq!(recovered.alpha_h(), -0.02, max_relative = 1e-12);
        assert_relative_eq!(recovered.alpha_x(), 0.37, max_relative = 1e-12);
        assert_relative_eq!(recovered.theta(), 0.29, max_relative = 1e-12);
    }

    #[test]
    fn parameter_recovery_rejects_foreign_fields() {
        use nalgebra::Matrix3;
        let base = PerturbedIntersection::new(-0.02, 0.37, 0.29)
            .unwrap()
            .to_field();
        let mut with_quad = base.clone();
        with_quad.quadrupole = Matrix3::from_diagonal(&Vector3::new(0.1, 0.1, -0.2));
        assert!(PerturbedIntersection::from_field(&with_quad).is_err());

        let mut tilted = base;
        tilted.dipole.x = 0.05;
        assert!(PerturbedIntersection::from_field(&tilted).is_err());

        // Pure octupole: no crossing hexapole content at all.
        assert!(PerturbedIntersection::from_field(&crate::intersection::theta_o()).is_err());
    }

    #[test]
    fn tracer_follows_zero_line_from_offset_seed() {
        let field = theta_x(PI / 6.0, 1.0).unwrap();
        let options = TraceOptions {
            seeds: vec![Point3::new(1.0, 0.5, 0.1)],
            ..TraceOptions::default()
        };
        let traced = trace_zero_lines(&field, &options).unwrap();
        assert_eq!(traced.polylines.len(), 1);
        let line = &traced.polylines[0];
        assert!(line.points.len() > 100);
        let dir = Vector3::new(1.0, (PI / 6.0).tan(), 0.0);
        let e_scale = 1.0; // α_X
        for p in &line.points {
            assert!(field.field(p).norm() < 1e-9 * e_scale);
            assert!(dist_to_line(p, &dir) < 1e-5, "point off the zero line: {p:?}");
        }
        let xs: Vec<f64> = line.points.iter().map(|p| p.x).collect();
        let (min, max) = xs.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
        assert!(min < -0.9 * options.half_width && max > 0.9 * options.half_width);
        // The line runs straight through the crossing, which the σ₂ scan
        // must flag as a junction at the origin.
        assert_eq!(traced.junctions.len(), 1);
        assert!(traced.junctions[0].norm() < 1e-6);
    }

    #[test]
    fn tracer_enumerates_branches_from_a_junction_seed() {
        let field = theta_x(PI / 6.0, 1.0).unwrap();
        let options = TraceOptions {
            seeds: vec![Point3::zeros()],
            ..TraceOptions::default()
        };
        let traced = trace_zero_lines(&field, &options).unwrap();
        assert_eq!(traced.polylines.len(), 4, "four half-branches");
        assert!(!traced.junctions.is_empty());
        assert!(traced.junctions[0].norm() < 1e-6);
        let t = (PI / 6.0).tan();
        let dirs = [Vector3::new(1.0, t, 0.0), Vector3::new(1.0, -t, 0.0)];
        for line in &traced.polylines {
            for p in &line.points {
                let d = dirs
                    .iter()
                    .map(|u| dist_to_line(p, u))
                    .fold(f64::MAX, f64::min);
                assert!(d < 1e-5, "branch point off both lines: {p:?}");
            }
        }
    }

    #[test]
    fn disjoint_report_matches_closed_forms() {
        let design = PerturbedIntersection::new(1e-3, 0.13, 15f64.to_radians()).unwrap();
        let report = design.analyze(&AnalyzeOptions::default()).unwrap();
        assert_eq!(report.topology, Topology::Disjoint);
        assert_eq!(report.polylines.len(), 2);
        assert!(report.quadrupole_zeros.is_empty());
        assert!(report.junction_points.is_empty());

        // Branch vertices at y = ±secθ·√(ratio/3).
        let y0 = (design.ratio() / 3.0).sqrt() / 15f64.to_radians().cos();
        assert_relative_eq!(y0, 0.052_423_3, max_relative = 1e-5);
        for line in &report.polylines {
            let closest = line
                .points
                .iter()
                .min_by(|a, b| a.norm().total_cmp(&b.norm()))
                .unwrap();
            assert!(closest.x.abs() < 1e-4);
            assert_relative_eq!(closest.y.abs(), y0, max_relative = 1e-3);
        }

        // Barrier at the origin of height α_H².
        assert_relative_eq!(report.barrier_height.unwrap(), 1e-6, max_relative = 1e-12);
        assert_eq!(report.saddles.len(), 1);
        assert!(report.saddles[0].position.norm() < 1e-12);
        assert_eq!(report.valley_paths.len(), 1);
        let valley = &report.valley_paths[0];
        let ends = [valley.points[0], *valley.points.last().unwrap()];
        for end in &ends {
            assert!(end.x == 0.0 && end.z == 0.0);
            assert_relative_eq!(end.y.abs(), y0, max_relative = 1e-12);
        }
        assert!((ends[0].y > 0.0) != (ends[1].y > 0.0), "valley spans both vertices");
        let u_max = valley.pseudopotential.iter().cloned().fold(0.0, f64::max);
        assert_relative_eq!(u_max, 1e-6, max_relative = 1e-9);
    }

    #[test]
    fn double_junction_report_matches_closed_forms() {
        let theta = PI / 6.0;
        let design = PerturbedIntersection::new(-0.1, 1.0, theta).unwrap();
        let report = design.analyze(&AnalyzeOptions::default()).unwrap();
        assert_eq!(report.topology, Topology::DoubleJunction);
        assert_eq!(report.polylines.len(), 2, "two hyperbola branches");

        // Isolated quadrupole zeros at z = ±√(|ratio|/(3cos2θ)).
        let z0 = (0.1f64 / (3.0 * (2.0 * theta).cos())).sqrt();
        assert_relative_eq!(z0, 0.258_198_889, max_relative = 1e-8);
        assert_eq!(report.quadrupole_zeros.len(), 2);
        for z in &report.quadrupole_zeros {
            assert!(z.x.abs() < 1e-9 && z.y.abs() < 1e-9);
            assert_relative_eq!(z.z.abs(), z0, max_relative = 1e-6);
        }

        // Junction vertices at x = ±cscθ·√(|ratio|/3).
        let xj = (0.1f64 / 3.0).sqrt() / theta.sin();
        assert_relative_eq!(xj, 0.365_148_37, max_relative = 1e-7);
        assert_eq!(report.junction_points.len(), 2);
        for j in &report.junction_points {
            assert_relative_eq!(j.x.abs(), xj, max_relative = 1e-9);
        }

        // Four saddles of height α_H²·tan²θ at the derived positions.
        let height = 0.01 * theta.tan().powi(2);
        assert_relative_eq!(height, 0.003_333_333_333, max_relative = 1e-9);
        assert_relative_eq!(report.barrier_height.unwrap(), height, max_relative = 1e-12);
        assert_eq!(report.saddles.len(), 4);
        let field = design.to_field();
        let scale = PseudopotentialScale::default();
        for s in &report.saddles {
            assert_relative_eq!(s.position.x.abs(), 0.210_818_51, max_relative = 1e-6);
            assert!(s.position.y.abs() < 1e-12);
            assert_relative_eq!(s.position.z.abs(), 0.149_071_198, max_relative = 1e-6);
            assert_relative_eq!(
                field.pseudopotential(&s.position, &scale),
                height,
                max_relative = 1e-12
            );
            let g = pseudopotential_gradient(&field, &s.position, &scale);
            assert!(g.norm() < 1e-13, "not a critical point: |∇U| = {}", g.norm());
        }

        // Valleys run zero → saddle → zero and never exceed the barrier.
        assert_eq!(report.valley_paths.len(), 4);
        let anchors: Vec<Point3> = vec![
            Point3::new(xj, 0.0, 0.0),
            Point3::new(-xj, 0.0, 0.0),
            Point3::new(0.0, 0.0, z0),
            Point3::new(0.0, 0.0, -z0),
        ];
        for valley in &report.valley_paths {
            for end in [valley.points[0], *valley.points.last().unwrap()] {
                let best = anchors.iter().map(|a| (end - a).norm()).fold(f64::MAX, f64::min);
                assert!(best < 1e-12, "valley endpoint {end:?} not at a zero");
            }
            // Every valley point sits on the zero set of the in-plane field
            // component and tops out exactly at the saddle height.
            for (p, u) in valley.points.iter().zip(&valley.pseudopotential) {
                assert_relative_eq!(
                    field.pseudopotential(p, &scale),
                    *u,
                    epsilon = 1e-15,
                    max_relative = 1e-12
                );
            }
            let u_max = valley.pseudopotential.iter().cloned().fold(0.0, f64::max);
            assert!(u_max <= height * (1.0 + 1e-12));
            assert_relative_eq!(u_max, height, max_relative = 1e-12);
        }
    }

    /// Independent check of the saddle height: maximize the closed-form
    /// valley profile U(φ) = α_H²·w_x²/|w|² over ray directions by golden
    /// section and compare with α_H²tan²θ.
    #[test]
    fn golden_section_on_valley_profile_confirms_barrier() {
        let (alpha_h, alpha_x, theta): (f64, f64, f64) = (-0.1, 1.0, PI / 6.0);
        let (s2, c2t) = (theta.sin().powi(2), (2.0 * theta).cos());
        let profile = |phi: f64| {
            let (c, s) = (phi.cos(), phi.sin());
            let wx = 3.0 * alpha_x * 2.0 * c * s * s2;
            let wz = 3.0 * alpha_x * (s * s * c2t + c * c * s2);
            alpha_h * alpha_h * wx * wx / (wx * wx + wz * wz)
        };
        let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
        let (mut lo, mut hi) = (1e-6, PI / 2.0 - 1e-6);
        for _ in 0..200 {
            let x1 = hi - inv_phi * (hi - lo);
            let x2 = lo + inv_phi * (hi - lo);
            if profile(x1) >= profile(x2) {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        let numeric = profile(0.5 * (lo + hi));
        assert_relative_eq!(numeric, 0.01 * theta.tan().powi(2), max_relative = 1e-6);
    }

    #[test]
    fn ideal_analysis_reports_connected_crossing() {
        let design = PerturbedIntersection::new(0.0, 1.0, PI / 6.0).unwrap();
        let report = design.analyze(&AnalyzeOptions::default()).unwrap();
        assert_eq!(report.topology, Topology::Ideal);
        assert_eq!(report.polylines.len(), 2);
        assert_eq!(report.barrier_height, Some(0.0));
        assert!(report.saddles.is_empty());
        assert_eq!(report.junction_points, vec![Point3::zeros()]);
    }

    #[test]
    fn grid_sampling_layout_and_quartic_scaling() {
        let field = theta_x(PI / 6.0, 1.0).unwrap();
        let scale = PseudopotentialScale::default();
        let small = sample_pseudopotential(&field, &scale, 0.5, 11).unwrap();
        let large = sample_pseudopotential(&field, &scale, 1.0, 11).unwrap();
        // Index layout: x fastest.
        assert_eq!(
            small.point_of_index(small.index_of(3, 7, 2)),
            Point3::new(
                small.axis_coordinate(3),
                small.axis_coordinate(7),
                small.axis_coordinate(2)
            )
        );
        // Hexapole pseudopotential is quartic: U(2r) = 16·U(r).
        for idx in 0..small.values.len() {
            if small.values[idx] > 1e-12 {
                assert_relative_eq!(
                    large.values[idx] / small.values[idx],
                    16.0,
                    max_relative = 1e-9
                );
            }
        }
    }

    #[test]
    fn symmetry_report_is_clean_for_a_canonical_crossing() {
        let field = PerturbedIntersection::new(-1e-3, 0.13, PI / 6.0)
            .unwrap()
            .to_field();
        let report =
            symmetry_check(&field, &PseudopotentialScale::default(), 1.0, 15).unwrap();
        assert!(report.mirror_x < 1e-12);
        assert!(report.mirror_y < 1e-12);
        assert!(report.z_parity < 1e-12);
        assert!(report.plane_axiality < 1e-12);
    }

    proptest! {
        /// Closed-form zero positions really carry zero field, and the
        /// double-junction saddle formula lands on a critical point of the
        /// correct height, across the admissible parameter ranges.
        #[test]
        fn closed_forms_hold_across_parameters(
            theta in 0.15f64..0.7f64,
            alpha_x in prop::sample::select(vec![-1.7f64, -0.4, 0.21, 0.9, 1.3]),
            ratio_mag in 1e-4f64..0.2f64,
            ratio_sign in prop::bool::ANY,
        ) {
            let ratio = if ratio_sign { ratio_mag } else { -ratio_mag };
            let design = PerturbedIntersection::new(ratio * alpha_x, alpha_x, theta).unwrap();
            let field = design.to_field();
            let e_tol = 1e-12 * field_magnitude_scale(&field, 1.0);
            if ratio > 0.0 {
                prop_assert_eq!(design.classify(), Topology::Disjoint);
                let y0 = design.disjoint_vertex_y();
                prop_assert!(field.field(&Point3::new(0.0, y0, 0.0)).norm() < e_tol);
                prop_assert!(field.field(&Point3::new(0.0, -y0, 0.0)).norm() < e_tol);
            } else {
                prop_assert_eq!(design.classify(), Topology::DoubleJunction);
                let xj = design.junction_vertex_x();
                let z0 = design.quadrupole_zero_z();
                prop_assert!(field.field(&Point3::new(xj, 0.0, 0.0)).norm() < e_tol);
                prop_assert!(field.field(&Point3::new(0.0, 0.0, -z0)).norm() < e_tol);
                let analysis = design
                    .barrier_analysis(&PseudopotentialScale::default())
                    .unwrap()
                    .unwrap();
                let expected = (ratio * alpha_x * theta.tan()).powi(2);
                prop_assert!((analysis.barrier_height - expected).abs() <= 1e-12 * expected.max(1e-30));
                let scale = PseudopotentialScale::default();
                for s in &analysis.saddles {
                    let g = pseudopotential_gradient(&field, &s.position, &scale);
                    let g_scale = alpha_x * alpha_x; // |∇U| ~ α² near unit radius
                    prop_assert!(g.norm() < 1e-10 * g_scale.max(1e-12));
                }
                for v in &analysis.valley_paths {
                    let u_max = v.pseudopotential.iter().cloned().fold(0.0, f64::max);
                    prop_assert!((u_max - expected).abs() <= 1e-10 * expected.max(1e-30));
                    for end in [v.points[0], *v.points.last().unwrap()] {
                        prop_assert!(field.field(&end).norm() < 10.0 * e_tol);
                    }
                }
            }
        }
    }
}
