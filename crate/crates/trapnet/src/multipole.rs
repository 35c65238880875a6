//! Cartesian multipole expansion of an oscillating trap field.
//!
//! The rf field near an intersection point is expanded as
//!
//! ```text
//! E_i(r) = d_i + q_ij r_j + (1/2) h_ijk r_j r_k + (1/6) o_ijkl r_j r_k r_l
//! ```
//!
//! with `d` the homogeneous part, `q` the field gradient, `h` the second
//! derivative tensor and `o` the third. The tensors stored here are the
//! *field* expansion tensors (`q_ij = ∂_j E_i` at the origin, and so on);
//! the electrostatic potential with `E = -∇V` follows as
//!
//! ```text
//! V(r) = -( d·r + (1/2) q_ij r_i r_j + (1/6) h_ijk r_i r_j r_k
//!           + (1/24) o_ijkl r_i r_j r_k r_l )
//! ```
//!
//! Maxwell's equations in the quasistatic regime make every tensor fully
//! symmetric with vanishing partial traces, leaving 3/5/7/9 free parameters
//! at orders 1..=4. Lengths are in units of the electrode distance `d` and
//! potentials in units of the rf amplitude, so `q` carries `V0/d²`, `h`
//! carries `V0/d³`, etc.
//!
//! The time-averaged ponderomotive (pseudo)potential of an ion in the
//! oscillating field is `U(r) = prefactor · |E(r)|²`; see
//! [`PseudopotentialScale`] for the physical prefactor.

use crate::error::Error;
use crate::harmonic;
use crate::Result;
use nalgebra::{DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// Position vector, components in units of the electrode distance `d`.
pub type Point3 = Vector3<f64>;

/// Order-3 field expansion tensor `h_ijk`, dense storage.
pub type Rank3 = [[[f64; 3]; 3]; 3];
/// Order-4 field expansion tensor `o_ijkl`, dense storage.
pub type Rank4 = [[[[f64; 3]; 3]; 3]; 3];

/// Relative tolerance for the Maxwell validity checks.
pub const MAXWELL_REL_TOL: f64 = 1e-12;

/// Prefactor of the ponderomotive potential `U = prefactor · |E|²`.
///
/// Physically `prefactor = Q² / (4 M Ω²)` for charge `Q`, mass `M` and drive
/// frequency `Ω`; the default of 1 keeps landscape analysis in bare `|E|²`
/// units, which is all the topology work needs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PseudopotentialScale {
    /// Must be positive.
    pub prefactor: f64,
}

impl Default for PseudopotentialScale {
    fn default() -> Self {
        Self { prefactor: 1.0 }
    }
}

impl PseudopotentialScale {
    /// Physical prefactor `Q²/(4 M Ω²)` for a given charge-to-mass ratio and
    /// drive frequency (the mass cancels into `charge_to_mass` once).
    pub fn from_drive(charge_to_mass: f64, omega: f64) -> Result<Self> {
        if !(omega > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "drive frequency must be positive, got {omega}"
            )));
        }
        Ok(Self {
            prefactor: charge_to_mass * charge_to_mass / (4.0 * omega * omega),
        })
    }

    /// Validate the positivity invariant.
    pub fn validate(&self) -> Result<()> {
        if self.prefactor > 0.0 && self.prefactor.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "pseudopotential prefactor must be positive and finite, got {}",
                self.prefactor
            )))
        }
    }
}

/// Multipole expansion of the rf field about the origin, orders 1..=4.
///
/// All blocks are always stored; an absent order is simply zero. JSON
/// serialization omits zero blocks and accepts missing keys as zero:
/// `{"dipole":[..3], "quadrupole":[[..3];3], "hexapole":..., "octupole":...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "MultipoleFieldRepr", into = "MultipoleFieldRepr")]
pub struct MultipoleField {
    /// Homogeneous field component `d_i` (units `V0/d`).
    pub dipole: Vector3<f64>,
    /// Field gradient `q_ij = ∂_j E_i` (units `V0/d²`).
    pub quadrupole: Matrix3<f64>,
    /// Second derivative tensor `h_ijk` (units `V0/d³`).
    pub hexapole: Rank3,
    /// Third derivative tensor `o_ijkl` (units `V0/d⁴`).
    pub octupole: Rank4,
}

impl Default for MultipoleField {
    fn default() -> Self {
        Self::zero()
    }
}

impl MultipoleField {
    /// The identically-zero field.
    pub fn zero() -> Self {
        Self {
            dipole: Vector3::zeros(),
            quadrupole: Matrix3::zeros(),
            hexapole: [[[0.0; 3]; 3]; 3],
            octupole: [[[[0.0; 3]; 3]; 3]; 3],
        }
    }

    /// Pure homogeneous field.
    pub fn from_dipole(d: Vector3<f64>) -> Self {
        Self {
            dipole: d,
            ..Self::zero()
        }
    }

    /// Pure field gradient.
    pub fn from_quadrupole(q: Matrix3<f64>) -> Self {
        Self {
            quadrupole: q,
            ..Self::zero()
        }
    }

    /// Pure hexapole.
    pub fn from_hexapole(h: Rank3) -> Self {
        Self {
            hexapole: h,
            ..Self::zero()
        }
    }

    /// Pure octupole.
    pub fn from_octupole(o: Rank4) -> Self {
        Self {
            octupole: o,
            ..Self::zero()
        }
    }

    /// Electrostatic potential `V(r)` consistent with `E = -∇V`.
    pub fn potential(&self, r: &Point3) -> f64 {
        let mut v = self.dipole.dot(r);
        let qr = self.quadrupole * r;
        v += 0.5 * r.dot(&qr);
        let mut h3 = 0.0;
        let mut o4 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let rij = r[i] * r[j];
                for k in 0..3 {
                    h3 += self.hexapole[i][j][k] * rij * r[k];
                    for l in 0..3 {
                        o4 += self.octupole[i][j][k][l] * rij * r[k] * r[l];
                    }
                }
            }
        }
        v += h3 / 6.0 + o4 / 24.0;
        -v
    }

    /// Field amplitude vector `E(r)`.
    pub fn field(&self, r: &Point3) -> Vector3<f64> {
        let mut e = self.dipole + self.quadrupole * r;
        for i in 0..3 {
            let mut h2 = 0.0;
            let mut o3 = 0.0;
            for j in 0..3 {
                for k in 0..3 {
                    let rjk = r[j] * r[k];
                    h2 += self.hexapole[i][j][k] * rjk;
                    for l in 0..3 {
                        o3 += self.octupole[i][j][k][l] * rjk * r[l];
                    }
                }
            }
            e[i] += 0.5 * h2 + o3 / 6.0;
        }
        e
    }

    /// Ponderomotive potential `U(r) = prefactor · |E(r)|²`.
    ///
    /// Nonnegative everywhere; zero exactly where the field vanishes.
    pub fn pseudopotential(&self, r: &Point3, scale: &PseudopotentialScale) -> f64 {
        scale.prefactor * self.field(r).norm_squared()
    }

    /// Field Jacobian `J_ij = ∂E_i/∂r_j` at `r` (exact, not finite
    /// differences). Symmetric and traceless for a Maxwell-valid field.
    pub fn jacobian(&self, r: &Point3) -> Matrix3<f64> {
        let mut j = self.quadrupole;
        for i in 0..3 {
            for jj in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += self.hexapole[i][jj][k] * r[k];
                    for l in 0..3 {
                        acc += 0.5 * self.octupole[i][jj][k][l] * r[k] * r[l];
                    }
                }
                j[(i, jj)] += acc;
            }
        }
        j
    }

    /// Central finite-difference estimate of `∇²V` at `r` with step `h`.
    ///
    /// For a Maxwell-valid field this is zero up to discretization and
    /// rounding; a pure trace (e.g. `q = I`, which is not a valid field
    /// gradient) shows up directly (`∇²V = -tr q = -3`).
    pub fn laplacian_residual(&self, r: &Point3, h: f64) -> f64 {
        assert!(h > 0.0, "finite-difference step must be positive");
        let mut sum = 0.0;
        for axis in 0..3 {
            let mut rp = *r;
            let mut rm = *r;
            rp[axis] += h;
            rm[axis] -= h;
            sum += self.potential(&rp) + self.potential(&rm) - 2.0 * self.potential(r);
        }
        sum / (h * h)
    }

    /// Highest order with a nonzero block (0 for the zero field).
    pub fn max_order(&self) -> usize {
        let flat4 = self.flatten_order(4);
        if flat4.amax() > 0.0 {
            return 4;
        }
        let flat3 = self.flatten_order(3);
        if flat3.amax() > 0.0 {
            return 3;
        }
        if self.quadrupole.amax() > 0.0 {
            return 2;
        }
        if self.dipole.amax() > 0.0 {
            return 1;
        }
        0
    }

    /// Flatten one tensor block into a raw component vector of length `3^k`.
    pub fn flatten_order(&self, order: usize) -> DVector<f64> {
        match order {
            1 => DVector::from_iterator(3, self.dipole.iter().copied()),
            2 => DVector::from_fn(9, |n, _| self.quadrupole[(n / 3, n % 3)]),
            3 => DVector::from_fn(27, |n, _| self.hexapole[n / 9][(n / 3) % 3][n % 3]),
            4 => DVector::from_fn(81, |n, _| {
                self.octupole[n / 27][(n / 9) % 3][(n / 3) % 3][n % 3]
            }),
            _ => panic!("multipole orders are 1..=4"),
        }
    }

    /// Rebuild one tensor block from a raw component vector.
    pub fn set_order_from_flat(&mut self, order: usize, flat: &DVector<f64>) {
        assert_eq!(flat.len(), harmonic::raw_dimension(order));
        match order {
            1 => self.dipole = Vector3::new(flat[0], flat[1], flat[2]),
            2 => {
                for i in 0..3 {
                    for j in 0..3 {
                        self.quadrupole[(i, j)] = flat[3 * i + j];
                    }
                }
            }
            3 => {
                for i in 0..3 {
                    for j in 0..3 {
                        for k in 0..3 {
                            self.hexapole[i][j][k] = flat[9 * i + 3 * j + k];
                        }
                    }
                }
            }
            4 => {
                for i in 0..3 {
                    for j in 0..3 {
                        for k in 0..3 {
                            for l in 0..3 {
                                self.octupole[i][j][k][l] = flat[27 * i + 9 * j + 3 * k + l];
                            }
                        }
                    }
                }
            }
            _ => panic!("multipole orders are 1..=4"),
        }
    }

    /// Project every block onto its symmetric traceless subspace.
    ///
    /// Idempotent; Maxwell-valid fields are fixed points.
    pub fn symmetrize_detrace(&self) -> Self {
        let mut out = self.clone();
        for order in 2..=4 {
            let flat = self.flatten_order(order);
            let proj = harmonic::project_symmetric_traceless(order, &flat);
            out.set_order_from_flat(order, &proj);
        }
        out
    }

    /// Check the Maxwell invariants (full symmetry, vanishing partial
    /// traces) to relative tolerance [`MAXWELL_REL_TOL`].
    pub fn validate(&self) -> Result<()> {
        for order in 2..=4 {
            let flat = self.flatten_order(order);
            let scale = flat.amax();
            if scale == 0.0 {
                continue;
            }
            let (rows, tags) = harmonic::maxwell_rows(order);
            let residuals = &rows * &flat;
            for (i, res) in residuals.iter().enumerate() {
                if res.abs() > MAXWELL_REL_TOL * scale * 10.0 {
                    return Err(Error::InvalidField(format!(
                        "order-{order} tensor violates {:?}: residual {res:.3e} (scale {scale:.3e})",
                        tags[i]
                    )));
                }
            }
        }
        if !self.flatten_order(1).iter().all(|x| x.is_finite())
            || !self.flatten_order(2).iter().all(|x| x.is_finite())
            || !self.flatten_order(3).iter().all(|x| x.is_finite())
            || !self.flatten_order(4).iter().all(|x| x.is_finite())
        {
            return Err(Error::InvalidField("non-finite component".into()));
        }
        Ok(())
    }

    /// Linear combination `self + c · other`, block by block.
    pub fn add_scaled(&self, other: &Self, c: f64) -> Self {
        let mut out = self.clone();
        out.dipole += c * other.dipole;
        out.quadrupole += c * other.quadrupole;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    out.hexapole[i][j][k] += c * other.hexapole[i][j][k];
                    for l in 0..3 {
                        out.octupole[i][j][k][l] += c * other.octupole[i][j][k][l];
                    }
                }
            }
        }
        out
    }

    /// Every component scaled by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self::zero().add_scaled(self, c)
    }

    /// Read the field from its JSON representation.
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Serialize to the canonical JSON representation (zero blocks omitted).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("multipole JSON serialization")
    }
}

/// Serde shape: plain nested arrays, absent keys mean zero blocks.
#[derive(Serialize, Deserialize)]
struct MultipoleFieldRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dipole: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    quadrupole: Option<[[f64; 3]; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hexapole: Option<[[[f64; 3]; 3]; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    octupole: Option<[[[[f64; 3]; 3]; 3]; 3]>,
}

impl From<MultipoleFieldRepr> for MultipoleField {
    fn from(repr: MultipoleFieldRepr) -> Self {
        let mut f = MultipoleField::zero();
        if let Some(d) = repr.dipole {
            f.dipole = Vector3::from(d);
        }
        if let Some(q) = repr.quadrupole {
            for i in 0..3 {
                for j in 0..3 {
                    f.quadrupole[(i, j)] = q[i][j];
                }
            }
        }
        if let Some(h) = repr.hexapole {
            f.hexapole = h;
        }
        if let Some(o) = repr.octupole {
            f.octupole = o;
        }
        f
    }
}

impl From<MultipoleField> for MultipoleFieldRepr {
    fn from(f: MultipoleField) -> Self {
        let nonzero3 = f.flatten_order(3).amax() > 0.0;
        let nonzero4 = f.flatten_order(4).amax() > 0.0;
        let mut q = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                q[i][j] = f.quadrupole[(i, j)];
            }
        }
        MultipoleFieldRepr {
            dipole: (f.dipole.amax() > 0.0).then(|| [f.dipole.x, f.dipole.y, f.dipole.z]),
            quadrupole: (f.quadrupole.amax() > 0.0).then_some(q),
            hexapole: nonzero3.then_some(f.hexapole),
            octupole: nonzero4.then_some(f.octupole),
        }
    }
}
