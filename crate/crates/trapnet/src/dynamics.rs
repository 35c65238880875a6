//! Time-resolved ion motion in the oscillating field and its comparison
//! against the ponderomotive (period-averaged) description.
//!
//! Everything is dimensionless: lengths in units of the electrode distance
//! `d`, time in units of the rf period, and the drive strength given as a
//! Mathieu-style parameter `q` — for a unit field gradient the transverse
//! equation of motion is exactly the Mathieu equation with that `q`. In
//! these units the equation of motion is
//!
//! ```text
//! r̈ = 2π²q · cos(2πτ) · E(r)
//! ```
//!
//! and the matching ponderomotive potential (per unit mass) is
//! `U(r) = (π²q²/4)·|E(r)|²`, so a unit quadrupole has secular frequency
//! `πq/√2` per rf period — the familiar weak-drive limit `qΩ/(2√2)`.
//!
//! [`integrate`] produces a uniformly sampled [`TrajectoryRecord`];
//! [`secular_track`] boxcar-averages it over one rf period;
//! [`secular_compare`] measures the secular oscillation period and checks
//! it against the period predicted by energy conservation in `U`.

use crate::error::Error;
use crate::multipole::{MultipoleField, Point3, PseudopotentialScale};
use crate::Result;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Minimum integrator resolution: at least this many steps per rf period.
pub const MIN_STEPS_PER_PERIOD: f64 = 50.0;

/// Fixed midpoint-rule resolution of the 1D period integral.
const PERIOD_QUADRATURE_POINTS: usize = 4096;

/// Instantaneous ion state in dimensionless units (lengths in `d`,
/// velocities in `d` per rf period).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IonState {
    pub position: Point3,
    pub velocity: Point3,
}

impl IonState {
    pub fn new(position: Point3, velocity: Point3) -> Result<Self> {
        let state = Self { position, velocity };
        state.validate()?;
        Ok(state)
    }

    /// All components must be finite.
    pub fn validate(&self) -> Result<()> {
        if self.position.iter().chain(self.velocity.iter()).all(|c| c.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "ion state must be finite, got position {:?}, velocity {:?}",
                self.position, self.velocity
            )))
        }
    }
}

/// Drive strength in Mathieu form: all physical constants (charge-to-mass,
/// rf frequency, voltage amplitude, length scale) fold into the single
/// dimensionless parameter `q = 2·(Q/M)·V0 / (d²Ω²)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DriveParams {
    pub mathieu_q: f64,
}

impl DriveParams {
    pub fn new(mathieu_q: f64) -> Result<Self> {
        if !(mathieu_q > 0.0 && mathieu_q.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Mathieu parameter must be positive and finite, got {mathieu_q}"
            )));
        }
        Ok(Self { mathieu_q })
    }

    /// Ponderomotive prefactor in these units: `U = (π²q²/4)·|E|²`.
    pub fn pseudopotential_scale(&self) -> PseudopotentialScale {
        PseudopotentialScale {
            prefactor: 0.25 * PI * PI * self.mathieu_q * self.mathieu_q,
        }
    }

    /// Instantaneous acceleration at phase `τ` (in rf periods).
    pub fn acceleration(&self, field: &MultipoleField, tau: f64, r: &Point3) -> Vector3<f64> {
        field.field(r) * (2.0 * PI * PI * self.mathieu_q * (2.0 * PI * tau).cos())
    }
}

/// A uniformly sampled trajectory, including the velocities and the step
/// used to produce it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    /// Integration step in rf periods.
    pub dt: f64,
    /// Sample times, `k·dt`, strictly increasing.
    pub times: Vec<f64>,
    pub positions: Vec<Point3>,
    pub velocities: Vec<Point3>,
}

impl TrajectoryRecord {
    /// Check the structural invariants: matching lengths, uniform strictly
    /// monotone times with spacing `dt`.
    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.positions.len() || self.times.len() != self.velocities.len() {
            return Err(Error::InvalidArgument(format!(
                "trajectory arrays disagree: {} times, {} positions, {} velocities",
                self.times.len(),
                self.positions.len(),
                self.velocities.len()
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "trajectory step must be positive, got {}",
                self.dt
            )));
        }
        for w in self.times.windows(2) {
            if !((w[1] - w[0] - self.dt).abs() < 1e-9 * self.dt.max(1.0)) {
                return Err(Error::InvalidArgument(format!(
                    "trajectory sampling is not uniform: gap {} vs step {}",
                    w[1] - w[0],
                    self.dt
                )));
            }
        }
        Ok(())
    }

    /// Number of samples covering one rf period.
    pub fn samples_per_period(&self) -> usize {
        (1.0 / self.dt).round().max(1.0) as usize
    }

    /// Total covered time in rf periods.
    pub fn duration(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }
}

/// Integrate `r̈ = 2π²q·cos(2πτ)·E(r)` with classical fourth-order
/// Runge–Kutta at fixed step `dt`, recording every step.
///
/// `duration` and `dt` are in rf periods; the step must resolve the drive
/// (`dt ≤ 1/50` of a period) or the integration is refused.
pub fn integrate(
    field: &MultipoleField,
    drive: &DriveParams,
    initial: &IonState,
    duration: f64,
    dt: f64,
) -> Result<TrajectoryRecord> {
    field.validate()?;
    initial.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "integration step must be positive, got {dt}"
        )));
    }
    if dt > 1.0 / MIN_STEPS_PER_PERIOD + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "step {dt} too large: need at least {MIN_STEPS_PER_PERIOD} steps per rf period"
        )));
    }
    if !(duration >= dt && duration.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "duration must cover at least one step, got {duration}"
        )));
    }

    let steps = (duration / dt).round() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut positions = Vec::with_capacity(steps + 1);
    let mut velocities = Vec::with_capacity(steps + 1);

    let mut r = initial.position;
    let mut v = initial.velocity;
    times.push(0.0);
    positions.push(r);
    velocities.push(v);

    let accel = |tau: f64, r: &Point3| drive.acceleration(field, tau, r);
    for k in 0..steps {
        let tau = k as f64 * dt;
        let half = 0.5 * dt;

        let a1 = accel(tau, &r);
        let r2 = r + v * half;
        let a2 = accel(tau + half, &r2);
        let v2 = v + a1 * half;
        let r3 = r + v2 * half;
        let a3 = accel(tau + half, &r3);
        let v3 = v + a2 * half;
        let r4 = r + v3 * dt;
        let a4 = accel(tau + dt, &r4);
        let v4 = v + a3 * dt;

        r += (v + (v2 + v3) * 2.0 + v4) * (dt / 6.0);
        v += (a1 + (a2 + a3) * 2.0 + a4) * (dt / 6.0);

        if !r.iter().chain(v.iter()).all(|c| c.is_finite()) {
            return Err(Error::Numerical(format!(
                "trajectory diverged at τ = {:.3} rf periods",
                tau + dt
            )));
        }
        times.push((k + 1) as f64 * dt);
        positions.push(r);
        velocities.push(v);
    }

    Ok(TrajectoryRecord {
        dt,
        times,
        positions,
        velocities,
    })
}

/// Secular (rf-period-averaged) version of a trajectory: a centered boxcar
/// over exactly one rf period, with half-weighted endpoints so an exact
/// `cos(2πτ)` component cancels identically when the step divides the
/// period. Half a window is trimmed from each end.
pub fn secular_track(record: &TrajectoryRecord) -> Result<TrajectoryRecord> {
    record.validate()?;
    let w = {
        let n = record.samples_per_period();
        n + n % 2 // even window so the boxcar can be centered on a sample
    };
    if record.times.len() < 2 * w + 1 {
        return Err(Error::InvalidArgument(format!(
            "trajectory too short for secular averaging: {} samples, need {}",
            record.times.len(),
            2 * w + 1
        )));
    }

    let n = record.times.len();
    let h = w / 2;
    let mut times = Vec::with_capacity(n - w);
    let mut positions = Vec::with_capacity(n - w);
    let mut velocities = Vec::with_capacity(n - w);
    let norm = 1.0 / w as f64;
    for i in h..n - h {
        let mut rp = Point3::zeros();
        let mut rv = Point3::zeros();
        for j in (i - h)..=(i + h) {
            let weight = if j == i - h || j == i + h { 0.5 } else { 1.0 };
            rp += record.positions[j] * weight;
            rv += record.velocities[j] * weight;
        }
        times.push(record.times[i]);
        positions.push(rp * norm);
        velocities.push(rv * norm);
    }

    Ok(TrajectoryRecord {
        dt: record.dt,
        times,
        positions,
        velocities,
    })
}

/// Largest deviation of the full trajectory from its secular average — the
/// micromotion amplitude, proportional to `|E|` at the ion's position in
/// the adiabatic limit.
pub fn micromotion_amplitude(record: &TrajectoryRecord) -> Result<f64> {
    let sec = secular_track(record)?;
    let offset = record
        .times
        .iter()
        .position(|&t| (t - sec.times[0]).abs() < 0.5 * record.dt)
        .expect("secular times are a subset of the record times");
    let mut amplitude = 0.0f64;
    for (i, p) in sec.positions.iter().enumerate() {
        amplitude = amplitude.max((record.positions[offset + i] - p).norm());
    }
    Ok(amplitude)
}

/// Outcome of [`secular_compare`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SecularReport {
    /// False when the secular amplitude grows monotonically (drift along an
    /// unconfined direction or parametric instability).
    pub confined: bool,
    /// Dominant secular oscillation axis (unit vector).
    pub direction: Vector3<f64>,
    /// Largest secular excursion along `direction` from the track mean.
    pub amplitude: f64,
    /// Oscillation period measured from mean crossings of the secular
    /// track, in rf periods. Absent when unconfined.
    pub measured_period: Option<f64>,
    /// Period predicted by energy conservation in the ponderomotive
    /// potential along `direction`. Absent when unconfined.
    pub predicted_period: Option<f64>,
    /// |measured − predicted| / predicted.
    pub period_relative_error: Option<f64>,
    /// Time-averaged micromotion kinetic energy `⟨½|v − v_sec|²⟩`.
    pub mean_micromotion_energy: f64,
    /// Time-averaged ponderomotive potential along the secular path; equals
    /// the micromotion kinetic energy in the adiabatic limit.
    pub mean_pseudopotential: f64,
}

/// Compare the secular dynamics of a recorded trajectory against the
/// ponderomotive prediction `U = (π²q²/4)|E|²`.
///
/// The secular track must cover several oscillations; unconfined motion
/// (monotone amplitude growth) is reported with `confined: false` rather
/// than compared.
pub fn secular_compare(
    record: &TrajectoryRecord,
    field: &MultipoleField,
    drive: &DriveParams,
) -> Result<SecularReport> {
    let sec = secular_track(record)?;
    let scale = drive.pseudopotential_scale();

    // Micromotion energy vs ponderomotive potential along the path.
    let offset = record
        .times
        .iter()
        .position(|&t| (t - sec.times[0]).abs() < 0.5 * record.dt)
        .expect("secular times are a subset of the record times");
    let n = sec.times.len() as f64;
    let mut mean_micromotion_energy = 0.0;
    let mut mean_pseudopotential = 0.0;
    for (i, (p, v)) in sec.positions.iter().zip(&sec.velocities).enumerate() {
        let dv = record.velocities[offset + i] - v;
        mean_micromotion_energy += 0.5 * dv.norm_squared() / n;
        mean_pseudopotential += field.pseudopotential(p, &scale) / n;
    }

    // Dominant oscillation axis from the position covariance.
    let mean: Point3 = sec.positions.iter().sum::<Point3>() / n;
    let mut cov = Matrix3::zeros();
    for p in &sec.positions {
        let c = p - mean;
        cov += c * c.transpose() / n;
    }
    let eigen = nalgebra::SymmetricEigen::new(cov);
    let (max_idx, _) = eigen
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("3x3 eigensystem");
    let mut direction: Vector3<f64> = eigen.eigenvectors.column(max_idx).into_owned();
    if direction.iter().fold(0.0f64, |m, c| if c.abs() > m.abs() { *c } else { m }) < 0.0 {
        direction = -direction;
    }

    // Classify the motion. Monotone growth of the per-quarter excursion
    // peaks means parametric instability; too few mean crossings combined
    // with net displacement spanning the whole excursion range means free
    // drift. Either way the ponderomotive comparison is meaningless.
    let s: Vec<f64> = sec.positions.iter().map(|p| (p - mean).dot(&direction)).collect();
    let quarter = s.len() / 4;
    let mut quarter_peaks = [0.0f64; 4];
    for (k, peak) in quarter_peaks.iter_mut().enumerate() {
        let lo = k * quarter;
        let hi = if k == 3 { s.len() } else { (k + 1) * quarter };
        *peak = sec.positions[lo..hi]
            .iter()
            .map(|p| (p - mean).norm())
            .fold(0.0, f64::max);
    }
    let growing = quarter_peaks.windows(2).all(|w| w[1] > w[0])
        && quarter_peaks[3] > 2.0 * quarter_peaks[0];

    // Upward mean-crossings, linearly interpolated: the period ruler.
    let mut crossings = Vec::new();
    for i in 0..s.len() - 1 {
        if s[i] < 0.0 && s[i + 1] >= 0.0 {
            let frac = s[i] / (s[i] - s[i + 1]);
            crossings.push(sec.times[i] + frac * record.dt);
        }
    }

    let span = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - s.iter().cloned().fold(f64::INFINITY, f64::min);
    let drifting =
        crossings.len() < 2 && span > 0.0 && (s[s.len() - 1] - s[0]).abs() > 0.8 * span;

    let amplitude = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if growing || drifting {
        return Ok(SecularReport {
            confined: false,
            direction,
            amplitude,
            measured_period: None,
            predicted_period: None,
            period_relative_error: None,
            mean_micromotion_energy,
            mean_pseudopotential,
        });
    }
    if crossings.len() < 2 {
        return Err(Error::NoConvergence(format!(
            "only {} full secular oscillations in {:.1} rf periods; run longer to measure a period",
            crossings.len(),
            record.duration()
        )));
    }
    let measured = (crossings.last().unwrap() - crossings[0]) / (crossings.len() - 1) as f64;

    // Predicted period: 1D energy conservation in U along the axis, one
    // side at a time so mild asymmetry does not bias the estimate.
    let u_line = |t: f64| field.pseudopotential(&(mean + direction * t), &scale);
    let s_min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let s_max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let center = well_minimum(&u_line, s_min, s_max);
    let predicted = half_period(&u_line, center, s_max - center)
        + half_period(&u_line, center, s_min - center);
    if !(predicted.is_finite() && predicted > 0.0) {
        return Err(Error::Numerical(format!(
            "no restoring ponderomotive force along {direction:?} (flat potential)"
        )));
    }
    let error = (measured - predicted).abs() / predicted;

    Ok(SecularReport {
        confined: true,
        direction,
        amplitude,
        measured_period: Some(measured),
        predicted_period: Some(predicted),
        period_relative_error: Some(error),
        mean_micromotion_energy,
        mean_pseudopotential,
    })
}

/// Grid-search the minimum of a 1D potential profile on `[lo, hi]`.
fn well_minimum(u: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let n = 2000;
    let mut best = (u(lo), lo);
    for k in 1..=n {
        let t = lo + (hi - lo) * k as f64 / n as f64;
        let v = u(t);
        if v < best.0 {
            best = (v, t);
        }
    }
    best.1
}

/// Time from the well center to the turning point at signed amplitude `a`
/// and back: `2∫ ds/√(2(U(a) − U(s)))`, regularized by `s = a·sinφ` and
/// evaluated with an open midpoint rule so the turning-point singularity is
/// never sampled.
fn half_period(u: &impl Fn(f64) -> f64, center: f64, a: f64) -> f64 {
    if a.abs() < 1e-12 {
        return 0.0;
    }
    let e = u(center + a);
    let n = PERIOD_QUADRATURE_POINTS;
    let h = 0.5 * PI / n as f64;
    let mut sum = 0.0;
    for k in 0..n {
        let phi = (k as f64 + 0.5) * h;
        let s = a * phi.sin();
        let gap = e - u(center + s);
        if gap <= 0.0 {
            continue; // sampling noise at the turning point
        }
        sum += a.abs() * phi.cos() / (2.0 * gap).sqrt();
    }
    2.0 * sum * h
}
