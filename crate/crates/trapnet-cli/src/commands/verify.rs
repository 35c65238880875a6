//! `verify`: run the built-in design-rule suites — crossing-field
//! uniqueness across half-angles, the no-low-order-field exclusion, and
//! the forced-quadrupole-zero property for randomized cotangential path
//! pairs — and report every check in one JSON document.

use anyhow::bail;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use trapnet::intersection::{
    build_constraints, solve_nullspace, straight_x_paths, theta_x, verify_cotangential_quadrupole,
    IntersectionProblem, PathCurve,
};

use crate::commands::solve_x::crossing_alignment;
use crate::io::write_json_atomic;
use crate::{Outcome, VerifyArgs, SCHEMA_VERSION};

/// Half-angles (degrees) covered by the uniqueness and exclusion suites.
const SUITE_THETA_DEG: [f64; 5] = [15.0, 22.5, 30.0, 36.0, 45.0];

pub fn run(args: &VerifyArgs, dry_run: bool) -> anyhow::Result<Outcome> {
    let outputs: Vec<_> = args.out.iter().cloned().collect();
    if dry_run {
        return Ok(Outcome {
            outputs,
            details: json!({"seed": args.seed, "pairs": args.pairs}),
        });
    }

    let mut checks = Vec::new();

    // Uniqueness: the order-≤3 solution space of a straight crossing is
    // exactly one field, and it is the closed-form crossing field.
    for theta_deg in SUITE_THETA_DEG {
        let theta = theta_deg.to_radians();
        let (p1, p2) = straight_x_paths(theta)?;
        let problem = IntersectionProblem::new(vec![p1, p2], 3, 2)?;
        let system = build_constraints(&problem)?;
        let ns = solve_nullspace(&system);
        let alignment = crossing_alignment(&system, &ns, &theta_x(theta, 1.0)?);
        let pass = ns.dimension == 1 && alignment.is_some_and(|a| a >= 1.0 - 1e-9);
        checks.push(json!({
            "suite": "uniqueness",
            "theta_deg": theta_deg,
            "nullspace_dim": ns.dimension,
            "alignment": alignment,
            "pass": pass,
        }));
    }

    // Exclusion: restricted to dipole+quadrupole blocks, a straight
    // crossing admits no field at all.
    for theta_deg in SUITE_THETA_DEG {
        let theta = theta_deg.to_radians();
        let (p1, p2) = straight_x_paths(theta)?;
        let problem = IntersectionProblem::new(vec![p1, p2], 2, 1)?;
        let ns = solve_nullspace(&build_constraints(&problem)?);
        checks.push(json!({
            "suite": "low-order-exclusion",
            "theta_deg": theta_deg,
            "nullspace_dim": ns.dimension,
            "pass": ns.dimension == 0,
        }));
    }

    // Cotangential pairs: two paths sharing a tangent but separating at
    // series order M force the quadrupole block to zero.
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    for i in 0..args.pairs {
        let m = 2 + (i % 2);
        let (p1, p2) = random_cotangential_pair(&mut rng, m);
        let report = verify_cotangential_quadrupole(&p1, &p2)?;
        let pass = report.forced_q_zero
            && report.first_difference_order == m
            && report.tangent_orthogonality_residual < 1e-9;
        checks.push(json!({
            "suite": "cotangential",
            "pair": i,
            "difference_order": report.first_difference_order,
            "orthogonality_residual": report.tangent_orthogonality_residual,
            "quadrupole_nullspace_dim": report.quadrupole_nullspace_dim,
            "forced_q_zero": report.forced_q_zero,
            "pass": pass,
        }));
    }

    let failures: Vec<&serde_json::Value> =
        checks.iter().filter(|c| c["pass"] != json!(true)).collect();
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "seed": args.seed,
        "total": checks.len(),
        "failures": failures.len(),
        "passed": failures.is_empty(),
        "checks": checks,
    });

    if let Some(path) = &args.out {
        write_json_atomic(path, &report)?;
    }
    if report["passed"] != json!(true) {
        let first = report["checks"]
            .as_array()
            .and_then(|cs| cs.iter().find(|c| c["pass"] != json!(true)))
            .cloned()
            .unwrap_or_default();
        bail!(
            "{} of {} verification checks failed; first failure: {first}",
            report["failures"],
            report["total"]
        );
    }

    let details = report;
    Ok(Outcome { outputs, details })
}

/// Two distinct analytic paths through the origin sharing a unit tangent,
/// whose series first differ at order `m` (2 or 3).
fn random_cotangential_pair(rng: &mut ChaCha8Rng, m: usize) -> (PathCurve, PathCurve) {
    let tangent = random_unit(rng);
    let (e1, e2) = orthonormal_frame(&tangent);
    let perp = |rng: &mut ChaCha8Rng| -> Vector3<f64> {
        e1 * rng.gen_range(-0.5..0.5) + e2 * rng.gen_range(-0.5..0.5)
    };
    loop {
        let (t1, t2) = (perp(rng), perp(rng));
        if (t1 - t2).norm() < 0.05 {
            continue; // too close to the same path; redraw
        }
        let pair = if m == 2 {
            (
                PathCurve::from_transverse(tangent, &[t1]),
                PathCurve::from_transverse(tangent, &[t2]),
            )
        } else {
            let shared = perp(rng);
            (
                PathCurve::from_transverse(tangent, &[shared, t1]),
                PathCurve::from_transverse(tangent, &[shared, t2]),
            )
        };
        if let (Ok(p1), Ok(p2)) = pair {
            return (p1, p2);
        }
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if (0.2..=1.0).contains(&n) {
            return v / n;
        }
    }
}

/// Two unit vectors completing `t` to an orthonormal frame.
fn orthonormal_frame(t: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if t.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let e1 = t.cross(&helper).normalize();
    let e2 = t.cross(&e1);
    (e1, e2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_pairs_share_tangents_and_differ_at_the_requested_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for i in 0..10 {
            let m = 2 + (i % 2);
            let (p1, p2) = random_cotangential_pair(&mut rng, m);
            assert!((p1.tangent() - p2.tangent()).norm() < 1e-12);
            let report = verify_cotangential_quadrupole(&p1, &p2).unwrap();
            assert_eq!(report.first_difference_order, m);
        }
    }

    #[test]
    fn frames_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let t = random_unit(&mut rng);
            let (e1, e2) = orthonormal_frame(&t);
            assert!((e1.norm() - 1.0).abs() < 1e-12);
            assert!((e2.norm() - 1.0).abs() < 1e-12);
            assert!(t.dot(&e1).abs() < 1e-12);
            assert!(t.dot(&e2).abs() < 1e-12);
            assert!(e1.dot(&e2).abs() < 1e-12);
        }
    }
}
