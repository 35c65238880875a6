//! `solve-x`: build the field constraints of a straight two-guide crossing,
//! solve for the admissible fields, and write the crossing field plus a
//! report on the solution space.

use anyhow::Context;
use nalgebra::DVector;
use serde_json::json;

use trapnet::intersection::{
    build_constraints, solve_nullspace, straight_x_paths, theta_x, ConstraintSystem,
    IntersectionProblem, NullspaceResult,
};
use trapnet::MultipoleField;

use crate::io::{default_report_path, field_to_value, write_atomic, write_json_atomic};
use crate::{Outcome, SolveXArgs, SCHEMA_VERSION};

pub fn run(args: &SolveXArgs, dry_run: bool) -> anyhow::Result<Outcome> {
    let theta = args.theta.to_radians();
    let (p1, p2) = straight_x_paths(theta).context("building the crossing paths")?;
    // One path power below the top multipole order pins every block: on a
    // straight line the sᵐ coefficient of E only sees the order-(m+1) block.
    let s_order = args.order.saturating_sub(1).max(1);
    let problem = IntersectionProblem::new(vec![p1, p2], args.order, s_order)?;

    let report_path = args
        .report
        .clone()
        .unwrap_or_else(|| default_report_path(&args.out));
    let outputs = vec![args.out.clone(), report_path.clone()];

    if dry_run {
        return Ok(Outcome {
            outputs,
            details: json!({"theta_deg": args.theta, "order": args.order}),
        });
    }

    let system = build_constraints(&problem)?;
    let ns = solve_nullspace(&system);
    let field = theta_x(theta, args.alpha)?;
    let alignment = crossing_alignment(&system, &ns, &field);

    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "theta_deg": args.theta,
        "alpha": args.alpha,
        "max_multipole_order": args.order,
        "constraint_rows": system.matrix.nrows(),
        "unknowns": system.matrix.ncols(),
        "nullspace_dim": ns.dimension,
        "basis_alignment": alignment,
    });

    let field_json = serde_json::to_string_pretty(&field_to_value(&field)?)? + "\n";
    write_atomic(&args.out, field_json.as_bytes())?;
    write_json_atomic(&report_path, &report)?;

    Ok(Outcome {
        outputs,
        details: json!({
            "nullspace_dim": ns.dimension,
            "basis_alignment": alignment,
        }),
    })
}

/// Fraction of the closed-form crossing field that lies inside the solved
/// nullspace: 1 means the solution space contains it exactly. `None` when
/// the reference vector has no support in the system's blocks.
pub(crate) fn crossing_alignment(
    system: &ConstraintSystem,
    ns: &NullspaceResult,
    reference: &MultipoleField,
) -> Option<f64> {
    let mut v = DVector::zeros(system.matrix.ncols());
    for order in system.min_order..=system.max_order {
        let off = system.block_offset(order);
        let block = reference.flatten_order(order);
        for i in 0..block.len() {
            v[off + i] = block[i];
        }
    }
    let norm = v.norm();
    if norm == 0.0 {
        return None;
    }
    let projection = ns
        .basis_raw
        .iter()
        .map(|b| (b.dot(&v) / norm).powi(2))
        .sum::<f64>()
        .sqrt();
    // An orthonormal-basis projection cannot exceed 1; trim the rounding.
    Some(projection.min(1.0))
}
