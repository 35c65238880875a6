//! `bem solve` / `bem tune`: boundary-element electrode solves — fit the
//! center field of a tagged electrode mesh, or search a parametric family
//! for the drive setting that nulls the homogeneous axial term.

use anyhow::{bail, ensure, Context};
use serde_json::json;

use trapnet::bem::{
    assemble_and_solve, fit_multipoles, read_obj_mesh, reference_family, tune_alpha_h, FitOptions,
    MultipoleFit,
};

use crate::io::write_json_atomic;
use crate::{BemSolveArgs, BemTuneArgs, Outcome, SCHEMA_VERSION};

pub fn solve(args: &BemSolveArgs, dry_run: bool) -> anyhow::Result<Outcome> {
    let mesh = read_obj_mesh(&args.mesh, &args.tags)
        .with_context(|| format!("loading mesh {}", args.mesh.display()))?;
    ensure!(
        args.fit_radius > 0.0 && args.fit_radius.is_finite(),
        "fit radius must be positive and finite, got {}",
        args.fit_radius
    );
    ensure!(args.fit_points > 0, "fit needs at least one base direction");

    let outputs = vec![args.out.clone()];
    if dry_run {
        return Ok(Outcome {
            outputs,
            details: json!({"panel_count": mesh.panel_count()}),
        });
    }

    let solution = assemble_and_solve(&mesh)?;
    let options = FitOptions {
        radius: args.fit_radius,
        points: args.fit_points,
    };
    let fit = fit_multipoles(&solution, args.fit_center.point(), &options)?;

    let report = fit_report(&fit, mesh.panel_count());
    write_json_atomic(&args.out, &report)?;

    Ok(Outcome {
        outputs,
        details: json!({
            "panel_count": mesh.panel_count(),
            "alpha_h": fit.alpha_h,
            "alpha_x": fit.alpha_x,
            "residual": fit.residual,
        }),
    })
}

pub fn tune(args: &BemTuneArgs, dry_run: bool) -> anyhow::Result<Outcome> {
    let mut family = match args.family.as_str() {
        "reference" => reference_family(),
        other => bail!("unknown electrode family '{other}' (available: reference)"),
    };
    if let Some(density) = args.density {
        ensure!(
            density > 0.0 && density.is_finite(),
            "panel density must be positive and finite, got {density}"
        );
        family.default_density = density;
    }
    let lo = args.param_lo.unwrap_or(family.lambda_lo);
    let hi = args.param_hi.unwrap_or(family.lambda_hi);
    ensure!(
        lo < hi && lo >= family.lambda_lo && hi <= family.lambda_hi,
        "search interval [{lo}, {hi}] must be increasing and inside the '{}' range [{}, {}]",
        family.name,
        family.lambda_lo,
        family.lambda_hi
    );
    ensure!(
        args.tol > 0.0 && args.tol.is_finite(),
        "tolerance must be positive and finite, got {}",
        args.tol
    );

    let outputs = vec![args.out.clone()];
    if dry_run {
        return Ok(Outcome {
            outputs,
            details: json!({
                "family": family.name,
                "param_lo": lo,
                "param_hi": hi,
                "density": family.default_density,
            }),
        });
    }

    let result = tune_alpha_h(&family, (lo, hi), args.tol)?;
    let panel_count = family.mesh(result.lambda)?.panel_count();

    let evaluations: Vec<[f64; 2]> = result.evaluations.iter().map(|&(l, a)| [l, a]).collect();
    let mut report = fit_report(&result.fit, panel_count);
    if let Some(map) = report.as_object_mut() {
        map.insert("family".into(), json!(family.name));
        map.insert("density".into(), json!(family.default_density));
        map.insert("param_lo".into(), json!(lo));
        map.insert("param_hi".into(), json!(hi));
        map.insert("tol".into(), json!(args.tol));
        map.insert("lambda".into(), json!(result.lambda));
        map.insert("monotone".into(), json!(result.monotone));
        map.insert("evaluations".into(), json!(evaluations));
    }
    write_json_atomic(&args.out, &report)?;

    Ok(Outcome {
        outputs,
        details: json!({
            "lambda": result.lambda,
            "alpha_h": result.fit.alpha_h,
            "alpha_x": result.fit.alpha_x,
            "monotone": result.monotone,
            "evaluations": result.evaluations.len(),
        }),
    })
}

/// Common JSON body for both solve and tune reports: the fitted expansion
/// plus the headline crossing quantities.
fn fit_report(fit: &MultipoleFit, panel_count: usize) -> serde_json::Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "panel_count": panel_count,
        "alpha_h": fit.alpha_h,
        "alpha_x": fit.alpha_x,
        "alpha_x_x": fit.alpha_x_x,
        "alpha_x_y": fit.alpha_x_y,
        "theta_fit_deg": fit.theta_fit.map(f64::to_degrees),
        "symmetry_leakage": fit.symmetry_leakage,
        "residual": fit.residual,
        "fit": fit,
    })
}
