//! `trace`: follow the zero-field curves of an arbitrary multipole field
//! and write them as a CSV polyline table plus a JSON summary.

use serde_json::json;

use trapnet::analysis::{trace_zero_lines, TraceOptions};
use trapnet::Point3;

use crate::io::{default_report_path, load_field, write_atomic, write_json_atomic, zeros_csv};
use crate::{Outcome, TraceArgs, SCHEMA_VERSION};

pub fn run(args: &TraceArgs, dry_run: bool) -> anyhow::Result<Outcome> {
    let field = load_field(&args.field)?;
    let options = TraceOptions {
        step: args.step,
        half_width: args.half_width,
        seeds: args.seeds.iter().map(|t| t.point()).collect(),
        ..TraceOptions::default()
    };
    anyhow::ensure!(
        options.step > 0.0 && options.step < options.half_width,
        "step must be positive and smaller than the box half-width"
    );

    let report_path = args
        .report
        .clone()
        .unwrap_or_else(|| default_report_path(&args.out));
    let outputs = vec![args.out.clone(), report_path.clone()];

    if dry_run {
        return Ok(Outcome {
            outputs,
            details: json!({"seeds": options.seeds.len()}),
        });
    }

    let result = trace_zero_lines(&field, &options)?;
    let max_residual = result
        .polylines
        .iter()
        .flat_map(|line| &line.points)
        .map(|p| field.field(p).norm())
        .fold(0.0f64, f64::max);

    let points = |v: &Vec<Point3>| -> Vec<[f64; 3]> { v.iter().map(|p| [p.x, p.y, p.z]).collect() };
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "box": args.half_width,
        "step": args.step,
        "polylines": result.polylines.len(),
        "closed_polylines": result.polylines.iter().filter(|p| p.closed).count(),
        "points": result.polylines.iter().map(|p| p.points.len()).sum::<usize>(),
        "junctions": points(&result.junctions),
        "isolated_zeros": points(&result.isolated_zeros),
        "max_field_residual": max_residual,
    });

    write_atomic(&args.out, zeros_csv(&result.polylines).as_bytes())?;
    write_json_atomic(&report_path, &report)?;

    Ok(Outcome {
        outputs,
        details: json!({
            "polylines": result.polylines.len(),
            "junctions": result.junctions.len(),
            "max_field_residual": max_residual,
        }),
    })
}
