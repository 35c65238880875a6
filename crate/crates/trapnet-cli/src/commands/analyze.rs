//! `analyze`: classify a crossing field's zero-set topology under an axial
//! bias, trace its zero curves, locate barriers, and emit plotter-ready
//! grid/isosurface artifacts.

use std::path::PathBuf;

use anyhow::{ensure, Context};
use serde_json::json;

use trapnet::analysis::{
    sample_pseudopotential, symmetry_check, AnalyzeOptions, PerturbedIntersection, Saddle,
    TraceOptions, ZeroLocusReport,
};
use trapnet::isosurface::extract_isosurface;
use trapnet::{Point3, PseudopotentialScale};

use crate::io::{grid_csv, load_field, triangle_mesh_to_obj, write_atomic, write_json_atomic, zeros_csv};
use crate::{AnalyzeArgs, Outcome, SCHEMA_VERSION};

/// Per-axis resolution of the coarse grid behind the symmetry diagnostics.
const SYMMETRY_RESOLUTION: usize = 15;

pub fn run(args: &AnalyzeArgs, dry_run: bool) -> anyhow::Result<Outcome> {
    let field = load_field(&args.field)?;
    let mut crossing = PerturbedIntersection::from_field(&field)
        .context("the input is not a crossing field with an axial bias")?;
    if let Some(alpha_h) = args.alpha_h {
        crossing = PerturbedIntersection::new(alpha_h, crossing.alpha_x(), crossing.theta())?;
    }
    if let Some(level) = args.iso {
        ensure!(
            level > 0.0 && level.is_finite(),
            "isosurface level must be positive and finite, got {level}"
        );
    }

    let report_path = prefixed(&args.out_prefix, "_report.json");
    let zeros_path = prefixed(&args.out_prefix, "_zeros.csv");
    let grid_path = prefixed(&args.out_prefix, "_grid.csv");
    let mut outputs = vec![report_path.clone(), zeros_path.clone(), grid_path.clone()];
    let iso_path = args.iso.map(|_| prefixed(&args.out_prefix, "_iso.obj"));
    if let Some(p) = &iso_path {
        outputs.push(p.clone());
    }

    if dry_run {
        return Ok(Outcome {
            outputs,
            details: json!({
                "alpha_h": crossing.alpha_h(),
                "alpha_x": crossing.alpha_x(),
                "theta_deg": crossing.theta().to_degrees(),
            }),
        });
    }

    let scale = PseudopotentialScale::default();
    let options = AnalyzeOptions {
        trace: TraceOptions {
            half_width: args.half_width,
            ..TraceOptions::default()
        },
        scale,
    };
    let report = crossing.analyze(&options)?;
    let symmetry = symmetry_check(
        &crossing.to_field(),
        &scale,
        args.half_width,
        SYMMETRY_RESOLUTION,
    )?;
    let grid = sample_pseudopotential(&crossing.to_field(), &scale, args.half_width, args.res)?;

    let mut iso_details = serde_json::Value::Null;
    if let (Some(level), Some(path)) = (args.iso, &iso_path) {
        let mesh = extract_isosurface(&grid, level);
        iso_details = json!({
            "level": level,
            "vertices": mesh.vertices.len(),
            "triangles": mesh.triangles.len(),
            "boundary_loops": mesh.boundary_loop_count(),
        });
        write_atomic(path, triangle_mesh_to_obj(&mesh).as_bytes())?;
    }

    let report_json = landscape_report(&crossing, &report, &symmetry, &grid, &iso_details);
    write_json_atomic(&report_path, &report_json)?;
    write_atomic(&zeros_path, zeros_csv(&report.polylines).as_bytes())?;
    write_atomic(&grid_path, grid_csv(&grid).as_bytes())?;

    Ok(Outcome {
        outputs,
        details: json!({
            "topology": report.topology,
            "barrier_height": report.barrier_height,
        }),
    })
}

fn prefixed(prefix: &str, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}{suffix}"))
}

fn points_json(points: &[Point3]) -> serde_json::Value {
    json!(points
        .iter()
        .map(|p| [p.x, p.y, p.z])
        .collect::<Vec<[f64; 3]>>())
}

fn saddles_json(saddles: &[Saddle]) -> serde_json::Value {
    json!(saddles
        .iter()
        .map(|s| {
            json!({
                "position": [s.position.x, s.position.y, s.position.z],
                "height": s.height,
            })
        })
        .collect::<Vec<_>>())
}

/// The `_report.json` document for one analyzed landscape. Shared with
/// `reproduce`, which emits the same shape for its bundled parameter sets.
pub fn landscape_report(
    crossing: &PerturbedIntersection,
    report: &ZeroLocusReport,
    symmetry: &trapnet::analysis::SymmetryReport,
    grid: &trapnet::analysis::GridSampling,
    iso: &serde_json::Value,
) -> serde_json::Value {
    let grid_min = grid.values.iter().copied().fold(f64::INFINITY, f64::min);
    let grid_max = grid.values.iter().copied().fold(0.0f64, f64::max);
    json!({
        "schema_version": SCHEMA_VERSION,
        "alpha_h": crossing.alpha_h(),
        "alpha_x": crossing.alpha_x(),
        "theta_deg": crossing.theta().to_degrees(),
        "topology": report.topology,
        "junction_points": points_json(&report.junction_points),
        "quadrupole_zeros": points_json(&report.quadrupole_zeros),
        "saddles": saddles_json(&report.saddles),
        "barrier_height": report.barrier_height,
        "polylines": report.polylines.len(),
        "polyline_points": report.polylines.iter().map(|p| p.points.len()).sum::<usize>(),
        "symmetry": {
            "mirror_x": symmetry.mirror_x,
            "mirror_y": symmetry.mirror_y,
            "z_parity": symmetry.z_parity,
            "plane_axiality": symmetry.plane_axiality,
        },
        "grid": {
            "half_width": grid.half_width,
            "resolution": grid.resolution,
            "min": grid_min,
            "max": grid_max,
        },
        "iso": iso,
    })
}
