//! File plumbing shared by the subcommands: atomic writes, the "x,y,z"
//! triple argument, and the CSV/OBJ emitters.
//!
//! All text artifacts are built deterministically — fixed iteration orders,
//! shortest round-trip float formatting — so rerunning a command with the
//! same inputs reproduces its outputs byte for byte.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::Context;
use serde::Serialize;

use trapnet::analysis::{GridSampling, Polyline};
use trapnet::isosurface::TriangleMesh;
use trapnet::MultipoleField;

use crate::SCHEMA_VERSION;

/// A comma-separated coordinate triple CLI argument ("x,y,z").
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triple(pub [f64; 3]);

impl FromStr for Triple {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 3 {
            return Err(format!("expected three comma-separated numbers, got '{s}'"));
        }
        let mut out = [0.0; 3];
        for (slot, part) in out.iter_mut().zip(&parts) {
            *slot = part
                .trim()
                .parse::<f64>()
                .map_err(|_| format!("'{part}' is not a number in '{s}'"))?;
        }
        if !out.iter().all(|v| v.is_finite()) {
            return Err(format!("coordinates must be finite, got '{s}'"));
        }
        Ok(Triple(out))
    }
}

impl Triple {
    pub fn point(&self) -> trapnet::Point3 {
        trapnet::Point3::new(self.0[0], self.0[1], self.0[2])
    }
}

/// Write `bytes` to `path` atomically: the data lands in a temporary file
/// in the same directory and is renamed over the target, so a crash never
/// leaves a half-written artifact. Parent directories are created.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(parent)
        .with_context(|| format!("creating directory {}", parent.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(parent)
        .with_context(|| format!("creating temporary file in {}", parent.display()))?;
    tmp.write_all(bytes)
        .with_context(|| format!("writing {}", path.display()))?;
    // Temp files are born 0600; artifacts should get ordinary permissions.
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644))
            .with_context(|| format!("setting permissions on {}", path.display()))?;
    }
    tmp.persist(path)
        .with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Serialize `value` as pretty JSON (trailing newline) and write atomically.
pub fn write_json_atomic(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value).context("serializing JSON report")?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Default report path for a command with one primary output: the output
/// path with its extension replaced by `.report.json`.
pub fn default_report_path(out: &Path) -> PathBuf {
    out.with_extension("report.json")
}

/// Load a multipole field from its JSON file and validate the Maxwell
/// constraints before handing it to any solver.
pub fn load_field(path: &Path) -> anyhow::Result<MultipoleField> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading field file {}", path.display()))?;
    let field = MultipoleField::from_json(&text)
        .with_context(|| format!("parsing field file {}", path.display()))?;
    field
        .validate()
        .with_context(|| format!("validating field file {}", path.display()))?;
    Ok(field)
}

/// The field's JSON value with the schema version stamped alongside the
/// tensor blocks (readers ignore the extra key).
pub fn field_to_value(field: &MultipoleField) -> anyhow::Result<serde_json::Value> {
    let mut value = serde_json::to_value(field).context("serializing field")?;
    if let Some(map) = value.as_object_mut() {
        map.insert("schema_version".into(), SCHEMA_VERSION.into());
    }
    Ok(value)
}

/// CSV of traced zero-curve points: one row per point, branches numbered
/// in trace order.
pub fn zeros_csv(polylines: &[Polyline]) -> String {
    let mut out = String::from("branch,closed,x,y,z\n");
    for (branch, line) in polylines.iter().enumerate() {
        let closed = usize::from(line.closed);
        for p in &line.points {
            let _ = writeln!(out, "{branch},{closed},{},{},{}", p.x, p.y, p.z);
        }
    }
    out
}

/// CSV of grid samples, x fastest: `x,y,z,U`.
pub fn grid_csv(grid: &GridSampling) -> String {
    let mut out = String::with_capacity(grid.values.len() * 32 + 16);
    out.push_str("x,y,z,U\n");
    for (idx, value) in grid.values.iter().enumerate() {
        let p = grid.point_of_index(idx);
        let _ = writeln!(out, "{},{},{},{value}", p.x, p.y, p.z);
    }
    out
}

/// Wavefront OBJ text for an isosurface triangle mesh.
pub fn triangle_mesh_to_obj(mesh: &TriangleMesh) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# isosurface: {} vertices, {} triangles",
        mesh.vertices.len(),
        mesh.triangles.len()
    );
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in &mesh.triangles {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triples_parse_and_reject() {
        assert_eq!("1,2.5,-3".parse::<Triple>().unwrap().0, [1.0, 2.5, -3.0]);
        assert_eq!(" 0 , 0 , 1 ".parse::<Triple>().unwrap().0, [0.0, 0.0, 1.0]);
        assert!("1,2".parse::<Triple>().is_err());
        assert!("1,2,3,4".parse::<Triple>().is_err());
        assert!("1,x,3".parse::<Triple>().is_err());
        assert!("1,2,inf".parse::<Triple>().is_err());
    }

    #[test]
    fn atomic_writes_create_directories_and_replace() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("deep/nested/out.txt");
        write_atomic(&target, b"first").unwrap();
        assert_eq!(std::fs::read(&target).unwrap(), b"first");
        write_atomic(&target, b"second").unwrap();
        assert_eq!(std::fs::read(&target).unwrap(), b"second");
        // no stray temp files left behind
        let entries: Vec<_> = std::fs::read_dir(target.parent().unwrap())
            .unwrap()
            .collect();
        assert_eq!(entries.len(), 1);
    }

    #[test]
    fn report_paths_swap_the_extension() {
        assert_eq!(
            default_report_path(Path::new("runs/field.json")),
            Path::new("runs/field.report.json")
        );
        assert_eq!(
            default_report_path(Path::new("traj.csv")),
            Path::new("traj.report.json")
        );
    }

    #[test]
    fn field_json_round_trips_through_the_version_stamp() {
        let field = trapnet::intersection::theta_x(0.5, 1.25).unwrap();
        let value = field_to_value(&field).unwrap();
        assert_eq!(value["schema_version"], SCHEMA_VERSION);
        let text = serde_json::to_string(&value).unwrap();
        let back = MultipoleField::from_json(&text).unwrap();
        assert_eq!(back.hexapole, field.hexapole);
    }
}
