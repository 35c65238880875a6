//! Triangulated electrode surfaces: validation, generation, I/O, symmetry.

use crate::error::Error;
use crate::multipole::Point3;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

/// Triangles with area below this (in d² units) are rejected as degenerate.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// A triangulated conductor surface with a fixed potential per triangle.
///
/// Potentials are in drive-amplitude units; the usual tags are `+1`, `-1`
/// (the two RF phases) and `0` (grounded), but any finite scalar is allowed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElectrodeMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[usize; 3]>,
    /// Fixed surface potential of each triangle.
    pub potentials: Vec<f64>,
}

impl ElectrodeMesh {
    /// Wrap raw data after checking the mesh invariants.
    pub fn new(
        vertices: Vec<Point3>,
        triangles: Vec<[usize; 3]>,
        potentials: Vec<f64>,
    ) -> Result<Self> {
        let mesh = Self {
            vertices,
            triangles,
            potentials,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Check index bounds, vertex finiteness, non-degeneracy, and tag
    /// finiteness.
    pub fn validate(&self) -> Result<()> {
        if self.triangles.len() != self.potentials.len() {
            return Err(Error::InvalidMesh(format!(
                "{} triangles but {} potential tags",
                self.triangles.len(),
                self.potentials.len()
            )));
        }
        for (i, v) in self.vertices.iter().enumerate() {
            if !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()) {
                return Err(Error::InvalidMesh(format!("vertex {i} is not finite")));
            }
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            for &k in tri {
                if k >= self.vertices.len() {
                    return Err(Error::InvalidMesh(format!(
                        "triangle {t} references vertex {k} of {}",
                        self.vertices.len()
                    )));
                }
            }
            let area = self.triangle_area(t);
            if !(area > MIN_TRIANGLE_AREA) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} is degenerate (area {area:.3e})"
                )));
            }
        }
        for (t, p) in self.potentials.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::InvalidMesh(format!(
                    "potential tag of triangle {t} is not finite"
                )));
            }
        }
        Ok(())
    }

    pub fn panel_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_vertices(&self, t: usize) -> [Point3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_vertices(t);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn triangle_centroid(&self, t: usize) -> Point3 {
        let [a, b, c] = self.triangle_vertices(t);
        (a + b + c) / 3.0
    }

    pub fn total_area(&self) -> f64 {
        (0..self.panel_count()).map(|t| self.triangle_area(t)).sum()
    }

    /// Append another mesh (its vertex indices are shifted).
    pub fn append(&mut self, other: &ElectrodeMesh) {
        let offset = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| t.map(|k| k + offset)));
        self.potentials.extend_from_slice(&other.potentials);
    }

    /// Uniformly scale all coordinates about the origin.
    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.vertices {
            *v *= factor;
        }
    }

    /// Distance from `p` to the nearest point on any panel.
    pub fn nearest_distance(&self, p: &Point3) -> f64 {
        (0..self.panel_count())
            .map(|t| point_triangle_distance(p, &self.triangle_vertices(t)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Check the symmetry class used by the crossing designs: mirror
    /// symmetry of geometry and tags under `x → −x` and `y → −y`, and
    /// antisymmetry (geometry mapped, tag negated) under `z → −z`.
    ///
    /// Panels are matched as unordered vertex triples on a quantized grid,
    /// so the check is exact for meshes built by reflection and robust to
    /// last-bit noise otherwise.
    pub fn symmetry_class_report(&self) -> SymmetryClassReport {
        SymmetryClassReport {
            mirror_x: self.maps_onto(|v| Point3::new(-v.x, v.y, v.z), 1.0),
            mirror_y: self.maps_onto(|v| Point3::new(v.x, -v.y, v.z), 1.0),
            anti_z: self.maps_onto(|v| Point3::new(v.x, v.y, -v.z), -1.0),
        }
    }

    /// True when mapping every panel through `map` (and multiplying its tag
    /// by `tag_factor`) lands on an existing panel.
    fn maps_onto(&self, map: impl Fn(&Point3) -> Point3, tag_factor: f64) -> bool {
        let scale = self
            .vertices
            .iter()
            .map(|v| v.amax())
            .fold(0.0f64, f64::max)
            .max(1e-30);
        let quantum = 1e-9 * scale;
        let key = |p: &Point3, tag: f64| -> ([i64; 3], i64) {
            (
                [
                    (p.x / quantum).round() as i64,
                    (p.y / quantum).round() as i64,
                    (p.z / quantum).round() as i64,
                ],
                (tag / 1e-9).round() as i64,
            )
        };
        let tri_key = |verts: &[Point3; 3], tag: f64| {
            let mut ks = [
                key(&verts[0], tag),
                key(&verts[1], tag),
                key(&verts[2], tag),
            ];
            ks.sort_unstable();
            ks
        };
        let mut present = HashSet::with_capacity(self.panel_count());
        for t in 0..self.panel_count() {
            present.insert(tri_key(&self.triangle_vertices(t), self.potentials[t]));
        }
        (0..self.panel_count()).all(|t| {
            let mapped = self.triangle_vertices(t).map(|v| map(&v));
            present.contains(&tri_key(&mapped, tag_factor * self.potentials[t]))
        })
    }
}

/// Result of [`ElectrodeMesh::symmetry_class_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetryClassReport {
    /// Geometry and tags invariant under `x → −x`.
    pub mirror_x: bool,
    /// Geometry and tags invariant under `y → −y`.
    pub mirror_y: bool,
    /// Geometry invariant and tags negated under `z → −z`.
    pub anti_z: bool,
}

impl SymmetryClassReport {
    pub fn all_hold(&self) -> bool {
        self.mirror_x && self.mirror_y && self.anti_z
    }
}

/// Exact distance from a point to a (filled) triangle.
pub fn point_triangle_distance(p: &Point3, tri: &[Point3; 3]) -> f64 {
    // Region classification on barycentric coordinates (standard approach).
    let ab = tri[1] - tri[0];
    let ac = tri[2] - tri[0];
    let ap = p - tri[0];
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm();
    }

    let bp = p - tri[1];
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm();
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (ap - ab * v).norm();
    }

    let cp = p - tri[2];
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm();
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (ap - ac * w).norm();
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (bp - (tri[2] - tri[1]) * w).norm();
    }

    // Interior: perpendicular distance to the plane.
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (ap - ab * v - ac * w).norm()
}

// ---------------------------------------------------------------------------
// Shape generators
// ---------------------------------------------------------------------------

/// Geodesic sphere: an icosahedron subdivided `subdivisions` times with
/// vertices pushed onto the sphere. Panel count is `20·4^subdivisions`.
pub fn icosphere(center: Point3, radius: f64, subdivisions: u32, tag: f64) -> ElectrodeMesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ];
    let mut vertices: Vec<Point3> = raw
        .iter()
        .map(|&(x, y, z)| Point3::new(x, y, z).normalize())
        .collect();
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for tri in &triangles {
            let mut mids = [0usize; 3];
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                let key = (a.min(b), a.max(b));
                mids[e] = *midpoint.entry(key).or_insert_with(|| {
                    let m = ((vertices[a] + vertices[b]) * 0.5).normalize();
                    vertices.push(m);
                    vertices.len() - 1
                });
            }
            next.push([tri[0], mids[0], mids[2]]);
            next.push([tri[1], mids[1], mids[0]]);
            next.push([tri[2], mids[2], mids[1]]);
            next.push([mids[0], mids[1], mids[2]]);
        }
        triangles = next;
    }

    for v in &mut vertices {
        *v = center + *v * radius;
    }
    let potentials = vec![tag; triangles.len()];
    ElectrodeMesh {
        vertices,
        triangles,
        potentials,
    }
}

/// Axis-aligned rectangular box, each face gridded so no panel edge exceeds
/// `max_edge`. All six faces are closed; windings face outward.
///
/// Subdivision counts are rounded up to even and each grid cell is split
/// along the diagonal pointing away from the face center, so the triangle
/// set itself is invariant under the coordinate reflections of the box —
/// a property [`ElectrodeMesh::symmetry_class_report`] relies on.
pub fn cuboid(center: Point3, half_extents: [f64; 3], max_edge: f64, tag: f64) -> ElectrodeMesh {
    assert!(max_edge > 0.0, "panel edge target must be positive");
    let subdivisions = |h: f64| {
        let n = ((2.0 * h) / max_edge).ceil().max(1.0) as usize;
        n + n % 2
    };
    let mut mesh = ElectrodeMesh {
        vertices: Vec::new(),
        triangles: Vec::new(),
        potentials: Vec::new(),
    };
    // For each axis, the two faces with normals ±axis.
    for axis in 0..3 {
        let u = (axis + 1) % 3;
        let v = (axis + 2) % 3;
        let nu = subdivisions(half_extents[u]);
        let nv = subdivisions(half_extents[v]);
        for &side in &[1.0f64, -1.0] {
            let base = mesh.vertices.len();
            for j in 0..=nv {
                for i in 0..=nu {
                    let mut p = center;
                    p[axis] += side * half_extents[axis];
                    p[u] += -half_extents[u] + 2.0 * half_extents[u] * i as f64 / nu as f64;
                    p[v] += -half_extents[v] + 2.0 * half_extents[v] * j as f64 / nv as f64;
                    mesh.vertices.push(p);
                }
            }
            let idx = |i: usize, j: usize| base + j * (nu + 1) + i;
            for j in 0..nv {
                for i in 0..nu {
                    let (p00, p10, p01, p11) =
                        (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
                    // Union-jack split: the cell's quadrant relative to the
                    // face center picks the diagonal, so a reflected cell
                    // gets the reflected split. Even nu/nv keep every cell
                    // strictly inside one quadrant.
                    let du = i as f64 + 0.5 - 0.5 * nu as f64;
                    let dv = j as f64 + 0.5 - 0.5 * nv as f64;
                    let cell = if du * dv > 0.0 {
                        [[p00, p10, p11], [p00, p11, p01]]
                    } else {
                        [[p00, p10, p01], [p10, p11, p01]]
                    };
                    for mut tri in cell {
                        // Outward winding: (axis, u, v) is a right-handed
                        // triple, so the −side face is wound the other way.
                        if side < 0.0 {
                            tri.swap(1, 2);
                        }
                        mesh.triangles.push(tri);
                        mesh.potentials.push(tag);
                    }
                }
            }
        }
    }
    mesh
}

// ---------------------------------------------------------------------------
// OBJ + JSON-sidecar I/O
// ---------------------------------------------------------------------------

/// Write the mesh as Wavefront OBJ plus a JSON sidecar mapping material
/// names to potentials. Faces are grouped by potential value; group `k`
/// becomes material `m<k>`.
pub fn write_obj_mesh(mesh: &ElectrodeMesh, obj_path: &Path, tags_path: &Path) -> Result<()> {
    let mut groups: BTreeMap<u64, (f64, Vec<usize>)> = BTreeMap::new();
    for (t, &p) in mesh.potentials.iter().enumerate() {
        groups.entry(p.to_bits()).or_insert((p, Vec::new())).1.push(t);
    }

    let mut obj = String::new();
    let _ = writeln!(obj, "# electrode mesh: {} panels", mesh.panel_count());
    for v in &mesh.vertices {
        let _ = writeln!(obj, "v {:.17e} {:.17e} {:.17e}", v.x, v.y, v.z);
    }
    let mut tags: BTreeMap<String, f64> = BTreeMap::new();
    for (k, (potential, faces)) in groups.values().enumerate() {
        let name = format!("m{k}");
        tags.insert(name.clone(), *potential);
        let _ = writeln!(obj, "usemtl {name}");
        for &t in faces {
            let [a, b, c] = mesh.triangles[t];
            let _ = writeln!(obj, "f {} {} {}", a + 1, b + 1, c + 1);
        }
    }
    std::fs::write(obj_path, obj)?;
    std::fs::write(tags_path, serde_json::to_string_pretty(&tags)? + "\n")?;
    Ok(())
}

/// Read a Wavefront OBJ (triangles only; `f` entries may carry `/vt/vn`
/// suffixes) plus a JSON sidecar mapping material names to potentials.
/// Every face must be covered by a material present in the sidecar.
pub fn read_obj_mesh(obj_path: &Path, tags_path: &Path) -> Result<ElectrodeMesh> {
    let tags: BTreeMap<String, f64> = serde_json::from_str(&std::fs::read_to_string(tags_path)?)?;
    let text = std::fs::read_to_string(obj_path)?;

    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut potentials = Vec::new();
    let mut current: Option<f64> = None;

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        let mut fields = line.split_whitespace();
        let bad = |msg: &str| Error::InvalidMesh(format!("{}:{}: {msg}", obj_path.display(), lineno + 1));
        match fields.next() {
            Some("v") => {
                let mut coords = [0.0f64; 3];
                for c in &mut coords {
                    *c = fields
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad("malformed vertex"))?;
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("usemtl") => {
                let name = fields.next().ok_or_else(|| bad("usemtl without a name"))?;
                let volts = tags
                    .get(name)
                    .ok_or_else(|| bad(&format!("material {name:?} missing from tag sidecar")))?;
                current = Some(*volts);
            }
            Some("f") => {
                let mut idx = Vec::new();
                for part in fields {
                    let first = part.split('/').next().unwrap_or("");
                    let k: i64 = first.parse().map_err(|_| bad("malformed face index"))?;
                    if k <= 0 {
                        return Err(bad("only positive face indices are supported"));
                    }
                    idx.push(k as usize - 1);
                }
                if idx.len() != 3 {
                    return Err(bad("only triangular faces are supported"));
                }
                let tag = current.ok_or_else(|| bad("face before any usemtl"))?;
                triangles.push([idx[0], idx[1], idx[2]]);
                potentials.push(tag);
            }
            _ => {} // comments, empty lines, normals, texture coords
        }
    }

    ElectrodeMesh::new(vertices, triangles, potentials)
}
