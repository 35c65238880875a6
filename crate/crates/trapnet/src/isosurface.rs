//! Isosurface extraction from regular pseudopotential grids.
//!
//! Each grid cell is split into six tetrahedra around its main diagonal (a
//! decomposition that matches up across cell faces, so the output is
//! watertight up to the grid boundary), and the level surface is extracted
//! per tetrahedron with linear interpolation along edges. Vertices are
//! shared through a global edge map, which lets downstream checks count
//! boundary loops — e.g. the number of openings a confinement tube has
//! through the sides of the sampled box.

use crate::analysis::GridSampling;
use crate::multipole::Point3;
use std::collections::HashMap;

/// Indexed triangle mesh with shared vertices.
#[derive(Debug, Clone, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Edges used by exactly one triangle (each as a sorted vertex pair).
    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let key = (a.min(b), a.max(b));
                *count.entry(key).or_insert(0) += 1;
            }
        }
        let mut edges: Vec<_> = count
            .into_iter()
            .filter_map(|(e, c)| (c == 1).then_some(e))
            .collect();
        edges.sort_unstable();
        edges
    }

    /// Number of closed loops formed by the boundary edges (0 for a closed
    /// surface). Loops are connected components of the boundary edge graph.
    pub fn boundary_loop_count(&self) -> usize {
        let edges = self.boundary_edges();
        let mut parent: HashMap<usize, usize> = HashMap::new();
        fn find(parent: &mut HashMap<usize, usize>, x: usize) -> usize {
            let p = *parent.entry(x).or_insert(x);
            if p == x {
                return x;
            }
            let root = find(parent, p);
            parent.insert(x, root);
            root
        }
        for &(a, b) in &edges {
            let ra = find(&mut parent, a);
            let rb = find(&mut parent, b);
            if ra != rb {
                parent.insert(ra, rb);
            }
        }
        let mut roots: Vec<usize> = edges
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .map(|v| find(&mut parent, v))
            .collect();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }

    /// Euler characteristic `V - E + F` (2 for a closed surface of genus 0).
    pub fn euler_characteristic(&self) -> i64 {
        let mut edges: Vec<(usize, usize)> = Vec::with_capacity(self.triangles.len() * 3);
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                edges.push((a.min(b), a.max(b)));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        self.vertices.len() as i64 - edges.len() as i64 + self.triangles.len() as i64
    }
}

/// Six-tetrahedron decomposition of the unit cube around the 0-7 diagonal
/// (corner bit encoding: bit0 = x, bit1 = y, bit2 = z).
const TETS: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

/// Extract the triangle mesh of the level set `value = level` from a grid.
///
/// Grid points with `value > level` count as "above"; ties count as below,
/// which keeps degenerate intersections finite. Vertices are interpolated
/// linearly along tetrahedron edges and shared across cells.
pub fn extract_isosurface(grid: &GridSampling, level: f64) -> TriangleMesh {
    let n = grid.resolution;
    let mut mesh = TriangleMesh::default();
    // global edge (grid point pair) -> mesh vertex
    let mut edge_vertices: HashMap<(usize, usize), usize> = HashMap::new();

    let point_index = |ix: usize, iy: usize, iz: usize| ix + n * (iy + n * iz);

    let mut corner_idx = [0usize; 8];
    for iz in 0..n - 1 {
        for iy in 0..n - 1 {
            for ix in 0..n - 1 {
                for (bit, slot) in corner_idx.iter_mut().enumerate() {
                    *slot = point_index(
                        ix + (bit & 1),
                        iy + ((bit >> 1) & 1),
                        iz + ((bit >> 2) & 1),
                    );
                }
                for tet in &TETS {
                    let verts = [
                        corner_idx[tet[0]],
                        corner_idx[tet[1]],
                        corner_idx[tet[2]],
                        corner_idx[tet[3]],
                    ];
                    emit_tet(grid, level, &verts, &mut mesh, &mut edge_vertices);
                }
            }
        }
    }
    mesh
}

/// Emit the (0, 1 or 2) triangles of one tetrahedron.
fn emit_tet(
    grid: &GridSampling,
    level: f64,
    verts: &[usize; 4],
    mesh: &mut TriangleMesh,
    edge_vertices: &mut HashMap<(usize, usize), usize>,
) {
    let above: Vec<bool> = verts.iter().map(|&v| grid.values[v] > level).collect();
    let n_above = above.iter().filter(|&&a| a).count();
    if n_above == 0 || n_above == 4 {
        return;
    }

    // edges of the tet that cross the level
    let mut cut = |a: usize, b: usize, mesh: &mut TriangleMesh| -> usize {
        let (ga, gb) = (verts[a], verts[b]);
        let key = (ga.min(gb), ga.max(gb));
        *edge_vertices.entry(key).or_insert_with(|| {
            let (va, vb) = (grid.values[ga], grid.values[gb]);
            let t = if (vb - va).abs() < 1e-300 {
                0.5
            } else {
                ((level - va) / (vb - va)).clamp(0.0, 1.0)
            };
            let pa = grid.point_of_index(ga);
            let pb = grid.point_of_index(gb);
            mesh.vertices.push(pa + (pb - pa) * t);
            mesh.vertices.len() - 1
        })
    };

    let minority_above = n_above == 1;
    let singles: Vec<usize> = (0..4)
        .filter(|&i| above[i] == minority_above)
        .collect();

    match singles.len() {
        1 => {
            // one vertex cut off: single triangle
            let s = singles[0];
            let others: Vec<usize> = (0..4).filter(|&i| i != s).collect();
            let v0 = cut(s, others[0], mesh);
            let v1 = cut(s, others[1], mesh);
            let v2 = cut(s, others[2], mesh);
            if v0 != v1 && v1 != v2 && v0 != v2 {
                mesh.triangles.push([v0, v1, v2]);
            }
        }
        2 => {
            // two-two split: quad across four cut edges, as two triangles
            let (s0, s1) = (singles[0], singles[1]);
            let others: Vec<usize> = (0..4).filter(|&i| i != s0 && i != s1).collect();
            let (o0, o1) = (others[0], others[1]);
            let a = cut(s0, o0, mesh);
            let b = cut(s0, o1, mesh);
            let c = cut(s1, o1, mesh);
            let d = cut(s1, o0, mesh);
            if a != b && b != c && a != c {
                mesh.triangles.push([a, b, c]);
            }
            if a != c && c != d && a != d {
                mesh.triangles.push([a, c, d]);
            }
        }
        _ => unreachable!("1 or 3 vertices above the level"),
    }
}


#[cfg(test)]
mod crossing_surfaces {
    use super::*;
    use crate::analysis::sample_pseudopotential;
    use crate::intersection::theta_x;
    use crate::PseudopotentialScale;

    /// A pseudopotential isosurface around a crossing forms a tube along
    /// each escaping zero line, so its boundary loops count the openings:
    /// four for the generic crossing (two lines, four box exits), six at
    /// the right-angle crossing where the z axis also becomes field-free.
    #[test]
    fn crossing_isosurface_openings_count_the_zero_line_exits() {
        let scale = PseudopotentialScale::default();
        for (theta, expected_loops) in [
            (std::f64::consts::FRAC_PI_6, 4),
            (std::f64::consts::FRAC_PI_4, 6),
        ] {
            let field = theta_x(theta, 1.0).unwrap();
            let grid = sample_pseudopotential(&field, &scale, 1.2, 41).unwrap();
            for level in [0.05, 0.1, 0.2] {
                let mesh = extract_isosurface(&grid, level);
                assert!(!mesh.triangles.is_empty());
                assert_eq!(
                    mesh.boundary_loop_count(),
                    expected_loops,
                    "theta {theta}, level {level}"
                );
            }
        }
    }
}
