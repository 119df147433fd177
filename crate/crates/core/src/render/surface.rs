//! Boundary surface of a thresholded voxel set.

use serde::{Deserialize, Serialize};

use crate::mesh::StructuredMesh;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SurfaceMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scalars: Option<Vec<f64>>,
}

impl SurfaceMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, t: usize) -> [[f64; 3]; 3] {
        self.triangles[t].map(|i| self.vertices[i as usize])
    }

    /// Twice the area vector of triangle `t` (normal times doubled area).
    pub fn area_vector(&self, t: usize) -> [f64; 3] {
        let [a, b, c] = self.triangle(t);
        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]]
    }
}

/// Solid mask `x̄ ≥ threshold`.
pub fn solid_mask(densities: &[f64], threshold: f64) -> Vec<bool> {
    densities.iter().map(|d| *d >= threshold).collect()
}

/// Triangulates every face between a solid element and a void element or the
/// domain boundary, two triangles per face, wound counter-clockwise seen from
/// outside. Vertices are shared mesh nodes.
pub fn extract_surface(densities: &[f64], mesh: &StructuredMesh, threshold: f64) -> SurfaceMesh {
    assert_eq!(densities.len(), mesh.num_elements(), "one density per element");
    let solid = solid_mask(densities, threshold);
    let [nx, ny, nz] = mesh.counts();
    let counts = [nx, ny, nz];
    let is_solid = |ijk: [isize; 3]| -> bool {
        (0..3).all(|a| ijk[a] >= 0 && (ijk[a] as usize) < counts[a])
            && solid[mesh.element_index(ijk[0] as usize, ijk[1] as usize, ijk[2] as usize)]
    };

    let mut remap = vec![u32::MAX; mesh.num_nodes()];
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut vertex = |n: usize, vertices: &mut Vec<[f64; 3]>| -> u32 {
        if remap[n] == u32::MAX {
            remap[n] = vertices.len() as u32;
            vertices.push(mesh.node_coords(n));
        }
        remap[n]
    };

    for e in 0..mesh.num_elements() {
        if !solid[e] {
            continue;
        }
        let ijk = mesh.element_ijk(e);
        for axis in 0..3 {
            for side in [0usize, 1] {
                let mut nb = ijk.map(|v| v as isize);
                nb[axis] += if side == 1 { 1 } else { -1 };
                if is_solid(nb) {
                    continue;
                }
                // (u, v, axis) is a cyclic frame, so 00 → 10 → 11 → 01 faces +axis.
                let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                let mut quad = [0usize; 4];
                for (q, (du, dv)) in [(0, 0), (1, 0), (1, 1), (0, 1)].into_iter().enumerate() {
                    let mut c = ijk;
                    c[axis] += side;
                    c[u] += du;
                    c[v] += dv;
                    quad[q] = mesh.node_index(c[0], c[1], c[2]);
                }
                if side == 0 {
                    quad.reverse();
                }
                let q = quad.map(|n| vertex(n, &mut vertices));
                triangles.push([q[0], q[1], q[2]]);
                triangles.push([q[0], q[2], q[3]]);
            }
        }
    }
    SurfaceMesh { vertices, triangles, scalars: None }
}
