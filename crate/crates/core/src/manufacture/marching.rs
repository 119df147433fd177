//! Marching cubes over a zero-padded element-centred density field.
//!
//! The 256-case table is generated from a face rule rather than transcribed:
//! on every cube face each run of inside corners is cut off by a segment from
//! the edge where the run ends to the edge where it starts. The rule only
//! depends on the face's own corners, so neighbouring cubes always agree and
//! the surface of a padded field is closed.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::mesh::{StructuredMesh, HEX_CORNERS};

use super::TriMesh;

/// Corner pairs of the twelve cube edges.
fn cube_edges() -> Vec<[usize; 2]> {
    let mut edges = Vec::new();
    for a in 0..8 {
        for b in a + 1..8 {
            let d: usize = (0..3).map(|k| HEX_CORNERS[a][k].abs_diff(HEX_CORNERS[b][k])).sum();
            if d == 1 {
                edges.push([a, b]);
            }
        }
    }
    edges
}

fn corner_of(offset: [usize; 3]) -> usize {
    HEX_CORNERS.iter().position(|c| *c == offset).expect("unit cube corner")
}

/// The six faces as corner cycles, counter-clockwise seen from outside.
fn cube_faces() -> Vec<[usize; 4]> {
    let mut faces = Vec::new();
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in [0usize, 1] {
            let mut f = [0; 4];
            for (q, (du, dv)) in [(0, 0), (1, 0), (1, 1), (0, 1)].into_iter().enumerate() {
                let mut c = [0; 3];
                c[axis] = side;
                c[u] = du;
                c[v] = dv;
                f[q] = corner_of(c);
            }
            if side == 0 {
                f.reverse();
            }
            faces.push(f);
        }
    }
    faces
}

/// Per case: closed loops of cube-edge indices.
pub(crate) type CaseTable = Vec<Vec<Vec<u8>>>;

pub(crate) fn case_table() -> &'static CaseTable {
    static TABLE: OnceLock<CaseTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let edges = cube_edges();
        let edge_of = |a: usize, b: usize| {
            edges.iter().position(|e| (e[0] == a && e[1] == b) || (e[0] == b && e[1] == a)).expect("cube edge") as u8
        };
        let faces = cube_faces();
        (0..256usize)
            .map(|case| {
                let inside = |c: usize| case & (1 << c) != 0;
                let mut next = [u8::MAX; 12];
                for f in &faces {
                    for k in 0..4 {
                        let (a, b) = (f[k], f[(k + 1) % 4]);
                        if inside(a) || !inside(b) {
                            continue;
                        }
                        // Run of inside corners starts at b; find where it ends.
                        let mut m = (k + 1) % 4;
                        while inside(f[(m + 1) % 4]) {
                            m = (m + 1) % 4;
                        }
                        let leave = edge_of(f[m], f[(m + 1) % 4]);
                        next[leave as usize] = edge_of(a, b);
                    }
                }
                let mut used = [false; 12];
                let mut loops = Vec::new();
                for start in 0..12 {
                    if next[start] == u8::MAX || used[start] {
                        continue;
                    }
                    let mut lp = Vec::new();
                    let mut e = start;
                    while !used[e] {
                        used[e] = true;
                        lp.push(e as u8);
                        e = next[e] as usize;
                    }
                    loops.push(lp);
                }
                loops
            })
            .collect()
    })
}

/// Zero-padded sample grid: sample `(i, j, k)` sits at the centre of element
/// `(i − 1, j − 1, k − 1)`, with zeros outside the mesh.
struct Padded<'a> {
    n: [usize; 3],
    h: [f64; 3],
    values: &'a [f64],
    mesh: &'a StructuredMesh,
}

impl Padded<'_> {
    fn value(&self, s: [isize; 3]) -> f64 {
        let c = self.mesh.counts();
        let inside = (0..3).all(|a| s[a] >= 1 && (s[a] as usize) <= c[a]);
        if inside {
            self.values[self.mesh.element_index(s[0] as usize - 1, s[1] as usize - 1, s[2] as usize - 1)]
        } else {
            0.0
        }
    }

    fn position(&self, s: [usize; 3]) -> [f64; 3] {
        [0, 1, 2].map(|a| (s[a] as f64 - 0.5) * self.h[a])
    }

    fn gradient(&self, s: [usize; 3]) -> [f64; 3] {
        let si = s.map(|v| v as isize);
        [0, 1, 2].map(|a| {
            let (mut p, mut m) = (si, si);
            p[a] += 1;
            m[a] -= 1;
            (self.value(p) - self.value(m)) / (2.0 * self.h[a])
        })
    }

    fn index(&self, s: [usize; 3]) -> usize {
        s[0] + self.n[0] * (s[1] + self.n[1] * s[2])
    }
}

/// Isosurface `ρ = iso` of the element field padded with a shell of zeros.
/// Vertices are shared per grid edge; normals follow `−∇ρ`.
pub fn marching_cubes(densities: &[f64], mesh: &StructuredMesh, iso: f64) -> TriMesh {
    assert_eq!(densities.len(), mesh.num_elements(), "one density per element");
    let c = mesh.counts();
    let grid = Padded { n: c.map(|v| v + 2), h: mesh.spacing(), values: densities, mesh };
    let table = case_table();
    let edges = cube_edges();

    let mut out = TriMesh::default();
    let mut vertex_of: HashMap<(usize, usize), u32> = HashMap::new();

    for k in 0..=c[2] {
        for j in 0..=c[1] {
            for i in 0..=c[0] {
                let corners: [[usize; 3]; 8] = HEX_CORNERS.map(|o| [i + o[0], j + o[1], k + o[2]]);
                let vals = corners.map(|s| grid.value(s.map(|v| v as isize)));
                let case = (0..8).filter(|&q| vals[q] >= iso).fold(0usize, |m, q| m | (1 << q));
                if case == 0 || case == 255 {
                    continue;
                }
                for lp in &table[case] {
                    let ids: Vec<u32> = lp
                        .iter()
                        .map(|&e| {
                            let [a, b] = edges[e as usize];
                            let (sa, sb) = (corners[a], corners[b]);
                            let axis = (0..3).find(|&d| sa[d] != sb[d]).expect("edge axis");
                            let lo = if sa[axis] < sb[axis] { sa } else { sb };
                            *vertex_of.entry((grid.index(lo), axis)).or_insert_with(|| {
                                let (va, vb) = (vals[a], vals[b]);
                                let t = if vb != va { ((iso - va) / (vb - va)).clamp(0.0, 1.0) } else { 0.5 };
                                let (pa, pb) = (grid.position(sa), grid.position(sb));
                                let (ga, gb) = (grid.gradient(sa), grid.gradient(sb));
                                let pos = [0, 1, 2].map(|d| pa[d] + t * (pb[d] - pa[d]));
                                let g = [0, 1, 2].map(|d| -(ga[d] + t * (gb[d] - ga[d])));
                                out.vertices.push(pos);
                                out.normals.push(normalize(g));
                                (out.vertices.len() - 1) as u32
                            })
                        })
                        .collect();
                    // Loops run with the solid on their left seen from outside
                    // the cube; reversing the fan makes normals face the void.
                    // A fan diagonal between two crossings of one cube face
                    // would also be drawn by the neighbour, so such loops get
                    // another apex or a centre vertex.
                    let m = lp.len();
                    let apex = (0..m).find(|&r| {
                        (2..m - 1).all(|q| !share_face(edges[lp[r] as usize], edges[lp[(r + q) % m] as usize]))
                    });
                    match apex {
                        Some(r) => {
                            for q in 1..m - 1 {
                                out.triangles.push([ids[r], ids[(r + q + 1) % m], ids[(r + q) % m]]);
                            }
                        }
                        None => {
                            let centre = out.vertices.len() as u32;
                            let mut pos = [0.0; 3];
                            for &v in &ids {
                                for d in 0..3 {
                                    pos[d] += out.vertices[v as usize][d] / m as f64;
                                }
                            }
                            out.vertices.push(pos);
                            out.normals.push([0.0; 3]);
                            for q in 0..m {
                                out.triangles.push([centre, ids[(q + 1) % m], ids[q]]);
                            }
                        }
                    }
                }
            }
        }
    }
    out.fill_missing_normals();
    out
}

/// Whether two cube edges lie on a common face.
fn share_face(a: [usize; 2], b: [usize; 2]) -> bool {
    let corners = [a[0], a[1], b[0], b[1]].map(|c| HEX_CORNERS[c]);
    (0..3).any(|axis| corners.iter().all(|c| c[axis] == corners[0][axis]))
}

pub(crate) fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if n > 0.0 && n.is_finite() {
        v.map(|x| x / n)
    } else {
        [0.0; 3]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_grid(n: [usize; 3]) -> StructuredMesh {
        StructuredMesh::new(n[0], n[1], n[2], n[0] as f64, n[1] as f64, n[2] as f64).unwrap()
    }

    #[test]
    fn table_has_expected_shape() {
        let t = case_table();
        assert_eq!(t.len(), 256);
        assert!(t[0].is_empty() && t[255].is_empty());
        // One inside corner: a single triangle.
        for c in 0..8 {
            assert_eq!(t[1 << c].len(), 1);
            assert_eq!(t[1 << c][0].len(), 3);
        }
        // Complementary cases cut the same edges.
        for case in 0..256 {
            let mut a: Vec<u8> = t[case].iter().flatten().cloned().collect();
            let mut b: Vec<u8> = t[255 - case].iter().flatten().cloned().collect();
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn single_voxel_is_an_octahedron() {
        let mesh = unit_grid([1, 1, 1]);
        let m = marching_cubes(&[1.0], &mesh, 0.5);
        assert_eq!(m.vertices.len(), 6);
        assert_eq!(m.triangles.len(), 8);
        assert_eq!(m.euler_characteristic(), 2);
        assert!(m.is_closed_manifold());
        for t in 0..8 {
            let n = m.area_vector(t);
            let c = m.centroid(t);
            let d: f64 = (0..3).map(|k| n[k] * (c[k] - 0.5)).sum();
            assert!(d > 0.0, "triangle {t} faces inward");
        }
    }

    #[test]
    fn solid_block_fills_the_domain() {
        let mesh = unit_grid([4, 4, 4]);
        let m = marching_cubes(&vec![1.0; 64], &mesh, 0.5);
        assert!(m.is_closed_manifold());
        assert_eq!(m.euler_characteristic(), 2);
        let (lo, hi) = m.bounding_box();
        for a in 0..3 {
            assert!(lo[a].abs() < 1e-12 && (hi[a] - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ring_has_genus_one() {
        let mesh = unit_grid([3, 3, 1]);
        let mut d = vec![1.0; 9];
        d[mesh.element_index(1, 1, 0)] = 0.0;
        let m = marching_cubes(&d, &mesh, 0.5);
        assert!(m.is_closed_manifold());
        assert_eq!(m.euler_characteristic(), 0);
    }

    #[test]
    fn empty_field_gives_empty_mesh() {
        assert!(marching_cubes(&[0.2; 8], &unit_grid([2, 2, 2]), 0.5).triangles.is_empty());
    }

    #[test]
    fn diagonal_contacts_stay_manifold() {
        let mesh = unit_grid([2, 2, 2]);
        let mut d = vec![0.0; 8];
        d[mesh.element_index(0, 0, 0)] = 1.0;
        d[mesh.element_index(1, 1, 1)] = 1.0;
        let m = marching_cubes(&d, &mesh, 0.5);
        assert!(m.is_closed_manifold());
        // Corner-touching voxels stay separate: two spheres.
        assert_eq!(m.euler_characteristic(), 4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn padded_fields_give_closed_surfaces(v in proptest::collection::vec(0.0f64..1.0, 60), iso in 0.2f64..0.8) {
            let mesh = unit_grid([5, 4, 3]);
            let m = marching_cubes(&v, &mesh, iso);
            prop_assert!(m.is_closed_manifold());
        }

        #[test]
        fn binary_fields_give_closed_surfaces(bits in proptest::collection::vec(any::<bool>(), 64)) {
            let mesh = unit_grid([4, 4, 4]);
            let d: Vec<f64> = bits.iter().map(|b| *b as u8 as f64).collect();
            let m = marching_cubes(&d, &mesh, 0.5);
            prop_assert!(m.is_closed_manifold());
            prop_assert_eq!(m.euler_characteristic() % 2, 0);
        }
    }
}
